#ifndef KTRACK_KTRACK_HPP
#define KTRACK_KTRACK_HPP

#include <ktrack/dataset.hpp>
#include <ktrack/errors.hpp>
#include <ktrack/experiment.hpp>
#include <ktrack/geometry.hpp>
#include <ktrack/kinematics.hpp>
#include <ktrack/metrics.hpp>
#include <ktrack/optimizer.hpp>
#include <ktrack/sim.hpp>
#include <ktrack/tracker.hpp>

#endif  // KTRACK_KTRACK_HPP
