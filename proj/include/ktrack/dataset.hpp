#ifndef KTRACK_DATASET_HPP
#define KTRACK_DATASET_HPP

#include <ktrack/errors.hpp>
#include <ktrack/geometry.hpp>
#include <ktrack/kinematics.hpp>
#include <ktrack/sim.hpp>
#include <ktrack/tracker.hpp>

#include <json.hpp>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

// Trajectory interchange format (UTF-8 JSON, one document per file):
//
//   { "header": { "format_version": 1, "object_id": str, "fps": num, "frame_count": int },
//     "frames": [ { "t": sec,
//                   "gt_pose": { "q": [w, x, y, z], "p": [x, y, z] },
//                   "contacts": { "points": [[x, y, z], ...], "velocities": [[x, y, z], ...] },
//                   "hypothesis": { "q": [...], "p": [...], "confidence": num } } ] }
//
// "hypothesis" is optional. Unknown keys are ignored on read. Concurrent
// writes to the same path are not supported.

namespace ktrack::io {

using json = nlohmann::json;
using QuatWxyz = std::array<double, 4>;

inline constexpr int kFormatVersion = 1;
inline constexpr double kUnitQuaternionTol = 1e-6;
/// Norm deviations at or below this are treated as exact round-off and left as is.
inline constexpr double kRenormalizeFloor = 1e-12;

struct StoredPose {
  QuatWxyz q{1.0, 0.0, 0.0, 0.0};
  Vec3 p = Vec3::Zero();

  bool operator==(const StoredPose&) const = default;
};

struct StoredHypothesis {
  QuatWxyz q{1.0, 0.0, 0.0, 0.0};
  Vec3 p = Vec3::Zero();
  double confidence = 1.0;

  bool operator==(const StoredHypothesis&) const = default;
};

struct TrajectoryHeader {
  int format_version = kFormatVersion;
  std::string object_id;
  double fps = 30.0;
  int frame_count = 0;

  bool operator==(const TrajectoryHeader&) const = default;
};

struct TrajectoryFrameRecord {
  double t = 0.0;
  StoredPose gt_pose;
  std::vector<Vec3> points;
  std::vector<Vec3> velocities;
  std::optional<StoredHypothesis> hypothesis;

  bool operator==(const TrajectoryFrameRecord&) const = default;
};

struct TrajectoryFile {
  TrajectoryHeader header;
  std::vector<TrajectoryFrameRecord> frames;

  bool operator==(const TrajectoryFile&) const = default;
};

// ---------------------------------------------------------------------------
// Conversions

inline QuatWxyz to_wxyz(const Rotation& r) {
  const Eigen::Quaterniond q = r.quaternion();
  return {q.w(), q.x(), q.y(), q.z()};
}

inline Rotation from_wxyz(const QuatWxyz& q) {
  return Rotation::from_quaternion(Eigen::Quaterniond(q[0], q[1], q[2], q[3]));
}

inline StoredPose to_stored(const Pose& p) { return {to_wxyz(p.rotation), p.translation}; }
inline Pose from_stored(const StoredPose& s) { return {from_wxyz(s.q), s.p}; }

inline double quat_norm(const QuatWxyz& q) { return std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]); }

// ---------------------------------------------------------------------------
// Validation

/// Every violated invariant, each naming its location.
inline std::vector<std::string> validate(const TrajectoryFile& f) {
  std::vector<std::string> errs;
  if (f.header.format_version != kFormatVersion) {
    errs.push_back("header.format_version: expected " + std::to_string(kFormatVersion) + ", got " +
                   std::to_string(f.header.format_version));
  }
  if (!(f.header.fps > 0.0) || !std::isfinite(f.header.fps)) errs.push_back("header.fps: must be positive");
  if (f.header.frame_count != static_cast<int>(f.frames.size())) {
    errs.push_back("header.frame_count: " + std::to_string(f.header.frame_count) + " does not match " +
                   std::to_string(f.frames.size()) + " frames");
  }
  auto check_quat = [&](const QuatWxyz& q, const std::string& where) {
    const double n = quat_norm(q);
    if (!std::isfinite(n) || std::abs(n - 1.0) > kUnitQuaternionTol) {
      std::ostringstream os;
      os << where << ".q: quaternion norm " << n << " is not within " << kUnitQuaternionTol << " of 1";
      errs.push_back(os.str());
    }
  };
  for (std::size_t i = 0; i < f.frames.size(); ++i) {
    const auto& fr = f.frames[i];
    const std::string at = "frames[" + std::to_string(i) + "]";
    if (!std::isfinite(fr.t)) errs.push_back(at + ".t: not finite");
    if (i > 0 && !(fr.t > f.frames[i - 1].t)) errs.push_back(at + ".t: timestamps must be strictly increasing");
    check_quat(fr.gt_pose.q, at + ".gt_pose");
    if (!fr.gt_pose.p.allFinite()) errs.push_back(at + ".gt_pose.p: not finite");
    if (fr.points.size() != fr.velocities.size()) {
      errs.push_back(at + ".contacts: " + std::to_string(fr.points.size()) + " points but " +
                     std::to_string(fr.velocities.size()) + " velocities");
    }
    for (const auto& p : fr.points) {
      if (!p.allFinite()) {
        errs.push_back(at + ".contacts.points: not finite");
        break;
      }
    }
    for (const auto& v : fr.velocities) {
      if (!v.allFinite()) {
        errs.push_back(at + ".contacts.velocities: not finite");
        break;
      }
    }
    if (fr.hypothesis) {
      check_quat(fr.hypothesis->q, at + ".hypothesis");
      if (!fr.hypothesis->p.allFinite()) errs.push_back(at + ".hypothesis.p: not finite");
      if (!std::isfinite(fr.hypothesis->confidence) || fr.hypothesis->confidence < 0.0) {
        errs.push_back(at + ".hypothesis.confidence: must be finite and >= 0");
      }
    }
  }
  return errs;
}

// ---------------------------------------------------------------------------
// JSON encoding

namespace detail {

inline json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json to_json(const TrajectoryFile& f) {
  json frames = json::array();
  for (const auto& fr : f.frames) {
    json points = json::array();
    json vels = json::array();
    for (const auto& p : fr.points) points.push_back(vec_json(p));
    for (const auto& v : fr.velocities) vels.push_back(vec_json(v));
    json j = {{"t", fr.t},
              {"gt_pose", {{"q", fr.gt_pose.q}, {"p", vec_json(fr.gt_pose.p)}}},
              {"contacts", {{"points", points}, {"velocities", vels}}}};
    if (fr.hypothesis) {
      j["hypothesis"] = {{"q", fr.hypothesis->q}, {"p", vec_json(fr.hypothesis->p)},
                         {"confidence", fr.hypothesis->confidence}};
    }
    frames.push_back(std::move(j));
  }
  return {{"header",
           {{"format_version", f.header.format_version},
            {"object_id", f.header.object_id},
            {"fps", f.header.fps},
            {"frame_count", f.header.frame_count}}},
          {"frames", std::move(frames)}};
}

/// Collects structural errors while decoding instead of stopping at the first.
class Decoder {
 public:
  std::vector<std::string> errors;

  const json* field(const json& obj, const char* key, const std::string& at, bool required = true) {
    if (!obj.is_object()) {
      errors.push_back(at + ": expected an object");
      return nullptr;
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) errors.push_back(at + "." + key + ": missing");
      return nullptr;
    }
    return &*it;
  }

  double number(const json* j, const std::string& at, double fallback = 0.0) {
    if (!j) return fallback;
    if (!j->is_number()) {
      errors.push_back(at + ": expected a number");
      return fallback;
    }
    return j->get<double>();
  }

  template <std::size_t N>
  std::array<double, N> fixed(const json* j, const std::string& at) {
    std::array<double, N> out{};
    if (!j) return out;
    if (!j->is_array() || j->size() != N) {
      errors.push_back(at + ": expected an array of " + std::to_string(N) + " numbers");
      return out;
    }
    for (std::size_t i = 0; i < N; ++i) out[i] = number(&(*j)[i], at + "[" + std::to_string(i) + "]");
    return out;
  }

  Vec3 vec3(const json* j, const std::string& at) {
    const auto a = fixed<3>(j, at);
    return Vec3(a[0], a[1], a[2]);
  }

  std::vector<Vec3> vec3_list(const json* j, const std::string& at) {
    std::vector<Vec3> out;
    if (!j) return out;
    if (!j->is_array()) {
      errors.push_back(at + ": expected an array");
      return out;
    }
    out.reserve(j->size());
    for (std::size_t i = 0; i < j->size(); ++i) out.push_back(vec3(&(*j)[i], at + "[" + std::to_string(i) + "]"));
    return out;
  }
};

/// Renormalizes a near-unit quaternion read from disk.
inline void renormalize(QuatWxyz& q) {
  const double n = quat_norm(q);
  if (std::isfinite(n) && n > 0.0 && std::abs(n - 1.0) > kRenormalizeFloor && std::abs(n - 1.0) <= kUnitQuaternionTol) {
    for (double& c : q) c /= n;
  }
}

inline TrajectoryFile from_json(const json& doc) {
  Decoder d;
  TrajectoryFile f;
  if (const json* h = d.field(doc, "header", "$")) {
    if (const json* v = d.field(*h, "format_version", "header")) {
      if (v->is_number_integer()) {
        f.header.format_version = v->get<int>();
      } else {
        d.errors.push_back("header.format_version: expected an integer");
      }
    }
    if (const json* v = d.field(*h, "object_id", "header")) {
      if (v->is_string()) {
        f.header.object_id = v->get<std::string>();
      } else {
        d.errors.push_back("header.object_id: expected a string");
      }
    }
    f.header.fps = d.number(d.field(*h, "fps", "header"), "header.fps");
    if (const json* v = d.field(*h, "frame_count", "header")) {
      if (v->is_number_integer()) {
        f.header.frame_count = v->get<int>();
      } else {
        d.errors.push_back("header.frame_count: expected an integer");
      }
    }
  }
  if (const json* frames = d.field(doc, "frames", "$")) {
    if (!frames->is_array()) {
      d.errors.push_back("frames: expected an array");
    } else {
      f.frames.reserve(frames->size());
      for (std::size_t i = 0; i < frames->size(); ++i) {
        const json& jf = (*frames)[i];
        const std::string at = "frames[" + std::to_string(i) + "]";
        TrajectoryFrameRecord r;
        r.t = d.number(d.field(jf, "t", at), at + ".t");
        if (const json* g = d.field(jf, "gt_pose", at)) {
          r.gt_pose.q = d.fixed<4>(d.field(*g, "q", at + ".gt_pose"), at + ".gt_pose.q");
          r.gt_pose.p = d.vec3(d.field(*g, "p", at + ".gt_pose"), at + ".gt_pose.p");
        }
        if (const json* c = d.field(jf, "contacts", at)) {
          r.points = d.vec3_list(d.field(*c, "points", at + ".contacts"), at + ".contacts.points");
          r.velocities = d.vec3_list(d.field(*c, "velocities", at + ".contacts"), at + ".contacts.velocities");
        }
        if (const json* h = d.field(jf, "hypothesis", at, false); h && !h->is_null()) {
          StoredHypothesis sh;
          sh.q = d.fixed<4>(d.field(*h, "q", at + ".hypothesis"), at + ".hypothesis.q");
          sh.p = d.vec3(d.field(*h, "p", at + ".hypothesis"), at + ".hypothesis.p");
          if (const json* c = d.field(*h, "confidence", at + ".hypothesis", false)) {
            sh.confidence = d.number(c, at + ".hypothesis.confidence", 1.0);
          }
          r.hypothesis = sh;
        }
        f.frames.push_back(std::move(r));
      }
    }
  }
  if (!d.errors.empty()) throw ValidationError(std::move(d.errors));
  auto errs = validate(f);
  if (!errs.empty()) throw ValidationError(std::move(errs));
  for (auto& fr : f.frames) {
    renormalize(fr.gt_pose.q);
    if (fr.hypothesis) renormalize(fr.hypothesis->q);
  }
  return f;
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

/// Serializes without validation. Doubles are written in shortest
/// round-trip form.
inline std::string dump(const TrajectoryFile& f) { return detail::to_json(f).dump(1) + "\n"; }

inline json parse_json_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte);
    throw ParseError(e.what(), line, col);
  }
}

inline TrajectoryFile parse_trajectory(const std::string& text) { return detail::from_json(parse_json_text(text)); }

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("error writing " + path.string());
}

inline void write_trajectory(const std::filesystem::path& path, const TrajectoryFile& f) {
  auto errs = validate(f);
  if (!errs.empty()) throw ValidationError(std::move(errs));
  write_text(path, dump(f));
}

inline TrajectoryFile read_trajectory(const std::filesystem::path& path) { return parse_trajectory(read_text(path)); }

// ---------------------------------------------------------------------------
// Runtime views

inline VectorHypothesisSource as_hypothesis_source(const TrajectoryFile& f) {
  std::vector<std::optional<Hypothesis>> h;
  h.reserve(f.frames.size());
  for (const auto& fr : f.frames) {
    if (fr.hypothesis) {
      h.emplace_back(Hypothesis{Pose{from_wxyz(fr.hypothesis->q), fr.hypothesis->p}, fr.hypothesis->confidence});
    } else {
      h.emplace_back(std::nullopt);
    }
  }
  return VectorHypothesisSource(std::move(h));
}

inline std::vector<ContactFrame> contact_frames(const TrajectoryFile& f) {
  std::vector<ContactFrame> out;
  out.reserve(f.frames.size());
  for (const auto& fr : f.frames) out.push_back({fr.t, ContactObservation{fr.points, fr.velocities}});
  return out;
}

inline std::vector<Pose> ground_truth(const TrajectoryFile& f) {
  std::vector<Pose> out;
  out.reserve(f.frames.size());
  for (const auto& fr : f.frames) out.push_back(from_stored(fr.gt_pose));
  return out;
}

inline TrajectoryFile to_trajectory_file(const sim::SimulatedSequence& seq, const std::string& object_id, double fps) {
  TrajectoryFile f;
  f.header.object_id = object_id;
  f.header.fps = fps;
  f.header.frame_count = static_cast<int>(seq.truth.size());
  f.frames.reserve(seq.truth.size());
  for (std::size_t k = 0; k < seq.truth.size(); ++k) {
    TrajectoryFrameRecord r;
    r.t = seq.truth[k].timestamp;
    r.gt_pose = to_stored(seq.truth[k].pose);
    r.points = seq.frames[k].contacts.points;
    r.velocities = seq.frames[k].contacts.velocities;
    if (auto h = seq.hypotheses.at(k)) r.hypothesis = StoredHypothesis{to_wxyz(h->pose.rotation), h->pose.translation, h->confidence};
    f.frames.push_back(std::move(r));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Pose sequence files: { "format_version": 1, "poses": [ { "t", "q", "p" }, ... ] }

struct PoseSequence {
  std::vector<double> timestamps;
  std::vector<Pose> poses;
};

inline std::string dump_poses(const PoseSequence& s) {
  json poses = json::array();
  for (std::size_t i = 0; i < s.poses.size(); ++i) {
    const auto sp = to_stored(s.poses[i]);
    poses.push_back({{"t", i < s.timestamps.size() ? s.timestamps[i] : 0.0},
                     {"q", sp.q},
                     {"p", detail::vec_json(sp.p)}});
  }
  return json{{"format_version", kFormatVersion}, {"poses", poses}}.dump(1) + "\n";
}

/// Reads a pose sequence file, or the ground-truth poses of a trajectory file.
inline PoseSequence read_poses(const std::filesystem::path& path) {
  const json doc = parse_json_text(read_text(path));
  PoseSequence out;
  if (doc.is_object() && doc.contains("header") && doc.contains("frames")) {
    const TrajectoryFile f = detail::from_json(doc);
    for (const auto& fr : f.frames) out.timestamps.push_back(fr.t);
    out.poses = ground_truth(f);
    return out;
  }
  detail::Decoder d;
  const json* poses = d.field(doc, "poses", "$");
  if (poses && poses->is_array()) {
    for (std::size_t i = 0; i < poses->size(); ++i) {
      const std::string at = "poses[" + std::to_string(i) + "]";
      const json& jp = (*poses)[i];
      out.timestamps.push_back(d.number(d.field(jp, "t", at, false), at + ".t"));
      QuatWxyz q = d.fixed<4>(d.field(jp, "q", at), at + ".q");
      const double n = quat_norm(q);
      if (!(std::abs(n - 1.0) <= kUnitQuaternionTol)) d.errors.push_back(at + ".q: not a unit quaternion");
      out.poses.push_back(Pose{from_wxyz(q), d.vec3(d.field(jp, "p", at), at + ".p")});
    }
  } else if (poses) {
    d.errors.push_back("poses: expected an array");
  }
  if (!d.errors.empty()) throw ValidationError(std::move(d.errors));
  return out;
}

}  // namespace ktrack::io

#endif  // KTRACK_DATASET_HPP
