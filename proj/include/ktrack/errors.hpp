#ifndef KTRACK_ERRORS_HPP
#define KTRACK_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ktrack {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A contact observation with no points was handed to the twist estimator.
class EmptyObservation : public Error {
 public:
  EmptyObservation() : Error("contact observation has no points") {}
};

/// The objective returned NaN or infinity at an evaluated point.
class NonFiniteObjective : public Error {
 public:
  explicit NonFiniteObjective(std::size_t evaluation)
      : Error("objective is not finite at evaluation " + std::to_string(evaluation)),
        evaluation_(evaluation) {}
  std::size_t evaluation() const noexcept { return evaluation_; }

 private:
  std::size_t evaluation_;
};

/// Fused tracking needs at least one hypothesis among the first window_n frames.
class MissingInitialHypothesisWindow : public Error {
 public:
  explicit MissingInitialHypothesisWindow(std::size_t window_n)
      : Error("no pose hypothesis in the first " + std::to_string(window_n) + " frames") {}
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t a, std::size_t b)
      : Error("sequence lengths differ: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// JSON syntax error, located by 1-based line and column.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Carries every violated invariant found, not just the first one.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "validation failed:";
    for (const auto& s : v) out += "\n  " + s;
    return out;
  }
  std::vector<std::string> violations_;
};

/// Experiment configuration problem; path is a JSON pointer into the config.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : Error("config " + path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace ktrack

#endif  // KTRACK_ERRORS_HPP
