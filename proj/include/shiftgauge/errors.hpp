#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace shiftgauge {

namespace detail {

inline void append_all(std::ostringstream&) {}

template <typename T, typename... Rest>
void append_all(std::ostringstream& os, const T& head, const Rest&... rest) {
  os << head;
  append_all(os, rest...);
}

}  // namespace detail

// Builds "a=1, shape=[2 3]"-style messages without pulling in a format lib.
template <typename... Args>
std::string str_cat(const Args&... args) {
  std::ostringstream os;
  detail::append_all(os, args...);
  return os.str();
}

// Bad arguments or data handed to an operation (dimension mismatch at the
// API boundary, empty set, out-of-range parameter).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Tensor-level dimension mismatch; message names both shapes.
class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

// Malformed file contents (checkpoint, CSV, IDX).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable/unwritable paths.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad experiment configuration (unknown key, missing required value).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optimization blew up; carries the step/epoch index where it happened.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, long step)
      : std::runtime_error(str_cat(what, " (step ", step, ")")), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

// A divergence/proxy estimator failed to produce a feasible value; carries
// the best infeasible value seen so callers can still inspect it.
class EstimationError : public std::runtime_error {
 public:
  EstimationError(const std::string& what, double best_infeasible)
      : std::runtime_error(
            str_cat(what, " (best infeasible value ", best_infeasible, ")")),
        best_infeasible_(best_infeasible) {}
  double best_infeasible() const { return best_infeasible_; }

 private:
  double best_infeasible_;
};

// Undefined metric (e.g. Pearson r of a zero-variance series).
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Brute-force enumeration hit an empty feasible set.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace shiftgauge
