#pragma once

#include <stdexcept>
#include <string>

namespace bfp {

/// Invalid argument values or mismatched shapes.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Malformed external file (IDX pair, matrix dump, checkpoint, config).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An iterative numerical routine failed to converge.
struct NumericalError : std::runtime_error {
  int iterations = 0;
  NumericalError(const std::string& what, int iters)
      : std::runtime_error(what), iterations(iters) {}
};

/// Sampling from a buffer that holds no examples.
struct EmptyBufferError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Operation against state that does not match (stale cache, wrong shapes).
struct InvalidState : std::logic_error {
  using std::logic_error::logic_error;
};

/// Metric that is not defined for the given run shape (e.g. forgetting
/// with a single task).
struct UndefinedMetric : std::logic_error {
  using std::logic_error::logic_error;
};

/// Training produced a non-finite loss; carries the failing step index.
struct DivergedRun : std::runtime_error {
  long step = -1;
  DivergedRun(const std::string& what, long step_index)
      : std::runtime_error(what), step(step_index) {}
};

}  // namespace bfp
