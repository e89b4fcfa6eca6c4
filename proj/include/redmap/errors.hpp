#ifndef REDMAP_ERRORS_HPP
#define REDMAP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace redmap {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Parameter set violates A1 < A2 + B, so the map has no dynamical core.
class ConstraintViolation : public std::invalid_argument {
 public:
  ConstraintViolation(const std::string& what, double a1, double a2, double buffer)
      : std::invalid_argument(what), a1_(a1), a2_(a2), buffer_(buffer) {}

  double a1() const noexcept { return a1_; }
  double a2() const noexcept { return a2_; }
  double buffer() const noexcept { return buffer_; }

 private:
  double a1_, a2_, buffer_;
};

/// A computed value left the range the theory guarantees (a numerical bug).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A1 >= A2 + q_max: the map has no fixed point.
class NoFixedPoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver gave up. `trace` carries a human-readable diagnostic log.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, std::string trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  explicit NonConvergence(const std::string& what) : std::runtime_error(what) {}

  const std::string& trace() const noexcept { return trace_; }

 private:
  std::string trace_;
};

/// Operation called outside its documented precondition (e.g. beta != 1 for
/// the closed-form solvers).
class PreconditionViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// No criterion is available for the requested case (e.g. invariance of a
/// multimodal core).
class Unsupported : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace redmap

#endif  // REDMAP_ERRORS_HPP
