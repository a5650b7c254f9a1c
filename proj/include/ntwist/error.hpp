#pragma once

#include <stdexcept>
#include <string>

namespace ntwist {

// Base of every error raised by the library. Each subclass names one
// violated contract so callers can react to the specific failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class MalformedCoefficients : public Error {
 public:
  using Error::Error;
};

class SmallDivisorOverflow : public Error {
 public:
  SmallDivisorOverflow(long mode, double divisor)
      : Error("small divisor overflow at mode k=" + std::to_string(mode) +
              " (|divisor|=" + std::to_string(divisor) + ")"),
        mode_(mode) {}
  long mode() const noexcept { return mode_; }

 private:
  long mode_;
};

class DegenerateCircle : public Error {
 public:
  using Error::Error;
};

class FrameDegeneracy : public Error {
 public:
  using Error::Error;
};

class ContractionFailure : public Error {
 public:
  using Error::Error;
};

class MuDegeneracy : public Error {
 public:
  using Error::Error;
};

class ANondegeneracy : public Error {
 public:
  using Error::Error;
};

class InversionError : public Error {
 public:
  using Error::Error;
};

class Divergence : public Error {
 public:
  Divergence(const std::string& what, double invariance, double phase, double twist)
      : Error(what), invariance_(invariance), phase_(phase), twist_(twist) {}
  double invariance() const noexcept { return invariance_; }
  double phase() const noexcept { return phase_; }
  double twist() const noexcept { return twist_; }

 private:
  double invariance_;
  double phase_;
  double twist_;
};

class ToleranceNotMet : public Error {
 public:
  ToleranceNotMet(const std::string& what, double best)
      : Error(what), best_(best) {}
  double best_estimate() const noexcept { return best_; }

 private:
  double best_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ntwist
