#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace croftonkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or precondition violation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class OffSurfaceError : public Error {
 public:
  using Error::Error;
};

// A line touches the body tangentially; callers resample.
class TangentialContact : public Error {
 public:
  using Error::Error;
};

class NonConvexityDetected : public Error {
 public:
  using Error::Error;
};

// Rejection sampler gave up (proposal cap or rejection budget exhausted).
class SamplerExhausted : public Error {
 public:
  using Error::Error;
};

class CoincidentPoints : public Error {
 public:
  using Error::Error;
};

class DegenerateMesh : public Error {
 public:
  using Error::Error;
};

class PatchOverlap : public Error {
 public:
  using Error::Error;
};

// Too few samples for the requested statistic (e.g. chi-square expected counts < 5).
class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

class MeshParseError : public Error {
 public:
  MeshParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace croftonkit
