#pragma once

#include <stdexcept>
#include <string>

namespace kgraph {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Metric eigenvalue at or below the degeneracy threshold.
class NonPositiveDefinite : public Error {
public:
  using Error::Error;
};

// Fiber data f = 1/|Y|^2 at or below the degeneracy threshold.
class DegenerateFiber : public Error {
public:
  using Error::Error;
};

// Query point outside the region where a tabulated chart is defined.
class ChartDomainError : public Error {
public:
  using Error::Error;
};

class EmptyDomain : public Error {
public:
  using Error::Error;
};

class StencilUnavailable : public Error {
public:
  using Error::Error;
};

// NaN or Inf produced by a stencil or coefficient evaluation.
class NonFiniteValue : public Error {
public:
  using Error::Error;
};

class TubularWidthExceeded : public Error {
public:
  using Error::Error;
};

// Malformed input file (config, geometry table, field CSV).
class FormatError : public Error {
public:
  using Error::Error;
};

class ShapeMismatch : public Error {
public:
  using Error::Error;
};

// A barrier or comparison certificate failed; witness is the offending
// unknown (-1 if none applies).
class CertificateFailed : public Error {
public:
  CertificateFailed(const std::string& what, int witness) : Error(what), witness_(witness) {}
  int witness() const { return witness_; }

private:
  int witness_;
};

class MinPrincipleViolated : public Error {
public:
  MinPrincipleViolated(const std::string& what, int witness) : Error(what), witness_(witness) {}
  int witness() const { return witness_; }

private:
  int witness_;
};

} // namespace kgraph
