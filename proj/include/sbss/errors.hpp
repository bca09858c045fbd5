#pragma once

#include <stdexcept>
#include <string>

namespace sbss {

// Base class of every failure the library reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad shapes, duplicate locations, invalid parameters.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Kernel normalization F_{n,f} is zero: the kernel captures no pairs on this
// location set.
class DegenerateKernel : public Error {
 public:
  using Error::Error;
};

// Locations do not lie on a uniform lattice but a grid-only operation was
// requested.
class NotRegular : public Error {
 public:
  using Error::Error;
};

// The covariance used for whitening is numerically singular.
class SingularScatter : public Error {
 public:
  using Error::Error;
};

// Joint diagonalization did not reach the rotation tolerance.
class NoConvergence : public Error {
 public:
  using Error::Error;
};

// Requested rank r outside {0, ..., p-1} (or {0, ..., p} where resampling
// allows r = p).
class RankOutOfRange : public Error {
 public:
  using Error::Error;
};

// Numerical integration could not meet its error tolerance.
class QuadratureFailure : public Error {
 public:
  using Error::Error;
};

// Kernel supports overlap, so the chi-square null is invalid; bootstrap
// methods remain applicable.
class OverlappingKernelSupports : public Error {
 public:
  using Error::Error;
};

// Block size exceeds the sampling domain: no donor block fits inside it.
class NoDonorBlocks : public Error {
 public:
  using Error::Error;
};

// A spatial resample produced no usable points.
class EmptyResample : public Error {
 public:
  using Error::Error;
};

// Cholesky factorization failed even after the jitter retry.
class FactorizationFailure : public Error {
 public:
  using Error::Error;
};

// Request exceeds the dense-solver size guard.
class TooLarge : public Error {
 public:
  using Error::Error;
};

}  // namespace sbss
