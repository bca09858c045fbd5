#pragma once

// A multivariate spatial sample: one p-vector observation per location.

#include <string>

#include "sbss/errors.hpp"
#include "sbss/geometry.hpp"

namespace sbss {

struct SpatialSample {
  LocationSet loc;
  Matrix values;  // n x p, row i observed at loc.coords().row(i)

  SpatialSample(LocationSet locations, Matrix vals)
      : loc(std::move(locations)), values(std::move(vals)) {
    if (values.rows() != loc.n()) {
      throw ValidationError("SpatialSample: " + std::to_string(values.rows()) +
                            " value rows for " + std::to_string(loc.n()) + " locations");
    }
    if (loc.n() < 2) throw ValidationError("SpatialSample: needs at least two observations");
    if (values.cols() < 1) throw ValidationError("SpatialSample: needs at least one field");
    if (!values.allFinite()) throw ValidationError("SpatialSample: values must be finite");
  }

  Index n() const { return loc.n(); }
  Index p() const { return values.cols(); }
};

}  // namespace sbss
