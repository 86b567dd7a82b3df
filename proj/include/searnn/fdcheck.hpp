#pragma once

#include <functional>
#include <string>
#include <vector>

#include "searnn/tape.hpp"

namespace searnn {

// Builds a scalar loss on the tape from the current parameters. Must be
// deterministic; the checker evaluates it many times.
using LossBuilder = std::function<Tape::ValueId(Tape&, const ParamStore&)>;

struct FdEntry {
  std::string param;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct FdReport {
  std::vector<FdEntry> entries;  // one per parameter, name order
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_err < tolerance; }
};

// Central finite differences (f(p+eps) - f(p-eps)) / 2eps against the tape's
// analytic gradient, elementwise over every parameter. Relative error is
// |a - n| / max(|a|, |n|, 1e-8). Throws NumericError if two baseline
// evaluations of the loss disagree.
FdReport finite_difference_check(const LossBuilder& build, ParamStore& params,
                                 double eps = 1e-5, double tol = 1e-4);

}  // namespace searnn
