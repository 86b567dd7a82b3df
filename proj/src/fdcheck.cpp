#include "searnn/fdcheck.hpp"

#include <algorithm>
#include <cmath>

namespace searnn {

namespace {

double evaluate(const LossBuilder& build, const ParamStore& params) {
  Tape tape;
  Tape::ValueId loss = build(tape, params);
  return tape.scalar_value(loss);
}

}  // namespace

FdReport finite_difference_check(const LossBuilder& build, ParamStore& params,
                                 double eps, double tol) {
  if (eps < 1e-7 || eps > 1e-4) {
    throw ConfigError("finite-difference eps must be in [1e-7, 1e-4]");
  }

  const double base1 = evaluate(build, params);
  const double base2 = evaluate(build, params);
  if (base1 != base2) {
    throw NumericError("loss function is not deterministic: " +
                       std::to_string(base1) + " vs " + std::to_string(base2));
  }

  // Analytic side.
  params.zero_grads();
  {
    Tape tape;
    Tape::ValueId loss = build(tape, params);
    tape.backward(loss);
    tape.accumulate_param_grads(params);
  }

  FdReport report;
  report.tolerance = tol;
  for (auto& [name, p] : params.mutable_params()) {
    FdEntry entry;
    entry.param = name;
    const Tensor& analytic = params.grad(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + eps;
      const double plus = evaluate(build, params);
      p[i] = saved - eps;
      const double minus = evaluate(build, params);
      p[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[i];
      const double rel =
          std::abs(a - numeric) /
          std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel >= entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_index = i;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace searnn
