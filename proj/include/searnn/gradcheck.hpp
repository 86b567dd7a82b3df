#pragma once

#include <string>
#include <vector>

#include "searnn/fdcheck.hpp"

namespace searnn {

struct GradcheckItem {
  std::string name;           // primitive or layer under check
  double max_rel_err = 0.0;   // worst over all seeds and parameters
  std::string worst_param;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckItem> items;
  // Worst relative error seen per model parameter across the layer checks.
  std::vector<std::pair<std::string, double>> parameter_details;
  double tolerance = 1e-4;
  int seeds = 0;
  bool all_passed() const;
};

// Checks every tape primitive plus the composed GRU step, encoder, decoder
// chain, MLE loss and the two cost-sensitive losses against central finite
// differences on small random instances.
GradcheckReport run_gradcheck(int num_seeds = 20, double tol = 1e-4,
                              std::uint64_t base_seed = 12345);

// Runs a deliberately wrong backward rule through the checker; returns the
// relative error it reports (large when detection works).
double gradcheck_negative_control(std::uint64_t seed = 7);

}  // namespace searnn
