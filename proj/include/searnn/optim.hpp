#pragma once

#include "searnn/param_store.hpp"

namespace searnn {

// Scales all gradients so their global L2 norm is at most max_norm; returns
// the pre-clip norm.
double clip_gradients(ParamStore& store, double max_norm);

// Bias-corrected Adam update over every parameter, in name order. Validates
// all gradients are finite before touching any parameter, increments the
// step count, and zeroes the gradients afterwards.
void adam_step(ParamStore& store, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// Reduce-on-plateau learning-rate schedule with a 1e-6 floor.
class AnnealState {
 public:
  AnnealState(double lr, double factor, int patience)
      : lr_(lr), factor_(factor), patience_(patience) {}

  // Feeds one dev evaluation; halts the decay at the floor. Returns the
  // (possibly reduced) learning rate.
  double observe(double dev_bleu);

  double lr() const { return lr_; }
  double best() const { return best_; }
  bool improved_last() const { return improved_last_; }

 private:
  static constexpr double kFloor = 1e-6;
  double lr_;
  double factor_;
  int patience_;
  double best_ = -1.0;
  int bad_evals_ = 0;
  bool improved_last_ = false;
};

}  // namespace searnn
