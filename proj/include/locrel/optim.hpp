#pragma once

#include <string>
#include <utility>
#include <vector>

#include "locrel/tensor.hpp"

namespace locrel::optim {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;  // decoupled: p -= lr * wd * p
};

/// Adam with bias correction and decoupled weight decay. Throws NumericError
/// naming the parameter when a non-finite gradient is encountered.
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, diff::Tensor>> params, AdamConfig cfg);

  void step();
  void zero_grad();

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long step_count() const { return step_; }

 private:
  std::vector<std::pair<std::string, diff::Tensor>> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig cfg_;
  long step_ = 0;
};

/// Step-decay schedule: base halved once per period, epoch counted from 0.
inline double lr_at_epoch(double base_lr, int epoch, int halving_period) {
  double lr = base_lr;
  for (int i = 0; i < epoch / halving_period; ++i) lr *= 0.5;
  return lr;
}

}  // namespace locrel::optim
