#include "locrel/optim.hpp"

#include <cmath>

namespace locrel::optim {

Adam::Adam(std::vector<std::pair<std::string, diff::Tensor>> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto& [name, p] : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (size_t t = 0; t < params_.size(); ++t) {
    auto& [name, p] = params_[t];
    if (!p.has_grad()) continue;
    const std::vector<double>& g = p.grad_view();
    std::vector<double>& val = p.values();
    std::vector<double>& m = m_[t];
    std::vector<double>& v = v_[t];
    for (size_t i = 0; i < val.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("non-finite gradient in parameter '" + name + "' at index " +
                           std::to_string(i));
      }
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      val[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      val[i] -= cfg_.lr * cfg_.weight_decay * val[i];
    }
  }
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

}  // namespace locrel::optim
