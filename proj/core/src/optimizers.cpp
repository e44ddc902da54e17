#include <cmath>

#include "valrl/errors.hpp"
#include "valrl/net.hpp"

namespace valrl::net {

void check_finite(const ParameterSet& grads) {
  for (const auto& [name, g] : grads) {
    for (double v : g.values()) {
      if (!std::isfinite(v)) throw TrainingError("non-finite gradient in parameter '" + name + "'");
    }
  }
}

Adam::Adam(const ParameterSet& shape_like, AdamConfig config)
    : config_(config), m_(shape_like.zeros_like()), v_(shape_like.zeros_like()) {}

void Adam::apply(ParameterSet& params, const ParameterSet& grads) {
  check_finite(grads);
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    const Tensor& g = grads.get(name);
    Tensor& m = m_.get(name);
    Tensor& v = v_.get(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

void Adam::write(archive::Writer& w, const std::string& prefix) const {
  w.add_scalar(prefix + "t", t_);
  m_.write(w, prefix + "m/");
  v_.write(w, prefix + "v/");
}

void Adam::read(const archive::Reader& r, const std::string& prefix) {
  t_ = r.scalar(prefix + "t");
  m_.read(r, prefix + "m/");
  v_.read(r, prefix + "v/");
}

RmsProp::RmsProp(const ParameterSet& shape_like, RmsPropConfig config)
    : config_(config),
      mean_square_(shape_like.zeros_like()),
      mean_grad_(shape_like.zeros_like()),
      velocity_(shape_like.zeros_like()) {}

void RmsProp::apply(ParameterSet& params, const ParameterSet& grads) {
  check_finite(grads);
  ++t_;
  const double rho = config_.decay;
  for (auto& [name, p] : params) {
    const Tensor& g = grads.get(name);
    Tensor& ms = mean_square_.get(name);
    Tensor& mg = mean_grad_.get(name);
    Tensor& vel = velocity_.get(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      ms[i] = rho * ms[i] + (1.0 - rho) * g[i] * g[i];
      double denom = ms[i];
      if (config_.centered) {
        mg[i] = rho * mg[i] + (1.0 - rho) * g[i];
        denom -= mg[i] * mg[i];
      }
      vel[i] = config_.momentum * vel[i] + config_.learning_rate * g[i] / std::sqrt(denom + config_.epsilon);
      p[i] -= vel[i];
    }
  }
}

void RmsProp::write(archive::Writer& w, const std::string& prefix) const {
  w.add_scalar(prefix + "t", t_);
  mean_square_.write(w, prefix + "ms/");
  mean_grad_.write(w, prefix + "mg/");
  velocity_.write(w, prefix + "vel/");
}

void RmsProp::read(const archive::Reader& r, const std::string& prefix) {
  t_ = r.scalar(prefix + "t");
  mean_square_.read(r, prefix + "ms/");
  mean_grad_.read(r, prefix + "mg/");
  velocity_.read(r, prefix + "vel/");
}

}  // namespace valrl::net
