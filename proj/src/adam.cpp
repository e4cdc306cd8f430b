#include "pep/adam.hpp"

#include <cmath>

#include "pep/error.hpp"

namespace pep {

std::size_t Adam::add_tensor(std::string name, std::size_t size) {
  slots_.push_back({std::move(name), std::vector<double>(size, 0.0), std::vector<double>(size, 0.0)});
  return slots_.size() - 1;
}

void Adam::check(const Slot& s, std::span<double> params, std::span<const double> grads) const {
  if (params.size() != s.m.size() || grads.size() != s.m.size()) {
    fail(ErrorKind::Shape, "adam: size mismatch for tensor '" + s.name + "'");
  }
  if (t_ == 0) fail(ErrorKind::Contract, "adam: update before step() for tensor '" + s.name + "'");
  for (double g : grads) {
    if (!std::isfinite(g)) fail(ErrorKind::Numeric, "adam: non-finite gradient in tensor '" + s.name + "'");
  }
}

void Adam::update(std::size_t slot, std::span<double> params, std::span<const double> grads) {
  Slot& s = slots_.at(slot);
  check(s, params, grads);
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    s.m[k] = b1 * s.m[k] + (1.0 - b1) * g;
    s.v[k] = b2 * s.v[k] + (1.0 - b2) * g * g;
    const double m_hat = s.m[k] / c1;
    const double v_hat = s.v[k] / c2;
    params[k] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
  }
}

void Adam::update_masked(std::size_t slot, std::span<double> params, std::span<const double> grads,
                         std::span<const std::uint8_t> keep) {
  Slot& s = slots_.at(slot);
  check(s, params, grads);
  require(keep.size() == params.size(), ErrorKind::Shape,
          "adam: mask size mismatch for tensor '" + s.name + "'");
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!keep[k]) continue;
    const double g = grads[k];
    s.m[k] = b1 * s.m[k] + (1.0 - b1) * g;
    s.v[k] = b2 * s.v[k] + (1.0 - b2) * g * g;
    const double m_hat = s.m[k] / c1;
    const double v_hat = s.v[k] / c2;
    params[k] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
  }
}

}  // namespace pep
