#include "sumgraph/adam.hpp"

#include <cmath>

#include "sumgraph/errors.hpp"

namespace sumgraph {

AdamState::AdamState(std::span<const Matrix> shapes, AdamHyper hyper) : hyper_(hyper) {
  m_.reserve(shapes.size());
  v_.reserve(shapes.size());
  for (const Matrix& s : shapes) {
    m_.emplace_back(s.rows(), s.cols());
    v_.emplace_back(s.rows(), s.cols());
  }
}

AdamState AdamState::restore(AdamHyper hyper, std::uint64_t steps, std::vector<Matrix> m,
                             std::vector<Matrix> v) {
  if (m.size() != v.size()) throw ShapeError("adam restore: moment count mismatch");
  for (std::size_t i = 0; i < m.size(); ++i) require_same_shape(m[i], v[i], "adam restore");
  AdamState s;
  s.hyper_ = hyper;
  s.steps_ = steps;
  s.m_ = std::move(m);
  s.v_ = std::move(v);
  return s;
}

void AdamState::step(std::span<Matrix> params, std::span<const Matrix> grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("adam step: expected " + std::to_string(m_.size()) + " tensors");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_same_shape(params[k], m_[k], "adam step (param)");
    require_same_shape(grads[k], m_[k], "adam step (grad)");
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(hyper_.beta1, t);
  const double c2 = 1.0 - std::pow(hyper_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].data();
    auto g = grads[k].data();
    auto m = m_[k].data();
    auto v = v_[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = hyper_.beta1 * m[i] + (1.0 - hyper_.beta1) * g[i];
      v[i] = hyper_.beta2 * v[i] + (1.0 - hyper_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper_.eps);
    }
  }
}

}  // namespace sumgraph
