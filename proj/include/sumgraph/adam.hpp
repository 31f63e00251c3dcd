#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sumgraph/matrix.hpp"

namespace sumgraph {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

// Moment estimates for a fixed list of parameter tensors.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::span<const Matrix> shapes, AdamHyper hyper = {});

  // One bias-corrected Adam update. params and grads must match the shapes
  // the state was built with (ShapeError otherwise).
  void step(std::span<Matrix> params, std::span<const Matrix> grads, double lr);

  const AdamHyper& hyper() const { return hyper_; }
  std::uint64_t steps() const { return steps_; }
  const std::vector<Matrix>& first_moment() const { return m_; }
  const std::vector<Matrix>& second_moment() const { return v_; }

  // Rebuilds a state from serialized parts (checkpoint loading).
  static AdamState restore(AdamHyper hyper, std::uint64_t steps, std::vector<Matrix> m,
                           std::vector<Matrix> v);

  friend bool operator==(const AdamState&, const AdamState&) = default;

 private:
  AdamHyper hyper_;
  std::uint64_t steps_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace sumgraph
