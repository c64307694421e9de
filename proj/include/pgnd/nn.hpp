#pragma once

#include <vector>

#include "pgnd/rng.hpp"
#include "pgnd/tensor.hpp"

namespace pgnd::tg {

// Fully connected stack: linear layers with rectified-linear units between
// them and an identity output.
struct Mlp {
  std::vector<Tensor> W;  // W[i]: [in_i x out_i]
  std::vector<Tensor> b;  // b[i]: [out_i]

  int in_dim() const { return W.empty() ? 0 : static_cast<int>(W.front().shape()[0]); }
  int out_dim() const { return W.empty() ? 0 : static_cast<int>(W.back().shape()[1]); }
};

// dims = {in, hidden..., out}. Weights ~ N(0, sqrt(2/fan_in)), biases zero.
Mlp make_mlp(const std::vector<int>& dims, Rng& rng, bool requires_grad = true);

Tensor mlp_forward(const Mlp& mlp, const Tensor& x);  // x: [n x in]

// Parameter handles in a fixed order (W0, b0, W1, b1, ...).
std::vector<Tensor> mlp_params(const Mlp& mlp);

// ---- optimizer --------------------------------------------------------------

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;                      // completed steps
  std::vector<std::vector<double>> m, v;   // per-parameter moments

  void init(const std::vector<Tensor>& params);
};

// One bias-corrected update from the gradients stored on the parameters.
void adam_step(std::vector<Tensor>& params, AdamState& state);

// Scale all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_grad_norm(std::vector<Tensor>& params, double max_norm);

void zero_grads(std::vector<Tensor>& params);

}  // namespace pgnd::tg
