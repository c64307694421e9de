#include "pgnd/nn.hpp"

#include <cmath>

#include "pgnd/error.hpp"

namespace pgnd::tg {

Mlp make_mlp(const std::vector<int>& dims, Rng& rng, bool requires_grad) {
  if (dims.size() < 2) throw ParamError("make_mlp: need at least in and out dims");
  Mlp mlp;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    if (in < 1 || out < 1) throw ParamError("make_mlp: dims must be positive");
    std::vector<double> w(static_cast<std::size_t>(in) * out);
    const double s = std::sqrt(2.0 / static_cast<double>(in));
    for (auto& x : w) x = rng.normal() * s;
    mlp.W.push_back(Tensor::from(std::move(w), {in, out}, requires_grad));
    mlp.b.push_back(Tensor::zeros({out}, requires_grad));
  }
  return mlp;
}

Tensor mlp_forward(const Mlp& mlp, const Tensor& x) {
  if (mlp.W.empty()) throw ContractError("mlp_forward: empty mlp");
  Tensor h = x;
  for (std::size_t l = 0; l < mlp.W.size(); ++l) {
    h = add_rowvec(matmul(h, mlp.W[l]), mlp.b[l]);
    if (l + 1 < mlp.W.size()) h = relu(h);
  }
  return h;
}

std::vector<Tensor> mlp_params(const Mlp& mlp) {
  std::vector<Tensor> out;
  for (std::size_t l = 0; l < mlp.W.size(); ++l) {
    out.push_back(mlp.W[l]);
    out.push_back(mlp.b[l]);
  }
  return out;
}

void AdamState::init(const std::vector<Tensor>& params) {
  m.clear();
  v.clear();
  for (const auto& p : params) {
    m.emplace_back(p.data().size(), 0.0);
    v.emplace_back(p.data().size(), 0.0);
  }
  t = 0;
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (state.m.size() != params.size()) state.init(params);
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& data = params[k].data();
    auto& grad = params[k].grad();
    auto& mk = state.m[k];
    auto& vk = state.v[k];
    if (mk.size() != data.size()) {
      throw ContractError("adam_step: moment size mismatch");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      mk[i] = state.beta1 * mk[i] + (1.0 - state.beta1) * g;
      vk[i] = state.beta2 * vk[i] + (1.0 - state.beta2) * g * g;
      const double mhat = mk[i] / bc1;
      const double vhat = vk[i] / bc2;
      data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double clip_grad_norm(std::vector<Tensor>& params, double max_norm) {
  if (!(max_norm > 0.0)) throw ParamError("clip_grad_norm: max_norm must be > 0");
  double sq = 0.0;
  for (auto& p : params) {
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& p : params) {
      for (double& g : p.grad()) g *= scale;
    }
  }
  return norm;
}

void zero_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace pgnd::tg
