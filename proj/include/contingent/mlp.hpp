#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "contingent/errors.hpp"
#include "contingent/rng.hpp"
#include "contingent/tensor.hpp"

namespace contingent {

// Feedforward net: tanh on hidden layers, identity output.
struct MlpParams {
  std::vector<Tensor> weights;  // each [out x in]
  std::vector<Tensor> biases;   // each [out]

  static MlpParams make(const std::vector<std::size_t>& dims, Rng& rng) {
    if (dims.size() < 2) throw StructuralError("mlp: need at least input and output dims");
    MlpParams p;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
      Tensor w(fan_out, fan_in);
      Tensor b(fan_out);
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& v : w.data) v = rng.uniform(-bound, bound);
      for (double& v : b.data) v = rng.uniform(-bound, bound);
      p.weights.push_back(std::move(w));
      p.biases.push_back(std::move(b));
    }
    return p;
  }

  std::size_t n_layers() const { return weights.size(); }
  std::size_t in_dim() const { return weights.front().cols(); }
  std::size_t out_dim() const { return weights.back().rows(); }

  void check() const {
    if (weights.empty() || weights.size() != biases.size())
      throw StructuralError("mlp: empty or mismatched layer lists");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (biases[l].numel() != weights[l].rows())
        throw StructuralError("mlp: bias length mismatch at layer " + std::to_string(l));
      if (l > 0 && weights[l].cols() != weights[l - 1].rows())
        throw StructuralError("mlp: layer dims do not chain at layer " + std::to_string(l));
      if (!weights[l].finite() || !biases[l].finite())
        throw NumericError("mlp: non-finite parameter at layer " + std::to_string(l));
    }
  }

  std::vector<NamedParam> named(const std::string& prefix) {
    std::vector<NamedParam> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.push_back({prefix + ".w" + std::to_string(l), &weights[l]});
      out.push_back({prefix + ".b" + std::to_string(l), &biases[l]});
    }
    return out;
  }

  void zero_grad() {
    for (auto& w : weights) w.zero_grad();
    for (auto& b : biases) b.zero_grad();
  }
};

// Pure value-mode forward, no tape. Used on hot paths where no gradient is
// needed (acting, target nets, frozen priors).
inline Tensor mlp_apply(const MlpParams& p, const Tensor& input) {
  if (input.cols() != p.in_dim())
    throw StructuralError("mlp_apply: input width " + std::to_string(input.cols()) +
                          " != " + std::to_string(p.in_dim()));
  if (!input.finite()) throw NumericError("mlp_apply: non-finite input");
  Tensor cur = input;
  Tensor next;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const Tensor& w = p.weights[l];
    next = Tensor(cur.rows(), w.rows());
    kern::linear_nt(cur.data.data(), w.data.data(), p.biases[l].data.data(),
                    next.data.data(), cur.rows(), cur.cols(), w.rows());
    if (l + 1 < p.weights.size())
      for (double& v : next.data) v = std::tanh(v);
    cur = std::move(next);
  }
  return cur;
}

// Tape-mode forward with trainable weights.
inline Tape::Var mlp_forward(Tape& tape, MlpParams& p, Tape::Var input) {
  if (tape.var_cols(input) != p.in_dim())
    throw StructuralError("mlp_forward: input width mismatch");
  Tape::Var h = input;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    h = tape.linear(h, tape.param(p.weights[l]), tape.param(p.biases[l]));
    if (l + 1 < p.weights.size()) h = tape.tanh_(h);
  }
  return h;
}

// Tape-mode forward with frozen weights: gradient flows through the input
// only. Used when differentiating Q(s, a(phi)) w.r.t. the actor.
inline Tape::Var mlp_forward_frozen(Tape& tape, const MlpParams& p, Tape::Var input) {
  if (tape.var_cols(input) != p.in_dim())
    throw StructuralError("mlp_forward_frozen: input width mismatch");
  Tape::Var h = input;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    h = tape.linear(h, tape.frozen(p.weights[l]), tape.frozen(p.biases[l]));
    if (l + 1 < p.weights.size()) h = tape.tanh_(h);
  }
  return h;
}

inline void soft_update_params(MlpParams& target, const MlpParams& online, double tau) {
  for (std::size_t l = 0; l < online.weights.size(); ++l) {
    for (std::size_t i = 0; i < online.weights[l].numel(); ++i)
      target.weights[l].data[i] =
          (1.0 - tau) * target.weights[l].data[i] + tau * online.weights[l].data[i];
    for (std::size_t i = 0; i < online.biases[l].numel(); ++i)
      target.biases[l].data[i] =
          (1.0 - tau) * target.biases[l].data[i] + tau * online.biases[l].data[i];
  }
}

}  // namespace contingent
