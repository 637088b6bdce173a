#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "contingent/errors.hpp"
#include "contingent/mlp.hpp"
#include "contingent/rng.hpp"
#include "contingent/tensor.hpp"

namespace contingent {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kAtanhBound = 1.0 - 1e-6;
inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*log(2*pi)

// Batch of diagonal tanh-squashed Gaussian action distributions.
struct GaussianTanhHead {
  Tensor mean;     // [B x d]
  Tensor log_std;  // [B x d], already inside [kLogStdMin, kLogStdMax]

  std::size_t batch() const { return mean.rows(); }
  std::size_t dim() const { return mean.cols(); }
};

// Actor network: obs -> (mean, raw log_std), squashed later.
struct PolicyParams {
  MlpParams net;
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;

  static PolicyParams make(std::size_t obs_dim, std::size_t action_dim,
                           const std::vector<std::size_t>& hidden, Rng& rng) {
    PolicyParams p;
    p.obs_dim = obs_dim;
    p.action_dim = action_dim;
    std::vector<std::size_t> dims;
    dims.push_back(obs_dim);
    for (std::size_t h : hidden) dims.push_back(h);
    dims.push_back(2 * action_dim);
    p.net = MlpParams::make(dims, rng);
    return p;
  }
};

inline GaussianTanhHead policy_head(const PolicyParams& p, const Tensor& obs) {
  Tensor out = mlp_apply(p.net, obs);
  const std::size_t b = out.rows(), d = p.action_dim;
  GaussianTanhHead h;
  h.mean = Tensor(b, d);
  h.log_std = Tensor(b, d);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      h.mean.at(i, j) = out.at(i, j);
      double ls = out.at(i, d + j);
      ls = ls > kLogStdMax ? kLogStdMax : (ls < kLogStdMin ? kLogStdMin : ls);
      h.log_std.at(i, j) = ls;
    }
  return h;
}

// One row: action = tanh(mean + exp(log_std) * noise), with the exact density
// of the squashed distribution. Returns log_prob.
inline double squash_sample_row(const double* mean, const double* log_std,
                                const double* noise, std::size_t d, double* action) {
  double lp = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double u = mean[j] + std::exp(log_std[j]) * noise[j];
    action[j] = std::tanh(u);
    lp += -kHalfLog2Pi - log_std[j] - 0.5 * noise[j] * noise[j] - kern::log1m_tanh2(u);
  }
  return lp;
}

// Density of an arbitrary action under one row's head, inverting the squash.
inline double squash_log_prob_row(const double* mean, const double* log_std,
                                  const double* action, std::size_t d) {
  double lp = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double a = action[j];
    a = a > kAtanhBound ? kAtanhBound : (a < -kAtanhBound ? -kAtanhBound : a);
    const double u = std::atanh(a);
    const double z = (u - mean[j]) * std::exp(-log_std[j]);
    lp += -kHalfLog2Pi - log_std[j] - 0.5 * z * z - kern::log1m_tanh2(u);
  }
  return lp;
}

inline double head_sample_row(const GaussianTanhHead& h, std::size_t row,
                              const double* noise, double* action) {
  const std::size_t d = h.dim();
  return squash_sample_row(h.mean.data.data() + row * d,
                           h.log_std.data.data() + row * d, noise, d, action);
}

inline double head_log_prob_row(const GaussianTanhHead& h, std::size_t row,
                                const double* action) {
  const std::size_t d = h.dim();
  return squash_log_prob_row(h.mean.data.data() + row * d,
                             h.log_std.data.data() + row * d, action, d);
}

// Greedy action: tanh of the mean, no noise. Used by deterministic eval.
inline void head_mode_row(const GaussianTanhHead& h, std::size_t row, double* action) {
  const std::size_t d = h.dim();
  for (std::size_t j = 0; j < d; ++j) action[j] = std::tanh(h.mean.at(row, j));
}

// Density value at the mode action, used for threshold calibration.
inline double head_mode_log_prob_row(const GaussianTanhHead& h, std::size_t row) {
  const std::size_t d = h.dim();
  std::vector<double> a(d);
  head_mode_row(h, row, a.data());
  return head_log_prob_row(h, row, a.data());
}

// Convenience single-obs helpers built on the batch head.
inline double policy_sample(const PolicyParams& p, const double* obs, Rng& rng,
                            double* action) {
  Tensor o(1, p.obs_dim);
  for (std::size_t j = 0; j < p.obs_dim; ++j) o.data[j] = obs[j];
  GaussianTanhHead h = policy_head(p, o);
  std::vector<double> noise(p.action_dim);
  for (double& z : noise) z = rng.normal();
  return head_sample_row(h, 0, noise.data(), action);
}

inline void policy_mode(const PolicyParams& p, const double* obs, double* action) {
  Tensor o(1, p.obs_dim);
  for (std::size_t j = 0; j < p.obs_dim; ++j) o.data[j] = obs[j];
  GaussianTanhHead h = policy_head(p, o);
  head_mode_row(h, 0, action);
}

inline double policy_log_prob(const PolicyParams& p, const double* obs,
                              const double* action) {
  Tensor o(1, p.obs_dim);
  for (std::size_t j = 0; j < p.obs_dim; ++j) o.data[j] = obs[j];
  GaussianTanhHead h = policy_head(p, o);
  return head_log_prob_row(h, 0, action);
}

// Tape-mode reparameterized sample: action and log_prob as differentiable
// functions of the actor parameters, with the noise fixed.
struct PolicySampleVars {
  Tape::Var action;    // [B x d]
  Tape::Var log_prob;  // [B x 1]
  Tape::Var mean;      // [B x d]
  Tape::Var log_std;   // [B x d]
};

inline PolicySampleVars policy_sample_tape(Tape& tape, PolicyParams& p,
                                           Tape::Var obs, const Tensor& noise) {
  const std::size_t d = p.action_dim;
  Tape::Var out = mlp_forward(tape, p.net, obs);
  Tape::Var mean = tape.slice_cols(out, 0, d);
  Tape::Var log_std = tape.clamp_(tape.slice_cols(out, d, d), kLogStdMin, kLogStdMax);
  Tape::Var z = tape.constant(noise);
  Tape::Var u = tape.add(mean, tape.mul(tape.exp_(log_std), z));
  Tape::Var action = tape.tanh_(u);
  // log N(z) - log|da/du|, summed over dims
  Tape::Var per_dim = tape.sub(
      tape.sub(tape.add_const(tape.scale(log_std, -1.0), -kHalfLog2Pi),
               tape.scale(tape.square_(z), 0.5)),
      tape.log1m_tanh2_(u));
  return {action, tape.row_sum(per_dim), mean, log_std};
}

// Tape-mode density of a given action under a frozen prior policy. Gradient
// flows through the action argument only; prior weights stay fixed.
inline Tape::Var prior_log_prob_tape(Tape& tape, const PolicyParams& prior,
                                     Tape::Var obs, Tape::Var action) {
  const std::size_t d = prior.action_dim;
  Tape::Var out = mlp_forward_frozen(tape, prior.net, obs);
  Tape::Var mean = tape.slice_cols(out, 0, d);
  Tape::Var log_std = tape.clamp_(tape.slice_cols(out, d, d), kLogStdMin, kLogStdMax);
  Tape::Var u = tape.atanh_clamped(action, kAtanhBound);
  Tape::Var z = tape.mul(tape.sub(u, mean), tape.exp_(tape.scale(log_std, -1.0)));
  Tape::Var per_dim = tape.sub(
      tape.sub(tape.add_const(tape.scale(log_std, -1.0), -kHalfLog2Pi),
               tape.scale(tape.square_(z), 0.5)),
      tape.log1m_tanh2_(u));
  return tape.row_sum(per_dim);
}

}  // namespace contingent
