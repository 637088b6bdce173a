#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "contingent/env.hpp"
#include "contingent/errors.hpp"
#include "contingent/policy.hpp"
#include "contingent/replay.hpp"
#include "contingent/rng.hpp"
#include "contingent/sac.hpp"

namespace contingent {

// A frozen earlier policy plus the density ceiling new actions must stay
// under. epsilon 0 (kappa 0 calibration) is mechanically allowed: log_epsilon
// becomes -inf and nothing can satisfy the constraint, which the rejection
// sampler surfaces as a 100% fallback rate.
struct NoveltyConstraint {
  PolicyParams prior;
  double epsilon = 0.0;
  double log_epsilon = -std::numeric_limits<double>::infinity();

  NoveltyConstraint() = default;
  NoveltyConstraint(PolicyParams p, double eps)
      : prior(std::move(p)), epsilon(eps), log_epsilon(std::log(eps)) {
    if (!(eps >= 0.0) || !std::isfinite(eps))
      throw ConfigError("novelty threshold must be finite and nonnegative");
  }
};

// 1 iff the action's density under every prior stays at or below its
// threshold. No constraints -> trivially 1.
inline bool novelty_indicator(const std::vector<NoveltyConstraint>& constraints,
                              const double* obs, const double* action) {
  for (const NoveltyConstraint& c : constraints)
    if (policy_log_prob(c.prior, obs, action) > c.log_epsilon) return false;
  return true;
}

inline std::vector<GaussianTanhHead> prior_heads(
    const std::vector<NoveltyConstraint>& constraints, const Tensor& obs) {
  std::vector<GaussianTanhHead> hs;
  hs.reserve(constraints.size());
  for (const NoveltyConstraint& c : constraints) hs.push_back(policy_head(c.prior, obs));
  return hs;
}

// Outcome of one rejection-sampled action.
struct RejectionReport {
  std::size_t attempts = 0;
  bool fallback = false;
  std::array<double, 2> action{};
  double log_prob = 0.0;  // density under the sampling policy itself
  std::vector<double> prior_log_densities;  // at the chosen action, one per constraint
};

struct RejectionStats {
  std::uint64_t calls = 0;
  std::uint64_t attempts = 0;
  std::uint64_t fallbacks = 0;

  double mean_attempts() const {
    return calls ? static_cast<double>(attempts) / static_cast<double>(calls) : 0.0;
  }
  double fallback_rate() const {
    return calls ? static_cast<double>(fallbacks) / static_cast<double>(calls) : 0.0;
  }
};

// Rejection sampling for a whole batch of states against precomputed heads.
struct BatchRejection {
  Tensor actions;                       // [M x d]
  std::vector<double> log_prob;         // own density of each chosen action
  std::vector<std::uint32_t> attempts;  // per row; capped at max_attempts
  std::vector<char> fallback;
  std::vector<double> prior_lp;         // [M x J] densities at the chosen action
};

// Draw order is round-major: attempt 1 for every unresolved row in ascending
// order, then attempt 2 for the rows still unresolved, and so on. With no
// constraints every row accepts on round one, which makes the stream
// consumption identical to a single ascending sampling pass. Exhausted rows
// fall back to their seen candidate with the smallest worst-case threshold
// excess max_j(log pi_j(a) - log eps_j).
inline BatchRejection rejection_sample_rows(const GaussianTanhHead& head,
                                            const std::vector<GaussianTanhHead>& priors,
                                            const std::vector<NoveltyConstraint>& constraints,
                                            std::size_t max_attempts, Rng& rng) {
  const std::size_t M = head.batch(), d = head.dim(), J = constraints.size();
  if (priors.size() != J)
    throw StructuralError("rejection_sample_rows: prior heads do not match constraints");
  if (max_attempts == 0) throw ConfigError("rejection_sample_rows: max_attempts must be positive");
  BatchRejection out;
  out.actions = Tensor(M, d);
  out.log_prob.assign(M, 0.0);
  out.attempts.assign(M, 0);
  out.fallback.assign(M, 0);
  out.prior_lp.assign(M * J, 0.0);

  std::vector<std::size_t> active(M);
  for (std::size_t m = 0; m < M; ++m) active[m] = m;
  std::vector<std::size_t> still;
  still.reserve(M);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best_excess(M, inf);
  std::vector<char> stored(M, 0);

  std::vector<double> noise(d), act(d), plp(J);
  for (std::size_t round = 1; round <= max_attempts && !active.empty(); ++round) {
    still.clear();
    for (std::size_t m : active) {
      for (std::size_t k = 0; k < d; ++k) noise[k] = rng.normal();
      const double lp = head_sample_row(head, m, noise.data(), act.data());
      double excess = -inf;
      for (std::size_t j = 0; j < J; ++j) {
        plp[j] = head_log_prob_row(priors[j], m, act.data());
        const double e = plp[j] - constraints[j].log_epsilon;
        if (e > excess) excess = e;
      }
      const bool ok = excess <= 0.0;
      if (ok || !stored[m] || excess < best_excess[m]) {
        stored[m] = 1;
        best_excess[m] = excess;
        for (std::size_t k = 0; k < d; ++k) out.actions.at(m, k) = act[k];
        out.log_prob[m] = lp;
        for (std::size_t j = 0; j < J; ++j) out.prior_lp[m * J + j] = plp[j];
      }
      if (ok) {
        out.attempts[m] = static_cast<std::uint32_t>(round);
      } else {
        still.push_back(m);
      }
    }
    active.swap(still);
  }
  for (std::size_t m : active) {
    out.attempts[m] = static_cast<std::uint32_t>(max_attempts);
    out.fallback[m] = 1;
  }
  return out;
}

// Single-state rejection sample with a full report. With fallback disallowed,
// exhausting the attempt budget is an error rather than a constraint breach.
inline RejectionReport rejection_sample(const PolicyParams& policy, const double* obs,
                                        const std::vector<NoveltyConstraint>& constraints,
                                        std::size_t max_attempts, Rng& rng,
                                        bool allow_fallback = true) {
  if (policy.action_dim != 2)
    throw StructuralError("rejection_sample: report layout expects 2-d actions");
  Tensor o(1, policy.obs_dim);
  for (std::size_t j = 0; j < policy.obs_dim; ++j) o.data[j] = obs[j];
  const GaussianTanhHead head = policy_head(policy, o);
  const std::vector<GaussianTanhHead> ph = prior_heads(constraints, o);
  const BatchRejection r = rejection_sample_rows(head, ph, constraints, max_attempts, rng);
  if (r.fallback[0] && !allow_fallback)
    throw NumericError("rejection_sample: no admissible action in " +
                       std::to_string(max_attempts) + " attempts");
  RejectionReport rep;
  rep.attempts = r.attempts[0];
  rep.fallback = r.fallback[0] != 0;
  rep.action = {r.actions.at(0, 0), r.actions.at(0, 1)};
  rep.log_prob = r.log_prob[0];
  rep.prior_log_densities = r.prior_lp;
  return rep;
}

inline void absorb(RejectionStats& s, const BatchRejection& r) {
  for (std::size_t m = 0; m < r.attempts.size(); ++m) {
    s.calls += 1;
    s.attempts += r.attempts[m];
    s.fallbacks += r.fallback[m] ? 1 : 0;
  }
}

inline void absorb(RejectionStats& s, const RejectionReport& r) {
  s.calls += 1;
  s.attempts += r.attempts;
  s.fallbacks += r.fallback ? 1 : 0;
}

// Mean stochastic return of the constrained policy as executed (rejection
// sampling active). Draw-for-draw compatible with stochastic_eval_return when
// the constraint list is empty.
inline double pihat_eval_return(Env env, const PolicyParams& actor,
                                const std::vector<NoveltyConstraint>& constraints,
                                std::size_t n_episodes, Rng& rng, std::size_t max_attempts = 64,
                                double* success_rate = nullptr, RejectionStats* stats = nullptr,
                                bool allow_fallback = true) {
  double total = 0.0;
  std::size_t successes = 0;
  double obs[2];
  for (std::size_t e = 0; e < n_episodes; ++e) {
    env.reset(rng);
    double ep = 0.0;
    for (;;) {
      env.observe(obs);
      const RejectionReport rep =
          rejection_sample(actor, obs, constraints, max_attempts, rng, allow_fallback);
      if (stats) absorb(*stats, rep);
      const StepResult r = env.step(rep.action.data());
      ep += r.reward;
      if (r.terminal) {
        if (r.reward > 0.0) ++successes;
        break;
      }
    }
    total += ep;
  }
  if (success_rate) *success_rate = static_cast<double>(successes) / static_cast<double>(n_episodes);
  return total / static_cast<double>(n_episodes);
}

// Threshold for a freshly trained policy: kappa times the q-quantile of its
// own mode densities over visited states. Nearest-rank quantile, computed in
// log space so extreme densities cannot overflow before the final exp.
inline double calibrate_epsilon(const PolicyParams& prior, const Tensor& states,
                                double q = 0.5, double kappa = 0.1) {
  if (states.rows() == 0) throw StructuralError("calibrate_epsilon: no states given");
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("calibrate_epsilon: quantile must be in (0,1)");
  if (!(kappa >= 0.0) || !std::isfinite(kappa))
    throw ConfigError("calibrate_epsilon: kappa must be finite and nonnegative");
  const GaussianTanhHead head = policy_head(prior, states);
  std::vector<double> logd(states.rows());
  for (std::size_t i = 0; i < states.rows(); ++i) logd[i] = head_mode_log_prob_row(head, i);
  std::sort(logd.begin(), logd.end());
  const std::size_t n = logd.size();
  std::size_t idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  idx = idx > 0 ? idx - 1 : 0;
  if (idx >= n) idx = n - 1;
  return kappa * std::exp(logd[idx]);
}

// TD targets where a' comes from the rejection-projected policy. The entropy
// term keeps the policy's own density of the chosen action: the projection
// reshapes which actions get backed up, not the density they are scored with.
inline std::vector<double> constrained_critic_target(
    const Batch& batch, const PolicyParams& actor, const CriticPair& critics,
    const std::vector<NoveltyConstraint>& constraints, const SacHyper& hy, Rng& rng,
    std::size_t max_attempts = 64, RejectionStats* stats = nullptr) {
  const std::size_t B = batch.size();
  if (B == 0) throw StructuralError("constrained_critic_target: empty batch");
  std::vector<std::size_t> live;
  live.reserve(B);
  for (std::size_t i = 0; i < B; ++i)
    if (!batch.done[i]) live.push_back(i);

  std::vector<double> target(B);
  for (std::size_t i = 0; i < B; ++i) target[i] = batch.r[i];
  if (!live.empty()) {
    const std::size_t M = live.size();
    Tensor obs2(M, 2);
    for (std::size_t m = 0; m < M; ++m) {
      obs2.at(m, 0) = batch.s_next.at(live[m], 0);
      obs2.at(m, 1) = batch.s_next.at(live[m], 1);
    }
    const GaussianTanhHead head = policy_head(actor, obs2);
    const std::vector<GaussianTanhHead> ph = prior_heads(constraints, obs2);
    const BatchRejection rej = rejection_sample_rows(head, ph, constraints, max_attempts, rng);
    if (stats) absorb(*stats, rej);
    Tensor qin(M, 4);
    for (std::size_t m = 0; m < M; ++m) {
      qin.at(m, 0) = obs2.at(m, 0);
      qin.at(m, 1) = obs2.at(m, 1);
      qin.at(m, 2) = rej.actions.at(m, 0);
      qin.at(m, 3) = rej.actions.at(m, 1);
    }
    const Tensor q1t = mlp_apply(critics.q1_target, qin);
    const double ent_coef = hy.paper_literal_no_alpha ? 1.0 : hy.alpha;
    if (hy.single_critic) {
      for (std::size_t m = 0; m < M; ++m)
        target[live[m]] = batch.r[live[m]] + hy.gamma * (q1t.data[m] - ent_coef * rej.log_prob[m]);
    } else {
      const Tensor q2t = mlp_apply(critics.q2_target, qin);
      for (std::size_t m = 0; m < M; ++m) {
        const double mq = q1t.data[m] <= q2t.data[m] ? q1t.data[m] : q2t.data[m];
        target[live[m]] = batch.r[live[m]] + hy.gamma * (mq - ent_coef * rej.log_prob[m]);
      }
    }
  }
  for (std::size_t i = 0; i < B; ++i)
    if (!std::isfinite(target[i]))
      throw NumericError("constrained_critic_target: non-finite target at row " +
                         std::to_string(i));
  return target;
}

// Two-branch actor objective. Rows whose freshly sampled action clears every
// threshold keep the SAC objective; rows that violate are instead pushed to
// shed density mass shared with the violated priors:
//   gate = 1:  alpha * log pi(a|s) - min Q(s, a)
//   gate = 0:  mean over violated j of log pi_j(a|s) - log pi(a|s)
// (kl_branch_literal flips the second branch's sign to the as-published form,
// which attracts instead of repels; see SacHyper.)
// The gate is evaluated on action values and enters the graph as a constant
// mask, so it contributes no gradient of its own. With no constraints every
// gate is 1 and the objective reduces to the SAC actor loss exactly.
inline Tape::Var constrained_actor_loss_tape(
    Tape& tape, const Batch& batch, PolicyParams& actor, const CriticPair& critics,
    const std::vector<NoveltyConstraint>& constraints, const SacHyper& hy, const Tensor& noise,
    Tape::Var* log_prob_out = nullptr, std::size_t* gate_pass_out = nullptr) {
  const std::size_t B = batch.size();
  Tape::Var obs = tape.constant(batch.s);
  PolicySampleVars s = policy_sample_tape(tape, actor, obs, noise);
  Tape::Var qin = tape.concat_cols(obs, s.action);
  Tape::Var q1 = mlp_forward_frozen(tape, critics.q1, qin);
  Tape::Var q = q1;
  if (!hy.single_critic) {
    Tape::Var q2 = mlp_forward_frozen(tape, critics.q2, qin);
    q = tape.min_(q1, q2);
  }
  if (log_prob_out) *log_prob_out = s.log_prob;
  const double ent_coef = hy.paper_literal_no_alpha ? 1.0 : hy.alpha;

  const std::size_t J = constraints.size();
  const std::size_t d = actor.action_dim;
  const auto avals = tape.data(s.action);
  const std::vector<GaussianTanhHead> ph = prior_heads(constraints, batch.s);
  // branch signs folded into the masks so the graph shape never changes
  const double lp_sign = hy.kl_branch_literal ? 1.0 : -1.0;
  Tensor gate(B, 1), lp_mask(B, 1);
  std::vector<char> violated(B * J, 0);
  std::vector<double> n_violated(B, 0.0);
  std::size_t passed = 0;
  for (std::size_t i = 0; i < B; ++i) {
    const double* a = avals.data() + i * d;
    bool ok = true;
    for (std::size_t j = 0; j < J; ++j) {
      if (head_log_prob_row(ph[j], i, a) > constraints[j].log_epsilon) {
        violated[i * J + j] = 1;
        n_violated[i] += 1.0;
        ok = false;
      }
    }
    gate.at(i, 0) = ok ? 1.0 : 0.0;
    lp_mask.at(i, 0) = ok ? 0.0 : lp_sign;
    if (ok) ++passed;
  }
  if (gate_pass_out) *gate_pass_out = passed;

  Tape::Var sac_term = tape.sub(tape.scale(s.log_prob, ent_coef), q);
  Tape::Var acc = tape.add(tape.mul(tape.constant(gate), sac_term),
                           tape.mul(tape.constant(lp_mask), s.log_prob));
  for (std::size_t j = 0; j < J; ++j) {
    Tensor w(B, 1);
    bool any = false;
    for (std::size_t i = 0; i < B; ++i) {
      w.at(i, 0) = violated[i * J + j] ? -lp_sign / n_violated[i] : 0.0;
      any = any || violated[i * J + j];
    }
    if (!any) continue;
    Tape::Var plp = prior_log_prob_tape(tape, constraints[j].prior, obs, s.action);
    acc = tape.add(acc, tape.mul(tape.constant(w), plp));
  }
  return tape.mean_all(acc);
}

struct ConstrainedTrainResult {
  PolicyParams actor;
  CriticPair critics;
  std::vector<TrainLogRow> episodes;
  std::vector<EvalLogRow> evals;
  std::size_t steps_used = 0;
  bool converged = false;
  RejectionStats behavior_stats;  // env-side rejection calls
  RejectionStats target_stats;    // TD-target rejection calls
  Tensor calib_states;            // visited-state sample for threshold calibration
};

// SAC under novelty constraints: behavior, TD backup and eval all act through
// the rejection-projected policy, and the actor update uses the two-branch
// objective. Stream discipline matches train_sac draw for draw, so an empty
// constraint list reproduces its runs bit for bit.
inline ConstrainedTrainResult train_constrained_policy(
    Env env, const std::vector<NoveltyConstraint>& constraints, const SacHyper& hy,
    std::uint64_t seed, std::size_t max_attempts = 64, std::size_t calib_cap = 1000) {
  hy.validate();
  Rng train_rng(derive_seed(seed, 0x7261696e));
  Rng init_rng(derive_seed(seed, 0x696e6974));

  ConstrainedTrainResult out{PolicyParams::make(2, 2, hy.hidden, init_rng),
                             CriticPair::make(2, 2, hy.hidden, init_rng)};
  auto actor_group = out.actor.net.named("pi");
  auto critic_group = out.critics.q1.named("q1");
  for (auto& p : out.critics.q2.named("q2")) critic_group.push_back(p);
  AdamState actor_adam(actor_group);
  AdamState critic_adam(critic_group);
  AdamConfig actor_cfg{hy.lr_actor, 0.9, 0.999, 1e-8};
  AdamConfig critic_cfg{hy.lr_critic, 0.9, 0.999, 1e-8};

  ReplayBuffer buffer(hy.buffer_capacity);
  Batch batch;
  Tape tape;
  Tensor actor_noise(hy.batch_size, 2);

  EnvState st = env.reset(train_rng);
  double ep_return = 0.0;
  double last_closs = 0.0, last_aloss = 0.0, last_entropy = 0.0;
  std::vector<double> eval_ma;
  std::vector<double> eval_returns;

  // Infeasibility watchdog: non-overlapping windows of behavior-side calls.
  const std::size_t window = 10000;
  std::size_t window_calls = 0, window_fallbacks = 0;

  auto finish = [&](std::size_t steps, bool converged) {
    out.steps_used = steps;
    out.converged = converged;
    const std::size_t K = buffer.size() < calib_cap ? buffer.size() : calib_cap;
    Rng cal_rng(derive_seed(seed, 0xca11b));
    out.calib_states = Tensor(K, 2);
    for (std::size_t i = 0; i < K; ++i) {
      const Transition& t = buffer.item(cal_rng.below(buffer.size()));
      out.calib_states.at(i, 0) = t.s[0];
      out.calib_states.at(i, 1) = t.s[1];
    }
  };

  for (std::size_t step = 1; step <= hy.total_steps; ++step) {
    double obs[2] = {st.x, st.y};
    double act[2];
    if (step <= hy.warmup_steps) {
      act[0] = train_rng.uniform01() < 0.5 ? -1.0 : 1.0;
      act[1] = train_rng.uniform01() < 0.5 ? -1.0 : 1.0;
    } else {
      const RejectionReport rep =
          rejection_sample(out.actor, obs, constraints, max_attempts, train_rng);
      absorb(out.behavior_stats, rep);
      act[0] = rep.action[0];
      act[1] = rep.action[1];
      window_calls += 1;
      window_fallbacks += rep.fallback ? 1 : 0;
      if (window_calls == window) {
        if (2 * window_fallbacks > window)
          throw NumericError("constraints infeasible: fallback rate " +
                             std::to_string(100.0 * static_cast<double>(window_fallbacks) /
                                            static_cast<double>(window)) +
                             "% over the last " + std::to_string(window) + " steps");
        window_calls = 0;
        window_fallbacks = 0;
      }
    }
    const StepResult r = env.step(act);
    const bool goal = r.reward > 0.0;
    buffer.add(Transition{{obs[0], obs[1]}, {act[0], act[1]}, r.reward,
                          {r.next.x, r.next.y}, goal});
    ep_return += r.reward;
    st = r.next;
    if (r.terminal) {
      out.episodes.push_back({step, ep_return, last_closs, last_aloss, last_entropy});
      ep_return = 0.0;
      st = env.reset(train_rng);
    }

    if (step > hy.warmup_steps) {
      buffer.sample(hy.batch_size, train_rng, batch);
      const std::vector<double> targets = constrained_critic_target(
          batch, out.actor, out.critics, constraints, hy, train_rng, max_attempts,
          &out.target_stats);

      tape.clear();
      out.critics.q1.zero_grad();
      out.critics.q2.zero_grad();
      Tape::Var closs = critic_loss_tape(tape, batch, targets, out.critics, hy.single_critic);
      last_closs = tape.scalar(closs);
      if (!std::isfinite(last_closs))
        throw NumericError("train_constrained_policy: critic loss diverged at step " +
                           std::to_string(step));
      tape.backward(closs);
      critic_adam.step(critic_group, critic_cfg);

      for (double& z : actor_noise.data) z = train_rng.normal();
      tape.clear();
      out.actor.net.zero_grad();
      out.critics.q1.zero_grad();
      out.critics.q2.zero_grad();
      Tape::Var lp;
      Tape::Var aloss = constrained_actor_loss_tape(tape, batch, out.actor, out.critics,
                                                    constraints, hy, actor_noise, &lp);
      last_aloss = tape.scalar(aloss);
      if (!std::isfinite(last_aloss))
        throw NumericError("train_constrained_policy: actor loss diverged at step " +
                           std::to_string(step));
      double lp_sum = 0.0;
      for (double v : tape.data(lp)) lp_sum += v;
      last_entropy = -lp_sum / static_cast<double>(hy.batch_size);
      tape.backward(aloss);
      actor_adam.step(actor_group, actor_cfg);

      soft_update(out.critics, hy.tau);
    }

    if (hy.eval_every > 0 && step % hy.eval_every == 0 && step > hy.warmup_steps) {
      Rng eval_rng(derive_seed(seed, 0xe5a1000 + eval_returns.size()));
      double succ = 0.0;
      const double ret = pihat_eval_return(env, out.actor, constraints, hy.eval_episodes,
                                           eval_rng, max_attempts, &succ);
      out.evals.push_back({step, ret, succ});
      eval_returns.push_back(ret);
      if (eval_returns.size() >= hy.convergence_window) {
        double ma = 0.0;
        for (std::size_t i = eval_returns.size() - hy.convergence_window;
             i < eval_returns.size(); ++i)
          ma += eval_returns[i];
        ma /= static_cast<double>(hy.convergence_window);
        eval_ma.push_back(ma);
        double ma_max = eval_ma[0];
        for (double v : eval_ma) ma_max = ma_max > v ? ma_max : v;
        if (ma >= hy.min_convergence_return &&
            ma_max - ma <= hy.convergence_tol * std::fabs(ma_max)) {
          finish(step, true);
          return out;
        }
      }
    }
  }
  finish(hy.total_steps, false);
  return out;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 14695981039346656037ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t geometry_fingerprint(const WorldGeometry& g) {
  std::vector<double> v;
  auto rect = [&](const Rect& r) {
    v.push_back(r.x0);
    v.push_back(r.y0);
    v.push_back(r.x1);
    v.push_back(r.y1);
  };
  for (const Rect& r : g.walls) rect(r);
  for (const Rect& r : g.corridor_bands) rect(r);
  for (const Rect& r : g.blockade_slots) rect(r);
  v.push_back(g.start_x);
  v.push_back(g.start_y);
  v.push_back(g.goal_x);
  v.push_back(g.goal_y);
  v.push_back(g.goal_r);
  return fnv1a64(v.data(), v.size() * sizeof(double));
}

// One trained policy with the threshold it imposes on everything after it.
struct LibraryEntry {
  PolicyParams actor;
  CriticPair critics;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::size_t steps_used = 0;
  bool converged = false;
  double mean_attempts = 0.0;  // behavior-side rejection stats during training
  double fallback_rate = 0.0;
  std::vector<TrainLogRow> episodes;
  std::vector<EvalLogRow> evals;
};

// Ordered policy collection. Entry k was trained under the thresholds of
// entries 0..k-1 and is frozen afterwards.
struct PolicyLibrary {
  std::vector<LibraryEntry> entries;
  std::uint64_t geometry_fingerprint = 0;
  std::uint64_t master_seed = 0;

  std::vector<NoveltyConstraint> constraints_before(std::size_t k) const {
    if (k > entries.size()) throw StructuralError("library: constraint index out of range");
    std::vector<NoveltyConstraint> cs;
    cs.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
      cs.emplace_back(entries[i].actor, entries[i].epsilon);
    return cs;
  }
  std::vector<NoveltyConstraint> constraints_all() const {
    return constraints_before(entries.size());
  }
};

struct LibraryBuildConfig {
  std::size_t n_policies = 3;
  double quantile = 0.5;  // calibration quantile over visited-state mode densities
  double kappa = 0.1;     // threshold = kappa * quantile density
  std::size_t max_attempts = 64;
  std::size_t calib_states = 1000;

  void validate() const {
    if (n_policies == 0) throw ConfigError("library needs at least one policy");
    if (!(quantile > 0.0 && quantile < 1.0)) throw ConfigError("quantile must be in (0,1)");
    if (!(kappa >= 0.0) || !std::isfinite(kappa))
      throw ConfigError("kappa must be finite and nonnegative");
    if (max_attempts == 0) throw ConfigError("max_attempts must be positive");
    if (calib_states == 0) throw ConfigError("calib_states must be positive");
  }
};

// Sequential library construction: train entry k under the thresholds of all
// earlier entries, calibrate its own threshold from the states it visited,
// freeze, repeat.
inline PolicyLibrary build_library(const Env& env, const SacHyper& hy,
                                   const LibraryBuildConfig& lc, std::uint64_t seed) {
  lc.validate();
  PolicyLibrary lib;
  lib.master_seed = seed;
  lib.geometry_fingerprint = geometry_fingerprint(env.geometry());
  for (std::size_t i = 0; i < lc.n_policies; ++i) {
    const std::uint64_t entry_seed = derive_seed(seed, 0x11b0 + i);
    const std::vector<NoveltyConstraint> cs = lib.constraints_all();
    ConstrainedTrainResult r = train_constrained_policy(env, cs, hy, entry_seed,
                                                        lc.max_attempts, lc.calib_states);
    LibraryEntry e;
    e.epsilon = calibrate_epsilon(r.actor, r.calib_states, lc.quantile, lc.kappa);
    e.actor = std::move(r.actor);
    e.critics = std::move(r.critics);
    e.seed = entry_seed;
    e.steps_used = r.steps_used;
    e.converged = r.converged;
    e.mean_attempts = r.behavior_stats.mean_attempts();
    e.fallback_rate = r.behavior_stats.fallback_rate();
    e.episodes = std::move(r.episodes);
    e.evals = std::move(r.evals);
    lib.entries.push_back(std::move(e));
  }
  return lib;
}

}  // namespace contingent
