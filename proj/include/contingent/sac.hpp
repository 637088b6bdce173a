#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "contingent/adam.hpp"
#include "contingent/env.hpp"
#include "contingent/errors.hpp"
#include "contingent/mlp.hpp"
#include "contingent/policy.hpp"
#include "contingent/replay.hpp"
#include "contingent/rng.hpp"

namespace contingent {

struct SacHyper {
  double gamma = 0.99;
  // Sized against the reward scale from both sides. Upper bound: the entropy
  // bonus per step must stay under the 0.1 step cost or soft-optimal behavior
  // is to wander forever (at most log 4 ~ 1.39 nats/step on the action square,
  // so the break-even is near 0.07). Lower bound: with alpha ~ 0.02 the policy
  // saturates its lateral action inside corridors (wall-hugging), leaving
  // opposite-lean actions with ~1e-5 prior density at every state, and then no
  // density threshold can distinguish one corridor from another. 0.05 keeps
  // heads centered and wide enough that later policies are actually pushed
  // onto different routes.
  double alpha = 0.05;
  double tau = 0.005;
  std::size_t batch_size = 256;
  std::size_t buffer_capacity = 100000;
  double lr_actor = 3e-4;
  double lr_critic = 3e-4;
  std::size_t total_steps = 200000;
  // Warmup must seed the buffer with goal transitions along ALL corridors, not
  // just the shortest: constrained policies are barred from the routes earlier
  // ones took, and without flank successes in the buffer their critics never
  // see the goal at all (measured: a 20k warmup gave one goal hit, and the
  // constrained policy then spent 200k steps at -30 return). Warmup steps are
  // gradient-free and cost ~6% of a training run's wall time.
  std::size_t warmup_steps = 40000;
  // 48x48 solves the maze as reliably as 64x64 at ~60% of the per-step cost,
  // which matters: a full library build runs several trainings back to back.
  std::vector<std::size_t> hidden{48, 48};
  bool single_critic = false;        // literal single-Q form of the update
  bool paper_literal_no_alpha = false;  // drop alpha on the log-density terms
  // Sign of the violated-prior actor branch. Default repels: minimize
  // log pi_j - log pi_i (KL ascent away from the prior). The literal flag
  // keeps log pi_i - log pi_j, which pulls samples toward the prior's mass
  // through the action path and stalls the push-off in practice.
  bool kl_branch_literal = false;

  // convergence: stop once the moving average of eval returns flattens out
  std::size_t eval_every = 1000;
  std::size_t eval_episodes = 10;
  std::size_t convergence_window = 12;
  double convergence_tol = 0.05;
  // Flat failure must not count as converged. The bar has to clear wandering
  // (about -30) yet stay reachable for the long flank-corridor routes, whose
  // stochastic returns hover far below the middle route's.
  double min_convergence_return = 1.0;

  void validate() const {
    if (gamma <= 0.0 || gamma >= 1.0) throw ConfigError("gamma must be in (0,1)");
    if (alpha <= 0.0) throw ConfigError("alpha must be positive");
    if (tau <= 0.0 || tau >= 1.0) throw ConfigError("tau must be in (0,1)");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (buffer_capacity < batch_size) throw ConfigError("buffer smaller than one batch");
    if (lr_actor <= 0.0 || lr_critic <= 0.0) throw ConfigError("learning rates must be positive");
    if (warmup_steps >= total_steps) throw ConfigError("warmup exceeds total steps");
    if (hidden.empty()) throw ConfigError("need at least one hidden layer");
    if (convergence_window < 2) throw ConfigError("convergence window too small");
  }
};

struct CriticPair {
  MlpParams q1, q2;
  MlpParams q1_target, q2_target;

  static CriticPair make(std::size_t obs_dim, std::size_t act_dim,
                         const std::vector<std::size_t>& hidden, Rng& rng) {
    std::vector<std::size_t> dims;
    dims.push_back(obs_dim + act_dim);
    for (std::size_t h : hidden) dims.push_back(h);
    dims.push_back(1);
    CriticPair c;
    c.q1 = MlpParams::make(dims, rng);
    c.q2 = MlpParams::make(dims, rng);
    c.q1_target = c.q1;
    c.q2_target = c.q2;
    return c;
  }
};

// TD targets: r + gamma * (1-done) * (min Q_target(s', a') - alpha * log pi(a'|s')),
// a' freshly sampled from the actor. Rows with done=true never touch s' (nor
// consume noise draws), so their s' can hold any sentinel.
inline std::vector<double> critic_td_target(const Batch& batch, const PolicyParams& actor,
                                            const CriticPair& critics, const SacHyper& hy,
                                            Rng& rng) {
  const std::size_t B = batch.size();
  if (B == 0) throw StructuralError("critic_td_target: empty batch");
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
    GaussianTanhHead head = policy_head(actor, obs2);
    Tensor qin(M, 4);
    std::vector<double> lp(M);
    double noise[2], act[2];
    for (std::size_t m = 0; m < M; ++m) {
      noise[0] = rng.normal();
      noise[1] = rng.normal();
      lp[m] = head_sample_row(head, m, noise, act);
      qin.at(m, 0) = obs2.at(m, 0);
      qin.at(m, 1) = obs2.at(m, 1);
      qin.at(m, 2) = act[0];
      qin.at(m, 3) = act[1];
    }
    const Tensor q1t = mlp_apply(critics.q1_target, qin);
    const double ent_coef = hy.paper_literal_no_alpha ? 1.0 : hy.alpha;
    if (hy.single_critic) {
      for (std::size_t m = 0; m < M; ++m)
        target[live[m]] = batch.r[live[m]] + hy.gamma * (q1t.data[m] - ent_coef * lp[m]);
    } else {
      const Tensor q2t = mlp_apply(critics.q2_target, qin);
      for (std::size_t m = 0; m < M; ++m) {
        const double mq = q1t.data[m] <= q2t.data[m] ? q1t.data[m] : q2t.data[m];
        target[live[m]] = batch.r[live[m]] + hy.gamma * (mq - ent_coef * lp[m]);
      }
    }
  }
  for (std::size_t i = 0; i < B; ++i)
    if (!std::isfinite(target[i]))
      throw NumericError("critic_td_target: non-finite target at row " + std::to_string(i));
  return target;
}

// Mean over the batch of 0.5*(q1-t)^2 + 0.5*(q2-t)^2, built on the tape so a
// backward() call yields critic gradients.
inline Tape::Var critic_loss_tape(Tape& tape, const Batch& batch,
                                  const std::vector<double>& targets, CriticPair& critics,
                                  bool single_critic) {
  const std::size_t B = batch.size();
  Tensor qin(B, 4);
  for (std::size_t i = 0; i < B; ++i) {
    qin.at(i, 0) = batch.s.at(i, 0);
    qin.at(i, 1) = batch.s.at(i, 1);
    qin.at(i, 2) = batch.a.at(i, 0);
    qin.at(i, 3) = batch.a.at(i, 1);
  }
  Tape::Var in = tape.constant(qin);
  Tape::Var tgt = tape.constant(targets.size(), 1, targets.data());
  Tape::Var q1 = mlp_forward(tape, critics.q1, in);
  Tape::Var e1 = tape.scale(tape.square_(tape.sub(q1, tgt)), 0.5);
  if (single_critic) return tape.mean_all(e1);
  Tape::Var q2 = mlp_forward(tape, critics.q2, in);
  Tape::Var e2 = tape.scale(tape.square_(tape.sub(q2, tgt)), 0.5);
  return tape.mean_all(tape.add(e1, e2));
}

// J_pi = mean( alpha * log pi(a|s) - min Q(s, a) ), a reparameterized with the
// given noise. Critic weights enter frozen: gradient reaches the actor only.
inline Tape::Var actor_loss_tape(Tape& tape, const Batch& batch, PolicyParams& actor,
                                 const CriticPair& critics, const SacHyper& hy,
                                 const Tensor& noise, Tape::Var* log_prob_out = nullptr) {
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
  return tape.mean_all(tape.sub(tape.scale(s.log_prob, ent_coef), q));
}

inline void soft_update(CriticPair& critics, double tau) {
  soft_update_params(critics.q1_target, critics.q1, tau);
  soft_update_params(critics.q2_target, critics.q2, tau);
}

struct TrainLogRow {
  std::size_t env_step = 0;
  double episode_return = 0;
  double critic_loss = 0;
  double actor_loss = 0;
  double entropy = 0;
};

struct EvalLogRow {
  std::size_t env_step = 0;
  double mean_return = 0;
  double success_rate = 0;
};

struct TrainResult {
  PolicyParams actor;
  CriticPair critics;
  std::vector<TrainLogRow> episodes;
  std::vector<EvalLogRow> evals;
  std::size_t steps_used = 0;
  bool converged = false;
};

// Mean greedy return over n episodes; rng only drives reset noise.
inline double greedy_eval_return(Env env, const PolicyParams& actor, std::size_t n_episodes,
                                 Rng& rng) {
  double total = 0.0;
  double obs[2], act[2];
  for (std::size_t e = 0; e < n_episodes; ++e) {
    env.reset(rng);
    double ep = 0.0;
    for (;;) {
      env.observe(obs);
      policy_mode(actor, obs, act);
      const StepResult r = env.step(act);
      ep += r.reward;
      if (r.terminal) break;
    }
    total += ep;
  }
  return total / static_cast<double>(n_episodes);
}

// Mean stochastic-rollout return over n episodes; measures the policy as
// executed rather than its mode. Draw order per episode: reset noise, then two
// normals per step.
inline double stochastic_eval_return(Env env, const PolicyParams& actor, std::size_t n_episodes,
                                     Rng& rng, double* success_rate = nullptr) {
  double total = 0.0;
  std::size_t successes = 0;
  double obs[2], act[2];
  for (std::size_t e = 0; e < n_episodes; ++e) {
    env.reset(rng);
    double ep = 0.0;
    for (;;) {
      env.observe(obs);
      policy_sample(actor, obs, rng, act);
      const StepResult r = env.step(act);
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

// Plain SAC on the given environment. One rng stream drives every training
// draw in chronological order; evals run on derived side streams so they do
// not perturb training.
inline TrainResult train_sac(Env env, const SacHyper& hy, std::uint64_t seed) {
  hy.validate();
  Rng train_rng(derive_seed(seed, 0x7261696e));  // stream tag: "rain"
  Rng init_rng(derive_seed(seed, 0x696e6974));   // stream tag: "init"

  TrainResult out{PolicyParams::make(2, 2, hy.hidden, init_rng),
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
  std::vector<double> eval_ma;  // moving-average series of eval returns
  std::vector<double> eval_returns;

  for (std::size_t step = 1; step <= hy.total_steps; ++step) {
    double obs[2] = {st.x, st.y};
    double act[2];
    if (step <= hy.warmup_steps) {
      // Saturated random actions, not uniform-in-box: per-axis kinematics make
      // +-1 steps diffuse far faster, and the goal is unreachable within the
      // budget without that coverage.
      act[0] = train_rng.uniform01() < 0.5 ? -1.0 : 1.0;
      act[1] = train_rng.uniform01() < 0.5 ? -1.0 : 1.0;
    } else {
      policy_sample(out.actor, obs, train_rng, act);
    }
    const StepResult r = env.step(act);
    const bool goal = r.reward > 0.0;
    buffer.add(Transition{{obs[0], obs[1]}, {act[0], act[1]}, r.reward,
                          {r.next.x, r.next.y}, goal});
    ep_return += r.reward;
    st = r.next;
    if (r.terminal) {
      out.episodes.push_back(
          {step, ep_return, last_closs, last_aloss, last_entropy});
      ep_return = 0.0;
      st = env.reset(train_rng);
    }

    if (step > hy.warmup_steps) {
      buffer.sample(hy.batch_size, train_rng, batch);
      const std::vector<double> targets =
          critic_td_target(batch, out.actor, out.critics, hy, train_rng);

      tape.clear();
      out.critics.q1.zero_grad();
      out.critics.q2.zero_grad();
      Tape::Var closs = critic_loss_tape(tape, batch, targets, out.critics, hy.single_critic);
      last_closs = tape.scalar(closs);
      if (!std::isfinite(last_closs))
        throw NumericError("train_sac: critic loss diverged at step " + std::to_string(step));
      tape.backward(closs);
      critic_adam.step(critic_group, critic_cfg);

      for (double& z : actor_noise.data) z = train_rng.normal();
      tape.clear();
      out.actor.net.zero_grad();
      out.critics.q1.zero_grad();  // frozen in the graph, but keep buffers clean
      out.critics.q2.zero_grad();
      Tape::Var lp;
      Tape::Var aloss = actor_loss_tape(tape, batch, out.actor, out.critics, hy,
                                        actor_noise, &lp);
      last_aloss = tape.scalar(aloss);
      if (!std::isfinite(last_aloss))
        throw NumericError("train_sac: actor loss diverged at step " + std::to_string(step));
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
      const double ret = stochastic_eval_return(env, out.actor, hy.eval_episodes, eval_rng, &succ);
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
          out.steps_used = step;
          out.converged = true;
          return out;
        }
      }
    }
  }
  out.steps_used = hy.total_steps;
  return out;
}

}  // namespace contingent
