#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "contingent/env.hpp"
#include "contingent/errors.hpp"
#include "contingent/novelty.hpp"
#include "contingent/policy.hpp"
#include "contingent/rng.hpp"

namespace contingent {

// A state the deployed policy can be restored to. Positions come from a real
// rollout, so they are collision-free by construction.
struct Checkpoint {
  double x = 0, y = 0;
  int steps_elapsed = 0;
  std::size_t traj_index = 0;  // row in the recorded trace
};

struct RecoveryConfig {
  std::size_t k = 10;          // checkpoint stride, in optimal-policy steps
  std::size_t m = 30;          // contingency segment length, in env steps
  double delta_stuck = 0.005;  // ||s_t - s_{t-1}|| below this counts as stuck
  std::size_t stuck_window = 5;  // consecutive stuck steps before declaring
  std::size_t max_rounds = 20;   // contingency segments before giving up
  std::size_t step_cap = 2000;   // total env steps per recovery run
  std::size_t rejection_attempts = 64;  // budget per constrained action draw
  // Attempts per stuck point for the random baseline; plays the role the
  // contingency-policy count plays in the library arm (2 matches the default
  // three-entry library).
  std::size_t random_segments = 2;

  void validate() const {
    if (k < 1) throw ConfigError("recovery: k must be >= 1");
    if (m < 1)
      throw ConfigError(
          "recovery: m must be >= 1 (m = 0 degenerates to backtrack-only recovery)");
    if (!(delta_stuck > 0.0) || !std::isfinite(delta_stuck))
      throw ConfigError("recovery: delta_stuck must be positive and finite");
    if (stuck_window < 1) throw ConfigError("recovery: stuck window must be >= 1");
    if (max_rounds < 1) throw ConfigError("recovery: max rounds must be >= 1");
    if (step_cap < 1) throw ConfigError("recovery: step cap must be >= 1");
    if (rejection_attempts < 1) throw ConfigError("recovery: rejection attempts must be >= 1");
    if (random_segments < 1) throw ConfigError("recovery: random segments must be >= 1");
  }
};

enum class Controller : std::uint8_t { optimal = 0, contingency = 1, random = 2, backtrack = 3 };

struct TraceStep {
  double x = 0, y = 0;
  Controller ctrl = Controller::optimal;
  std::uint32_t policy = 0;  // library index for contingency rows, else 0
  std::uint32_t round = 0;   // 0 = initial rollout, then the attempt number
};

inline std::string controller_label(const TraceStep& s) {
  switch (s.ctrl) {
    case Controller::optimal: return "optimal";
    case Controller::random: return "random";
    case Controller::backtrack: return "backtrack";
    case Controller::contingency:
      // library position, so entry index 1 prints as contingency_2
      return "contingency_" + std::to_string(s.policy + 1);
  }
  return "unknown";
}

enum class RecoveryOutcome : std::uint8_t {
  success = 0,
  max_rounds = 2,
  step_cap = 3,
};

inline const char* outcome_name(RecoveryOutcome o) {
  switch (o) {
    case RecoveryOutcome::success: return "success";
    case RecoveryOutcome::max_rounds: return "max_rounds";
    case RecoveryOutcome::step_cap: return "step_cap";
  }
  return "unknown";
}

struct RecoveryTrace {
  std::vector<TraceStep> steps;  // row 0 is the reset position
  bool success = false;
  RecoveryOutcome outcome = RecoveryOutcome::step_cap;
  std::size_t rounds_used = 0;
  std::size_t env_steps = 0;
};

// True iff every consecutive pair in the window moved less than delta_stuck.
// The window holds w+1 positions for w deltas; one good step clears it.
inline bool detect_contingency(const std::vector<std::array<double, 2>>& recent,
                               double delta_stuck) {
  if (recent.size() < 2)
    throw StructuralError("detect_contingency: window must hold at least two positions");
  for (std::size_t t = 1; t < recent.size(); ++t) {
    const double dx = recent[t][0] - recent[t - 1][0];
    const double dy = recent[t][1] - recent[t - 1][1];
    if (std::sqrt(dx * dx + dy * dy) >= delta_stuck) return false;
  }
  return true;
}

namespace detail {

// Shared engine for both arms. `segments` holds one constraint set per
// contingency attempt; an empty inner vector plus null `policies` row means
// uniform-random actions for that attempt.
struct SegmentSpec {
  const PolicyParams* policy = nullptr;  // null: uniform random in [-1,1]^2
  const std::vector<NoveltyConstraint>* constraints = nullptr;
  std::uint32_t library_index = 0;
};

inline RecoveryTrace run_recovery_loop(Env env, const PolicyParams& optimal,
                                       const std::vector<SegmentSpec>& segments,
                                       const RecoveryConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, 0x7265636fULL));  // side stream per run
  const int no_truncation = std::numeric_limits<int>::max();

  RecoveryTrace tr;
  EnvState s0 = env.reset(rng);
  tr.steps.push_back({s0.x, s0.y, Controller::optimal, 0, 0});

  std::vector<Checkpoint> cps;
  cps.push_back({s0.x, s0.y, s0.steps, 0});

  std::vector<std::array<double, 2>> window;
  window.reserve(cfg.stuck_window + 1);
  window.push_back({s0.x, s0.y});

  // Attempts not yet tried since the last backtrack (or first detection).
  std::vector<std::size_t> pending;
  auto refill = [&] {
    pending.clear();
    for (std::size_t j = segments.size(); j > 0; --j) pending.push_back(j - 1);
  };

  std::size_t opt_steps = 0;
  std::uint32_t round = 0;
  // Successive backtracks target strictly earlier trajectory rows until the
  // cursor reaches the run's first checkpoint, then stay pinned there.
  std::size_t last_backtrack_traj = std::numeric_limits<std::size_t>::max();
  bool trying = false;

  double obs[2], act[2];
  auto finish = [&](RecoveryOutcome o) {
    tr.success = o == RecoveryOutcome::success;
    tr.outcome = o;
    return tr;
  };

  while (tr.env_steps < cfg.step_cap) {
    if (!trying) {
      env.observe(obs);
      policy_mode(optimal, obs, act);
      StepResult r = env.step(act, no_truncation);
      ++tr.env_steps;
      ++opt_steps;
      tr.steps.push_back({r.next.x, r.next.y, Controller::optimal, 0, round});
      if (r.reward > 0.0) return finish(RecoveryOutcome::success);
      if (opt_steps % cfg.k == 0)
        cps.push_back({r.next.x, r.next.y, r.next.steps, tr.steps.size() - 1});
      window.push_back({r.next.x, r.next.y});
      if (window.size() > cfg.stuck_window + 1) window.erase(window.begin());
      if (window.size() == cfg.stuck_window + 1 &&
          detect_contingency(window, cfg.delta_stuck)) {
        if (pending.empty() && round == 0) refill();  // first detection of the run
        trying = true;
      }
      continue;
    }

    if (pending.empty()) {
      // Every contingency failed from this point: restore an earlier checkpoint.
      // Once the retreat reaches the first checkpoint, later rounds retry from
      // there with fresh sampling noise until rounds or steps run out.
      std::size_t pick = cps.size();
      while (pick > 1 && cps[pick - 1].traj_index >= last_backtrack_traj) --pick;
      const Checkpoint& cp = cps[pick - 1];
      last_backtrack_traj = cp.traj_index;
      env.set_state(cp.x, cp.y, cp.steps_elapsed);
      tr.steps.push_back({cp.x, cp.y, Controller::backtrack, 0, round});
      refill();
    }

    const SegmentSpec& seg = segments[pending.back()];
    pending.pop_back();
    ++tr.rounds_used;
    if (tr.rounds_used > cfg.max_rounds) return finish(RecoveryOutcome::max_rounds);
    round = static_cast<std::uint32_t>(tr.rounds_used);

    for (std::size_t t = 0; t < cfg.m && tr.env_steps < cfg.step_cap; ++t) {
      env.observe(obs);
      Controller ctrl;
      std::uint32_t policy_idx = 0;
      if (seg.policy) {
        RejectionReport rep = rejection_sample(*seg.policy, obs, *seg.constraints,
                                               cfg.rejection_attempts, rng);
        act[0] = rep.action[0];
        act[1] = rep.action[1];
        ctrl = Controller::contingency;
        policy_idx = seg.library_index;
      } else {
        act[0] = rng.uniform(-1.0, 1.0);
        act[1] = rng.uniform(-1.0, 1.0);
        ctrl = Controller::random;
      }
      StepResult r = env.step(act, no_truncation);
      ++tr.env_steps;
      tr.steps.push_back({r.next.x, r.next.y, ctrl, policy_idx, round});
      if (r.reward > 0.0) return finish(RecoveryOutcome::success);
    }

    // Resume the optimal policy with a fresh stuck window.
    window.clear();
    window.push_back({env.state().x, env.state().y});
    trying = false;
  }
  return finish(RecoveryOutcome::step_cap);
}

}  // namespace detail

// Deployment loop on a changed environment: roll out the library's first
// policy greedily with checkpoints every k steps; when progress stalls, try
// each later library entry (its rejection constraints stay active, the policy
// runs as the projected policy it was trained as) for m steps and resume; once
// every entry has failed from the current point, restore a strictly earlier
// checkpoint and repeat, retrying from the earliest checkpoint when the
// retreat bottoms out.
inline RecoveryTrace run_with_recovery(Env env, const PolicyLibrary& lib,
                                       const RecoveryConfig& cfg, std::uint64_t seed) {
  if (lib.entries.size() < 2)
    throw ConfigError("run_with_recovery: library needs the optimal policy plus at least "
                      "one contingency entry");
  std::vector<std::vector<NoveltyConstraint>> constraint_sets(lib.entries.size());
  std::vector<detail::SegmentSpec> segments;
  for (std::size_t j = 1; j < lib.entries.size(); ++j) {
    constraint_sets[j] = lib.constraints_before(j);
    segments.push_back({&lib.entries[j].actor, &constraint_sets[j],
                        static_cast<std::uint32_t>(j)});
  }
  return detail::run_recovery_loop(std::move(env), lib.entries[0].actor, segments, cfg, seed);
}

// Baseline arm: the same loop, but every contingency segment executes uniform
// random actions. cfg.random_segments plays the part of the library size.
inline RecoveryTrace run_with_random_recovery(Env env, const PolicyParams& optimal,
                                              const RecoveryConfig& cfg, std::uint64_t seed) {
  std::vector<detail::SegmentSpec> segments(cfg.random_segments);
  return detail::run_recovery_loop(std::move(env), optimal, segments, cfg, seed);
}

// One-sided exact sign test over discordant pairs: the probability, under a
// fair coin, of at least `wins` heads in wins + losses flips. Ties drop out,
// which is the standard treatment for paired success/failure outcomes.
inline double sign_test_one_sided(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (wins == 0) return 1.0;  // the whole tail, exactly
  const double log_half = -std::log(2.0) * static_cast<double>(n);
  double p = 0.0;
  for (std::size_t k = wins; k <= n; ++k) {
    const double log_choose = std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
                              std::lgamma(double(n - k) + 1.0);
    p += std::exp(log_choose + log_half);
  }
  return p < 1.0 ? p : 1.0;
}

// Delimited text consumed by the plot emitter; row 0 is the reset position.
inline void write_trace(std::ostream& os, const RecoveryTrace& tr) {
  os << "step\tx\ty\tcontroller\tround\n";
  char buf[96];
  for (std::size_t i = 0; i < tr.steps.size(); ++i) {
    const TraceStep& s = tr.steps[i];
    std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%s\t%u\n", i, s.x, s.y,
                  controller_label(s).c_str(), s.round);
    os << buf;
  }
  os << "# outcome=" << outcome_name(tr.outcome) << " rounds=" << tr.rounds_used
     << " env_steps=" << tr.env_steps << "\n";
}

}  // namespace contingent
