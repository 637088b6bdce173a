#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "contingent/env.hpp"
#include "contingent/errors.hpp"
#include "contingent/novelty.hpp"
#include "contingent/trajectory.hpp"

namespace contingent {

struct EvalReport {
  std::size_t episodes = 0;
  double mean_return = 0;
  double success_rate = 0;
  std::array<std::size_t, 4> corridor_votes{};  // per-episode majority: L M R none
  RejectionStats rejection;                     // constrained entries only
  std::size_t worst_attempts = 0;
  std::size_t violations = 0;  // executed actions above any prior threshold
};

inline Corridor majority_corridor(const EvalReport& r) {
  int best = 0;
  for (int c = 1; c < 3; ++c)
    if (r.corridor_votes[c] > r.corridor_votes[best]) best = c;
  return r.corridor_votes[best] == 0 ? Corridor::none : static_cast<Corridor>(best);
}

// Entry 0 evaluates its greedy mode (that is the policy deployment executes);
// constrained entries evaluate the rejection-projected policy they were
// trained as. With allow_fallback off, an exhausted attempt budget throws
// instead of executing a violating action.
inline EvalReport run_policy_eval(Env env, const PolicyLibrary& lib, std::size_t index,
                                  std::size_t episodes, std::uint64_t seed,
                                  std::size_t max_attempts, bool allow_fallback = true,
                                  TrajectoryFile* record = nullptr) {
  if (index >= lib.entries.size())
    throw ConfigError("eval: policy index " + std::to_string(index) + " out of range (" +
                      std::to_string(lib.entries.size()) + " entries)");
  const PolicyParams& actor = lib.entries[index].actor;
  const std::vector<NoveltyConstraint> cons = lib.constraints_before(index);
  const std::string tag = index == 0 ? "pi_1" : "pihat_" + std::to_string(index + 1);
  Rng rng(derive_seed(seed, 0xe7a10000ull + index));

  if (record) {
    record->policy_id = tag;
    record->seed = seed;
    record->geometry = geometry_fingerprint(env.geometry());
  }

  EvalReport rep;
  rep.episodes = episodes;
  double total = 0.0;
  std::size_t successes = 0;
  double obs[2], act[2];
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    const EnvState s0 = env.reset(rng);
    if (record) record->rows.push_back({0, s0.x, s0.y, 0.0, 0.0, 0.0, "reset"});
    std::size_t counts[4] = {0, 0, 0, 0};
    double ret = 0.0;
    std::size_t step = 0;
    for (;;) {
      env.observe(obs);
      if (index == 0) {
        policy_mode(actor, obs, act);
      } else {
        const RejectionReport rr =
            rejection_sample(actor, obs, cons, max_attempts, rng, allow_fallback);
        act[0] = rr.action[0];
        act[1] = rr.action[1];
        absorb(rep.rejection, rr);
        if (rr.attempts > rep.worst_attempts) rep.worst_attempts = rr.attempts;
        for (std::size_t j = 0; j < cons.size(); ++j)
          if (rr.prior_log_densities[j] > cons[j].log_epsilon) ++rep.violations;
      }
      const StepResult r = env.step(act);
      ret += r.reward;
      ++step;
      if (record)
        record->rows.push_back({step, r.next.x, r.next.y, act[0], act[1], r.reward, tag});
      counts[static_cast<int>(env.corridor_of(r.next.x, r.next.y))]++;
      if (r.terminal) {
        if (r.reward > 0.0) ++successes;
        break;
      }
    }
    total += ret;
    int best = 0;
    for (int c = 1; c < 3; ++c)
      if (counts[c] > counts[best]) best = c;
    rep.corridor_votes[counts[best] == 0 ? 3 : best]++;
  }
  rep.mean_return = episodes ? total / static_cast<double>(episodes) : 0.0;
  rep.success_rate = episodes ? static_cast<double>(successes) / episodes : 0.0;
  return rep;
}

inline std::string eval_summary_text(const EvalReport& r, const std::string& name) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%s: episodes=%zu mean_return=%.3f success_rate=%.3f corridors "
                "L=%zu M=%zu R=%zu none=%zu majority=%s\n",
                name.c_str(), r.episodes, r.mean_return, r.success_rate,
                r.corridor_votes[0], r.corridor_votes[1], r.corridor_votes[2],
                r.corridor_votes[3], corridor_name(majority_corridor(r)));
  std::string out = buf;
  if (r.rejection.calls > 0) {
    std::snprintf(buf, sizeof buf,
                  "%s: rejection mean_attempts=%.3f fallback_rate=%.5f worst=%zu "
                  "violations=%zu\n",
                  name.c_str(), r.rejection.mean_attempts(), r.rejection.fallback_rate(),
                  r.worst_attempts, r.violations);
    out += buf;
  }
  return out;
}

}  // namespace contingent
