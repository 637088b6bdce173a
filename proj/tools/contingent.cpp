// Operator entry point: train policy libraries, evaluate entries, run the
// blocked-corridor recovery experiment, and render SVG plots of the results.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "contingent/config.hpp"
#include "contingent/eval.hpp"
#include "contingent/plot.hpp"
#include "contingent/recovery.hpp"
#include "contingent/serialize.hpp"
#include "contingent/trajectory.hpp"

using namespace contingent;
namespace fs = std::filesystem;

namespace {

RunConfig load_run_config(const std::string& config_path, const CLI::Option* seed_opt,
                          std::uint64_t seed_flag, const std::string& out_flag) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = parse_config_text(read_file(config_path));
  if (seed_opt->count() > 0) cfg.seed = seed_flag;
  if (!out_flag.empty()) cfg.out_dir = out_flag;
  cfg.validate();
  return cfg;
}

void apply_blockade_flag(RunConfig& cfg, const std::string& blockade) {
  if (blockade.empty()) return;
  cfg.blockade = {false, false, false};
  if (blockade == "none") return;
  if (blockade == "left")
    cfg.blockade[0] = true;
  else if (blockade == "middle")
    cfg.blockade[1] = true;
  else if (blockade == "right")
    cfg.blockade[2] = true;
  else
    throw ConfigError("unknown blockade '" + blockade + "' (none|left|middle|right)");
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / name).string();
}

void cmd_train(const RunConfig& cfg) {
  const Env env = cfg.make_env();
  PolicyLibrary lib = build_library(env, cfg.sac, cfg.novelty, cfg.seed);
  const std::uint64_t hash = config_hash(cfg);

  write_file(out_path(cfg, "config.txt"), canonical_config_text(cfg));
  write_file(out_path(cfg, "library.txt"), save_library(lib, hash));

  std::string summary = "train: seed=" + std::to_string(cfg.seed) + " entries=" +
                        std::to_string(lib.entries.size()) + " config=" +
                        detail::hash_hex(hash) + "\n";
  std::vector<Corridor> majorities;
  for (std::size_t k = 0; k < lib.entries.size(); ++k) {
    const LibraryEntry& e = lib.entries[k];
    const std::string name = "policy_" + std::to_string(k + 1);
    write_file(out_path(cfg, name + ".train.tsv"), training_log_text(e.episodes));
    write_file(out_path(cfg, name + ".eval.tsv"), eval_log_text(e.evals));

    TrajectoryFile tf;
    tf.config_hash = hash;
    const EvalReport rep =
        run_policy_eval(env, lib, k, 100, cfg.seed, cfg.novelty.max_attempts, true, &tf);
    write_file(out_path(cfg, name + ".rollouts.traj"), save_trajectory(tf));

    char line[192];
    std::snprintf(line, sizeof line,
                  "%s: steps=%zu converged=%d epsilon=%.6g train_mean_attempts=%.3f "
                  "train_fallback_rate=%.5f\n",
                  name.c_str(), e.steps_used, int(e.converged), e.epsilon, e.mean_attempts,
                  e.fallback_rate);
    summary += line;
    summary += eval_summary_text(rep, name);
    majorities.push_back(majority_corridor(rep));
  }

  bool distinct = true;
  for (std::size_t i = 0; i < majorities.size(); ++i)
    for (std::size_t j = i + 1; j < majorities.size(); ++j)
      if (majorities[i] == majorities[j] || majorities[i] == Corridor::none) distinct = false;
  summary += std::string("pairwise_distinct_majorities ") + (distinct ? "true" : "false") +
             "\n";
  write_file(out_path(cfg, "summary.txt"), summary);
  std::fputs(summary.c_str(), stdout);
}

void cmd_eval(const RunConfig& cfg, const std::string& library_path, std::size_t index,
              std::size_t episodes, bool no_fallback) {
  const PolicyLibrary lib = load_library(read_file(library_path));
  const Env env = cfg.make_env();
  TrajectoryFile tf;
  tf.config_hash = config_hash(cfg);
  const EvalReport rep = run_policy_eval(env, lib, index, episodes, cfg.seed,
                                         cfg.novelty.max_attempts, !no_fallback, &tf);
  const std::string name = index == 0 ? "pi_1" : "pihat_" + std::to_string(index + 1);
  write_file(out_path(cfg, "eval_" + name + ".traj"), save_trajectory(tf));
  const std::string summary = eval_summary_text(rep, name);
  write_file(out_path(cfg, "eval_" + name + ".txt"), summary);
  std::fputs(summary.c_str(), stdout);
}

void cmd_recover(const RunConfig& cfg, const std::string& library_path, std::size_t pairs) {
  const PolicyLibrary lib = load_library(read_file(library_path));
  if (lib.entries.size() < 2)
    throw ConfigError("recover: library needs the optimal policy plus at least one "
                      "contingency entry");
  const Env env = cfg.make_env();
  if (lib.geometry_fingerprint != geometry_fingerprint(env.geometry()))
    throw ConfigError("recover: library was trained on a different maze geometry");

  std::string table =
      "seed\tcontingent_success\tcontingent_rounds\tcontingent_steps\tcontingent_outcome"
      "\trandom_success\trandom_rounds\trandom_steps\trandom_outcome\n";
  std::size_t succ_c = 0, succ_r = 0, wins = 0, losses = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::uint64_t run_seed = cfg.seed + i;
    const RecoveryTrace a = run_with_recovery(env, lib, cfg.recovery, run_seed);
    const RecoveryTrace b =
        run_with_random_recovery(env, lib.entries[0].actor, cfg.recovery, run_seed);
    succ_c += a.success;
    succ_r += b.success;
    wins += a.success && !b.success;
    losses += b.success && !a.success;
    char row[192];
    std::snprintf(row, sizeof row, "%llu\t%d\t%zu\t%zu\t%s\t%d\t%zu\t%zu\t%s\n",
                  static_cast<unsigned long long>(run_seed), int(a.success), a.rounds_used,
                  a.env_steps, outcome_name(a.outcome), int(b.success), b.rounds_used,
                  b.env_steps, outcome_name(b.outcome));
    table += row;
    if (i == 0) {
      std::ostringstream ta, tb;
      write_trace(ta, a);
      write_trace(tb, b);
      write_file(out_path(cfg, "recovery_contingent.trace"), ta.str());
      write_file(out_path(cfg, "recovery_random.trace"), tb.str());
    }
  }
  write_file(out_path(cfg, "recovery_pairs.tsv"), table);

  char buf[256];
  std::snprintf(buf, sizeof buf,
                "recover: pairs=%zu contingent=%zu/%zu random=%zu/%zu wins=%zu losses=%zu "
                "sign_test_p=%.6g\n",
                pairs, succ_c, pairs, succ_r, pairs, wins, losses,
                sign_test_one_sided(wins, losses));
  write_file(out_path(cfg, "recovery_summary.txt"), buf);
  std::fputs(buf, stdout);
}

void cmd_plot(const RunConfig& cfg, const std::vector<std::string>& inputs,
              const std::string& out_file) {
  const Env env = cfg.make_env();
  std::vector<PlotPath> paths;
  std::vector<PlotMarker> markers;
  for (const std::string& p : inputs) {
    const std::string text = read_file(p);
    if (text.rfind("contingent-trajectory", 0) == 0) {
      const TrajectoryFile tf = load_trajectory(text);
      std::vector<PlotPath> ep = paths_from_trajectory(tf);
      paths.insert(paths.end(), ep.begin(), ep.end());
    } else if (text.rfind("step\t", 0) == 0) {
      paths_from_trace_text(text, paths, markers);
    } else {
      throw IoError(p + ": neither a trajectory file nor a recovery trace");
    }
  }
  const std::string svg = render_svg(env.geometry(), paths, markers);
  const std::string target = out_file.empty() ? out_path(cfg, "plot.svg") : out_file;
  if (!target.empty()) {
    const fs::path parent = fs::path(target).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
  }
  write_file(target, svg);
  std::printf("plot: %zu paths, %zu markers -> %s\n", paths.size(), markers.size(),
              target.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"policy libraries under novelty constraints, with contingency recovery"};
  app.require_subcommand(1);

  std::string config_path, out_flag, library_path, blockade_flag, plot_out;
  std::uint64_t seed_flag = 0;
  std::size_t policy_index = 0, episodes = 100, pairs = 100;
  bool no_fallback = false;
  std::vector<std::string> plot_inputs;

  std::function<void()> run;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration file (defaults when absent)")
        ->check(CLI::ExistingFile);
    CLI::Option* seed = sub->add_option("--seed", seed_flag, "override the config seed");
    sub->add_option("--out", out_flag, "override the output directory");
    return seed;
  };

  CLI::App* train = app.add_subcommand("train", "train a policy library");
  {
    CLI::Option* seed = add_common(train);
    train->callback([&, seed] {
      cmd_train(load_run_config(config_path, seed, seed_flag, out_flag));
    });
  }

  CLI::App* eval = app.add_subcommand("eval", "evaluate one library entry");
  {
    CLI::Option* seed = add_common(eval);
    eval->add_option("--library", library_path, "library file")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--policy", policy_index, "entry index (0 = optimal policy)");
    eval->add_option("--episodes", episodes, "episodes to roll out");
    eval->add_flag("--no-fallback", no_fallback,
                   "abort instead of executing a fallback action when rejection "
                   "sampling exhausts its budget");
    eval->callback([&, seed] {
      cmd_eval(load_run_config(config_path, seed, seed_flag, out_flag), library_path,
               policy_index, episodes, no_fallback);
    });
  }

  CLI::App* recover = app.add_subcommand("recover", "paired recovery experiment");
  {
    CLI::Option* seed = add_common(recover);
    recover->add_option("--library", library_path, "library file")
        ->required()
        ->check(CLI::ExistingFile);
    recover->add_option("--blockade", blockade_flag,
                        "corridor to block: none|left|middle|right (overrides config)");
    recover->add_option("--pairs", pairs, "matched seed pairs to run");
    recover->callback([&, seed] {
      RunConfig cfg = load_run_config(config_path, seed, seed_flag, out_flag);
      apply_blockade_flag(cfg, blockade_flag);
      cmd_recover(cfg, library_path, pairs);
    });
  }

  CLI::App* plot = app.add_subcommand("plot", "render trajectories over the maze");
  {
    CLI::Option* seed = add_common(plot);
    plot->add_option("inputs", plot_inputs, "trajectory files and recovery traces")
        ->check(CLI::ExistingFile);
    plot->add_option("--blockade", blockade_flag,
                     "corridor to draw blocked: none|left|middle|right");
    plot->add_option("--svg", plot_out, "output image path (default <out>/plot.svg)");
    plot->callback([&, seed] {
      RunConfig cfg = load_run_config(config_path, seed, seed_flag, out_flag);
      apply_blockade_flag(cfg, blockade_flag);
      cmd_plot(cfg, plot_inputs, plot_out);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const IoError& e) {
    std::fprintf(stderr, "file error: %s\n", e.what());
    return 1;
  } catch (const StructuralError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
