#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "contingent/env.hpp"
#include "contingent/errors.hpp"
#include "contingent/novelty.hpp"
#include "contingent/recovery.hpp"
#include "contingent/sac.hpp"

namespace contingent {

inline constexpr int kConfigVersion = 1;

// Everything a run depends on, in one flat document. A run is a pure function
// of this struct plus the code version, so the canonical text below is hashed
// into every output file header.
struct RunConfig {
  SacHyper sac;
  LibraryBuildConfig novelty;
  RecoveryConfig recovery;
  std::array<bool, 3> blockade{false, false, false};
  double start_x = 0.5, start_y = 0.075;
  double goal_x = 0.5, goal_y = 0.925, goal_r = 0.05;
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  Env make_env() const {
    WorldGeometry g = WorldGeometry::standard();
    g.blockade_active = blockade;
    g.start_x = start_x;
    g.start_y = start_y;
    g.goal_x = goal_x;
    g.goal_y = goal_y;
    g.goal_r = goal_r;
    if (g.collides(g.start_x, g.start_y))
      throw ConfigError("config: start position is inside an obstacle");
    if (!(g.goal_r > 0.0)) throw ConfigError("config: goal radius must be positive");
    return Env(g);
  }

  void validate() const {
    sac.validate();
    novelty.validate();
    recovery.validate();
    make_env();
  }
};

namespace detail {

// Single source of truth for the key set: parsing, canonical emission and the
// config hash all walk this list.
template <class V>
void visit_config(RunConfig& c, V&& v) {
  v("sac.gamma", c.sac.gamma);
  v("sac.alpha", c.sac.alpha);
  v("sac.tau", c.sac.tau);
  v("sac.batch_size", c.sac.batch_size);
  v("sac.buffer_capacity", c.sac.buffer_capacity);
  v("sac.lr_actor", c.sac.lr_actor);
  v("sac.lr_critic", c.sac.lr_critic);
  v("sac.total_steps", c.sac.total_steps);
  v("sac.warmup_steps", c.sac.warmup_steps);
  v("sac.hidden", c.sac.hidden);
  v("sac.single_critic", c.sac.single_critic);
  v("sac.paper_literal_no_alpha", c.sac.paper_literal_no_alpha);
  v("sac.kl_branch_literal", c.sac.kl_branch_literal);
  v("sac.eval_every", c.sac.eval_every);
  v("sac.eval_episodes", c.sac.eval_episodes);
  v("sac.convergence_window", c.sac.convergence_window);
  v("sac.convergence_tol", c.sac.convergence_tol);
  v("sac.min_convergence_return", c.sac.min_convergence_return);
  v("novelty.n_policies", c.novelty.n_policies);
  v("novelty.quantile", c.novelty.quantile);
  v("novelty.kappa", c.novelty.kappa);
  v("novelty.max_attempts", c.novelty.max_attempts);
  v("novelty.calib_states", c.novelty.calib_states);
  v("recovery.k", c.recovery.k);
  v("recovery.m", c.recovery.m);
  v("recovery.delta_stuck", c.recovery.delta_stuck);
  v("recovery.stuck_window", c.recovery.stuck_window);
  v("recovery.max_rounds", c.recovery.max_rounds);
  v("recovery.step_cap", c.recovery.step_cap);
  v("recovery.rejection_attempts", c.recovery.rejection_attempts);
  v("recovery.random_segments", c.recovery.random_segments);
  v("env.blockade_left", c.blockade[0]);
  v("env.blockade_middle", c.blockade[1]);
  v("env.blockade_right", c.blockade[2]);
  v("env.start_x", c.start_x);
  v("env.start_y", c.start_y);
  v("env.goal_x", c.goal_x);
  v("env.goal_y", c.goal_y);
  v("env.goal_r", c.goal_r);
  v("seed", c.seed);
  v("out_dir", c.out_dir);
}

inline std::string format_value(double x) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}
// size_t covers the seed too; both are unsigned 64-bit here.
inline std::string format_value(std::size_t x) { return std::to_string(x); }
inline std::string format_value(bool x) { return x ? "true" : "false"; }
inline std::string format_value(const std::string& x) { return x; }
inline std::string format_value(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(xs[i]);
  }
  return out;
}

inline void parse_value(const std::string& key, const std::string& text, double& out) {
  const char* s = text.c_str();
  char* end = nullptr;
  const double x = std::strtod(s, &end);
  if (end != s + text.size() || text.empty())
    throw ConfigError("config: bad number for " + key + ": '" + text + "'");
  out = x;
}
template <class UInt>
void parse_uint(const std::string& key, const std::string& text, UInt& out) {
  UInt x{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (ec != std::errc{} || p != text.data() + text.size())
    throw ConfigError("config: bad integer for " + key + ": '" + text + "'");
  out = x;
}
inline void parse_value(const std::string& key, const std::string& text, std::size_t& out) {
  parse_uint(key, text, out);
}
inline void parse_value(const std::string& key, const std::string& text, bool& out) {
  if (text == "true" || text == "1")
    out = true;
  else if (text == "false" || text == "0")
    out = false;
  else
    throw ConfigError("config: bad boolean for " + key + ": '" + text + "'");
}
inline void parse_value(const std::string&, const std::string& text, std::string& out) {
  out = text;
}
inline void parse_value(const std::string& key, const std::string& text,
                        std::vector<std::size_t>& out) {
  out.clear();
  if (text.empty()) return;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item =
        text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t x{};
    parse_uint(key, item, x);
    out.push_back(x);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return s.substr(a, b - a);
}

}  // namespace detail

// Full document with every key in declaration order; doubles as the default
// config template and the hashed canonical form.
inline std::string canonical_config_text(const RunConfig& cfg) {
  RunConfig copy = cfg;  // visit_config binds mutable refs; emission only reads
  std::string out = "config_version = " + std::to_string(kConfigVersion) + "\n";
  detail::visit_config(copy, [&](const char* key, auto& ref) {
    out += key;
    out += " = ";
    out += detail::format_value(ref);
    out += "\n";
  });
  return out;
}

// Hash of the canonical text minus the delivery location: two runs that differ
// only in out_dir produce byte-identical artifacts, so they must agree here.
inline std::uint64_t config_hash(const RunConfig& cfg) {
  std::string text = canonical_config_text(cfg);
  const std::size_t cut = text.rfind("out_dir = ");
  if (cut != std::string::npos) text.erase(cut);
  return fnv1a64(text.data(), text.size());
}

// Strict key=value parsing: '#' starts a comment, the first directive must
// declare a supported config_version, unknown or duplicated keys are hard
// errors (a typoed hyperparameter must not silently run on its default).
inline RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::vector<std::string> seen;
  bool version_seen = false;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string line =
        text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
    pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));

    if (!version_seen) {
      if (key != "config_version")
        throw ConfigError("config: first directive must be config_version");
      std::size_t v{};
      detail::parse_uint(key, value, v);
      if (v != static_cast<std::size_t>(kConfigVersion))
        throw ConfigError("config: unsupported config_version " + value);
      version_seen = true;
      continue;
    }
    if (key == "config_version")
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key " + key);

    for (const std::string& s : seen)
      if (s == key)
        throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key " + key);
    seen.push_back(key);

    bool matched = false;
    detail::visit_config(cfg, [&](const char* k, auto& ref) {
      if (!matched && key == k) {
        detail::parse_value(key, value, ref);
        matched = true;
      }
    });
    if (!matched)
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key " + key);
  }
  if (!version_seen) throw ConfigError("config: missing config_version");
  cfg.validate();
  return cfg;
}

}  // namespace contingent
