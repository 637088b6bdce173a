#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "contingent/env.hpp"
#include "contingent/errors.hpp"
#include "contingent/serialize.hpp"

namespace contingent {

// One recorded env interaction. Episodes start with a "reset" row (step 0, no
// action, no reward); every later row holds the action that produced it.
struct TrajectoryRow {
  std::size_t step = 0;
  double x = 0, y = 0;
  double ax = 0, ay = 0;
  double reward = 0;
  std::string controller = "reset";
};

struct TrajectoryFile {
  std::uint64_t config_hash = 0;
  std::uint64_t geometry = 0;
  std::string policy_id = "unknown";
  std::uint64_t seed = 0;
  std::vector<TrajectoryRow> rows;
};

inline std::string save_trajectory(const TrajectoryFile& tf) {
  std::string out = "contingent-trajectory v1\n";
  out += "config_hash " + detail::hash_hex(tf.config_hash) + "\n";
  out += "geometry " + detail::hash_hex(tf.geometry) + "\n";
  out += "policy " + tf.policy_id + "\n";
  out += "seed " + std::to_string(tf.seed) + "\n";
  out += "columns step x y action_x action_y reward controller\n";
  for (const TrajectoryRow& r : tf.rows) {
    out += std::to_string(r.step);
    out += ' ';
    out += hex_double(r.x);
    out += ' ';
    out += hex_double(r.y);
    out += ' ';
    out += hex_double(r.ax);
    out += ' ';
    out += hex_double(r.ay);
    out += ' ';
    out += hex_double(r.reward);
    out += ' ';
    out += r.controller;
    out += '\n';
  }
  out += "end " + std::to_string(tf.rows.size()) + "\n";
  return out;
}

inline TrajectoryFile load_trajectory(const std::string& text) {
  detail::LineReader r{text};
  const auto head = r.expect("contingent-trajectory", 1);
  if (head[1] != "v1") throw IoError("unsupported trajectory version '" + head[1] + "'");
  TrajectoryFile tf;
  tf.config_hash = r.parse_u64_hex(r.expect("config_hash", 1)[1]);
  tf.geometry = r.parse_u64_hex(r.expect("geometry", 1)[1]);
  tf.policy_id = r.expect("policy", 1)[1];
  tf.seed = r.parse_size(r.expect("seed", 1)[1]);
  r.expect("columns", 7);
  std::string line;
  while (r.next(line)) {
    const auto tok = detail::LineReader::split(line);
    if (tok.empty()) throw IoError("line " + std::to_string(r.line_no) + ": empty row");
    if (tok[0] == "end") {
      if (tok.size() != 2 || r.parse_size(tok[1]) != tf.rows.size())
        throw IoError("line " + std::to_string(r.line_no) + ": row count mismatch");
      return tf;
    }
    if (tok.size() != 7)
      throw IoError("line " + std::to_string(r.line_no) + ": want 7 columns, got " +
                    std::to_string(tok.size()));
    TrajectoryRow row;
    row.step = r.parse_size(tok[0]);
    row.x = parse_double_token(tok[1], r.line_no);
    row.y = parse_double_token(tok[2], r.line_no);
    row.ax = parse_double_token(tok[3], r.line_no);
    row.ay = parse_double_token(tok[4], r.line_no);
    row.reward = parse_double_token(tok[5], r.line_no);
    row.controller = tok[6];
    tf.rows.push_back(std::move(row));
  }
  throw IoError("unexpected end of document, wanted 'end'");
}

// Feed the recorded actions back through the env; recorded rewards and
// positions must come back bit for bit.
inline bool replay_trajectory(const TrajectoryFile& tf, Env env) {
  bool in_episode = false;
  for (const TrajectoryRow& r : tf.rows) {
    if (r.controller == "reset") {
      env.set_state(r.x, r.y, 0);
      in_episode = true;
      continue;
    }
    if (!in_episode) throw IoError("trajectory row before any reset row");
    const double act[2] = {r.ax, r.ay};
    const StepResult sr = env.step(act);
    if (sr.reward != r.reward || sr.next.x != r.x || sr.next.y != r.y) return false;
  }
  return true;
}

}  // namespace contingent
