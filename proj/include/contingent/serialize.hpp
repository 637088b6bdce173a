#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "contingent/errors.hpp"
#include "contingent/mlp.hpp"
#include "contingent/novelty.hpp"
#include "contingent/policy.hpp"
#include "contingent/sac.hpp"

namespace contingent {

// Weights travel as hex floats: every finite double round-trips bit-exactly
// and the text stays locale-proof.
inline std::string hex_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

inline double parse_double_token(const std::string& tok, std::size_t line_no) {
  const char* s = tok.c_str();
  char* end = nullptr;
  const double x = std::strtod(s, &end);
  if (tok.empty() || end != s + tok.size())
    throw IoError("line " + std::to_string(line_no) + ": bad number '" + tok + "'");
  return x;
}

inline std::string format_double(double x) {  // shortest decimal that round-trips
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

namespace detail {

struct LineReader {
  const std::string& text;
  std::size_t pos = 0;
  std::size_t line_no = 0;

  bool next(std::string& out) {
    if (pos > text.size()) return false;
    const std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) {
      out = text.substr(pos);
      pos = text.size() + 1;
    } else {
      out = text.substr(pos, eol - pos);
      pos = eol + 1;
    }
    ++line_no;
    return true;
  }

  // Lines are mandatory in a fixed order; anything else is malformed.
  std::vector<std::string> expect(const std::string& tag, std::size_t n_fields) {
    std::string line;
    if (!next(line)) throw IoError("unexpected end of document, wanted '" + tag + "'");
    std::vector<std::string> tok = split(line);
    if (tok.empty() || tok[0] != tag)
      throw IoError("line " + std::to_string(line_no) + ": expected '" + tag + "', got '" +
                    line + "'");
    if (n_fields != std::size_t(-1) && tok.size() != n_fields + 1)
      throw IoError("line " + std::to_string(line_no) + ": '" + tag + "' wants " +
                    std::to_string(n_fields) + " fields");
    return tok;
  }

  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && line[i] == ' ') ++i;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ') ++j;
      if (j > i) out.push_back(line.substr(i, j - i));
      i = j;
    }
    return out;
  }

  std::size_t parse_size(const std::string& tok) {
    std::size_t x{};
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (ec != std::errc{} || p != tok.data() + tok.size())
      throw IoError("line " + std::to_string(line_no) + ": bad integer '" + tok + "'");
    return x;
  }
  std::uint64_t parse_u64_hex(const std::string& tok) {
    if (tok.size() < 3 || tok[0] != '0' || tok[1] != 'x')
      throw IoError("line " + std::to_string(line_no) + ": bad hash '" + tok + "'");
    std::uint64_t x{};
    auto [p, ec] = std::from_chars(tok.data() + 2, tok.data() + tok.size(), x, 16);
    if (ec != std::errc{} || p != tok.data() + tok.size())
      throw IoError("line " + std::to_string(line_no) + ": bad hash '" + tok + "'");
    return x;
  }
};

inline std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void write_mlp(std::string& out, const MlpParams& p) {
  out += "layers " + std::to_string(p.n_layers()) + "\n";
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    const Tensor& w = p.weights[l];
    const Tensor& b = p.biases[l];
    out += "layer " + std::to_string(w.rows()) + " " + std::to_string(w.cols()) + "\n";
    for (std::size_t i = 0; i < w.rows(); ++i) {
      out += "w";
      for (std::size_t j = 0; j < w.cols(); ++j) {
        out += ' ';
        out += hex_double(w.at(i, j));
      }
      out += '\n';
    }
    out += "b";
    for (std::size_t i = 0; i < b.numel(); ++i) {
      out += ' ';
      out += hex_double(b.data[i]);
    }
    out += '\n';
  }
}

inline MlpParams read_mlp(LineReader& r) {
  MlpParams p;
  const std::size_t n_layers = r.parse_size(r.expect("layers", 1)[1]);
  for (std::size_t l = 0; l < n_layers; ++l) {
    auto head = r.expect("layer", 2);
    const std::size_t rows = r.parse_size(head[1]), cols = r.parse_size(head[2]);
    Tensor w(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      auto tok = r.expect("w", cols);
      for (std::size_t j = 0; j < cols; ++j)
        w.at(i, j) = parse_double_token(tok[1 + j], r.line_no);
    }
    Tensor b(rows);
    auto tok = r.expect("b", rows);
    for (std::size_t i = 0; i < rows; ++i) b.data[i] = parse_double_token(tok[1 + i], r.line_no);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  p.check();
  return p;
}

}  // namespace detail

// The library file carries deployment state: actors, thresholds and
// provenance. Critics and training logs live in their own artifacts, so
// round-trip identity is at the file level (save(load(s)) == s).
inline std::string save_library(const PolicyLibrary& lib, std::uint64_t config_hash) {
  std::string out = "contingent-library v1\n";
  out += "config_hash " + detail::hash_hex(config_hash) + "\n";
  out += "geometry " + detail::hash_hex(lib.geometry_fingerprint) + "\n";
  out += "master_seed " + std::to_string(lib.master_seed) + "\n";
  out += "entries " + std::to_string(lib.entries.size()) + "\n";
  for (std::size_t i = 0; i < lib.entries.size(); ++i) {
    const LibraryEntry& e = lib.entries[i];
    out += "entry " + std::to_string(i) + "\n";
    out += "seed " + std::to_string(e.seed) + "\n";
    out += "epsilon " + hex_double(e.epsilon) + "\n";
    out += "steps_used " + std::to_string(e.steps_used) + "\n";
    out += std::string("converged ") + (e.converged ? "1" : "0") + "\n";
    out += "mean_attempts " + hex_double(e.mean_attempts) + "\n";
    out += "fallback_rate " + hex_double(e.fallback_rate) + "\n";
    out += "actor " + std::to_string(e.actor.obs_dim) + " " +
           std::to_string(e.actor.action_dim) + "\n";
    detail::write_mlp(out, e.actor.net);
    out += "end_entry\n";
  }
  out += "end_library\n";
  return out;
}

inline PolicyLibrary load_library(const std::string& text,
                                  std::uint64_t* config_hash_out = nullptr) {
  detail::LineReader r{text};
  const std::vector<std::string> head = r.expect("contingent-library", 1);
  if (head[1] != "v1") throw IoError("unsupported library version '" + head[1] + "'");
  PolicyLibrary lib;
  const std::uint64_t cfg_hash = r.parse_u64_hex(r.expect("config_hash", 1)[1]);
  if (config_hash_out) *config_hash_out = cfg_hash;
  lib.geometry_fingerprint = r.parse_u64_hex(r.expect("geometry", 1)[1]);
  lib.master_seed = r.parse_size(r.expect("master_seed", 1)[1]);
  const std::size_t n = r.parse_size(r.expect("entries", 1)[1]);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx = r.parse_size(r.expect("entry", 1)[1]);
    if (idx != i)
      throw IoError("line " + std::to_string(r.line_no) + ": entries out of order");
    LibraryEntry e;
    e.seed = r.parse_size(r.expect("seed", 1)[1]);
    e.epsilon = parse_double_token(r.expect("epsilon", 1)[1], r.line_no);
    e.steps_used = r.parse_size(r.expect("steps_used", 1)[1]);
    e.converged = r.parse_size(r.expect("converged", 1)[1]) != 0;
    e.mean_attempts = parse_double_token(r.expect("mean_attempts", 1)[1], r.line_no);
    e.fallback_rate = parse_double_token(r.expect("fallback_rate", 1)[1], r.line_no);
    auto dims = r.expect("actor", 2);
    e.actor.obs_dim = r.parse_size(dims[1]);
    e.actor.action_dim = r.parse_size(dims[2]);
    e.actor.net = detail::read_mlp(r);
    if (e.actor.net.in_dim() != e.actor.obs_dim ||
        e.actor.net.out_dim() != 2 * e.actor.action_dim)
      throw IoError("line " + std::to_string(r.line_no) + ": actor shape mismatch");
    r.expect("end_entry", 0);
    lib.entries.push_back(std::move(e));
  }
  r.expect("end_library", 0);
  return lib;
}

// Append-only record streams from training, one row per episode / eval point.
inline std::string training_log_text(const std::vector<TrainLogRow>& rows) {
  std::string out = "env_step\tepisode_return\tcritic_loss\tactor_loss\tentropy\n";
  for (const TrainLogRow& r : rows) {
    out += std::to_string(r.env_step);
    out += '\t';
    out += format_double(r.episode_return);
    out += '\t';
    out += format_double(r.critic_loss);
    out += '\t';
    out += format_double(r.actor_loss);
    out += '\t';
    out += format_double(r.entropy);
    out += '\n';
  }
  return out;
}

inline std::string eval_log_text(const std::vector<EvalLogRow>& rows) {
  std::string out = "env_step\tmean_return\tsuccess_rate\n";
  for (const EvalLogRow& r : rows) {
    out += std::to_string(r.env_step);
    out += '\t';
    out += format_double(r.mean_return);
    out += '\t';
    out += format_double(r.success_rate);
    out += '\n';
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out.flush()) throw IoError("short write to " + path);
}

}  // namespace contingent
