#pragma once

// Independent reference implementations used to check the library's numerics.
// Everything here is deliberately naive: trust comes from simplicity, not speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "contingent/rng.hpp"
#include "contingent/tensor.hpp"

namespace oracle {

using contingent::Rng;
using contingent::Tape;
using contingent::Tensor;

// Central finite difference of f with respect to t.data[idx].
template <typename F>
double fd_partial(F&& f, Tensor& t, std::size_t idx, double h) {
  const double orig = t.data[idx];
  t.data[idx] = orig + h;
  const double fp = f();
  t.data[idx] = orig - h;
  const double fm = f();
  t.data[idx] = orig;
  return (fp - fm) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / denom;
}

// Plain triple-loop reference for Y = X * W^T + b.
inline void matmul_nt_ref(const std::vector<double>& x, const std::vector<double>& w,
                          const std::vector<double>& b, std::vector<double>& y,
                          std::size_t m, std::size_t k, std::size_t n) {
  y.assign(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = b[j];
      for (std::size_t t = 0; t < k; ++t) acc += x[i * k + t] * w[j * k + t];
      y[i * n + j] = acc;
    }
}

// Randomly planned feedforward graph ending in a scalar loss. The plan is
// frozen at construction so the same graph can be re-evaluated during finite
// differencing. Graphs that land within `kink_margin` of a nondifferentiable
// point (clamp edge, min tie) report infeasible and the caller rerolls.
struct RandomGraph {
  enum class Act { None, Tanh, Square, Log1mTanh2 };
  enum class Spice { None, ExpSmall, MulPair, MinPair, SubPair, ClampMid, AtanhOfTanh, SliceConcat };
  enum class Reduce { MeanAll, SumScaled, RowSumMean, MeanOfSquare };

  std::vector<std::size_t> widths;  // includes input width at [0]
  std::vector<Act> acts;
  Spice spice = Spice::None;
  Reduce reduce = Reduce::MeanAll;
  std::size_t batch = 1;

  std::vector<Tensor> weights, biases;  // main trunk
  Tensor side_w, side_b;                // second branch for *Pair spices
  Tensor input;
  double min_margin = 1e30;  // distance to nearest kink seen in last build

  static RandomGraph make(Rng& rng) {
    RandomGraph g;
    g.batch = 1 + rng.below(5);
    const std::size_t n_in = 1 + rng.below(5);
    const std::size_t n_layers = 1 + rng.below(3);
    g.widths.push_back(n_in);
    for (std::size_t l = 0; l < n_layers; ++l) g.widths.push_back(1 + rng.below(7));
    for (std::size_t l = 0; l < n_layers; ++l) {
      const double r = rng.uniform01();
      g.acts.push_back(r < 0.45   ? Act::Tanh
                       : r < 0.65 ? Act::None
                       : r < 0.85 ? Act::Square
                                  : Act::Log1mTanh2);
    }
    const std::size_t spice_pick = rng.below(8);
    g.spice = static_cast<Spice>(spice_pick);
    g.reduce = static_cast<Reduce>(rng.below(4));

    for (std::size_t l = 0; l < n_layers; ++l) {
      Tensor w(g.widths[l + 1], g.widths[l]);
      Tensor b(g.widths[l + 1]);
      for (double& v : w.data) v = rng.uniform(-0.8, 0.8);
      for (double& v : b.data) v = rng.uniform(-0.4, 0.4);
      g.weights.push_back(std::move(w));
      g.biases.push_back(std::move(b));
    }
    const std::size_t out_w = g.widths.back();
    g.side_w = Tensor(out_w, n_in);
    g.side_b = Tensor(out_w);
    for (double& v : g.side_w.data) v = rng.uniform(-0.8, 0.8);
    for (double& v : g.side_b.data) v = rng.uniform(-0.4, 0.4);
    g.input = Tensor(g.batch, n_in);
    for (double& v : g.input.data) v = rng.uniform(-1.0, 1.0);
    return g;
  }

  std::vector<contingent::NamedParam> params() {
    std::vector<contingent::NamedParam> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.push_back({"w" + std::to_string(l), &weights[l]});
      out.push_back({"b" + std::to_string(l), &biases[l]});
    }
    if (spice == Spice::MulPair || spice == Spice::MinPair || spice == Spice::SubPair) {
      out.push_back({"side_w", &side_w});
      out.push_back({"side_b", &side_b});
    }
    return out;
  }

  Tape::Var build(Tape& tape) {
    min_margin = 1e30;
    Tape::Var x = tape.constant(input);
    Tape::Var h = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      h = tape.linear(h, tape.param(weights[l]), tape.param(biases[l]));
      switch (acts[l]) {
        case Act::None: break;
        case Act::Tanh: h = tape.tanh_(h); break;
        case Act::Square: h = tape.square_(tape.scale(h, 0.5)); break;
        case Act::Log1mTanh2: h = tape.log1m_tanh2_(h); break;
      }
    }
    switch (spice) {
      case Spice::None:
        break;
      case Spice::ExpSmall:
        h = tape.exp_(tape.scale(h, 0.2));
        break;
      case Spice::MulPair:
      case Spice::MinPair:
      case Spice::SubPair: {
        Tape::Var side =
            tape.tanh_(tape.linear(x, tape.param(side_w), tape.param(side_b)));
        if (spice == Spice::MulPair) {
          h = tape.mul(h, side);
        } else if (spice == Spice::SubPair) {
          h = tape.sub(h, side);
        } else {
          auto ha = tape.data(h);
          auto hb = tape.data(side);
          for (std::size_t i = 0; i < ha.size(); ++i)
            min_margin = std::min(min_margin, std::fabs(ha[i] - hb[i]));
          h = tape.min_(h, side);
        }
        break;
      }
      case Spice::ClampMid: {
        for (double v : tape.data(h)) {
          min_margin = std::min(min_margin, std::fabs(v - 0.5));
          min_margin = std::min(min_margin, std::fabs(v + 0.5));
        }
        h = tape.clamp_(h, -0.5, 0.5);
        break;
      }
      case Spice::AtanhOfTanh: {
        h = tape.tanh_(h);
        for (double v : tape.data(h))
          min_margin = std::min(min_margin, 0.999 - std::fabs(v));
        h = tape.atanh_clamped(h, 0.999);
        break;
      }
      case Spice::SliceConcat: {
        const std::size_t c = tape.var_cols(h);
        if (c >= 2) {
          Tape::Var left = tape.slice_cols(h, 0, 1);
          Tape::Var right = tape.slice_cols(h, 1, c - 1);
          h = tape.concat_cols(right, left);
        }
        break;
      }
    }
    switch (reduce) {
      case Reduce::MeanAll: return tape.mean_all(h);
      case Reduce::SumScaled: return tape.scale(tape.sum_all(h), 0.25);
      case Reduce::RowSumMean: return tape.mean_all(tape.row_sum(h));
      case Reduce::MeanOfSquare: return tape.mean_all(tape.square_(h));
    }
    return tape.mean_all(h);
  }

  double loss_value() {
    Tape tape;
    Tape::Var loss = build(tape);
    return tape.scalar(loss);
  }
};

struct FdReport {
  double max_rel_err = 0.0;
  std::size_t n_entries = 0;
  std::size_t n_graphs = 0;
};

// Checks `count` feasible random graphs; every parameter entry's tape gradient
// must match the central difference. Returns the worst relative error seen.
inline FdReport fd_check_random_graphs(std::uint64_t seed, std::size_t count,
                                       double h = 1e-5, double kink_margin = 1e-3) {
  FdReport rep;
  std::uint64_t sub = 0;
  while (rep.n_graphs < count) {
    Rng rng(contingent::derive_seed(seed, sub++));
    RandomGraph g = RandomGraph::make(rng);
    const double probe = g.loss_value();
    if (g.min_margin < kink_margin || !std::isfinite(probe)) continue;

    Tape tape;
    Tape::Var loss = g.build(tape);
    tape.backward(loss);
    for (auto& [name, t] : g.params()) {
      t->ensure_grad();
      for (std::size_t i = 0; i < t->numel(); ++i) {
        const double fd = fd_partial([&] { return g.loss_value(); }, *t, i, h);
        rep.max_rel_err = std::max(rep.max_rel_err, rel_err(t->grad[i], fd));
        ++rep.n_entries;
      }
      t->zero_grad();
    }
    ++rep.n_graphs;
  }
  return rep;
}

// Trapezoid quadrature of exp(log_prob) for a 1-D squashed-Gaussian head over
// the open action interval. Should integrate to 1 for any valid density.
template <typename LogProbFn>
double quad_unit_interval(LogProbFn&& lp, std::size_t n_points = 100000) {
  const double dx = 2.0 / static_cast<double>(n_points);
  double acc = 0.0;
  for (std::size_t i = 0; i <= n_points; ++i) {
    const double a = -1.0 + static_cast<double>(i) * dx;
    const double w = (i == 0 || i == n_points) ? 0.5 : 1.0;
    acc += w * std::exp(lp(a));
  }
  return acc * dx;
}

// Density estimate at a point from the empirical CDF of pre-sorted samples:
// central difference of the ECDF, no histogram binning involved.
inline double ecdf_density(const std::vector<double>& sorted, double a, double delta) {
  auto cdf = [&](double x) {
    return static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), x) -
                               sorted.begin()) /
           static_cast<double>(sorted.size());
  };
  return (cdf(a + delta) - cdf(a - delta)) / (2.0 * delta);
}

}  // namespace oracle
