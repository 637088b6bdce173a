#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "contingent/errors.hpp"
#include "contingent/rng.hpp"
#include "contingent/tensor.hpp"

namespace contingent {

struct Transition {
  std::array<double, 2> s;
  std::array<double, 2> a;
  double r = 0;
  std::array<double, 2> s_next;
  bool done = false;  // true terminal (goal), not step-cap truncation
};

// Column-major views of a sampled minibatch.
struct Batch {
  Tensor s;                 // [B x 2]
  Tensor a;                 // [B x 2]
  std::vector<double> r;    // [B]
  Tensor s_next;            // [B x 2]
  std::vector<char> done;   // [B]

  std::size_t size() const { return r.size(); }
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : cap_(capacity) {
    if (capacity == 0) throw StructuralError("replay: zero capacity");
    items_.reserve(capacity);
  }

  void add(const Transition& t) {
    if (items_.size() < cap_) {
      items_.push_back(t);
    } else {
      items_[cursor_] = t;
    }
    cursor_ = (cursor_ + 1) % cap_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return cap_; }
  const Transition& item(std::size_t i) const { return items_[i]; }

  // Uniform with replacement; one rng draw per row, in row order.
  void sample(std::size_t batch, Rng& rng, Batch& out) const {
    if (items_.empty()) throw StructuralError("replay: sampling from empty buffer");
    out.s = Tensor(batch, 2);
    out.a = Tensor(batch, 2);
    out.s_next = Tensor(batch, 2);
    out.r.resize(batch);
    out.done.resize(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      const Transition& t = items_[rng.below(items_.size())];
      out.s.at(i, 0) = t.s[0];
      out.s.at(i, 1) = t.s[1];
      out.a.at(i, 0) = t.a[0];
      out.a.at(i, 1) = t.a[1];
      out.r[i] = t.r;
      out.s_next.at(i, 0) = t.s_next[0];
      out.s_next.at(i, 1) = t.s_next[1];
      out.done[i] = t.done;
    }
  }

 private:
  std::vector<Transition> items_;
  std::size_t cap_;
  std::size_t cursor_ = 0;
};

}  // namespace contingent
