// Copyright 2026 The vkmeans Authors.
// SPDX-License-Identifier: Apache-2.0

// Rotation schedules for replicating one slot across a length-k segment.
//
// A schedule is a straight-line program over shifted copies of the input.
// Item 0 is the input; step s creates item s+1 = z^shift * (sum of signed
// earlier items), where z^t moves content t slots toward higher indices
// (a right rotation by t). The output is a signed sum of items. Each step
// costs exactly one rotation and no multiplication.

#pragma once

#include <bit>
#include <cstdint>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

namespace vkm {

struct ShiftTerm {
  int item = 0;
  int coeff = 1;  // +1 or -1
};

struct ShiftStep {
  std::vector<ShiftTerm> terms;
  int shift = 0;
};

struct ShiftProgram {
  std::vector<ShiftStep> steps;
  std::vector<ShiftTerm> output;
  int rotations() const { return static_cast<int>(steps.size()); }
};

namespace detail {

inline int floor_log2(int x) { return std::bit_width(static_cast<unsigned>(x)) - 1; }

inline std::vector<ShiftTerm> all_items(int count) {
  std::vector<ShiftTerm> t;
  for (int j = 0; j < count; ++j) t.push_back({j, 1});
  return t;
}

// Sparse integer polynomial in z (exponent -> coefficient).
using Poly = std::map<int, int>;

inline void accumulate(Poly& into, const Poly& p, int coeff, int shift) {
  for (const auto& [e, c] : p) {
    const int v = (into[e + shift] += coeff * c);
    if (v == 0) into.erase(e + shift);
  }
}

}  // namespace detail

// Evaluates a program symbolically; used for validation and by the searcher.
inline detail::Poly program_polynomial(const ShiftProgram& p) {
  std::vector<detail::Poly> items{{{0, 1}}};
  for (const auto& s : p.steps) {
    detail::Poly g;
    for (const auto& t : s.terms) detail::accumulate(g, items.at(t.item), t.coeff, 0);
    detail::Poly shifted;
    detail::accumulate(shifted, g, 1, s.shift);
    items.push_back(std::move(shifted));
  }
  detail::Poly out;
  for (const auto& t : p.output) detail::accumulate(out, items.at(t.item), t.coeff, 0);
  return out;
}

// The segmented doubling schedule: double to 2^floor(log k) with direction
// chosen by the bits of the (adjusted) start, then patch the remainder from
// cached partial replications.
inline ShiftProgram segmented_doubling_program(int k, int start) {
  if (k < 1 || start < 0 || start >= k) throw std::out_of_range("replication: bad (k, start)");
  ShiftProgram prog;
  const int m = detail::floor_log2(k);
  int size_left = k - (1 << m);
  const bool first_half = 2 * start < k;
  const int adj_pos = first_half ? start : start - size_left;

  std::vector<std::vector<ShiftTerm>> partial;
  partial.push_back({{0, 1}});
  std::vector<ShiftTerm> r = {{0, 1}};
  for (int l = 0; l < m; ++l) {
    const int shift = ((adj_pos >> l) & 1) ? -(1 << l) : (1 << l);
    prog.steps.push_back({r, shift});
    r.push_back({prog.rotations(), 1});
    partial.push_back(r);
  }
  while (size_left > 0) {
    const int h = detail::floor_log2(size_left);
    const int low = adj_pos & ((1 << h) - 1);
    int shift;
    if (first_half) {
      shift = k - size_left + low - start;
    } else {
      shift = -(start - low - size_left + (1 << h));
    }
    prog.steps.push_back({partial[static_cast<std::size_t>(h)], shift});
    r.push_back({prog.rotations(), 1});
    size_left -= 1 << h;
  }
  prog.output = r;
  return prog;
}

// For k = 2p - 1 (p a power of two): a length-p window A, plus a copy of A
// shifted by p, minus the single doubly covered slot. m + 2 rotations.
inline ShiftProgram window_complement_program(int k, int start) {
  const int p = (k + 1) / 2;
  if (k < 3 || !std::has_single_bit(static_cast<unsigned>(p)) || 2 * p - 1 != k)
    throw std::invalid_argument("window_complement_program: k must be 2^(m+1) - 1");
  if (start < 0 || start >= k) throw std::out_of_range("replication: bad start");
  const int m = detail::floor_log2(p);
  int u;
  int big;
  int single;
  if (start < p) {
    u = start;
    big = p;
    single = k - start;
  } else {
    u = start - (p - 1);
    big = -p;
    single = -(start + 1);
  }
  ShiftProgram prog;
  for (int l = 0; l < m; ++l) {
    const int shift = ((u >> l) & 1) ? -(1 << l) : (1 << l);
    prog.steps.push_back({detail::all_items(l + 1), shift});
  }
  const auto window = detail::all_items(m + 1);
  prog.steps.push_back({window, big});
  prog.steps.push_back({{{0, 1}}, single});
  prog.output = window;
  prog.output.push_back({m + 1, 1});
  prog.output.push_back({m + 2, -1});
  return prog;
}

// Exhaustive search over programs whose steps shift a 0/1 subset sum of
// earlier items and whose output is a 0/1 subset sum. Only meant for very
// short segments.
inline bool search_replication_program(int k, int start, int max_rotations, ShiftProgram& found) {
  detail::Poly target;
  for (int j = 0; j < k; ++j) target[j - start] = 1;

  std::vector<detail::Poly> items{{{0, 1}}};
  std::vector<ShiftStep> steps;

  auto subset_sum = [&](unsigned mask) {
    detail::Poly g;
    for (std::size_t j = 0; j < items.size(); ++j)
      if ((mask >> j) & 1U) detail::accumulate(g, items[j], 1, 0);
    return g;
  };
  auto terms_of = [](unsigned mask, std::size_t n) {
    std::vector<ShiftTerm> t;
    for (std::size_t j = 0; j < n; ++j)
      if ((mask >> j) & 1U) t.push_back({static_cast<int>(j), 1});
    return t;
  };

  auto rec = [&](auto&& self) -> bool {
    const std::size_t n = items.size();
    for (unsigned mask = 1; mask < (1U << n); ++mask) {
      if (subset_sum(mask) == target) {
        found.steps = steps;
        found.output = terms_of(mask, n);
        return true;
      }
    }
    if (static_cast<int>(steps.size()) == max_rotations) return false;
    for (unsigned mask = 1; mask < (1U << n); ++mask) {
      const detail::Poly g = subset_sum(mask);
      bool binary = true;
      for (const auto& [e, c] : g) binary = binary && c == 1;
      if (!binary) continue;
      for (int s = -k; s <= k; ++s) {
        if (s == 0) continue;
        detail::Poly shifted;
        detail::accumulate(shifted, g, 1, s);
        items.push_back(std::move(shifted));
        steps.push_back({terms_of(mask, n), s});
        if (self(self)) return true;
        items.pop_back();
        steps.pop_back();
      }
    }
    return false;
  };
  return rec(rec);
}

inline int replication_rotation_bound(int k) { return 2 * detail::floor_log2(k) - 1; }

// Shortest schedule among the constructions above; cached per (k, start).
inline const ShiftProgram& replication_program(int k, int start) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, ShiftProgram> cache;
  const std::lock_guard<std::mutex> lock(mu);
  const auto key = std::make_pair(k, start);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  ShiftProgram best = segmented_doubling_program(k, start);
  const int p = (k + 1) / 2;
  if (k >= 7 && 2 * p - 1 == k && std::has_single_bit(static_cast<unsigned>(p))) {
    ShiftProgram alt = window_complement_program(k, start);
    if (alt.rotations() < best.rotations()) best = std::move(alt);
  }
  const int bound = replication_rotation_bound(k);
  if (best.rotations() > bound && k <= 8 && bound >= 1) {
    ShiftProgram alt;
    if (search_replication_program(k, start, bound, alt)) best = std::move(alt);
  }
  return cache.emplace(key, std::move(best)).first->second;
}

}  // namespace vkm
