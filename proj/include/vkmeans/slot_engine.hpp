// Copyright 2026 The vkmeans Authors.
// SPDX-License-Identifier: Apache-2.0

// Simulated CKKS-style slot engine. Ciphertexts are plain vectors of doubles
// tagged with the multiplicative depth they have consumed; every operation
// follows the slot semantics of a leveled scheme and enforces the depth budget.

#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vkmeans/chebyshev.hpp"

namespace vkm {

class DepthBudgetError : public std::runtime_error {
 public:
  DepthBudgetError(const std::string& op, int required, int budget)
      : std::runtime_error("depth budget exceeded in " + op + ": needs " + std::to_string(required) +
                           " levels, budget is " + std::to_string(budget)),
        op_(op),
        required_(required),
        budget_(budget) {}
  const std::string& op() const { return op_; }
  int required() const { return required_; }
  int budget() const { return budget_; }

 private:
  std::string op_;
  int required_;
  int budget_;
};

enum class SlotKind { ciphertext, plaintext };

struct SizeModel {
  double bytes_per_slot_per_level = 8.0;
  double base_overhead_bytes = 0.0;
};

struct EngineConfig {
  std::size_t slot_count = std::size_t{1} << 14;
  int depth_budget = 20;
  double approx_perturbation = 0.0;
  SizeModel size_model;
  std::uint64_t perturbation_seed = 0x5eed5eedULL;

  void validate() const {
    if (slot_count == 0 || !std::has_single_bit(slot_count))
      throw std::invalid_argument("EngineConfig: slot_count must be a power of two");
    if (depth_budget < 0) throw std::invalid_argument("EngineConfig: depth_budget must be >= 0");
    if (!(approx_perturbation >= 0.0) || approx_perturbation >= std::ldexp(1.0, -10))
      throw std::invalid_argument("EngineConfig: approx_perturbation must lie in [0, 2^-10)");
    if (!(size_model.bytes_per_slot_per_level > 0.0))
      throw std::invalid_argument("EngineConfig: bytes_per_slot_per_level must be positive");
    if (!(size_model.base_overhead_bytes >= 0.0))
      throw std::invalid_argument("EngineConfig: base_overhead_bytes must be non-negative");
  }
};

// Two ring polynomials of dimension 2*slot_count, one limb per remaining level
// plus the base limb.
inline std::uint64_t ciphertext_size_bytes(int levels_remaining, const EngineConfig& cfg) {
  if (levels_remaining < 0) throw std::invalid_argument("ciphertext_size_bytes: negative levels");
  const double bytes = cfg.size_model.base_overhead_bytes +
                       2.0 * static_cast<double>(cfg.slot_count) * 2.0 *
                           (static_cast<double>(levels_remaining) + 1.0) *
                           cfg.size_model.bytes_per_slot_per_level;
  return static_cast<std::uint64_t>(std::ceil(bytes));
}

class SlotVector {
 public:
  SlotVector() = default;
  SlotVector(std::vector<double> slots, int depth_consumed, SlotKind kind)
      : data_(std::make_shared<const std::vector<double>>(std::move(slots))),
        depth_(kind == SlotKind::plaintext ? 0 : depth_consumed),
        kind_(kind) {
    if (depth_consumed < 0) throw std::invalid_argument("SlotVector: negative depth");
  }

  std::span<const double> slots() const {
    return data_ ? std::span<const double>(*data_) : std::span<const double>();
  }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  std::size_t size() const { return data_ ? data_->size() : 0; }
  int depth_consumed() const { return depth_; }
  SlotKind kind() const { return kind_; }
  bool is_ciphertext() const { return kind_ == SlotKind::ciphertext; }

 private:
  std::shared_ptr<const std::vector<double>> data_;
  int depth_ = 0;
  SlotKind kind_ = SlotKind::plaintext;
};

struct OpCounts {
  std::uint64_t rotations = 0;
  std::uint64_t multiplications = 0;  // ciphertext-involving only
  std::uint64_t additions = 0;
  std::uint64_t chebyshev_evals = 0;
  int max_depth = 0;
};

class Engine {
 public:
  explicit Engine(EngineConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const EngineConfig& config() const { return cfg_; }
  std::size_t slot_count() const { return cfg_.slot_count; }
  int depth_budget() const { return cfg_.depth_budget; }
  int levels_remaining(const SlotVector& v) const { return cfg_.depth_budget - v.depth_consumed(); }

  SlotVector encrypt(std::span<const double> values) const {
    return SlotVector(padded(values, "encrypt"), 0, SlotKind::ciphertext);
  }
  SlotVector encode(std::span<const double> values) const {
    return SlotVector(padded(values, "encode"), 0, SlotKind::plaintext);
  }
  SlotVector constant(double value) const {
    return SlotVector(std::vector<double>(cfg_.slot_count, value), 0, SlotKind::plaintext);
  }
  std::vector<double> decrypt(const SlotVector& v) const {
    check_len(v, "decrypt");
    return {v.slots().begin(), v.slots().end()};
  }

  SlotVector add(const SlotVector& a, const SlotVector& b) const { return combine(a, b, +1.0, "add"); }
  SlotVector sub(const SlotVector& a, const SlotVector& b) const { return combine(a, b, -1.0, "sub"); }

  SlotVector negate(const SlotVector& a) const {
    check_len(a, "negate");
    std::vector<double> out(a.slots().begin(), a.slots().end());
    for (double& x : out) x = -x;
    return SlotVector(std::move(out), a.depth_consumed(), a.kind());
  }

  SlotVector add_scalar(const SlotVector& a, double s) const {
    check_len(a, "add_scalar");
    std::vector<double> out(a.slots().begin(), a.slots().end());
    for (double& x : out) x += s;
    if (a.is_ciphertext()) ++additions_;
    return SlotVector(std::move(out), a.depth_consumed(), a.kind());
  }

  SlotVector mul(const SlotVector& a, const SlotVector& b) const {
    check_len(a, "mul");
    check_len(b, "mul");
    const bool ct = a.is_ciphertext() || b.is_ciphertext();
    const int depth = ct ? std::max(a.depth_consumed(), b.depth_consumed()) + 1 : 0;
    if (ct) check_depth("mul", depth);
    std::vector<double> out(cfg_.slot_count);
    const auto x = a.slots();
    const auto y = b.slots();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    if (!ct) return SlotVector(std::move(out), 0, SlotKind::plaintext);
    perturb(out);
    ++multiplications_;
    note_depth(depth);
    return SlotVector(std::move(out), depth, SlotKind::ciphertext);
  }

  // Scalar constants are plaintexts, so this costs a level on ciphertexts.
  SlotVector mul_scalar(const SlotVector& a, double s) const {
    check_len(a, "mul_scalar");
    const bool ct = a.is_ciphertext();
    const int depth = ct ? a.depth_consumed() + 1 : 0;
    if (ct) check_depth("mul_scalar", depth);
    std::vector<double> out(a.slots().begin(), a.slots().end());
    for (double& x : out) x *= s;
    if (!ct) return SlotVector(std::move(out), 0, SlotKind::plaintext);
    perturb(out);
    ++multiplications_;
    note_depth(depth);
    return SlotVector(std::move(out), depth, SlotKind::ciphertext);
  }

  // Left rotation: out[j] = v[j + r].
  SlotVector rotate(const SlotVector& v, long long r) const {
    check_len(v, "rotate");
    const auto n = static_cast<long long>(cfg_.slot_count);
    const long long shift = ((r % n) + n) % n;
    std::vector<double> out(cfg_.slot_count);
    const auto x = v.slots();
    std::rotate_copy(x.begin(), x.begin() + shift, x.end(), out.begin());
    if (shift != 0 && v.is_ciphertext()) ++rotations_;
    return SlotVector(std::move(out), v.depth_consumed(), v.kind());
  }

  static int chebyshev_depth_cost(std::size_t n_coeffs) {
    const auto degree = n_coeffs - 1;
    return static_cast<int>(std::bit_width(degree)) + 1;  // ceil(log2(degree+1)) + 1
  }

  // Evaluates sum_j c_j T_j(t) slot-wise, where t is the affine image of the
  // slot value from [lo, hi] onto [-1, 1]. Slots may exceed the interval by at
  // most `tolerance` in t units.
  SlotVector eval_chebyshev(const SlotVector& v, std::span<const double> coeffs, double lo = -1.0,
                            double hi = 1.0, double tolerance = 1e-9) const {
    check_len(v, "eval_chebyshev");
    if (coeffs.size() < 2) throw std::invalid_argument("eval_chebyshev: degree must be >= 1");
    if (!(hi > lo)) throw std::invalid_argument("eval_chebyshev: empty domain");
    const bool ct = v.is_ciphertext();
    const int depth = ct ? v.depth_consumed() + chebyshev_depth_cost(coeffs.size()) : 0;
    if (ct) check_depth("eval_chebyshev", depth);

    const std::size_t n = cfg_.slot_count;
    const double scale = 2.0 / (hi - lo);
    const double shift = -(hi + lo) / (hi - lo);
    std::vector<double> t(n);
    const auto x = v.slots();
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = scale * x[i] + shift;
      if (std::abs(t[i]) > 1.0 + tolerance)
        throw std::domain_error("eval_chebyshev: slot " + std::to_string(i) + " maps to " +
                                std::to_string(t[i]) + ", outside [-1, 1]");
    }
    // Clenshaw, vectorised across slots.
    std::vector<double> b1(n, 0.0);
    std::vector<double> b2(n, 0.0);
    for (std::size_t j = coeffs.size() - 1; j >= 1; --j) {
      const double c = coeffs[j];
      for (std::size_t i = 0; i < n; ++i) {
        const double b0 = 2.0 * t[i] * b1[i] - b2[i] + c;
        b2[i] = b1[i];
        b1[i] = b0;
      }
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = t[i] * b1[i] - b2[i] + coeffs[0];
    if (!ct) return SlotVector(std::move(out), 0, SlotKind::plaintext);
    perturb(out);
    ++chebyshev_evals_;
    note_depth(depth);
    return SlotVector(std::move(out), depth, SlotKind::ciphertext);
  }

  OpCounts counts() const {
    OpCounts c;
    c.rotations = rotations_.load();
    c.multiplications = multiplications_.load();
    c.additions = additions_.load();
    c.chebyshev_evals = chebyshev_evals_.load();
    c.max_depth = max_depth_.load();
    return c;
  }
  void reset_counts() const {
    rotations_ = 0;
    multiplications_ = 0;
    additions_ = 0;
    chebyshev_evals_ = 0;
    max_depth_ = 0;
  }

 private:
  std::vector<double> padded(std::span<const double> values, const char* op) const {
    if (values.size() > cfg_.slot_count)
      throw std::length_error(std::string(op) + ": " + std::to_string(values.size()) +
                              " values exceed slot_count " + std::to_string(cfg_.slot_count));
    std::vector<double> out(cfg_.slot_count, 0.0);
    std::copy(values.begin(), values.end(), out.begin());
    return out;
  }

  void check_len(const SlotVector& v, const char* op) const {
    if (v.size() != cfg_.slot_count)
      throw std::length_error(std::string(op) + ": vector has " + std::to_string(v.size()) +
                              " slots, engine expects " + std::to_string(cfg_.slot_count));
  }

  void check_depth(const char* op, int depth) const {
    if (depth > cfg_.depth_budget) throw DepthBudgetError(op, depth, cfg_.depth_budget);
  }

  void note_depth(int depth) const {
    int cur = max_depth_.load();
    while (depth > cur && !max_depth_.compare_exchange_weak(cur, depth)) {
    }
  }

  SlotVector combine(const SlotVector& a, const SlotVector& b, double sign, const char* op) const {
    check_len(a, op);
    check_len(b, op);
    std::vector<double> out(cfg_.slot_count);
    const auto x = a.slots();
    const auto y = b.slots();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + sign * y[i];
    const bool ct = a.is_ciphertext() || b.is_ciphertext();
    if (ct) ++additions_;
    return SlotVector(std::move(out), std::max(a.depth_consumed(), b.depth_consumed()),
                      ct ? SlotKind::ciphertext : SlotKind::plaintext);
  }

  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Multiplies each slot by (1 + u), u uniform in [-p, p]. The stream is keyed
  // by an operation counter so results do not depend on thread interleaving of
  // unrelated vectors beyond that counter.
  void perturb(std::vector<double>& out) const {
    const double p = cfg_.approx_perturbation;
    if (p == 0.0) return;
    const std::uint64_t op = perturb_ops_.fetch_add(1);
    const std::uint64_t key = splitmix(cfg_.perturbation_seed ^ splitmix(op));
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double u01 = static_cast<double>(splitmix(key + i) >> 11) * 0x1.0p-53;
      out[i] *= 1.0 + p * (2.0 * u01 - 1.0);
    }
  }

  EngineConfig cfg_;
  mutable std::atomic<std::uint64_t> rotations_{0};
  mutable std::atomic<std::uint64_t> multiplications_{0};
  mutable std::atomic<std::uint64_t> additions_{0};
  mutable std::atomic<std::uint64_t> chebyshev_evals_{0};
  mutable std::atomic<std::uint64_t> perturb_ops_{0};
  mutable std::atomic<int> max_depth_{0};
};

}  // namespace vkm
