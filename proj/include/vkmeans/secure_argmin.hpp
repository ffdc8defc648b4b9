// Copyright 2026 The vkmeans Authors.
// SPDX-License-Identifier: Apache-2.0

// Packed argmin over encrypted k x k blocks: polynomial comparison, ranking
// by column sums and the rank-1 indicator polynomial.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vkmeans/chebyshev.hpp"
#include "vkmeans/packed_matrix.hpp"
#include "vkmeans/slot_engine.hpp"

namespace vkm {

struct SignApproxConfig {
  // Odd degree of the Chebyshev interpolant.
  int degree = 511;
  // The interpolated function is erf(steepness * x); a finite slope keeps the
  // interpolant free of Gibbs overshoot away from 0. At degree 511, 118
  // roughly minimises the worst error for |x| >= 2 * tie_margin (about 6e-4).
  double steepness = 118.0;
  // Differences are multiplied by this before the comparison.
  double input_scale = 1.0;
  // |difference| * input_scale below this is an unreliable comparison.
  double tie_margin = 0.01;

  void validate() const {
    if (degree < 1 || degree % 2 == 0) throw std::invalid_argument("SignApproxConfig: degree must be odd");
    if (!(steepness > 0.0)) throw std::invalid_argument("SignApproxConfig: steepness must be positive");
    if (!(input_scale > 0.0)) throw std::invalid_argument("SignApproxConfig: input_scale must be positive");
    if (!(tie_margin > 0.0) || tie_margin >= 1.0)
      throw std::invalid_argument("SignApproxConfig: tie_margin must lie in (0, 1)");
  }
};

// Chebyshev coefficients of the smoothed sign on [-1, 1]. Even coefficients
// are zeroed so the series is exactly odd.
class SignSeries {
 public:
  static std::shared_ptr<const SignSeries> get(int degree, double steepness) {
    static std::mutex mu;
    static std::map<std::pair<int, double>, std::shared_ptr<const SignSeries>> cache;
    const std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{degree, steepness}];
    if (!slot) slot = std::shared_ptr<const SignSeries>(new SignSeries(degree, steepness));
    return slot;
  }
  static std::shared_ptr<const SignSeries> get(const SignApproxConfig& cfg) {
    return get(cfg.degree, cfg.steepness);
  }

  const std::vector<double>& sign_coeffs() const { return sign_; }
  const std::vector<double>& cmp_coeffs() const { return cmp_; }
  double sign(double x) const { return clenshaw(sign_, x); }
  double cmp(double x) const { return clenshaw(cmp_, x); }

 private:
  SignSeries(int degree, double steepness) {
    sign_ = chebyshev_interpolate([steepness](double x) { return std::erf(steepness * x); }, degree);
    for (std::size_t j = 0; j < sign_.size(); j += 2) sign_[j] = 0.0;
    cmp_ = sign_;
    for (double& c : cmp_) c *= 0.5;
    cmp_[0] = 0.5;
  }
  std::vector<double> sign_;
  std::vector<double> cmp_;
};

// ~1 where a > b, ~0 where a < b, exactly 0.5 where a == b.
inline SlotVector cmp(const Engine& eng, const SlotVector& a, const SlotVector& b,
                      const SignApproxConfig& cfg, double tolerance = 1e-9) {
  cfg.validate();
  const auto series = SignSeries::get(cfg);
  const double half_width = 1.0 / cfg.input_scale;
  return eng.eval_chebyshev(eng.sub(a, b), series->cmp_coeffs(), -half_width, half_width, tolerance);
}

// cmp on a difference already scaled into [-1, 1].
inline SlotVector cmp_scaled(const Engine& eng, const SlotVector& difference, const SignApproxConfig& cfg,
                             double tolerance = 1e-9) {
  cfg.validate();
  const auto series = SignSeries::get(cfg);
  return eng.eval_chebyshev(difference, series->cmp_coeffs(), -1.0, 1.0, tolerance);
}

// Product of all leaves; always multiplies the two shallowest operands next,
// which gives the minimum achievable depth.
inline SlotVector product_tree(const Engine& eng, std::vector<SlotVector> leaves) {
  if (leaves.empty()) throw std::invalid_argument("product_tree: no leaves");
  auto deeper = [](const SlotVector& x, const SlotVector& y) { return x.depth_consumed() > y.depth_consumed(); };
  std::make_heap(leaves.begin(), leaves.end(), deeper);
  while (leaves.size() > 1) {
    std::pop_heap(leaves.begin(), leaves.end(), deeper);
    SlotVector a = std::move(leaves.back());
    leaves.pop_back();
    std::pop_heap(leaves.begin(), leaves.end(), deeper);
    SlotVector b = std::move(leaves.back());
    leaves.pop_back();
    leaves.push_back(eng.mul(a, b));
    std::push_heap(leaves.begin(), leaves.end(), deeper);
  }
  return leaves.front();
}

// prod_{j=2..m} (1 - j)
inline double phi_denominator(int m) {
  double d = 1.0;
  for (int j = 2; j <= m; ++j) d *= 1.0 - j;
  return d;
}

// Scalar reference of the indicator polynomial.
inline double phi_scalar(double x, int m) {
  double p = 1.0;
  for (int j = 2; j <= m; ++j) p *= x - j;
  return p / phi_denominator(m);
}

inline int ceil_log2(int x) { return x <= 1 ? 0 : static_cast<int>(std::bit_width(static_cast<unsigned>(x - 1))); }

// Ranks in the first row of every block; other slots are zero.
inline SlotVector rank(const PackedOps& ops, const SlotVector& v_row, const SlotVector& v_col,
                       const SignApproxConfig& cfg) {
  const Engine& eng = ops.engine();
  const SlotVector c = cmp(eng, v_row, v_col, cfg);
  const SlotVector& m0 = ops.axis_mask(Axis::row, 0);
  return eng.add(eng.mul(ops.sum_unmasked(c, Axis::row), m0), eng.mul(m0, eng.constant(0.5)));
}

// phi evaluated slot-wise on ranks in [1, m].
inline SlotVector indicator_phi(const Engine& eng, const SlotVector& r, int m) {
  if (m < 2) throw std::invalid_argument("indicator_phi: need m >= 2");
  std::vector<SlotVector> leaves;
  leaves.push_back(eng.mul_scalar(eng.add_scalar(r, -2.0), 1.0 / phi_denominator(m)));
  for (int j = 3; j <= m; ++j) leaves.push_back(eng.add_scalar(r, -static_cast<double>(j)));
  return product_tree(eng, std::move(leaves));
}

namespace detail {

// Shared tail of the packed argmin: c holds cmp(d_col, d_row) per slot.
inline SlotVector argmin_from_comparisons(const PackedOps& ops, const SlotVector& c) {
  const Engine& eng = ops.engine();
  const int m = ops.layout().block_dim;
  const SlotVector u = ops.sum_unmasked(c, Axis::row);

  const SlotVector& m0 = ops.axis_mask(Axis::row, 0);
  const double norm = 1.0 / phi_denominator(m);
  const auto mask_vals = m0.slots();
  std::vector<double> scaled(mask_vals.size());
  std::vector<double> x_off(mask_vals.size());
  std::vector<double> y_off(mask_vals.size());
  for (std::size_t i = 0; i < mask_vals.size(); ++i) {
    const bool first_row = mask_vals[i] != 0.0;
    scaled[i] = first_row ? norm : 0.0;
    x_off[i] = first_row ? 0.5 : 2.0;
    y_off[i] = first_row ? norm * (0.5 - 2.0) : 0.0;
  }
  const SlotVector x = eng.add(eng.mul(u, m0), eng.encode(x_off));                  // ranks, 2 elsewhere
  const SlotVector y = eng.add(eng.mul(u, eng.encode(scaled)), eng.encode(y_off));  // norm * (x - 2)

  std::vector<SlotVector> leaves{y};
  for (int j = 3; j <= m; ++j) leaves.push_back(eng.add_scalar(x, -static_cast<double>(j)));
  return product_tree(eng, std::move(leaves));
}

}  // namespace detail

// One-hot argmin per block in the first row, zeros elsewhere. The rank step
// writes 2 (a root of phi) outside the first row and folds phi's
// normalisation into a second mask of the same depth, so the whole thing
// costs depth(cmp) + 1 + ceil(log2(M - 1)).
inline SlotVector argmin_packed(const PackedOps& ops, const SlotVector& distances_row,
                                const SlotVector& distances_col, const SignApproxConfig& cfg) {
  return detail::argmin_from_comparisons(ops, cmp(ops.engine(), distances_row, distances_col, cfg));
}

// Same, from differences d_col - d_row already scaled into [-1, 1].
inline SlotVector argmin_packed_scaled(const PackedOps& ops, const SlotVector& scaled_difference,
                                       const SignApproxConfig& cfg, double tolerance = 1e-9) {
  return detail::argmin_from_comparisons(ops, cmp_scaled(ops.engine(), scaled_difference, cfg, tolerance));
}

// k = 2 fast path on compact encodings: ~1 where c2 is strictly closer.
inline SlotVector argmin_two(const Engine& eng, const SlotVector& dist1, const SlotVector& dist2,
                             const SignApproxConfig& cfg) {
  return cmp(eng, dist1, dist2, cfg);
}

inline int cmp_depth(const SignApproxConfig& cfg) {
  return Engine::chebyshev_depth_cost(static_cast<std::size_t>(cfg.degree) + 1);
}

// Depth added by argmin_packed on top of its inputs.
inline int argmin_packed_depth(int block_dim, const SignApproxConfig& cfg) {
  return cmp_depth(cfg) + 1 + ceil_log2(block_dim - 1);
}

}  // namespace vkm
