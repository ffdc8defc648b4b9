// Copyright 2026 The vkmeans Authors.
// SPDX-License-Identifier: Apache-2.0

// Gaussian-mechanism bookkeeping for the released cluster sums and counts.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vkmeans/slot_engine.hpp"

namespace vkm {

enum class Composition { simple, advanced, automatic };

struct PrivacyBudget {
  double epsilon_total = 1.0;
  double delta_total = 1e-4;
  int rounds = 10;
  Composition composition = Composition::automatic;

  void validate() const {
    if (!(epsilon_total > 0.0)) throw std::invalid_argument("PrivacyBudget: epsilon must be positive");
    if (!(delta_total > 0.0 && delta_total < 1.0))
      throw std::invalid_argument("PrivacyBudget: delta must lie in (0, 1)");
    if (rounds < 1) throw std::invalid_argument("PrivacyBudget: rounds must be >= 1");
  }
};

struct RoundBudget {
  double epsilon = 0.0;
  double delta = 0.0;
  Composition used = Composition::simple;
};

inline RoundBudget simple_round_budget(const PrivacyBudget& b) {
  return {b.epsilon_total / b.rounds, b.delta_total / (b.rounds + 1), Composition::simple};
}

// eps_total = 2 * eps_r * sqrt(2 r ln(1/delta')), delta' = delta / (r + 1).
inline RoundBudget advanced_round_budget(const PrivacyBudget& b) {
  const double slack = b.delta_total / (b.rounds + 1);
  const double eps = b.epsilon_total / (2.0 * std::sqrt(2.0 * b.rounds * std::log(1.0 / slack)));
  return {eps, b.delta_total * b.rounds / ((b.rounds + 1.0) * b.rounds), Composition::advanced};
}

inline RoundBudget per_round_budget(const PrivacyBudget& b) {
  b.validate();
  RoundBudget out;
  switch (b.composition) {
    case Composition::simple:
      out = simple_round_budget(b);
      break;
    case Composition::advanced:
      out = advanced_round_budget(b);
      break;
    case Composition::automatic: {
      const RoundBudget s = simple_round_budget(b);
      const RoundBudget a = advanced_round_budget(b);
      out = a.epsilon > s.epsilon ? a : s;
      break;
    }
  }
  if (!(out.epsilon > 0.0) || !(out.delta > 0.0))
    throw std::domain_error("per_round_budget: infeasible split");
  return out;
}

inline double gaussian_sigma(double sensitivity, double eps_r, double delta_r) {
  if (!(sensitivity >= 0.0)) throw std::invalid_argument("gaussian_sigma: negative sensitivity");
  if (!(eps_r > 0.0)) throw std::invalid_argument("gaussian_sigma: epsilon must be positive");
  if (!(delta_r > 0.0 && delta_r < 1.0)) throw std::invalid_argument("gaussian_sigma: delta must lie in (0, 1)");
  return std::sqrt(2.0 * std::log(1.25 / delta_r)) * sensitivity / eps_r;
}

struct NoiseScales {
  double sigma_sum = 0.0;
  double sigma_count = 0.0;
  double bound = 1.0;
};

inline double sum_sensitivity(double bound) { return 2.0 * bound; }
inline double count_sensitivity() { return 1.0; }

// swap_factors reproduces the alternative assignment in which the 2B factor
// scales the count noise instead of the sum noise.
inline NoiseScales noise_scales(const RoundBudget& rb, double bound, bool swap_factors = false) {
  if (!(bound > 0.0)) throw std::invalid_argument("noise_scales: bound must be positive");
  NoiseScales s;
  s.bound = bound;
  s.sigma_sum = gaussian_sigma(swap_factors ? count_sensitivity() : sum_sensitivity(bound), rb.epsilon, rb.delta);
  s.sigma_count = gaussian_sigma(swap_factors ? sum_sensitivity(bound) : count_sensitivity(), rb.epsilon, rb.delta);
  return s;
}

// Adds N(0, sigma_sum^2) to the listed slots of every S and N(0, sigma_count^2)
// to the same slots of T, as plaintext additions.
inline std::pair<std::vector<SlotVector>, SlotVector> perturb_aggregates(
    const Engine& eng, std::span<const SlotVector> s_dims, const SlotVector& t, const NoiseScales& scales,
    std::uint64_t seed, std::span<const std::size_t> slots) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto noisy = [&](const SlotVector& v, double sigma) {
    if (sigma == 0.0) return v;
    std::vector<double> noise(eng.slot_count(), 0.0);
    for (const std::size_t i : slots) {
      if (i >= noise.size()) throw std::out_of_range("perturb_aggregates: slot " + std::to_string(i));
      noise[i] = sigma * gauss(rng);
    }
    return eng.add(v, eng.encode(noise));
  };
  std::vector<SlotVector> out;
  out.reserve(s_dims.size());
  for (const auto& s : s_dims) out.push_back(noisy(s, scales.sigma_sum));
  SlotVector tn = noisy(t, scales.sigma_count);
  return {std::move(out), std::move(tn)};
}

}  // namespace vkm
