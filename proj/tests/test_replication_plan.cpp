// Copyright 2026 The vkmeans Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "vkmeans/packed_matrix.hpp"
#include "vkmeans/replication_plan.hpp"

using namespace vkm;

namespace {

detail::Poly window(int k, int start) {
  detail::Poly p;
  for (int j = 0; j < k; ++j) p[j - start] = 1;
  return p;
}

// Runs the program on a vector holding one value and compares against the
// brute-force replicate oracle.
void check_on_engine(const Engine& eng, const ShiftProgram& prog, int k, int start, std::size_t base,
                     std::size_t step, double value) {
  std::vector<double> v(eng.slot_count(), 0.0);
  v[base + static_cast<std::size_t>(start) * step] = value;
  const auto out = eng.decrypt(apply_shift_program(eng, eng.encrypt(v), prog, static_cast<long long>(step), false));
  const auto want = oracle::replicate(v, base, start, k, step);
  ASSERT_EQ(out, want) << "k=" << k << " start=" << start << " step=" << step;
}

}  // namespace

TEST(ReplicationPlan, DoublingScheduleCoversWindowForAllStarts) {
  for (int k = 1; k <= 64; ++k)
    for (int i = 0; i < k; ++i) ASSERT_EQ(program_polynomial(segmented_doubling_program(k, i)), window(k, i)) << k << "," << i;
}

TEST(ReplicationPlan, ComplementScheduleCoversWindow) {
  for (int k : {7, 15, 31, 63})
    for (int i = 0; i < k; ++i) {
      const auto p = window_complement_program(k, i);
      ASSERT_EQ(program_polynomial(p), window(k, i)) << k << "," << i;
      EXPECT_EQ(p.rotations(), std::bit_width(static_cast<unsigned>(k)) + 1);
    }
  EXPECT_THROW(window_complement_program(9, 0), std::invalid_argument);
}

TEST(ReplicationPlan, ChosenProgramMatchesBruteForceOnEngine) {
  EngineConfig c;
  c.slot_count = 512;
  c.depth_budget = 1;
  const Engine eng(c);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 2; k <= 64; ++k)
    for (int i = 0; i < k; ++i) {
      const auto& prog = replication_program(k, i);
      check_on_engine(eng, prog, k, i, 70, 1, u(rng));
      if (k <= 8) check_on_engine(eng, prog, k, i, 3, static_cast<std::size_t>(k), u(rng));
    }
}

TEST(ReplicationPlan, RotationBoundHoldsExceptThree) {
  for (int k = 2; k <= 64; ++k) {
    if (k == 3) continue;
    for (int i = 0; i < k; ++i)
      EXPECT_LE(replication_program(k, i).rotations(), replication_rotation_bound(k)) << "k=" << k << " start=" << i;
  }
}

// One rotation yields at most two monomials, so three slots cannot be covered.
TEST(ReplicationPlan, ThreeSlotsNeedTwoRotations) {
  EXPECT_EQ(replication_rotation_bound(3), 1);
  for (int i = 0; i < 3; ++i) {
    ShiftProgram p;
    EXPECT_FALSE(search_replication_program(3, i, 1, p));
    EXPECT_TRUE(search_replication_program(3, i, 2, p));
    EXPECT_EQ(program_polynomial(p), window(3, i));
    EXPECT_EQ(replication_program(3, i).rotations(), 2);
  }
}

TEST(ReplicationPlan, SearchFindsThreeRotationProgramsForSeven) {
  for (int i = 0; i < 7; ++i) {
    ShiftProgram p;
    ASSERT_TRUE(search_replication_program(7, i, 3, p));
    EXPECT_EQ(program_polynomial(p), window(7, i));
  }
}

TEST(ReplicationPlan, RejectsBadArguments) {
  EXPECT_THROW(segmented_doubling_program(4, 4), std::out_of_range);
  EXPECT_THROW(segmented_doubling_program(0, 0), std::out_of_range);
  EXPECT_THROW(segmented_doubling_program(5, -1), std::out_of_range);
}

TEST(ReplicationPlan, PowersOfTwoNeedOnlyLogRotations) {
  for (int m = 1; m <= 6; ++m)
    for (int i = 0; i < (1 << m); ++i) EXPECT_EQ(replication_program(1 << m, i).rotations(), m);
}
