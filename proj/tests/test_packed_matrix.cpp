// Copyright 2026 The vkmeans Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "vkmeans/packed_matrix.hpp"

using namespace vkm;

namespace {

EngineConfig cfg(std::size_t slots) {
  EngineConfig c;
  c.slot_count = slots;
  c.depth_budget = 4;
  return c;
}

// Block b as a dense M x M matrix.
std::vector<std::vector<double>> block(const std::vector<double>& v, const PackedLayout& l, std::size_t b) {
  std::vector<std::vector<double>> m(static_cast<std::size_t>(l.block_dim), std::vector<double>(static_cast<std::size_t>(l.block_dim)));
  for (int r = 0; r < l.block_dim; ++r)
    for (int c = 0; c < l.block_dim; ++c) m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = v[l.slot(b, r, c)];
  return m;
}

std::vector<double> random_blocks(const PackedLayout& l, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(l.slot_count, 0.0);
  for (std::size_t b = 0; b < l.blocks_per_ct; ++b)
    for (int r = 0; r < l.k; ++r)
      for (int c = 0; c < l.k; ++c) v[l.slot(b, r, c)] = u(rng);
  return v;
}

}  // namespace

TEST(PackedLayout, Geometry) {
  const auto l14 = PackedLayout::make(14, 1 << 14);
  EXPECT_EQ(l14.stride, 196u);
  EXPECT_EQ(l14.blocks_per_ct, (1u << 14) / 196u);
  EXPECT_EQ(PackedLayout::make(14, 1 << 14, LayoutMode::padded).stride, 256u);
  const auto p5 = PackedLayout::make(5, 256, LayoutMode::padded);
  EXPECT_EQ(p5.block_dim, 8);
  EXPECT_EQ(p5.slot(1, 2, 3), 64u + 16u + 3u);
  EXPECT_THROW(PackedLayout::make(5, 16), std::invalid_argument);
  EXPECT_THROW(PackedLayout::make(1, 16), std::invalid_argument);
}

TEST(PackedOps, MasksOnTwoByTwoBlocks) {
  const Engine eng(cfg(8));
  const PackedOps ops(eng, PackedLayout::make(2, 8));
  const auto x = eng.encrypt(std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_EQ(eng.decrypt(ops.mask(x, Axis::row, 0)), (std::vector<double>{1, 2, 0, 0, 5, 6, 0, 0}));
  EXPECT_EQ(eng.decrypt(ops.mask(x, Axis::column, 1)), (std::vector<double>{0, 2, 0, 4, 0, 6, 0, 8}));
  EXPECT_EQ(eng.decrypt(ops.mask(x, Axis::row, 1)), (std::vector<double>{0, 0, 3, 4, 0, 0, 7, 8}));
  EXPECT_EQ(ops.mask(x, Axis::row, 0).depth_consumed(), 1);
  EXPECT_THROW(ops.axis_mask(Axis::row, 2), std::out_of_range);
}

TEST(PackedOps, SumTwoByTwo) {
  const Engine eng(cfg(4));
  for (auto mode : {LayoutMode::unpadded, LayoutMode::padded}) {
    const PackedOps ops(eng, PackedLayout::make(2, 4, mode));
    const auto x = eng.encrypt(std::vector<double>{1, 2, 3, 4});
    EXPECT_EQ(eng.decrypt(ops.sum(x, Axis::row)), (std::vector<double>{4, 6, 0, 0}));
    EXPECT_EQ(eng.decrypt(ops.sum(x, Axis::column)), (std::vector<double>{3, 0, 7, 0}));
    EXPECT_EQ(eng.decrypt(ops.sum(eng.encrypt(std::vector<double>(4, 0.0)), Axis::row)), std::vector<double>(4, 0.0));
  }
}

TEST(PackedOps, SumAndReplicateMatchLoops) {
  std::mt19937_64 rng(5);
  for (auto mode : {LayoutMode::unpadded, LayoutMode::padded}) {
    for (int k : {2, 3, 5, 7, 8, 11, 15}) {
      const Engine eng(cfg(1024));
      const auto l = PackedLayout::make(k, 1024, mode);
      const PackedOps ops(eng, l);
      const auto v = random_blocks(l, rng);
      const auto x = eng.encrypt(v);
      const auto rs = eng.decrypt(ops.sum(x, Axis::row));
      const auto cs = eng.decrypt(ops.sum(x, Axis::column));
      for (std::size_t b = 0; b < l.blocks_per_ct; ++b) {
        const auto m = block(v, l, b);
        const auto R = block(rs, l, b);
        const auto C = block(cs, l, b);
        for (int i = 0; i < l.block_dim; ++i) {
          double col = 0.0;
          double row = 0.0;
          for (int j = 0; j < l.block_dim; ++j) {
            col += m[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
            row += m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
          }
          ASSERT_NEAR(R[0][static_cast<std::size_t>(i)], col, 1e-12);
          ASSERT_NEAR(C[static_cast<std::size_t>(i)][0], row, 1e-12);
          for (int r = 1; r < l.block_dim; ++r) ASSERT_EQ(R[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)], 0.0);
          for (int c = 1; c < l.block_dim; ++c) ASSERT_EQ(C[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)], 0.0);
        }
      }
      // repl of a first row / first column.
      const auto first_row = eng.decrypt(ops.mask(x, Axis::row, 0));
      const auto rr = eng.decrypt(ops.repl(eng.encrypt(first_row), Axis::row));
      const auto first_col = eng.decrypt(ops.mask(x, Axis::column, 0));
      const auto rc = eng.decrypt(ops.repl(eng.encrypt(first_col), Axis::column));
      for (std::size_t b = 0; b < l.blocks_per_ct; ++b)
        for (int r = 0; r < l.block_dim; ++r)
          for (int c = 0; c < l.block_dim; ++c) {
            ASSERT_NEAR(rr[l.slot(b, r, c)], v[l.slot(b, 0, c)], 1e-12) << "k=" << k;
            ASSERT_NEAR(rc[l.slot(b, r, c)], v[l.slot(b, r, 0)], 1e-12) << "k=" << k;
          }
    }
  }
}

TEST(PackedOps, ReplicateFourByFourRow) {
  const Engine eng(cfg(16));
  const PackedOps ops(eng, PackedLayout::make(4, 16, LayoutMode::padded));
  std::vector<double> v(16, 0.0);
  for (int c = 0; c < 4; ++c) v[static_cast<std::size_t>(c)] = c + 1.0;
  const auto out = eng.decrypt(ops.repl(eng.encrypt(v), Axis::row));
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(out[static_cast<std::size_t>(4 * r + c)], c + 1.0);
}

TEST(PackedOps, TransposeVector) {
  for (int m : {2, 4, 8, 16}) {
    const Engine eng(cfg(1024));
    const auto l = PackedLayout::make(m, 1024, LayoutMode::padded);
    const PackedOps ops(eng, l);
    std::vector<double> row(1024, 0.0);
    std::vector<double> col(1024, 0.0);
    for (std::size_t b = 0; b < l.blocks_per_ct; ++b)
      for (int j = 0; j < m; ++j) {
        row[l.slot(b, 0, j)] = 10.0 * static_cast<double>(b) + j + 1;
        col[l.slot(b, j, 0)] = -(10.0 * static_cast<double>(b) + j + 1);
      }
    const auto tr = eng.decrypt(ops.transpose_vec(eng.encrypt(row), Axis::row));
    const auto tc = eng.decrypt(ops.transpose_vec(eng.encrypt(col), Axis::column));
    for (std::size_t b = 0; b < l.blocks_per_ct; ++b)
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) {
          ASSERT_EQ(tr[l.slot(b, r, c)], c == 0 ? row[l.slot(b, 0, r)] : 0.0) << "m=" << m;
          ASSERT_EQ(tc[l.slot(b, r, c)], r == 0 ? col[l.slot(b, c, 0)] : 0.0) << "m=" << m;
        }
  }
  const Engine eng(cfg(16));
  EXPECT_THROW(PackedOps(eng, PackedLayout::make(3, 16)).transpose_vec(eng.constant(0.0), Axis::row),
               std::logic_error);
}

TEST(PackedOps, ReplicationWithoutPadding) {
  const Engine eng(cfg(64));
  const PackedOps ops(eng, PackedLayout::make(5, 64));
  std::vector<double> v(64, 0.0);
  v[3] = 7.0;
  const auto out = eng.decrypt(ops.repl_no_padding(eng.encrypt(v), 3));
  EXPECT_EQ(out, oracle::replicate(v, 0, 3, 5, 1));
  for (int j = 0; j < 5; ++j) EXPECT_EQ(out[static_cast<std::size_t>(j)], 7.0);
  // Down a column.
  std::vector<double> w(64, 0.0);
  w[2 + 5 * 4] = -1.5;
  EXPECT_EQ(eng.decrypt(ops.repl_no_padding(eng.encrypt(w), 4, Axis::column)), oracle::replicate(w, 2, 4, 5, 5));
  EXPECT_THROW(ops.repl_no_padding(eng.encrypt(v), 5), std::out_of_range);
}

// 32 slots, k = 3: blocks of 9 slots, points at in-block offset 5 of blocks
// 0 and 1 are extracted and spread over their blocks.
TEST(PackedOps, BatchExtractTwoBlocks) {
  const Engine eng(cfg(32));
  const PackedOps ops(eng, PackedLayout::make(3, 32));
  std::vector<double> x(32);
  for (std::size_t i = 0; i < 32; ++i) x[i] = static_cast<double>(i) + 0.25;
  const std::vector<std::size_t> pos{5, 14};
  const auto ct = eng.encrypt(x);
  const auto out = ops.batch_extract_replicate(ct, pos);
  const auto got = eng.decrypt(out);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(got[i], x[5]);
  for (std::size_t i = 9; i < 18; ++i) EXPECT_EQ(got[i], x[14]);
  for (std::size_t i = 18; i < 32; ++i) EXPECT_EQ(got[i], 0.0);
  EXPECT_EQ(out.depth_consumed(), 1);
  // Zero source, single block.
  x[0] = 0.0;
  const auto zero = eng.decrypt(ops.batch_extract_replicate(eng.encrypt(x), std::vector<std::size_t>{0}));
  for (double z : zero) EXPECT_EQ(z, 0.0);
  EXPECT_THROW(ops.batch_extract_replicate(ct, std::vector<std::size_t>{5, 13}), std::invalid_argument);
  EXPECT_THROW(ops.batch_extract_replicate(ct, std::vector<std::size_t>{14}), std::invalid_argument);
}

TEST(PackedOps, BatchExtractEveryOffset) {
  std::mt19937_64 rng(17);
  for (int k : {2, 3, 4, 5, 6, 8, 9, 14, 15}) {
    const Engine eng(cfg(2048));
    const auto l = PackedLayout::make(k, 2048);
    const PackedOps ops(eng, l);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> x(2048);
    for (double& v : x) v = u(rng);
    const auto ct = eng.encrypt(x);
    for (std::size_t off = 0; off < l.stride; off += 1 + l.stride / 7) {
      if (static_cast<int>(off / static_cast<std::size_t>(k)) >= k) continue;
      std::vector<std::size_t> pos;
      for (std::size_t b = 0; b < l.blocks_per_ct; ++b) pos.push_back(b * l.stride + off);
      const auto got = eng.decrypt(ops.batch_extract_replicate(ct, pos));
      for (std::size_t b = 0; b < l.blocks_per_ct; ++b)
        for (std::size_t s = 0; s < l.stride; ++s) ASSERT_NEAR(got[b * l.stride + s], x[pos[b]], 1e-12) << "k=" << k;
    }
  }
}

TEST(PackedOps, SumBlocks) {
  const Engine eng(cfg(256));
  const auto l = PackedLayout::make(3, 256);
  const PackedOps ops(eng, l);
  std::mt19937_64 rng(1);
  const auto v = random_blocks(l, rng);
  for (std::size_t count : {1u, 2u, 5u, 17u, 28u}) {
    const auto got = eng.decrypt(ops.sum_blocks_unmasked(eng.encrypt(v), count));
    for (std::size_t s = 0; s < l.stride; ++s) {
      double want = 0.0;
      for (std::size_t b = 0; b < count; ++b) want += v[b * l.stride + s];
      ASSERT_NEAR(got[s], want, 1e-12) << "count=" << count;
    }
  }
  EXPECT_THROW(ops.sum_blocks_unmasked(eng.encrypt(v), 0), std::out_of_range);
  EXPECT_THROW(ops.sum_blocks_unmasked(eng.encrypt(v), 29), std::out_of_range);
}
