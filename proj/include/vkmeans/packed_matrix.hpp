// Copyright 2026 The vkmeans Authors.
// SPDX-License-Identifier: Apache-2.0

// Encrypted k x k blocks packed side by side in one slot vector.
//
// Block b occupies slots [b * stride, (b + 1) * stride), row-major inside the
// block, stride = block_dim^2. Slots past blocks_per_ct * stride stay zero.

#pragma once

#include <bit>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "vkmeans/replication_plan.hpp"
#include "vkmeans/slot_engine.hpp"

namespace vkm {

enum class LayoutMode { unpadded, padded };
enum class Axis { row, column };

struct PackedLayout {
  int k = 2;
  int block_dim = 2;
  std::size_t stride = 4;
  std::size_t blocks_per_ct = 1;
  std::size_t slot_count = 4;
  LayoutMode mode = LayoutMode::unpadded;

  static PackedLayout make(int k, std::size_t slot_count, LayoutMode mode = LayoutMode::unpadded) {
    if (k < 2) throw std::invalid_argument("PackedLayout: k must be >= 2");
    PackedLayout l;
    l.k = k;
    l.mode = mode;
    l.block_dim = mode == LayoutMode::padded ? static_cast<int>(std::bit_ceil(static_cast<unsigned>(k))) : k;
    l.stride = static_cast<std::size_t>(l.block_dim) * static_cast<std::size_t>(l.block_dim);
    l.slot_count = slot_count;
    l.blocks_per_ct = slot_count / l.stride;
    if (l.blocks_per_ct == 0)
      throw std::invalid_argument("PackedLayout: a " + std::to_string(l.block_dim) + "x" +
                                  std::to_string(l.block_dim) + " block does not fit in " +
                                  std::to_string(slot_count) + " slots");
    return l;
  }

  std::size_t slot(std::size_t block, int row, int col) const {
    return block * stride + static_cast<std::size_t>(row) * static_cast<std::size_t>(block_dim) +
           static_cast<std::size_t>(col);
  }
  std::size_t used_slots() const { return blocks_per_ct * stride; }
};

// Applies a replication schedule with every shift scaled by `stride`. With
// `adjoint` set the shifts are negated, turning a replication from offset 0
// into a sum that collects the segment at offset 0.
inline SlotVector apply_shift_program(const Engine& eng, const SlotVector& v, const ShiftProgram& p,
                                      long long stride, bool adjoint) {
  std::vector<SlotVector> items{v};
  auto combine = [&](const std::vector<ShiftTerm>& terms) {
    SlotVector acc;
    bool first = true;
    for (const auto& t : terms) {
      const SlotVector& x = items.at(static_cast<std::size_t>(t.item));
      if (first) {
        acc = t.coeff > 0 ? x : eng.negate(x);
        first = false;
      } else {
        acc = t.coeff > 0 ? eng.add(acc, x) : eng.sub(acc, x);
      }
    }
    return acc;
  };
  for (const auto& s : p.steps) {
    const long long shift = (adjoint ? -s.shift : s.shift) * stride;
    items.push_back(eng.rotate(combine(s.terms), -shift));
  }
  return combine(p.output);
}

class PackedOps {
 public:
  PackedOps(const Engine& eng, PackedLayout layout) : eng_(eng), layout_(layout) {
    if (layout_.slot_count != eng.slot_count())
      throw std::invalid_argument("PackedOps: layout slot_count differs from engine");
  }

  const PackedLayout& layout() const { return layout_; }
  const Engine& engine() const { return eng_; }

  // Plaintext with ones on row/column `index` of every block.
  const SlotVector& axis_mask(Axis axis, int index) const {
    check_index(index, "mask");
    return cached(axis == Axis::row ? 0 : 1, index, [&](std::vector<double>& m) {
      for (std::size_t b = 0; b < layout_.blocks_per_ct; ++b)
        for (int j = 0; j < layout_.block_dim; ++j)
          m[axis == Axis::row ? layout_.slot(b, index, j) : layout_.slot(b, j, index)] = 1.0;
    });
  }

  // Ones on slots [0, count).
  const SlotVector& prefix_mask(int count) const {
    return cached(2, count, [&](std::vector<double>& m) {
      for (int j = 0; j < count; ++j) m[static_cast<std::size_t>(j)] = 1.0;
    });
  }

  SlotVector mask(const SlotVector& v, Axis axis, int index) const {
    return eng_.mul(v, axis_mask(axis, index));
  }

  // Rows (axis=row) or columns summed into the first row/column; no mask.
  SlotVector sum_unmasked(const SlotVector& v, Axis axis) const {
    const long long step = axis == Axis::row ? layout_.block_dim : 1;
    if (layout_.mode == LayoutMode::padded) {
      SlotVector x = v;
      for (int s = 1; s < layout_.block_dim; s <<= 1) x = eng_.add(x, eng_.rotate(x, step * s));
      return x;
    }
    return apply_shift_program(eng_, v, replication_program(layout_.k, 0), step, true);
  }

  SlotVector sum(const SlotVector& v, Axis axis) const {
    return mask(sum_unmasked(v, axis), axis, 0);
  }

  // First row (column) copied into every row (column) of the block.
  SlotVector repl(const SlotVector& v, Axis axis) const {
    const long long step = axis == Axis::row ? layout_.block_dim : 1;
    if (layout_.mode == LayoutMode::padded) {
      SlotVector x = v;
      for (int s = 1; s < layout_.block_dim; s <<= 1) x = eng_.add(x, eng_.rotate(x, -step * s));
      return x;
    }
    return apply_shift_program(eng_, v, replication_program(layout_.k, 0), step, false);
  }

  // axis=row: first row -> first column. axis=column: first column -> first row.
  SlotVector transpose_vec(const SlotVector& v, Axis from) const {
    if (layout_.mode != LayoutMode::padded)
      throw std::logic_error("transpose_vec requires the padded layout");
    const long long m = layout_.block_dim;
    SlotVector x = v;
    for (long long s = m * (m - 1) / 2; s >= m - 1 && m > 1; s /= 2) {
      x = eng_.add(x, eng_.rotate(x, from == Axis::row ? -s : s));
      if (s == m - 1) break;
    }
    return mask(x, from == Axis::row ? Axis::column : Axis::row, 0);
  }

  // Single non-zero slot at segment offset `start` replicated over the k
  // slots of its segment; `axis` picks the segment (row = along a row,
  // stride 1; column = down a column, stride block_dim).
  SlotVector repl_no_padding(const SlotVector& v, int start, Axis axis = Axis::row) const {
    if (start < 0 || start >= layout_.k) throw std::out_of_range("repl_no_padding: start out of range");
    const long long step = axis == Axis::row ? 1 : layout_.block_dim;
    return apply_shift_program(eng_, v, replication_program(layout_.k, start), step, false);
  }

  // positions[b] is a slot inside block b; all share the same in-block
  // offset. Returns blocks whose leading k x k square is filled with the
  // selected value (one mask multiplication, then column and row fills).
  SlotVector batch_extract_replicate(const SlotVector& x, std::span<const std::size_t> positions) const {
    const std::size_t offset = check_positions(positions);
    const int row = static_cast<int>(offset / static_cast<std::size_t>(layout_.block_dim));
    const int col = static_cast<int>(offset % static_cast<std::size_t>(layout_.block_dim));
    std::vector<double> m(layout_.slot_count, 0.0);
    for (const std::size_t p : positions) m[p] = 1.0;
    const SlotVector isolated = eng_.mul(x, eng_.encode(m));
    return fill_block(isolated, row, col);
  }

  // Fills the leading k x k square of every block from the single non-zero
  // slot at (row, col) of that block.
  SlotVector fill_block(const SlotVector& v, int row, int col) const {
    if (row < 0 || row >= layout_.k || col < 0 || col >= layout_.k)
      throw std::out_of_range("fill_block: source outside the k x k square");
    const SlotVector r = apply_shift_program(eng_, v, replication_program(layout_.k, col), 1, false);
    return apply_shift_program(eng_, r, replication_program(layout_.k, row), layout_.block_dim, false);
  }

  // Sums blocks 0..count-1 into block 0 (other blocks hold partial sums).
  SlotVector sum_blocks_unmasked(const SlotVector& v, std::size_t count) const {
    if (count == 0 || count > layout_.blocks_per_ct) throw std::out_of_range("sum_blocks: bad count");
    return apply_shift_program(eng_, v, replication_program(static_cast<int>(count), 0),
                               static_cast<long long>(layout_.stride), true);
  }

 private:
  void check_index(int index, const char* op) const {
    if (index < 0 || index >= layout_.block_dim)
      throw std::out_of_range(std::string(op) + ": index " + std::to_string(index) +
                              " outside [0, " + std::to_string(layout_.block_dim) + ")");
  }

  std::size_t check_positions(std::span<const std::size_t> positions) const {
    if (positions.empty() || positions.size() > layout_.blocks_per_ct)
      throw std::invalid_argument("batch_extract_replicate: " + std::to_string(positions.size()) +
                                  " positions for " + std::to_string(layout_.blocks_per_ct) + " blocks");
    const std::size_t offset = positions[0] % layout_.stride;
    for (std::size_t b = 0; b < positions.size(); ++b) {
      if (positions[b] / layout_.stride != b || positions[b] % layout_.stride != offset)
        throw std::invalid_argument("batch_extract_replicate: position " + std::to_string(positions[b]) +
                                    " is not at in-block offset " + std::to_string(offset) + " of block " +
                                    std::to_string(b));
    }
    return offset;
  }

  template <class Fill>
  const SlotVector& cached(int kind, int index, Fill&& fill) const {
    const std::lock_guard<std::mutex> lock(mu_);
    const auto key = std::make_pair(kind, index);
    if (auto it = masks_.find(key); it != masks_.end()) return it->second;
    std::vector<double> m(layout_.slot_count, 0.0);
    fill(m);
    return masks_.emplace(key, eng_.encode(m)).first->second;
  }

  const Engine& eng_;
  PackedLayout layout_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<int, int>, SlotVector> masks_;
};

}  // namespace vkm
