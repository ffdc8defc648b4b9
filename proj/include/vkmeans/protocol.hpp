// Copyright 2026 The vkmeans Authors.
// SPDX-License-Identifier: Apache-2.0

// Secure Lloyd iteration over vertically partitioned features.
//
// The computing party (Alice) holds her own features in the clear and
// everybody else's as ciphertexts under the key holder's (Bob's) key. Each
// round she computes encrypted squared distances, a packed argmin per point,
// and encrypted per-cluster sums and counts, adds Gaussian noise and hands the
// aggregates to the key holder, who decrypts and returns the new centroids.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vkmeans/dp_accounting.hpp"
#include "vkmeans/matrix.hpp"
#include "vkmeans/packed_matrix.hpp"
#include "vkmeans/secure_argmin.hpp"
#include "vkmeans/slot_engine.hpp"

namespace vkm {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PartyRole { computing, key_holder, data_owner };

struct DataPartition {
  int owner = 0;
  Matrix features;           // n x d_owner
  std::vector<int> columns;  // global feature index of each local column
  PartyRole role = PartyRole::data_owner;
};

// Splits the columns of x into consecutive groups of the given sizes.
inline std::vector<DataPartition> split_features(const Matrix& x, std::span<const int> sizes) {
  std::vector<DataPartition> parts;
  int next = 0;
  for (std::size_t p = 0; p < sizes.size(); ++p) {
    DataPartition part;
    part.owner = static_cast<int>(p);
    for (int j = 0; j < sizes[p]; ++j) part.columns.push_back(next++);
    part.features = x.select_columns(part.columns);
    parts.push_back(std::move(part));
  }
  if (static_cast<std::size_t>(next) != x.cols) throw std::invalid_argument("split_features: sizes do not sum to d");
  return parts;
}

struct CentroidSet {
  Matrix centers;  // k x d
  double bound = 1.0;
  int round = 0;

  std::size_t k() const { return centers.rows; }
  std::size_t d() const { return centers.cols; }
};

inline double init_rejection_radius(int k, int d, double bound) {
  return 2.0 * bound * std::sqrt(static_cast<double>(d)) / (4.0 * k);
}

inline CentroidSet init_centroids(int k, int d, double bound, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("init_centroids: k must be >= 2");
  if (d < 1) throw std::invalid_argument("init_centroids: d must be >= 1");
  if (!(bound > 0.0)) throw std::invalid_argument("init_centroids: bound must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-bound, bound);
  const double r2 = std::pow(init_rejection_radius(k, d, bound), 2);
  CentroidSet c{Matrix(static_cast<std::size_t>(k), static_cast<std::size_t>(d)), bound, 0};
  std::vector<double> cand(static_cast<std::size_t>(d));
  for (int j = 0; j < k; ++j) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (double& v : cand) v = unif(rng);
      bool ok = true;
      for (int a = 0; a < j && ok; ++a) ok = squared_distance(cand, c.centers.row(static_cast<std::size_t>(a))) >= r2;
      if (ok) break;
    }
    std::copy(cand.begin(), cand.end(), c.centers.row(static_cast<std::size_t>(j)).begin());
  }
  return c;
}

// c' = s / t per cluster, clamped to [-B, B]; clusters with t < 1 are drawn
// again uniformly from [-B, B]^d using `rng`.
inline CentroidSet update_centroids(const Matrix& sums, std::span<const double> counts, double bound,
                                    std::mt19937_64& rng, int round = 0) {
  if (counts.size() != sums.rows) throw std::invalid_argument("update_centroids: shape mismatch");
  std::uniform_real_distribution<double> unif(-bound, bound);
  CentroidSet c{Matrix(sums.rows, sums.cols), bound, round};
  for (std::size_t j = 0; j < sums.rows; ++j) {
    if (!(counts[j] >= 1.0)) {
      for (std::size_t f = 0; f < sums.cols; ++f) c.centers(j, f) = unif(rng);
      continue;
    }
    for (std::size_t f = 0; f < sums.cols; ++f)
      c.centers(j, f) = std::clamp(sums(j, f) / counts[j], -bound, bound);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Transcript

enum class MessageKind { public_key, encrypted_features, noisy_aggregates, centroids, decryption_share };

inline const char* to_string(MessageKind k) {
  switch (k) {
    case MessageKind::public_key:
      return "public-key";
    case MessageKind::encrypted_features:
      return "encrypted-features";
    case MessageKind::noisy_aggregates:
      return "noisy-aggregates";
    case MessageKind::centroids:
      return "centroids";
    case MessageKind::decryption_share:
      return "decryption-share";
  }
  return "?";
}

inline MessageKind message_kind_from_string(const std::string& s) {
  for (auto k : {MessageKind::public_key, MessageKind::encrypted_features, MessageKind::noisy_aggregates,
                 MessageKind::centroids, MessageKind::decryption_share})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown message kind '" + s + "'");
}

struct Message {
  int round = 0;  // 0 = setup, 1..r = rounds, r + 1 = final broadcast
  int sender = 0;
  int receiver = 0;
  MessageKind kind = MessageKind::public_key;
  std::uint64_t byte_size = 0;
  std::size_t ciphertext_count = 0;
  std::size_t plaintext_reals = 0;

  bool operator==(const Message&) const = default;
};

struct Transcript {
  std::vector<Message> messages;

  std::uint64_t total_bytes() const {
    std::uint64_t s = 0;
    for (const auto& m : messages) s += m.byte_size;
    return s;
  }
  std::size_t total_ciphertexts() const {
    std::size_t s = 0;
    for (const auto& m : messages) s += m.ciphertext_count;
    return s;
  }
  std::size_t count(MessageKind kind, std::optional<int> round = std::nullopt) const {
    return static_cast<std::size_t>(std::count_if(messages.begin(), messages.end(), [&](const Message& m) {
      return m.kind == kind && (!round || m.round == *round);
    }));
  }
  std::size_t ciphertexts(MessageKind kind, std::optional<int> round = std::nullopt) const {
    std::size_t s = 0;
    for (const auto& m : messages)
      if (m.kind == kind && (!round || m.round == *round)) s += m.ciphertext_count;
    return s;
  }
  int rounds() const {
    int r = 0;
    for (const auto& m : messages)
      if (m.kind == MessageKind::noisy_aggregates) r = std::max(r, m.round);
    return r;
  }
};

enum class DeploymentModel { two_party, server_aided, mpc_simulated };

inline const char* to_string(DeploymentModel m) {
  switch (m) {
    case DeploymentModel::two_party:
      return "two-party";
    case DeploymentModel::server_aided:
      return "server-aided";
    case DeploymentModel::mpc_simulated:
      return "mpc-simulated";
  }
  return "?";
}

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

struct TranscriptShape {
  std::size_t n = 0;
  int d = 0;
  int d_encrypted = 0;
  int k = 2;
  int rounds = 0;
  std::size_t slot_count = 0;
  DeploymentModel model = DeploymentModel::two_party;
  int parties = 2;
};

// Throws ProtocolError on the first violated counting rule.
inline void check_transcript(const Transcript& t, const TranscriptShape& s) {
  auto fail = [](const std::string& what) { throw ProtocolError("transcript invariant violated: " + what); };
  const std::size_t others = static_cast<std::size_t>(s.parties - 1);
  const std::size_t upload = static_cast<std::size_t>(s.d_encrypted) * ceil_div(s.n, s.slot_count);
  if (t.ciphertexts(MessageKind::encrypted_features) != upload)
    fail("uploaded " + std::to_string(t.ciphertexts(MessageKind::encrypted_features)) + " ciphertexts, expected " +
         std::to_string(upload));
  const std::size_t pk = s.model == DeploymentModel::two_party ? 1 : others;
  if (t.count(MessageKind::public_key) != pk) fail("public-key message count");
  const std::size_t per_round = s.model == DeploymentModel::mpc_simulated ? others : 1;
  for (int r = 1; r <= s.rounds; ++r) {
    std::size_t aggs = 0;
    std::size_t cents = 0;
    for (const auto& m : t.messages) {
      if (m.round != r) continue;
      if (m.kind == MessageKind::noisy_aggregates) {
        ++aggs;
        if (m.ciphertext_count != static_cast<std::size_t>(s.d + 1))
          fail("round " + std::to_string(r) + " aggregates carry " + std::to_string(m.ciphertext_count) +
               " ciphertexts");
      }
      if (m.kind == MessageKind::centroids) {
        ++cents;
        if (m.plaintext_reals != static_cast<std::size_t>(s.k * s.d) || m.ciphertext_count != 0)
          fail("round " + std::to_string(r) + " centroid message size");
      }
    }
    if (aggs != per_round) fail("round " + std::to_string(r) + " aggregate message count");
    if (cents != per_round) fail("round " + std::to_string(r) + " centroid message count");
    const std::size_t shares = s.model == DeploymentModel::mpc_simulated ? others : 0;
    if (t.count(MessageKind::decryption_share, r) != shares) fail("round " + std::to_string(r) + " share count");
  }
}

// ---------------------------------------------------------------------------
// Configuration and results

enum class Convergence { fixed_rounds, centroid_shift };

struct ProtocolConfig {
  int k = 2;
  int rounds = 10;
  double bound = 1.0;
  bool dp = true;
  PrivacyBudget budget;  // rounds are taken from `rounds`
  bool swap_noise_factors = false;
  SignApproxConfig sign;
  bool auto_input_scale = true;  // input_scale = 1 / (d (2B)^2)
  // Scale each centroid pair by its own bound on |d_c - d_r| instead of the
  // uniform input_scale. Centroids are public, so this is free.
  bool pairwise_input_scale = true;
  bool two_cluster_fast_path = true;
  Convergence convergence = Convergence::fixed_rounds;
  double shift_tolerance = 1e-4;  // in units of B
  std::uint64_t seed = 1;
  std::optional<CentroidSet> init;
  std::optional<int> computing_party;  // owner id of Alice
  std::optional<int> key_holder;       // owner id of Bob
};

struct RunResult {
  CentroidSet final;
  std::vector<CentroidSet> trajectory;  // init, then after each round
  Transcript transcript;
  TranscriptShape shape;
  int round_depth = 0;
  RoundBudget round_budget;
  NoiseScales scales;
  OpCounts ops;
  std::vector<std::vector<double>> counts;  // decrypted noisy counts per round
  int computing_party = 0;
  int key_holder = 1;
};

// Depth of one round as built below (distance, argmin, aggregation).
struct RoundDepth {
  int assignment = 0;
  int sums = 0;
  int counts = 0;
  int round() const { return std::max(sums, counts); }
};

inline bool uses_fast_path(const ProtocolConfig& cfg) { return cfg.k == 2 && cfg.two_cluster_fast_path; }

inline RoundDepth round_depth(const ProtocolConfig& cfg) {
  RoundDepth r;
  if (uses_fast_path(cfg)) {
    r.assignment = 1 + cmp_depth(cfg.sign);  // squared difference, then compare
    r.sums = r.assignment + 2;               // times values, then slot mask
    r.counts = r.assignment + 1;
  } else {
    // cached block (1), squared difference (1), argmin
    r.assignment = 2 + argmin_packed_depth(cfg.k, cfg.sign);
    r.sums = r.assignment + 2;
    r.counts = r.assignment + 1;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Encoding

// One ciphertext worth of blocks: which point sits in which block.
struct BlockGroup {
  std::vector<long long> points;  // size blocks_per_ct, -1 for an empty block
  std::size_t empty_blocks() const {
    return static_cast<std::size_t>(std::count(points.begin(), points.end(), -1LL));
  }
};

struct EncodedFeature {
  std::vector<SlotVector> compact;  // ceil(n / slot_count) vectors, dense
  std::vector<SlotVector> blocks;   // one per BlockGroup, k x k constant blocks
};

// Point-to-block assignment for n points: blocks at a common in-block offset
// are extracted in place; points past the last whole block of a compact
// ciphertext are rotated into blocks separately.
struct BlockPlan {
  struct Source {
    std::size_t ct = 0;      // compact ciphertext index
    std::size_t slot = 0;    // slot inside it
    std::size_t block = 0;   // destination block
  };
  struct Group {
    BlockGroup assignment;
    std::vector<Source> sources;
    bool in_place = true;
    std::size_t offset = 0;  // in-block offset for in-place groups
  };
  std::vector<Group> groups;
};

inline BlockPlan plan_blocks(std::size_t n, const PackedLayout& layout) {
  BlockPlan plan;
  const std::size_t S = layout.slot_count;
  const std::size_t st = layout.stride;
  const std::size_t bpc = layout.blocks_per_ct;
  const std::size_t cts = ceil_div(n, S);
  std::vector<BlockPlan::Source> tail;
  for (std::size_t q = 0; q < cts; ++q) {
    const std::size_t nq = std::min(S, n - q * S);
    for (std::size_t j = 0; j < st; ++j) {
      BlockPlan::Group g;
      g.assignment.points.assign(bpc, -1);
      g.offset = j;
      for (std::size_t b = 0; b < bpc; ++b) {
        const std::size_t p = b * st + j;
        if (p >= nq) break;
        g.assignment.points[b] = static_cast<long long>(q * S + p);
        g.sources.push_back({q, p, b});
      }
      if (!g.sources.empty()) plan.groups.push_back(std::move(g));
    }
    for (std::size_t p = bpc * st; p < nq; ++p) tail.push_back({q, p, 0});
  }
  for (std::size_t i = 0; i < tail.size(); i += bpc) {
    BlockPlan::Group g;
    g.in_place = false;
    g.assignment.points.assign(bpc, -1);
    for (std::size_t b = 0; b < bpc && i + b < tail.size(); ++b) {
      BlockPlan::Source s = tail[i + b];
      s.block = b;
      g.assignment.points[b] = static_cast<long long>(s.ct * S + s.slot);
      g.sources.push_back(s);
    }
    plan.groups.push_back(std::move(g));
  }
  return plan;
}

inline std::vector<SlotVector> encrypt_compact(const Engine& eng, std::span<const double> column) {
  std::vector<SlotVector> out;
  const std::size_t S = eng.slot_count();
  for (std::size_t q = 0; q * S < column.size() || (q == 0 && column.empty()); ++q) {
    const std::size_t len = std::min(S, column.size() - q * S);
    out.push_back(eng.encrypt(column.subspan(q * S, len)));
    if (column.empty()) break;
  }
  return out;
}

// Cached k x k blocks for one group, from the compact vectors of a feature.
inline SlotVector extract_group(const PackedOps& ops, std::span<const SlotVector> compact,
                                const BlockPlan::Group& g) {
  const Engine& eng = ops.engine();
  const PackedLayout& l = ops.layout();
  if (g.in_place) {
    std::vector<std::size_t> positions;
    for (const auto& s : g.sources) positions.push_back(s.slot);
    return ops.batch_extract_replicate(compact[g.sources.front().ct], positions);
  }
  // Each tail point: isolate, rotate to the start of its block, then fill.
  std::optional<SlotVector> acc;
  for (const auto& s : g.sources) {
    std::vector<double> m(l.slot_count, 0.0);
    m[s.slot] = 1.0;
    const SlotVector iso = eng.mul(compact[s.ct], eng.encode(m));
    const auto shift = static_cast<long long>(s.slot) - static_cast<long long>(s.block * l.stride);
    const SlotVector moved = eng.rotate(iso, shift);
    acc = acc ? eng.add(*acc, moved) : moved;
  }
  return ops.fill_block(*acc, 0, 0);
}

inline EncodedFeature encode_points(std::span<const double> column, const BlockPlan& plan, const PackedOps& ops) {
  EncodedFeature f;
  f.compact = encrypt_compact(ops.engine(), column);
  f.blocks.reserve(plan.groups.size());
  for (const auto& g : plan.groups) f.blocks.push_back(extract_group(ops, f.compact, g));
  return f;
}

// Plaintext counterpart of encode_points' blocks for the computing party.
inline SlotVector plain_group_blocks(const Engine& eng, const PackedLayout& l, std::span<const double> column,
                                     const BlockGroup& g) {
  std::vector<double> v(l.slot_count, 0.0);
  for (std::size_t b = 0; b < g.points.size(); ++b) {
    if (g.points[b] < 0) continue;
    const double x = column[static_cast<std::size_t>(g.points[b])];
    for (int r = 0; r < l.k; ++r)
      for (int c = 0; c < l.k; ++c) v[l.slot(b, r, c)] = x;
  }
  return eng.encode(v);
}

// ---------------------------------------------------------------------------
// Simulated threshold decryption: every party outputs a uniformly random
// 64-bit word per slot; the words sum (mod 2^64) to the bit pattern of the
// plaintext value.

inline std::vector<std::vector<std::uint64_t>> make_decryption_shares(std::span<const double> values, int parties,
                                                                      std::mt19937_64& rng) {
  if (parties < 1) throw std::invalid_argument("make_decryption_shares: need a party");
  std::vector<std::vector<std::uint64_t>> shares(static_cast<std::size_t>(parties),
                                                 std::vector<std::uint64_t>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t rest = std::bit_cast<std::uint64_t>(values[i]);
    for (int p = 0; p + 1 < parties; ++p) {
      shares[static_cast<std::size_t>(p)][i] = rng();
      rest -= shares[static_cast<std::size_t>(p)][i];
    }
    shares.back()[i] = rest;
  }
  return shares;
}

inline std::vector<double> combine_decryption_shares(const std::vector<std::vector<std::uint64_t>>& shares) {
  if (shares.empty()) return {};
  std::vector<double> out(shares.front().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t acc = 0;
    for (const auto& s : shares) acc += s[i];
    out[i] = std::bit_cast<double>(acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// The computing party's pipeline.

namespace detail {

struct FeatureInput {
  bool encrypted = false;
  std::vector<double> column;  // clear values (Alice) or the owner's values before encryption
};

class SecureRound {
 public:
  SecureRound(const Engine& eng, const ProtocolConfig& cfg, std::size_t n, std::vector<FeatureInput> features)
      : eng_(eng),
        cfg_(cfg),
        n_(n),
        d_(static_cast<int>(features.size())),
        layout_(PackedLayout::make(cfg.k, eng.slot_count(), LayoutMode::unpadded)),
        ops_(eng, layout_) {
    fast_ = uses_fast_path(cfg);
    if (!fast_) plan_ = plan_blocks(n_, layout_);
    for (auto& f : features) {
      Feature out;
      out.encrypted = f.encrypted;
      if (f.encrypted) {
        if (fast_) {
          out.compact = encrypt_compact(eng_, f.column);
        } else {
          EncodedFeature e = encode_points(f.column, plan_, ops_);
          out.compact = std::move(e.compact);
          out.blocks = std::move(e.blocks);
        }
      } else {
        const std::size_t S = eng_.slot_count();
        if (fast_) {
          for (std::size_t q = 0; q < ceil_div(n_, S); ++q)
            out.compact.push_back(eng_.encode(std::span<const double>(f.column).subspan(q * S, std::min(S, n_ - q * S))));
        } else {
          for (const auto& g : plan_.groups)
            out.blocks.push_back(plain_group_blocks(eng_, layout_, f.column, g.assignment));
        }
      }
      features_.push_back(std::move(out));
    }
  }

  std::size_t compact_cts() const { return ceil_div(n_, eng_.slot_count()); }

  // Returns S (one vector per feature, slots 0..k-1) and T (slots 0..k-1).
  std::pair<std::vector<SlotVector>, SlotVector> aggregate(const CentroidSet& c) const {
    return fast_? aggregate_two(c) : aggregate_packed(c);
  }

  // Scaled differences d_col - d_row of one block group (exposed for tests).
  SlotVector difference_step(const CentroidSet& c, std::size_t group) const {
    return differences(pair_coefficients(c), group);
  }
  // Scale applied to the pair (r, j).
  double pair_scale(const CentroidSet& c, int r, int j) const {
    if (!cfg_.pairwise_input_scale) return cfg_.sign.input_scale;
    double bound = 0.0;
    for (std::size_t f = 0; f < c.d(); ++f) {
      const double ar = c.centers(static_cast<std::size_t>(r), f);
      const double aj = c.centers(static_cast<std::size_t>(j), f);
      bound += std::abs(ar - aj) * (2.0 * cfg_.bound + std::abs(ar + aj));
    }
    // Small headroom keeps engine noise inside the series domain.
    return bound > 0.0 ? 0.999 / bound : 1.0;
  }
  const BlockPlan& plan() const { return plan_; }
  const PackedLayout& layout() const { return layout_; }
  const PackedOps& ops() const { return ops_; }

 private:
  struct Feature {
    bool encrypted = false;
    std::vector<SlotVector> compact;
    std::vector<SlotVector> blocks;
  };

  struct PairCoefficients {
    std::vector<SlotVector> linear;  // per feature
    SlotVector constant;
  };

  // d_j - d_r = sum_f 2 v_f (a_rf - a_jf) + a_jf^2 - a_rf^2, linear in v.
  PairCoefficients pair_coefficients(const CentroidSet& c) const {
    const int k = cfg_.k;
    std::vector<std::vector<double>> lin(static_cast<std::size_t>(d_), std::vector<double>(layout_.slot_count, 0.0));
    std::vector<double> cst(layout_.slot_count, 0.0);
    for (int r = 0; r < k; ++r)
      for (int j = 0; j < k; ++j) {
        const double s = pair_scale(c, r, j);
        std::vector<double> w(static_cast<std::size_t>(d_));
        for (int f = 0; f < d_; ++f)
          w[static_cast<std::size_t>(f)] = 2.0 * s * (c.centers(static_cast<std::size_t>(r), static_cast<std::size_t>(f)) -
                                                      c.centers(static_cast<std::size_t>(j), static_cast<std::size_t>(f)));
        const double k0 = s * (center_norm(c, j) - center_norm(c, r));
        for (std::size_t b = 0; b < layout_.blocks_per_ct; ++b) {
          const std::size_t slot = layout_.slot(b, r, j);
          for (int f = 0; f < d_; ++f) lin[static_cast<std::size_t>(f)][slot] = w[static_cast<std::size_t>(f)];
          cst[slot] = k0;
        }
      }
    PairCoefficients out;
    for (const auto& l : lin) out.linear.push_back(eng_.encode(l));
    out.constant = eng_.encode(cst);
    return out;
  }

  SlotVector differences(const PairCoefficients& pc, std::size_t t) const {
    SlotVector acc;
    for (int f = 0; f < d_; ++f) {
      const SlotVector p = eng_.mul(features_[static_cast<std::size_t>(f)].blocks[t], pc.linear[static_cast<std::size_t>(f)]);
      acc = f == 0 ? p : eng_.add(acc, p);
    }
    acc = eng_.add(acc, pc.constant);
    const BlockGroup& g = plan_.groups[t].assignment;
    if (g.empty_blocks() > 0) {
      // Empty blocks (all zeros) get well separated differences that pick
      // cluster 0; their count is removed from T afterwards.
      const int k = cfg_.k;
      const double gap = 0.9 / (k - 1);
      const auto cv = pc.constant.slots();
      std::vector<double> pad(layout_.slot_count, 0.0);
      for (std::size_t b = 0; b < g.points.size(); ++b) {
        if (g.points[b] >= 0) continue;
        for (int r = 0; r < k; ++r)
          for (int j = 0; j < k; ++j) {
            const std::size_t slot = layout_.slot(b, r, j);
            pad[slot] = gap * (j - r) - cv[slot];
          }
      }
      acc = eng_.add(acc, eng_.encode(pad));
    }
    return acc;
  }

  static double center_norm(const CentroidSet& c, int j) {
    double s = 0.0;
    for (std::size_t f = 0; f < c.d(); ++f) s += c.centers(static_cast<std::size_t>(j), f) * c.centers(static_cast<std::size_t>(j), f);
    return s;
  }

  std::pair<std::vector<SlotVector>, SlotVector> aggregate_packed(const CentroidSet& c) const {
    const auto pc = pair_coefficients(c);
    std::vector<SlotVector> sums(static_cast<std::size_t>(d_));
    SlotVector count;
    std::size_t empties = 0;
    for (std::size_t t = 0; t < plan_.groups.size(); ++t) {
      const SlotVector a = argmin_packed_scaled(ops_, differences(pc, t), cfg_.sign);
      for (int f = 0; f < d_; ++f) {
        const SlotVector p = eng_.mul(a, features_[static_cast<std::size_t>(f)].blocks[t]);
        sums[static_cast<std::size_t>(f)] = t == 0 ? p : eng_.add(sums[static_cast<std::size_t>(f)], p);
      }
      count = t == 0 ? a : eng_.add(count, a);
      empties += plan_.groups[t].assignment.empty_blocks();
    }
    const SlotVector& mk = ops_.prefix_mask(cfg_.k);
    for (auto& s : sums) s = eng_.mul(ops_.sum_blocks_unmasked(s, layout_.blocks_per_ct), mk);
    count = eng_.mul(ops_.sum_blocks_unmasked(count, layout_.blocks_per_ct), mk);
    if (empties > 0) {
      std::vector<double> fix(layout_.slot_count, 0.0);
      fix[0] = -static_cast<double>(empties);
      count = eng_.add(count, eng_.encode(fix));
    }
    return {std::move(sums), std::move(count)};
  }

  SlotVector reduce_all(const SlotVector& v) const {
    SlotVector x = v;
    for (std::size_t s = 1; s < eng_.slot_count(); s <<= 1) x = eng_.add(x, eng_.rotate(x, static_cast<long long>(s)));
    return x;
  }

  std::pair<std::vector<SlotVector>, SlotVector> aggregate_two(const CentroidSet& c) const {
    const std::size_t S = eng_.slot_count();
    const std::size_t cts = compact_cts();
    std::vector<SlotVector> picked(static_cast<std::size_t>(d_));
    std::vector<SlotVector> total(static_cast<std::size_t>(d_));
    SlotVector count;
    const double s = pair_scale(c, 1, 0);
    std::vector<double> w(static_cast<std::size_t>(d_));
    for (int f = 0; f < d_; ++f)
      w[static_cast<std::size_t>(f)] = 2.0 * s * (c.centers(1, static_cast<std::size_t>(f)) - c.centers(0, static_cast<std::size_t>(f)));
    const double k0 = s * (center_norm(c, 0) - center_norm(c, 1));
    for (std::size_t q = 0; q < cts; ++q) {
      // d_1 - d_2, scaled; positive where c2 is closer.
      SlotVector diff;
      for (int f = 0; f < d_; ++f) {
        const SlotVector& x = features_[static_cast<std::size_t>(f)].compact[q];
        const SlotVector p = eng_.mul_scalar(x, w[static_cast<std::size_t>(f)]);
        diff = f == 0 ? p : eng_.add(diff, p);
      }
      diff = eng_.add_scalar(diff, k0);
      const std::size_t nq = std::min(S, n_ - q * S);
      if (nq < S) {
        // Unused slots (zeros) go to cluster 1, whose count is derived from
        // n below.
        std::vector<double> pad(S, 0.0);
        for (std::size_t i = nq; i < S; ++i) pad[i] = -0.5 - k0;
        diff = eng_.add(diff, eng_.encode(pad));
      }
      const SlotVector a = cmp_scaled(eng_, diff, cfg_.sign);
      for (int f = 0; f < d_; ++f) {
        const SlotVector& x = features_[static_cast<std::size_t>(f)].compact[q];
        const SlotVector p = eng_.mul(a, x);
        picked[static_cast<std::size_t>(f)] = q == 0 ? p : eng_.add(picked[static_cast<std::size_t>(f)], p);
        total[static_cast<std::size_t>(f)] = q == 0 ? x : eng_.add(total[static_cast<std::size_t>(f)], x);
      }
      count = q == 0 ? a : eng_.add(count, a);
    }
    std::vector<double> e0(S, 0.0);
    std::vector<double> diff(S, 0.0);
    e0[0] = 1.0;
    diff[0] = -1.0;
    diff[1] = 1.0;
    const SlotVector m0 = eng_.encode(e0);
    const SlotVector m10 = eng_.encode(diff);
    std::vector<SlotVector> sums;
    for (int f = 0; f < d_; ++f) {
      const SlotVector p = reduce_all(picked[static_cast<std::size_t>(f)]);
      const SlotVector q = reduce_all(total[static_cast<std::size_t>(f)]);
      sums.push_back(eng_.add(eng_.mul(q, m0), eng_.mul(p, m10)));
    }
    std::vector<double> nvec(S, 0.0);
    nvec[0] = static_cast<double>(n_);
    const SlotVector t = eng_.add(eng_.mul(reduce_all(count), m10), eng_.encode(nvec));
    return {std::move(sums), t};
  }

  const Engine& eng_;
  const ProtocolConfig& cfg_;
  std::size_t n_;
  int d_;
  PackedLayout layout_;
  PackedOps ops_;
  bool fast_ = false;
  BlockPlan plan_;
  std::vector<Feature> features_;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Generator seed for the empty-cluster re-initialisation stream.
inline std::uint64_t reinit_seed(std::uint64_t seed) { return detail::mix_seed(seed, 0x7265696eULL); }

// Byte sizes of the messages, shared by the live run and the predictor.
class TranscriptWriter {
 public:
  TranscriptWriter(const EngineConfig& ecfg, DeploymentModel model, std::vector<int> parties, int alice, int bob)
      : ecfg_(ecfg), model_(model), parties_(std::move(parties)), alice_(alice), bob_(bob) {}

  void setup(const std::vector<std::pair<int, std::size_t>>& uploads) {
    const std::uint64_t fresh = ciphertext_size_bytes(ecfg_.depth_budget, ecfg_);
    if (model_ == DeploymentModel::mpc_simulated) {
      for (int p : parties_)
        if (p != alice_) add({0, p, alice_, MessageKind::public_key, fresh, 1, 0});
    } else {
      for (int p : parties_)
        if (p != bob_) add({0, bob_, p, MessageKind::public_key, fresh, 1, 0});
    }
    for (const auto& [owner, cts] : uploads)
      if (cts > 0) add({0, owner, alice_, MessageKind::encrypted_features, fresh * cts, cts, 0});
  }

  // aggregate_levels: remaining levels of each released ciphertext.
  void round(int r, const std::vector<int>& aggregate_levels, std::size_t reals) {
    std::uint64_t bytes = 0;
    std::uint64_t share_bytes = 0;
    for (int lv : aggregate_levels) {
      const std::uint64_t b = ciphertext_size_bytes(lv, ecfg_);
      bytes += b;
      share_bytes += (b + 1) / 2;
    }
    const std::size_t cts = aggregate_levels.size();
    const std::uint64_t real_bytes = reals * sizeof(double);
    if (model_ == DeploymentModel::mpc_simulated) {
      for (int p : parties_)
        if (p != alice_) add({r, alice_, p, MessageKind::noisy_aggregates, bytes, cts, 0});
      for (int p : parties_)
        if (p != alice_) add({r, p, alice_, MessageKind::decryption_share, share_bytes, 0, 0});
      for (int p : parties_)
        if (p != alice_) add({r, alice_, p, MessageKind::centroids, real_bytes, 0, reals});
    } else {
      add({r, alice_, bob_, MessageKind::noisy_aggregates, bytes, cts, 0});
      add({r, bob_, alice_, MessageKind::centroids, real_bytes, 0, reals});
    }
  }

  void finish(int final_round, std::size_t reals) {
    if (model_ != DeploymentModel::server_aided) return;
    for (int p : parties_)
      if (p != alice_ && p != bob_)
        add({final_round, bob_, p, MessageKind::centroids, reals * sizeof(double), 0, reals});
  }

  Transcript take() { return std::move(t_); }

 private:
  void add(Message m) { t_.messages.push_back(m); }
  EngineConfig ecfg_;
  DeploymentModel model_;
  std::vector<int> parties_;
  int alice_;
  int bob_;
  Transcript t_;
};

namespace detail {

struct Roles {
  int alice = 0;
  int bob = 1;
};

inline Roles choose_roles(std::span<const DataPartition> parts, const ProtocolConfig& cfg, DeploymentModel model) {
  Roles r;
  auto by_features = [&](std::optional<int> exclude) {
    int best = -1;
    std::size_t best_d = 0;
    for (const auto& p : parts) {
      if (exclude && p.owner == *exclude) continue;
      if (best < 0 || p.features.cols > best_d) {
        best = p.owner;
        best_d = p.features.cols;
      }
    }
    return best;
  };
  r.alice = cfg.computing_party ? *cfg.computing_party : by_features(std::nullopt);
  r.bob = cfg.key_holder ? *cfg.key_holder : by_features(r.alice);
  if (model == DeploymentModel::mpc_simulated) r.bob = -1;
  if (r.alice == r.bob) throw std::invalid_argument("computing party and key holder must differ");
  bool found_a = false;
  bool found_b = model == DeploymentModel::mpc_simulated;
  for (const auto& p : parts) {
    found_a = found_a || p.owner == r.alice;
    found_b = found_b || p.owner == r.bob;
  }
  if (!found_a || !found_b) throw std::invalid_argument("unknown computing party or key holder");
  return r;
}

}  // namespace detail

inline RunResult run_multiparty(std::span<const DataPartition> parts, DeploymentModel model, const ProtocolConfig& cfg_in,
                                const Engine& eng) {
  if (parts.size() < 2) throw std::invalid_argument("run_multiparty: need at least two partitions");
  if (model == DeploymentModel::two_party && parts.size() != 2)
    throw std::invalid_argument("two-party model takes exactly two partitions");
  const std::size_t n = parts[0].features.rows;
  int d = 0;
  for (const auto& p : parts) {
    if (p.features.rows != n) throw std::invalid_argument("partitions disagree on n");
    if (p.columns.size() != p.features.cols) throw std::invalid_argument("partition column map has wrong length");
    d += static_cast<int>(p.features.cols);
  }
  if (n < static_cast<std::size_t>(cfg_in.k)) throw std::invalid_argument("need n >= k");
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (std::size_t j = i + 1; j < parts.size(); ++j)
      if (parts[i].owner == parts[j].owner) throw std::invalid_argument("duplicate party id");

  ProtocolConfig cfg = cfg_in;
  cfg.budget.rounds = cfg.rounds;
  if (cfg.auto_input_scale) cfg.sign.input_scale = 1.0 / (d * std::pow(2.0 * cfg.bound, 2));
  cfg.sign.validate();
  const detail::Roles roles = detail::choose_roles(parts, cfg, model);

  // Global feature order; the computing party's columns stay in the clear.
  std::vector<detail::FeatureInput> features(static_cast<std::size_t>(d));
  std::vector<bool> seen(static_cast<std::size_t>(d), false);
  std::vector<std::pair<int, std::size_t>> uploads;
  int d_enc = 0;
  for (const auto& p : parts) {
    const bool enc = p.owner != roles.alice;
    for (std::size_t j = 0; j < p.features.cols; ++j) {
      const int g = p.columns[j];
      if (g < 0 || g >= d || seen[static_cast<std::size_t>(g)]) throw std::invalid_argument("bad global column map");
      seen[static_cast<std::size_t>(g)] = true;
      auto& fi = features[static_cast<std::size_t>(g)];
      fi.encrypted = enc;
      fi.column.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double x = p.features(i, j);
        if (!(std::abs(x) <= cfg.bound)) throw std::invalid_argument("feature value outside [-B, B]");
        fi.column[i] = x;
      }
    }
    if (enc) {
      d_enc += static_cast<int>(p.features.cols);
      uploads.emplace_back(p.owner, p.features.cols * ceil_div(n, eng.slot_count()));
    }
  }
  if (d_enc == 0) throw std::invalid_argument("no encrypted features: the computing party owns everything");

  RunResult res;
  res.computing_party = roles.alice;
  res.key_holder = roles.bob;
  std::vector<int> ids;
  for (const auto& p : parts) ids.push_back(p.owner);
  res.shape = {n, d, d_enc, cfg.k, 0, eng.slot_count(), model, static_cast<int>(parts.size())};
  const RoundDepth depth = round_depth(cfg);
  res.round_depth = depth.round();

  if (cfg.dp) {
    res.round_budget = per_round_budget(cfg.budget);
    res.scales = noise_scales(res.round_budget, cfg.bound, cfg.swap_noise_factors);
  } else {
    res.scales = NoiseScales{0.0, 0.0, cfg.bound};
  }

  TranscriptWriter tw(eng.config(), model, ids, roles.alice, roles.bob);
  tw.setup(uploads);

  eng.reset_counts();
  detail::SecureRound pipeline(eng, cfg, n, std::move(features));

  CentroidSet c = cfg.init ? *cfg.init : init_centroids(cfg.k, d, cfg.bound, cfg.seed);
  if (c.k() != static_cast<std::size_t>(cfg.k) || c.d() != static_cast<std::size_t>(d))
    throw std::invalid_argument("initial centroids have the wrong shape");
  c.round = 0;
  c.bound = cfg.bound;
  res.trajectory.push_back(c);

  std::mt19937_64 policy_rng(reinit_seed(cfg.seed));
  std::mt19937_64 share_rng(detail::mix_seed(cfg.seed, 0x73686172ULL));
  std::vector<std::size_t> meaningful(static_cast<std::size_t>(cfg.k));
  std::iota(meaningful.begin(), meaningful.end(), std::size_t{0});

  int executed = 0;
  for (int r = 1; r <= cfg.rounds; ++r) {
    try {
      auto [sums, count] = pipeline.aggregate(c);
      auto [noisy_s, noisy_t] =
          perturb_aggregates(eng, sums, count, res.scales, detail::mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(r)),
                             meaningful);
      std::vector<int> levels;
      for (const auto& s : noisy_s) levels.push_back(eng.levels_remaining(s));
      levels.push_back(eng.levels_remaining(noisy_t));
      tw.round(r, levels, static_cast<std::size_t>(cfg.k * d));

      // Decryption by the key holder, or jointly from additive shares.
      std::vector<std::vector<double>> plain;
      for (const auto& s : noisy_s) plain.push_back(eng.decrypt(s));
      plain.push_back(eng.decrypt(noisy_t));
      if (model == DeploymentModel::mpc_simulated) {
        for (auto& v : plain) {
          std::vector<double> head(v.begin(), v.begin() + cfg.k);
          const auto shares = make_decryption_shares(head, static_cast<int>(parts.size()) - 1, share_rng);
          const auto back = combine_decryption_shares(shares);
          std::copy(back.begin(), back.end(), v.begin());
        }
      }
      Matrix s_mat(static_cast<std::size_t>(cfg.k), static_cast<std::size_t>(d));
      std::vector<double> t_vec(static_cast<std::size_t>(cfg.k));
      for (int j = 0; j < cfg.k; ++j) {
        for (int f = 0; f < d; ++f) s_mat(static_cast<std::size_t>(j), static_cast<std::size_t>(f)) = plain[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)];
        t_vec[static_cast<std::size_t>(j)] = plain.back()[static_cast<std::size_t>(j)];
      }
      res.counts.push_back(t_vec);
      CentroidSet next = update_centroids(s_mat, t_vec, cfg.bound, policy_rng, r);
      double shift = 0.0;
      for (std::size_t i = 0; i < next.centers.data.size(); ++i)
        shift = std::max(shift, std::abs(next.centers.data[i] - c.centers.data[i]));
      c = std::move(next);
      res.trajectory.push_back(c);
      executed = r;
      if (cfg.convergence == Convergence::centroid_shift && shift < cfg.shift_tolerance * cfg.bound) break;
    } catch (const std::exception& e) {
      throw ProtocolError("round " + std::to_string(r) + ": " + e.what());
    }
  }
  tw.finish(executed + 1, static_cast<std::size_t>(cfg.k * d));
  res.transcript = tw.take();
  res.shape.rounds = executed;
  res.final = c;
  res.ops = eng.counts();
  check_transcript(res.transcript, res.shape);
  return res;
}

inline RunResult run(const DataPartition& a, const DataPartition& b, const ProtocolConfig& cfg, const Engine& eng) {
  const DataPartition parts[] = {a, b};
  return run_multiparty(parts, DeploymentModel::two_party, cfg, eng);
}

// Transcript a run with these parameters would produce, without running it.
// Encrypted features are assumed to belong to the parties listed in
// `encrypted_dims` (owner id, feature count); the computing party is 0 and
// the key holder 1.
inline Transcript predict_transcript(const TranscriptShape& shape, const ProtocolConfig& cfg, const EngineConfig& ecfg,
                                     const std::vector<std::pair<int, int>>& encrypted_dims) {
  std::vector<int> ids{0};
  std::vector<std::pair<int, std::size_t>> uploads;
  for (const auto& [owner, dims] : encrypted_dims) {
    ids.push_back(owner);
    uploads.emplace_back(owner, static_cast<std::size_t>(dims) * ceil_div(shape.n, ecfg.slot_count));
  }
  TranscriptWriter tw(ecfg, shape.model, ids, 0, shape.model == DeploymentModel::mpc_simulated ? -1 : 1);
  tw.setup(uploads);
  const RoundDepth depth = round_depth(cfg);
  std::vector<int> levels(static_cast<std::size_t>(shape.d), ecfg.depth_budget - depth.sums);
  levels.push_back(ecfg.depth_budget - depth.counts);
  for (int r = 1; r <= shape.rounds; ++r) tw.round(r, levels, static_cast<std::size_t>(shape.k * shape.d));
  tw.finish(shape.rounds + 1, static_cast<std::size_t>(shape.k * shape.d));
  return tw.take();
}

}  // namespace vkm
