// Copyright 2026 The vkmeans Authors.
// SPDX-License-Identifier: Apache-2.0

// Datasets, the plaintext Lloyd baseline, clustering metrics and the network
// wall-clock estimator.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vkmeans/matrix.hpp"
#include "vkmeans/protocol.hpp"

namespace vkm {

struct Dataset {
  Matrix points;
  std::vector<int> labels;  // empty when unknown
  std::string name;
  std::string preprocessing;
};

// ---------------------------------------------------------------------------
// CSV ingestion

struct CsvOptions {
  bool normalize = true;
  std::optional<bool> header;  // unset: detect from the first row
  int label_column = -1;       // -1: no labels
  double clip_percentile = 95.0;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  const bool has_sep = line.find_first_of(",;\t") != std::string::npos;
  if (has_sep) {
    std::string cur;
    for (char ch : line) {
      if (ch == ',' || ch == ';' || ch == '\t') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    out.push_back(cur);
  } else {
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
  }
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \r\"");
    const auto e = f.find_last_not_of(" \r\"");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

// Linear interpolation between order statistics.
inline double percentile(std::vector<double> v, double pct) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = pct / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

// Clip each feature at its percentile, then min-max scale into [0, 1]. A
// constant feature maps to zeros.
inline void clip_and_scale(Matrix& x, double pct) {
  for (std::size_t j = 0; j < x.cols; ++j) {
    std::vector<double> col(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) col[i] = x(i, j);
    const double cap = detail::percentile(col, pct);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double& v : col) {
      v = std::min(v, cap);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double range = hi - lo;
    for (std::size_t i = 0; i < x.rows; ++i) x(i, j) = range > 0.0 ? (col[i] - lo) / range : 0.0;
  }
}

inline Dataset load_csv(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");
  Dataset ds;
  ds.name = path;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = detail::split_fields(line);
    if (first) {
      first = false;
      bool numeric = true;
      double tmp;
      for (const auto& f : fields) numeric = numeric && detail::parse_double(f, tmp);
      const bool skip = opt.header ? *opt.header : !numeric;
      width = fields.size();
      if (skip) continue;
    }
    if (fields.size() != width)
      throw std::runtime_error("load_csv: " + path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    std::vector<double> row;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v;
      if (!detail::parse_double(fields[j], v))
        throw std::runtime_error("load_csv: " + path + ":" + std::to_string(lineno) + ": column " +
                                 std::to_string(j + 1) + " is not numeric ('" + fields[j] + "')");
      if (static_cast<int>(j) == opt.label_column) {
        labels.push_back(static_cast<int>(std::lround(v)));
      } else {
        row.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }
  if (opt.label_column >= static_cast<int>(width))
    throw std::runtime_error("load_csv: label column " + std::to_string(opt.label_column) + " out of range");
  if (rows.empty()) throw std::runtime_error("load_csv: no data rows in '" + path + "'");
  ds.points = Matrix(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), ds.points.row(i).begin());
  ds.labels = std::move(labels);
  if (opt.normalize) {
    clip_and_scale(ds.points, opt.clip_percentile);
    ds.preprocessing = "clip at p" + std::to_string(static_cast<int>(opt.clip_percentile)) + ", min-max to [0,1]";
  } else {
    ds.preprocessing = "none";
  }
  return ds;
}

inline void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open '" + path + "'");
  out.precision(17);
  for (std::size_t i = 0; i < ds.points.rows; ++i) {
    for (std::size_t j = 0; j < ds.points.cols; ++j) out << (j ? "," : "") << ds.points(i, j);
    if (!ds.labels.empty()) out << "," << ds.labels[i];
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Synthetic data

inline Dataset gen_synthetic(std::size_t n, int k, int d, double bound, double cluster_std, std::uint64_t seed) {
  if (n < static_cast<std::size_t>(k)) throw std::invalid_argument("gen_synthetic: need n >= k");
  if (!(cluster_std >= 0.0)) throw std::invalid_argument("gen_synthetic: negative cluster_std");
  const CentroidSet centers = init_centroids(k, d, bound, seed);
  std::mt19937_64 rng(detail::mix_seed(seed, 0x67656eULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset ds;
  ds.points = Matrix(n, static_cast<std::size_t>(d));
  ds.labels.resize(n);
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t i = 0;
  for (int j = 0; j < k; ++j) {
    const std::size_t count = base + (static_cast<std::size_t>(j) < extra ? 1 : 0);
    for (std::size_t c = 0; c < count; ++c, ++i) {
      ds.labels[i] = j;
      for (int f = 0; f < d; ++f) {
        const double v = centers.centers(static_cast<std::size_t>(j), static_cast<std::size_t>(f)) +
                         (cluster_std > 0.0 ? cluster_std * gauss(rng) : 0.0);
        ds.points(i, static_cast<std::size_t>(f)) = std::clamp(v, -bound, bound);
      }
    }
  }
  ds.name = "Synth-" + std::to_string(n) + "-" + std::to_string(k) + "-" + std::to_string(d);
  ds.preprocessing = "gaussian clusters, clipped to [-B,B]";
  return ds;
}

// ---------------------------------------------------------------------------
// Plaintext Lloyd

enum class TieRule {
  unassigned,   // a point equidistant to several closest centroids joins none
  lowest_index  // conventional: first closest centroid
};

// Nearest centroid, or -1 for a tie under TieRule::unassigned.
inline int nearest_centroid(std::span<const double> x, const Matrix& centers, TieRule tie) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  bool tied = false;
  for (std::size_t j = 0; j < centers.rows; ++j) {
    const double dist = squared_distance(x, centers.row(j));
    if (dist < best_d) {
      best_d = dist;
      best = static_cast<int>(j);
      tied = false;
    } else if (dist == best_d) {
      tied = true;
    }
  }
  return tie == TieRule::unassigned && tied ? -1 : best;
}

struct LloydResult {
  CentroidSet final;
  std::vector<CentroidSet> trajectory;        // init, then after each round
  std::vector<std::vector<int>> assignments;  // per round
};

// The empty-cluster policy and its generator stream match the protocol's.
inline LloydResult lloyd_plaintext(const Matrix& data, const CentroidSet& init, int rounds,
                                   TieRule tie = TieRule::unassigned, std::uint64_t seed = 1) {
  if (init.d() != data.cols) throw std::invalid_argument("lloyd_plaintext: dimension mismatch");
  LloydResult res;
  CentroidSet c = init;
  c.round = 0;
  res.trajectory.push_back(c);
  std::mt19937_64 policy_rng(reinit_seed(seed));
  const std::size_t k = init.k();
  for (int r = 1; r <= rounds; ++r) {
    Matrix sums(k, data.cols);
    std::vector<double> counts(k, 0.0);
    std::vector<int> assign(data.rows);
    for (std::size_t i = 0; i < data.rows; ++i) {
      const int j = nearest_centroid(data.row(i), c.centers, tie);
      assign[i] = j;
      if (j < 0) continue;
      counts[static_cast<std::size_t>(j)] += 1.0;
      for (std::size_t f = 0; f < data.cols; ++f) sums(static_cast<std::size_t>(j), f) += data(i, f);
    }
    c = update_centroids(sums, counts, init.bound, policy_rng, r);
    res.trajectory.push_back(c);
    res.assignments.push_back(std::move(assign));
  }
  res.final = c;
  return res;
}

// ---------------------------------------------------------------------------
// Metrics

inline double normalized_loss(const Matrix& data, const Matrix& centers) {
  if (data.cols != centers.cols) throw std::invalid_argument("normalized_loss: dimension mismatch");
  if (data.rows == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centers.rows; ++j) best = std::min(best, squared_distance(data.row(i), centers.row(j)));
    total += best;
  }
  return total / static_cast<double>(data.rows);
}

// Maximum-weight perfect matching on a square matrix (Hungarian method,
// potentials formulation). Returns assignment row -> column.
inline std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& w) {
  const std::size_t n = w.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -w[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assign(n, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j]) assign[p[j] - 1] = static_cast<int>(j - 1);
  return assign;
}

inline std::vector<int> exhaustive_assignment(const std::vector<std::vector<double>>& w) {
  std::vector<int> perm(w.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_score = -std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) s += w[i][static_cast<std::size_t>(perm[i])];
    if (s > best_score) {
      best_score = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline double cluster_accuracy(const Matrix& data, const Matrix& centers, const std::vector<int>& labels) {
  if (labels.empty()) throw std::invalid_argument("cluster_accuracy: dataset has no labels");
  if (labels.size() != data.rows) throw std::invalid_argument("cluster_accuracy: label count differs from n");
  std::vector<int> alphabet(labels.begin(), labels.end());
  std::sort(alphabet.begin(), alphabet.end());
  alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
  const std::size_t k = centers.rows;
  if (alphabet.size() != k)
    throw std::invalid_argument("cluster_accuracy: " + std::to_string(alphabet.size()) + " labels for " +
                                std::to_string(k) + " centroids");
  std::vector<std::vector<double>> agree(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < data.rows; ++i) {
    const int pred = nearest_centroid(data.row(i), centers, TieRule::lowest_index);
    const auto lab = static_cast<std::size_t>(std::lower_bound(alphabet.begin(), alphabet.end(), labels[i]) - alphabet.begin());
    agree[static_cast<std::size_t>(pred)][lab] += 1.0;
  }
  const auto perm = k <= 8 ? exhaustive_assignment(agree) : max_weight_assignment(agree);
  double hit = 0.0;
  for (std::size_t j = 0; j < k; ++j) hit += agree[j][static_cast<std::size_t>(perm[j])];
  return hit / static_cast<double>(data.rows);
}

// ---------------------------------------------------------------------------
// Network estimate

struct NetworkConfig {
  std::string name;
  double bandwidth_mbps = 1000.0;
  double delay_ms = 0.0;
  double jitter_ms = 0.0;
  double loss_pct = 0.0;
  double burst_kb = 0.0;
  double quantum_bytes = 0.0;
  double r2q = 0.0;

  void validate() const {
    if (!(bandwidth_mbps > 0.0)) throw std::invalid_argument("NetworkConfig " + name + ": bandwidth must be positive");
    if (!(delay_ms >= 0.0)) throw std::invalid_argument("NetworkConfig " + name + ": delay must be non-negative");
  }
};

inline const std::vector<NetworkConfig>& standard_networks() {
  static const std::vector<NetworkConfig> nets = {
      {"LAN500", 500, 1, 0.2, 0, 0, 1500, 10},        {"LAN1000", 1000, 0.3, 0.02, 0, 0, 3000, 15},
      {"LAN10000", 10000, 0.1, 0.01, 0, 0, 9000, 25}, {"regWAN100", 100, 20, 15, 0.1, 500, 1200, 10},
      {"regWAN250", 250, 15, 5, 0.1, 1000, 1500, 20}, {"regWAN500", 500, 10, 2, 0.1, 1500, 1500, 25},
      {"ccWAN50", 50, 150, 25, 0.5, 500, 1000, 10},   {"ccWAN100", 100, 120, 15, 0.3, 1000, 1000, 15},
      {"ccWAN200", 200, 100, 10, 0.2, 2000, 1200, 20}, {"crpWAN500", 500, 50, 5, 0.1, 1000, 1500, 15},
  };
  return nets;
}

inline const NetworkConfig& network_by_name(const std::string& name) {
  for (const auto& n : standard_networks())
    if (n.name == name) return n;
  throw std::invalid_argument("unknown network profile '" + name + "'");
}

// A phase is a maximal run of consecutive messages sharing round and kind;
// each costs its transfer time plus one round trip.
struct Phase {
  int round = 0;
  MessageKind kind = MessageKind::public_key;
  std::uint64_t bytes = 0;
};

inline std::vector<Phase> communication_phases(const Transcript& t) {
  std::vector<Phase> phases;
  for (const auto& m : t.messages) {
    if (phases.empty() || phases.back().round != m.round || phases.back().kind != m.kind)
      phases.push_back({m.round, m.kind, 0});
    phases.back().bytes += m.byte_size;
  }
  return phases;
}

inline double phase_seconds(const Phase& p, const NetworkConfig& net) {
  return static_cast<double>(p.bytes) * 8.0 / (net.bandwidth_mbps * 1e6) + 2.0 * net.delay_ms / 1000.0;
}

// Jitter and loss are ignored.
inline double estimate_wallclock(const Transcript& t, const NetworkConfig& net, double compute_seconds) {
  net.validate();
  double s = compute_seconds;
  for (const auto& p : communication_phases(t)) s += phase_seconds(p, net);
  return s;
}

}  // namespace vkm
