// Copyright 2026 The vkmeans Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vkmeans/bench.hpp"

using namespace vkm;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  const auto p = std::filesystem::path(testing::TempDir()) / name;
  std::ofstream(p) << body;
  return p.string();
}

std::vector<double> flat(const Matrix& m) { return m.data; }

CsvOptions raw(int label_column = -1) {
  CsvOptions o;
  o.normalize = false;
  o.label_column = label_column;
  return o;
}

CentroidSet centroids_from(const std::vector<double>& v, std::size_t k, std::size_t d, double bound) {
  CentroidSet c;
  c.centers = Matrix(k, d);
  c.centers.data = v;
  c.bound = bound;
  return c;
}

}  // namespace

TEST(Csv, ParsesHeaderDelimitersAndLabels) {
  const auto p = write_temp("a.csv", "x,y,label\n1, 2 ,0\n3,4,1\n\n");
  const auto ds = load_csv(p, raw(2));
  ASSERT_EQ(ds.points.rows, 2u);
  ASSERT_EQ(ds.points.cols, 2u);
  EXPECT_EQ(flat(ds.points), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(ds.labels, (std::vector<int>{0, 1}));

  const auto q = write_temp("b.txt", "1 2\n3\t4\n");
  EXPECT_EQ(flat(load_csv(q, raw()).points), (std::vector<double>{1, 2, 3, 4}));
  const auto s = write_temp("c.csv", "1;2\n3;4\n");
  EXPECT_EQ(flat(load_csv(s, raw()).points), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Csv, ReportsLineAndColumn) {
  const auto ragged = write_temp("r.csv", "1,2\n3,4,5\n");
  try {
    load_csv(ragged);
    FAIL() << "ragged row accepted";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  const auto word = write_temp("w.csv", "1,2\n3,abc\n");
  try {
    load_csv(word);
    FAIL() << "non-numeric field accepted";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("column 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_csv(write_temp("e.csv", "a,b\n")), std::runtime_error);
  EXPECT_THROW(load_csv("/nonexistent/file.csv"), std::runtime_error);
  EXPECT_THROW(load_csv(write_temp("l.csv", "1,2\n"), raw(5)), std::runtime_error);
}

TEST(Csv, NormalisationClipsAndScales) {
  std::string body;
  for (int i = 0; i < 100; ++i) body += std::to_string(i) + ",7\n";
  body += "100000,7\n";  // outlier above the 95th percentile
  const auto ds = load_csv(write_temp("n.csv", body));
  double lo = 1.0;
  double hi = 0.0;
  for (std::size_t i = 0; i < ds.points.rows; ++i) {
    lo = std::min(lo, ds.points(i, 0));
    hi = std::max(hi, ds.points(i, 0));
    EXPECT_EQ(ds.points(i, 1), 0.0);  // constant feature
  }
  EXPECT_EQ(lo, 0.0);
  EXPECT_EQ(hi, 1.0);
  // The outlier is clipped, so the bulk keeps its spread.
  EXPECT_GT(ds.points(50, 0), 0.4);
}

TEST(Csv, RoundTrip) {
  const auto ds = gen_synthetic(50, 3, 2, 0.5, 0.02, 4);
  const auto p = (std::filesystem::path(testing::TempDir()) / "rt.csv").string();
  write_csv(ds, p);
  const auto back = load_csv(p, raw(2));
  ASSERT_EQ(back.points.rows, 50u);
  for (std::size_t i = 0; i < ds.points.data.size(); ++i) EXPECT_NEAR(back.points.data[i], ds.points.data[i], 1e-12);
  EXPECT_EQ(back.labels, ds.labels);
}

TEST(Synthetic, ReproducibleBoundedAndCentred) {
  const auto a = gen_synthetic(301, 4, 3, 0.5, 0.05, 7);
  const auto b = gen_synthetic(301, 4, 3, 0.5, 0.05, 7);
  EXPECT_EQ(a.points.data, b.points.data);
  EXPECT_NE(gen_synthetic(301, 4, 3, 0.5, 0.05, 8).points.data, a.points.data);
  for (double v : a.points.data) EXPECT_LE(std::abs(v), 0.5);
  // std 0 puts every point on its centre.
  const auto z = gen_synthetic(40, 4, 3, 0.5, 0.0, 7);
  const auto centers = init_centroids(4, 3, 0.5, 7);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t f = 0; f < 3; ++f)
      EXPECT_EQ(z.points(i, f), centers.centers(static_cast<std::size_t>(z.labels[i]), f));
  EXPECT_THROW(gen_synthetic(3, 4, 2, 0.5, 0.1, 1), std::invalid_argument);
}

TEST(Lloyd, MatchesOracleWithoutEmptyClusters) {
  std::mt19937_64 rng(30);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + trial % 5;
    const auto ds = gen_synthetic(300, k, 3, 0.5, 0.04, 100 + static_cast<std::uint64_t>(trial));
    const auto init = init_centroids(k, 3, 0.5, 200 + static_cast<std::uint64_t>(trial));
    const auto got = lloyd_plaintext(ds.points, init, 6, TieRule::lowest_index);
    bool empty = false;
    for (const auto& a : got.assignments)
      for (int j = 0; j < k; ++j) empty = empty || std::count(a.begin(), a.end(), j) == 0;
    if (empty) continue;  // the two handle empty clusters differently
    const auto want = oracle::lloyd(ds.points.data, 300, 3, init.centers.data, static_cast<std::size_t>(k), 6, false);
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got.final.centers.data[i], want[i], 1e-12);
  }
}

TEST(Lloyd, FixedPointAndTies) {
  Matrix x(4, 1);
  x.data = {-0.4, -0.2, 0.2, 0.4};
  const auto c = centroids_from({-0.3, 0.3}, 2, 1, 0.5);
  const auto r = lloyd_plaintext(x, c, 3);
  EXPECT_NEAR(r.final.centers(0, 0), -0.3, 1e-15);
  EXPECT_NEAR(r.final.centers(1, 0), 0.3, 1e-15);
  EXPECT_EQ(r.assignments[0], (std::vector<int>{0, 0, 1, 1}));

  Matrix y(3, 1);
  y.data = {0.0, -0.4, 0.4};
  const auto t = lloyd_plaintext(y, c, 1, TieRule::unassigned);
  EXPECT_EQ(t.assignments[0][0], -1);
  EXPECT_EQ(t.final.centers.data, (std::vector<double>{-0.4, 0.4}));
  EXPECT_EQ(lloyd_plaintext(y, c, 1, TieRule::lowest_index).assignments[0][0], 0);
}

TEST(Lloyd, LossNeverIncreases) {
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    const auto ds = gen_synthetic(500, 5, 2, 0.5, 0.08, seed);
    const auto r = lloyd_plaintext(ds.points, init_centroids(5, 2, 0.5, seed + 10), 10, TieRule::lowest_index);
    for (std::size_t t = 1; t < r.trajectory.size(); ++t) {
      bool empty = false;
      for (int j = 0; j < 5; ++j) empty = empty || std::count(r.assignments[t - 1].begin(), r.assignments[t - 1].end(), j) == 0;
      if (empty) continue;  // reinitialisation may raise the loss
      EXPECT_LE(normalized_loss(ds.points, r.trajectory[t].centers),
                normalized_loss(ds.points, r.trajectory[t - 1].centers) + 1e-15);
    }
  }
}

TEST(Accuracy, MatchesPermutationOracle) {
  std::mt19937_64 rng(5);
  for (int k : {2, 3, 5, 7}) {
    const auto ds = gen_synthetic(400, k, 2, 0.5, 0.12, static_cast<std::uint64_t>(k));
    const auto c = init_centroids(k, 2, 0.5, 50 + static_cast<std::uint64_t>(k));
    std::vector<int> pred;
    for (std::size_t i = 0; i < ds.points.rows; ++i)
      pred.push_back(nearest_centroid(ds.points.row(i), c.centers, TieRule::lowest_index));
    EXPECT_NEAR(cluster_accuracy(ds.points, c.centers, ds.labels), oracle::best_permutation_accuracy(pred, ds.labels, k),
                1e-12);
    // Relabelling the truth does not matter.
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> relabelled;
    for (int l : ds.labels) relabelled.push_back(10 + perm[static_cast<std::size_t>(l)]);
    EXPECT_DOUBLE_EQ(cluster_accuracy(ds.points, c.centers, relabelled), cluster_accuracy(ds.points, c.centers, ds.labels));
  }
  const auto ds = gen_synthetic(30, 3, 2, 0.5, 0.1, 1);
  EXPECT_THROW(cluster_accuracy(ds.points, init_centroids(4, 2, 0.5, 1).centers, ds.labels), std::invalid_argument);
  EXPECT_THROW(cluster_accuracy(ds.points, init_centroids(3, 2, 0.5, 1).centers, {}), std::invalid_argument);
}

TEST(Accuracy, HungarianAgreesWithExhaustive) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + static_cast<std::size_t>(trial % 8);
    std::vector<std::vector<double>> w(k, std::vector<double>(k));
    for (auto& row : w)
      for (double& v : row) v = std::floor(u(rng));
    auto score = [&](const std::vector<int>& p) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += w[i][static_cast<std::size_t>(p[i])];
      return s;
    };
    const auto h = max_weight_assignment(w);
    std::vector<int> sorted = h;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < k; ++i) ASSERT_EQ(sorted[i], static_cast<int>(i));
    EXPECT_EQ(score(h), score(exhaustive_assignment(w)));
  }
}

TEST(Accuracy, NearPerfectAtTrueCentres) {
  for (int k : {2, 5, 15}) {
    const double bound = 0.5;
    const auto ds = gen_synthetic(3000, k, 2, bound, bound / (8.0 * k), 11);
    const auto c = init_centroids(k, 2, bound, 11);
    EXPECT_GE(cluster_accuracy(ds.points, c.centers, ds.labels), 0.99) << "k=" << k;
  }
}

TEST(Network, StandardProfiles) {
  EXPECT_EQ(standard_networks().size(), 10u);
  EXPECT_EQ(network_by_name("ccWAN50").delay_ms, 150.0);
  EXPECT_EQ(network_by_name("LAN10000").bandwidth_mbps, 10000.0);
  EXPECT_THROW(network_by_name("dialup"), std::invalid_argument);
}

TEST(Network, EstimateIsAdditiveAndMonotone) {
  Transcript t;
  t.messages = {{0, 1, 0, MessageKind::public_key, 1'000'000, 1, 0},
                {0, 1, 0, MessageKind::encrypted_features, 4'000'000, 2, 0},
                {0, 1, 0, MessageKind::encrypted_features, 2'000'000, 1, 0},
                {1, 0, 1, MessageKind::noisy_aggregates, 500'000, 3, 0},
                {1, 1, 0, MessageKind::centroids, 48, 0, 6}};
  EXPECT_EQ(communication_phases(t).size(), 4u);
  const NetworkConfig net{"x", 100.0, 10.0};
  // 7.5 MB at 100 Mbps plus four round trips of 20 ms.
  const double bytes = 1e6 + 6e6 + 5e5 + 48;
  EXPECT_NEAR(estimate_wallclock(t, net, 0.0), bytes * 8 / 1e8 + 4 * 0.02, 1e-12);
  EXPECT_NEAR(estimate_wallclock(t, net, 2.5) - estimate_wallclock(t, net, 0.0), 2.5, 1e-12);
  EXPECT_EQ(estimate_wallclock(Transcript{}, net, 1.25), 1.25);
  NetworkConfig fast = net;
  fast.bandwidth_mbps = 200.0;
  EXPECT_NEAR(estimate_wallclock(t, fast, 0.0) - 0.08, (estimate_wallclock(t, net, 0.0) - 0.08) / 2, 1e-12);
  NetworkConfig slow = net;
  slow.delay_ms = 50.0;
  EXPECT_GT(estimate_wallclock(t, slow, 0.0), estimate_wallclock(t, net, 0.0));
  // Splitting the transcript splits the estimate, up to the compute term.
  Transcript a;
  Transcript b;
  a.messages.assign(t.messages.begin(), t.messages.begin() + 3);
  b.messages.assign(t.messages.begin() + 3, t.messages.end());
  EXPECT_NEAR(estimate_wallclock(a, net, 0.0) + estimate_wallclock(b, net, 0.0), estimate_wallclock(t, net, 0.0), 1e-12);
  NetworkConfig bad = net;
  bad.bandwidth_mbps = 0.0;
  EXPECT_THROW(estimate_wallclock(t, bad, 0.0), std::invalid_argument);
}
