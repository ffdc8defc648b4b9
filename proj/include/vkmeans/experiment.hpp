// Copyright 2026 The vkmeans Authors.
// SPDX-License-Identifier: Apache-2.0

// Experiment configuration, the per-seed driver and JSON reporting.

#pragma once

#include <bit>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "vkmeans/bench.hpp"
#include "vkmeans/protocol.hpp"

namespace vkm {

using json = nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SyntheticSpec {
  std::size_t n = 1000;
  int k = 2;
  int d = 2;
  double cluster_std = 0.05;
  std::uint64_t seed = 1;
};

struct ExperimentConfig {
  std::string name = "experiment";
  // Exactly one of these.
  std::optional<std::string> data_path;
  std::optional<SyntheticSpec> synthetic;
  CsvOptions csv;

  int k = 2;
  int rounds = 10;
  double bound = 0.5;
  bool dp = true;
  double epsilon = 1.0;
  std::optional<double> delta;  // unset: 1/n
  Composition composition = Composition::automatic;
  bool swap_noise_factors = false;
  int sign_degree = 511;
  double sign_steepness = 118.0;
  bool pairwise_scale = true;
  Convergence convergence = Convergence::fixed_rounds;
  double shift_tolerance = 1e-4;

  std::size_t slot_count = std::size_t{1} << 14;
  std::optional<int> depth_budget;  // unset: exactly one round
  double bytes_per_slot_per_level = 4.0166;  // calibrated on the n=1000, k=2 cell (17.9 MB)
  double base_overhead_bytes = 0.0;
  double approx_perturbation = 0.0;

  DeploymentModel model = DeploymentModel::two_party;
  std::vector<int> party_split;  // feature count per party, empty: half and half
  std::vector<std::uint64_t> seeds{1};
  std::vector<NetworkConfig> networks;
  double compute_seconds = 0.0;

  std::string report_path = "report.json";
  std::optional<std::string> trajectory_path;
};

namespace detail {

template <class T>
T field(const json& j, const std::string& path, const std::string& key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + path + key + "': wrong type (" + j.at(key).dump() + ")");
  }
}

inline void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("config field '" + field + "': " + what);
}

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError("config field '" + path + key + "': unknown field");
  }
}

inline NetworkConfig parse_network(const json& j, const std::string& path) {
  if (j.is_string()) {
    try {
      return network_by_name(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("config field '" + path + "': " + e.what());
    }
  }
  require(j.is_object(), path, "expected a profile name or an object");
  check_keys(j, path + ".", {"name", "bandwidth_mbps", "delay_ms", "jitter_ms", "loss_pct", "burst_kb", "quantum", "r2q"});
  NetworkConfig n;
  n.name = field<std::string>(j, path + ".", "name", "custom");
  n.bandwidth_mbps = field(j, path + ".", "bandwidth_mbps", 0.0);
  n.delay_ms = field(j, path + ".", "delay_ms", 0.0);
  n.jitter_ms = field(j, path + ".", "jitter_ms", 0.0);
  n.loss_pct = field(j, path + ".", "loss_pct", 0.0);
  n.burst_kb = field(j, path + ".", "burst_kb", 0.0);
  n.quantum_bytes = field(j, path + ".", "quantum", 0.0);
  n.r2q = field(j, path + ".", "r2q", 0.0);
  require(n.bandwidth_mbps > 0.0, path + ".bandwidth_mbps", "must be positive");
  require(n.delay_ms >= 0.0, path + ".delay_ms", "must be non-negative");
  return n;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const json& j) {
  using detail::field;
  using detail::require;
  require(j.is_object(), "<root>", "expected an object");
  detail::check_keys(j, "", {"name", "dataset", "k", "rounds", "bound", "privacy", "sign", "convergence", "engine",
                             "model", "party_split", "seeds", "networks", "compute_seconds", "output"});
  ExperimentConfig c;
  c.name = field<std::string>(j, "", "name", c.name);

  require(j.contains("dataset") && j.at("dataset").is_object(), "dataset", "required object");
  const json& ds = j.at("dataset");
  detail::check_keys(ds, "dataset.", {"path", "normalize", "header", "label_column", "synthetic"});
  if (ds.contains("path")) {
    c.data_path = field<std::string>(ds, "dataset.", "path", "");
    require(!c.data_path->empty(), "dataset.path", "must not be empty");
    c.csv.normalize = field(ds, "dataset.", "normalize", true);
    if (ds.contains("header")) c.csv.header = field(ds, "dataset.", "header", false);
    c.csv.label_column = field(ds, "dataset.", "label_column", -1);
  }
  if (ds.contains("synthetic")) {
    require(!c.data_path, "dataset", "give either path or synthetic, not both");
    const json& s = ds.at("synthetic");
    require(s.is_object(), "dataset.synthetic", "expected an object");
    detail::check_keys(s, "dataset.synthetic.", {"n", "k", "d", "cluster_std", "seed"});
    SyntheticSpec spec;
    spec.n = field(s, "dataset.synthetic.", "n", spec.n);
    spec.k = field(s, "dataset.synthetic.", "k", spec.k);
    spec.d = field(s, "dataset.synthetic.", "d", spec.d);
    spec.cluster_std = field(s, "dataset.synthetic.", "cluster_std", spec.cluster_std);
    spec.seed = field(s, "dataset.synthetic.", "seed", spec.seed);
    require(spec.k >= 2, "dataset.synthetic.k", "must be >= 2");
    require(spec.d >= 1, "dataset.synthetic.d", "must be >= 1");
    require(spec.n >= static_cast<std::size_t>(spec.k), "dataset.synthetic.n", "must be >= k");
    require(spec.cluster_std >= 0.0, "dataset.synthetic.cluster_std", "must be non-negative");
    c.synthetic = spec;
  }
  require(c.data_path || c.synthetic, "dataset", "needs 'path' or 'synthetic'");

  c.k = field(j, "", "k", c.synthetic ? c.synthetic->k : c.k);
  require(c.k >= 2, "k", "must be >= 2");
  c.rounds = field(j, "", "rounds", c.rounds);
  require(c.rounds >= 1, "rounds", "must be >= 1");
  c.bound = field(j, "", "bound", c.bound);
  require(c.bound > 0.0, "bound", "must be positive");

  if (j.contains("privacy")) {
    const json& p = j.at("privacy");
    require(p.is_object(), "privacy", "expected an object");
    detail::check_keys(p, "privacy.", {"enabled", "epsilon", "delta", "composition", "swap_noise_factors"});
    c.dp = field(p, "privacy.", "enabled", c.dp);
    c.epsilon = field(p, "privacy.", "epsilon", c.epsilon);
    require(c.epsilon > 0.0, "privacy.epsilon", "must be positive");
    if (p.contains("delta") && !p.at("delta").is_string()) {
      c.delta = field(p, "privacy.", "delta", 0.0);
      require(*c.delta > 0.0 && *c.delta < 1.0, "privacy.delta", "must lie in (0, 1)");
    } else if (p.contains("delta")) {
      require(p.at("delta").get<std::string>() == "1/n", "privacy.delta", "expected a number or \"1/n\"");
    }
    const auto comp = field<std::string>(p, "privacy.", "composition", "auto");
    if (comp == "simple") {
      c.composition = Composition::simple;
    } else if (comp == "advanced") {
      c.composition = Composition::advanced;
    } else {
      require(comp == "auto", "privacy.composition", "expected simple, advanced or auto");
    }
    c.swap_noise_factors = field(p, "privacy.", "swap_noise_factors", c.swap_noise_factors);
  }

  if (j.contains("sign")) {
    const json& s = j.at("sign");
    detail::check_keys(s, "sign.", {"degree", "steepness", "pairwise_scale"});
    c.sign_degree = field(s, "sign.", "degree", c.sign_degree);
    require(c.sign_degree >= 1 && c.sign_degree % 2 == 1, "sign.degree", "must be odd and positive");
    c.sign_steepness = field(s, "sign.", "steepness", c.sign_steepness);
    require(c.sign_steepness > 0.0, "sign.steepness", "must be positive");
    c.pairwise_scale = field(s, "sign.", "pairwise_scale", c.pairwise_scale);
  }

  if (j.contains("convergence")) {
    const json& s = j.at("convergence");
    detail::check_keys(s, "convergence.", {"mode", "tolerance"});
    const auto mode = field<std::string>(s, "convergence.", "mode", "fixed");
    require(mode == "fixed" || mode == "shift", "convergence.mode", "expected fixed or shift");
    c.convergence = mode == "shift" ? Convergence::centroid_shift : Convergence::fixed_rounds;
    c.shift_tolerance = field(s, "convergence.", "tolerance", c.shift_tolerance);
    require(c.shift_tolerance > 0.0, "convergence.tolerance", "must be positive");
  }

  if (j.contains("engine")) {
    const json& e = j.at("engine");
    detail::check_keys(e, "engine.", {"slot_count", "depth_budget", "bytes_per_slot_per_level", "base_overhead_bytes",
                                      "approx_perturbation"});
    c.slot_count = field(e, "engine.", "slot_count", c.slot_count);
    require(c.slot_count > 0 && std::has_single_bit(c.slot_count), "engine.slot_count", "must be a power of two");
    if (e.contains("depth_budget")) c.depth_budget = field(e, "engine.", "depth_budget", 0);
    c.bytes_per_slot_per_level = field(e, "engine.", "bytes_per_slot_per_level", c.bytes_per_slot_per_level);
    require(c.bytes_per_slot_per_level > 0.0, "engine.bytes_per_slot_per_level", "must be positive");
    c.base_overhead_bytes = field(e, "engine.", "base_overhead_bytes", c.base_overhead_bytes);
    require(c.base_overhead_bytes >= 0.0, "engine.base_overhead_bytes", "must be non-negative");
    c.approx_perturbation = field(e, "engine.", "approx_perturbation", c.approx_perturbation);
  }

  const auto model = field<std::string>(j, "", "model", "two-party");
  if (model == "two-party") {
    c.model = DeploymentModel::two_party;
  } else if (model == "server-aided") {
    c.model = DeploymentModel::server_aided;
  } else if (model == "mpc-simulated") {
    c.model = DeploymentModel::mpc_simulated;
  } else {
    throw ConfigError("config field 'model': expected two-party, server-aided or mpc-simulated");
  }
  c.party_split = field(j, "", "party_split", c.party_split);
  for (int s : c.party_split) require(s >= 1, "party_split", "every party needs at least one feature");
  if (c.model == DeploymentModel::two_party && !c.party_split.empty())
    require(c.party_split.size() == 2, "party_split", "two-party model needs exactly two entries");
  if (c.model != DeploymentModel::two_party && !c.party_split.empty())
    require(c.party_split.size() >= 2, "party_split", "needs at least two parties");

  if (j.contains("seeds") && j.at("seeds").is_number_integer()) {
    const int count = j.at("seeds").get<int>();
    require(count >= 1, "seeds", "count must be >= 1");
    c.seeds.clear();
    for (int s = 1; s <= count; ++s) c.seeds.push_back(static_cast<std::uint64_t>(s));
  } else {
    c.seeds = field(j, "", "seeds", c.seeds);
    require(!c.seeds.empty(), "seeds", "must not be empty");
  }

  if (j.contains("networks")) {
    const json& nets = j.at("networks");
    if (nets.is_string() && nets.get<std::string>() == "all") {
      c.networks = standard_networks();
    } else {
      require(nets.is_array(), "networks", "expected an array or \"all\"");
      for (std::size_t i = 0; i < nets.size(); ++i)
        c.networks.push_back(detail::parse_network(nets[i], "networks[" + std::to_string(i) + "]"));
    }
  }
  c.compute_seconds = field(j, "", "compute_seconds", c.compute_seconds);
  require(c.compute_seconds >= 0.0, "compute_seconds", "must be non-negative");

  if (j.contains("output")) {
    const json& o = j.at("output");
    detail::check_keys(o, "output.", {"report", "trajectory"});
    c.report_path = field(o, "output.", "report", c.report_path);
    if (o.contains("trajectory")) c.trajectory_path = field<std::string>(o, "output.", "trajectory", "");
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_experiment_config(j);
}

// The dataset the protocol sees: features inside [-B, B]. Normalised CSV data
// in [0, 1] is centred on zero.
inline Dataset prepare_dataset(const ExperimentConfig& c) {
  Dataset ds;
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    ds = gen_synthetic(s.n, s.k, s.d, c.bound, s.cluster_std, s.seed);
  } else {
    ds = load_csv(*c.data_path, c.csv);
    if (c.csv.normalize) {
      for (double& v : ds.points.data) v = (v - 0.5) * 2.0 * c.bound;
      ds.preprocessing += ", shifted to [-B,B]";
    }
  }
  for (double v : ds.points.data)
    if (!(std::abs(v) <= c.bound))
      throw ConfigError("config field 'bound': dataset value " + std::to_string(v) + " lies outside [-B, B]");
  if (ds.points.rows < static_cast<std::size_t>(c.k)) throw ConfigError("config field 'k': dataset has fewer than k points");
  return ds;
}

inline ProtocolConfig protocol_config(const ExperimentConfig& c, std::size_t n, std::uint64_t seed) {
  ProtocolConfig p;
  p.k = c.k;
  p.rounds = c.rounds;
  p.bound = c.bound;
  p.dp = c.dp;
  p.budget.epsilon_total = c.epsilon;
  p.budget.delta_total = c.delta ? *c.delta : 1.0 / static_cast<double>(n);
  p.budget.rounds = c.rounds;
  p.budget.composition = c.composition;
  p.swap_noise_factors = c.swap_noise_factors;
  p.sign.degree = c.sign_degree;
  p.sign.steepness = c.sign_steepness;
  p.pairwise_input_scale = c.pairwise_scale;
  p.convergence = c.convergence;
  p.shift_tolerance = c.shift_tolerance;
  p.seed = seed;
  return p;
}

inline EngineConfig engine_config(const ExperimentConfig& c, const ProtocolConfig& p) {
  EngineConfig e;
  e.slot_count = c.slot_count;
  e.depth_budget = c.depth_budget ? *c.depth_budget : round_depth(p).round();
  e.approx_perturbation = c.approx_perturbation;
  e.size_model = {c.bytes_per_slot_per_level, c.base_overhead_bytes};
  return e;
}

inline std::vector<int> resolve_split(const ExperimentConfig& c, int d) {
  if (c.party_split.empty()) {
    if (d < 2) throw ConfigError("config field 'party_split': need d >= 2 to split features");
    return {d - d / 2, d / 2};
  }
  int total = 0;
  for (int s : c.party_split) total += s;
  if (total != d)
    throw ConfigError("config field 'party_split': sums to " + std::to_string(total) + " but the data has d = " +
                      std::to_string(d));
  return c.party_split;
}

inline json transcript_json(const Transcript& t) {
  json msgs = json::array();
  for (const auto& m : t.messages)
    msgs.push_back({{"round", m.round},
                    {"sender", m.sender},
                    {"receiver", m.receiver},
                    {"kind", to_string(m.kind)},
                    {"bytes", m.byte_size},
                    {"ciphertexts", m.ciphertext_count},
                    {"reals", m.plaintext_reals}});
  return msgs;
}

inline Transcript transcript_from_json(const json& msgs) {
  if (!msgs.is_array()) throw std::invalid_argument("transcript: expected an array of messages");
  Transcript t;
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    const json& m = msgs[i];
    try {
      t.messages.push_back({m.at("round").get<int>(), m.at("sender").get<int>(), m.at("receiver").get<int>(),
                            message_kind_from_string(m.at("kind").get<std::string>()),
                            m.at("bytes").get<std::uint64_t>(), m.value("ciphertexts", std::size_t{0}),
                            m.value("reals", std::size_t{0})});
    } catch (const std::exception& e) {
      throw std::invalid_argument("transcript message " + std::to_string(i) + ": " + e.what());
    }
  }
  return t;
}

inline json centers_json(const Matrix& m) {
  json out = json::array();
  for (std::size_t i = 0; i < m.rows; ++i) out.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return out;
}

namespace detail {

inline bool accuracy_defined(const Dataset& ds, int k) {
  if (ds.labels.empty()) return false;
  std::set<int> alphabet(ds.labels.begin(), ds.labels.end());
  return alphabet.size() == static_cast<std::size_t>(k);
}

inline json metrics(const Dataset& ds, const Matrix& centers, int k) {
  json m;
  m["loss"] = normalized_loss(ds.points, centers);
  m["accuracy"] = accuracy_defined(ds, k) ? json(cluster_accuracy(ds.points, centers, ds.labels)) : json(nullptr);
  return m;
}

inline void mean_into(json& out, const json& per_seed, const char* source, const char* key) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : per_seed) {
    if (!s.contains(source) || s.at(source).at(key).is_null()) continue;
    sum += s.at(source).at(key).get<double>();
    ++count;
  }
  out[source][key] = count ? json(sum / static_cast<double>(count)) : json(nullptr);
}

inline void write_trajectory_rows(std::ostream& os, std::uint64_t seed, const char* source,
                                  const std::vector<CentroidSet>& traj) {
  for (const auto& c : traj)
    for (std::size_t j = 0; j < c.k(); ++j) {
      os << seed << ',' << source << ',' << c.round << ',' << j;
      for (std::size_t f = 0; f < c.d(); ++f) os << ',' << c.centers(j, f);
      os << '\n';
    }
}

}  // namespace detail

struct ExperimentOutput {
  json report;
  std::string trajectory_csv;  // empty unless requested
};

// Plaintext Lloyd per seed, conventional tie rule.
inline ExperimentOutput run_baseline(const ExperimentConfig& c) {
  const Dataset ds = prepare_dataset(c);
  const int d = static_cast<int>(ds.points.cols);
  json per_seed = json::array();
  std::ostringstream traj;
  traj.precision(17);
  for (const auto seed : c.seeds) {
    const CentroidSet init = init_centroids(c.k, d, c.bound, seed);
    const LloydResult plain = lloyd_plaintext(ds.points, init, c.rounds, TieRule::lowest_index, seed);
    per_seed.push_back({{"seed", seed}, {"plaintext", detail::metrics(ds, plain.final.centers, c.k)},
                        {"plaintext_centroids", centers_json(plain.final.centers)}});
    detail::write_trajectory_rows(traj, seed, "plaintext", plain.trajectory);
  }
  json mean;
  detail::mean_into(mean, per_seed, "plaintext", "loss");
  detail::mean_into(mean, per_seed, "plaintext", "accuracy");
  ExperimentOutput out;
  out.report = {{"name", c.name},
                {"dataset", {{"name", ds.name}, {"n", ds.points.rows}, {"d", d}, {"preprocessing", ds.preprocessing}}},
                {"k", c.k},
                {"rounds", c.rounds},
                {"per_seed", per_seed},
                {"mean", mean}};
  if (c.trajectory_path) out.trajectory_csv = traj.str();
  return out;
}

// Protocol and plaintext baseline per seed.
inline ExperimentOutput run_experiment(const ExperimentConfig& c) {
  const Dataset ds = prepare_dataset(c);
  const std::size_t n = ds.points.rows;
  const int d = static_cast<int>(ds.points.cols);
  const std::vector<int> split = resolve_split(c, d);
  const auto parts = split_features(ds.points, split);

  json per_seed = json::array();
  std::ostringstream traj;
  traj.precision(17);
  json transcript_summary;
  json dp_report;
  json wallclock = json::object();
  std::vector<double> wall_sum(c.networks.size(), 0.0);
  Transcript first;

  for (std::size_t si = 0; si < c.seeds.size(); ++si) {
    const std::uint64_t seed = c.seeds[si];
    ProtocolConfig pc = protocol_config(c, n, seed);
    const EngineConfig ec = engine_config(c, pc);
    const Engine eng(ec);
    pc.init = init_centroids(c.k, d, c.bound, seed);

    const auto t0 = std::chrono::steady_clock::now();
    const RunResult res = run_multiparty(parts, c.model, pc, eng);
    const double sim_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const LloydResult plain = lloyd_plaintext(ds.points, *pc.init, c.rounds, TieRule::lowest_index, seed);

    per_seed.push_back({{"seed", seed},
                        {"secure", detail::metrics(ds, res.final.centers, c.k)},
                        {"plaintext", detail::metrics(ds, plain.final.centers, c.k)},
                        {"rounds_executed", res.shape.rounds},
                        {"simulation_seconds", sim_seconds},
                        {"secure_centroids", centers_json(res.final.centers)},
                        {"plaintext_centroids", centers_json(plain.final.centers)}});
    detail::write_trajectory_rows(traj, seed, "secure", res.trajectory);
    detail::write_trajectory_rows(traj, seed, "plaintext", plain.trajectory);
    for (std::size_t ni = 0; ni < c.networks.size(); ++ni)
      wall_sum[ni] += estimate_wallclock(res.transcript, c.networks[ni], c.compute_seconds);

    if (si == 0) {
      first = res.transcript;
      transcript_summary = {{"messages", res.transcript.messages.size()},
                            {"ciphertexts", res.transcript.total_ciphertexts()},
                            {"bytes", res.transcript.total_bytes()},
                            {"upload_ciphertexts", res.transcript.ciphertexts(MessageKind::encrypted_features)},
                            {"round_depth", res.round_depth},
                            {"depth_budget", ec.depth_budget},
                            {"computing_party", res.computing_party},
                            {"key_holder", res.key_holder},
                            {"messages_list", transcript_json(res.transcript)}};
      dp_report = {{"enabled", c.dp},
                   {"epsilon_total", pc.budget.epsilon_total},
                   {"delta_total", pc.budget.delta_total},
                   {"epsilon_round", c.dp ? json(res.round_budget.epsilon) : json(nullptr)},
                   {"delta_round", c.dp ? json(res.round_budget.delta) : json(nullptr)},
                   {"composition", res.round_budget.used == Composition::advanced ? "advanced" : "simple"},
                   {"sigma_sum", res.scales.sigma_sum},
                   {"sigma_count", res.scales.sigma_count}};
    }
  }
  for (std::size_t ni = 0; ni < c.networks.size(); ++ni)
    wallclock[c.networks[ni].name] = wall_sum[ni] / static_cast<double>(c.seeds.size());

  json mean;
  for (const char* src : {"secure", "plaintext"})
    for (const char* key : {"loss", "accuracy"}) detail::mean_into(mean, per_seed, src, key);

  ExperimentOutput out;
  out.report = {{"name", c.name},
                {"dataset", {{"name", ds.name}, {"n", n}, {"d", d}, {"preprocessing", ds.preprocessing}}},
                {"k", c.k},
                {"rounds", c.rounds},
                {"model", to_string(c.model)},
                {"party_split", split},
                {"per_seed", per_seed},
                {"mean", mean},
                {"privacy", dp_report},
                {"transcript", transcript_summary},
                {"wallclock_seconds", wallclock}};
  if (c.trajectory_path) out.trajectory_csv = traj.str();
  return out;
}

inline void write_outputs(const ExperimentConfig& c, const ExperimentOutput& out) {
  std::ofstream rep(c.report_path);
  if (!rep) throw std::runtime_error("cannot write '" + c.report_path + "'");
  rep << out.report.dump(2) << '\n';
  if (c.trajectory_path) {
    std::ofstream tr(*c.trajectory_path);
    if (!tr) throw std::runtime_error("cannot write '" + *c.trajectory_path + "'");
    tr << "seed,source,round,cluster";
    const int d = out.report.at("dataset").at("d").get<int>();
    for (int f = 0; f < d; ++f) tr << ",f" << f;
    tr << '\n' << out.trajectory_csv;
  }
}

}  // namespace vkm
