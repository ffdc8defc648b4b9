// Copyright 2026 The vkmeans Authors.
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "vkmeans/experiment.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& report, const std::string& trajectory) {
  vkm::ExperimentConfig cfg = vkm::load_experiment_config(config_path);
  if (!report.empty()) cfg.report_path = report;
  if (!trajectory.empty()) cfg.trajectory_path = trajectory;
  const auto out = vkm::run_experiment(cfg);
  vkm::write_outputs(cfg, out);
  const auto& mean = out.report.at("mean");
  std::cout << "secure loss " << mean["secure"]["loss"] << " accuracy " << mean["secure"]["accuracy"]
            << " | plaintext loss " << mean["plaintext"]["loss"] << " accuracy " << mean["plaintext"]["accuracy"]
            << "\nbytes " << out.report["transcript"]["bytes"] << "\nwrote " << cfg.report_path << "\n";
  return 0;
}

int cmd_baseline(const std::string& config_path, const std::string& report, const std::string& trajectory) {
  vkm::ExperimentConfig cfg = vkm::load_experiment_config(config_path);
  if (!report.empty()) cfg.report_path = report;
  if (!trajectory.empty()) cfg.trajectory_path = trajectory;
  const auto out = vkm::run_baseline(cfg);
  vkm::write_outputs(cfg, out);
  const auto& mean = out.report.at("mean");
  std::cout << "plaintext loss " << mean["plaintext"]["loss"] << " accuracy " << mean["plaintext"]["accuracy"]
            << "\nwrote " << cfg.report_path << "\n";
  return 0;
}

// Accepts a report written by `run`, or a bare array of messages.
vkm::Transcript read_transcript(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  const vkm::json j = vkm::json::parse(in);
  if (j.is_array()) return vkm::transcript_from_json(j);
  if (j.contains("transcript") && j["transcript"].contains("messages_list"))
    return vkm::transcript_from_json(j["transcript"]["messages_list"]);
  throw std::runtime_error("'" + path + "' holds no transcript");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vertically partitioned k-means over a simulated homomorphic engine"};
  app.require_subcommand(1);

  std::string config;
  std::string report;
  std::string trajectory;
  auto* run = app.add_subcommand("run", "Run the protocol and the plaintext baseline from a config file");
  run->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--report", report, "Report path (overrides the config)");
  run->add_option("-t,--trajectory", trajectory, "Trajectory CSV path (overrides the config)");

  auto* base = app.add_subcommand("baseline", "Plaintext Lloyd only");
  base->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  base->add_option("-o,--report", report, "Report path (overrides the config)");
  base->add_option("-t,--trajectory", trajectory, "Trajectory CSV path (overrides the config)");

  std::size_t n = 1000;
  int k = 2;
  int d = 2;
  double bound = 0.5;
  double stddev = 0.05;
  std::uint64_t seed = 1;
  std::string out_csv;
  auto* gen = app.add_subcommand("gen", "Write a synthetic Gaussian-cluster dataset as CSV (last column = label)");
  gen->add_option("-n", n, "Points")->check(CLI::PositiveNumber);
  gen->add_option("-k", k, "Clusters")->check(CLI::Range(2, 1 << 16));
  gen->add_option("-d", d, "Features")->check(CLI::PositiveNumber);
  gen->add_option("-B,--bound", bound, "Feature bound B")->check(CLI::PositiveNumber);
  gen->add_option("--std", stddev, "Cluster standard deviation")->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("-o,--out", out_csv, "Output CSV")->required();

  std::string transcript_path;
  std::string network = "LAN1000";
  double compute = 0.0;
  bool all_networks = false;
  auto* est = app.add_subcommand("estimate", "Wall-clock estimate of a transcript on a network profile");
  est->add_option("transcript", transcript_path, "Report JSON or message array")->required()->check(CLI::ExistingFile);
  est->add_option("-N,--network", network, "Network profile name");
  est->add_flag("--all", all_networks, "Every standard profile");
  est->add_option("-c,--compute-seconds", compute, "Local compute time added to the estimate")
      ->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, report, trajectory);
    if (*base) return cmd_baseline(config, report, trajectory);
    if (*gen) {
      const vkm::Dataset ds = vkm::gen_synthetic(n, k, d, bound, stddev, seed);
      vkm::write_csv(ds, out_csv);
      std::cout << "wrote " << ds.points.rows << " points to " << out_csv << "\n";
      return 0;
    }
    if (*est) {
      const vkm::Transcript t = read_transcript(transcript_path);
      if (all_networks) {
        for (const auto& net : vkm::standard_networks())
          std::cout << net.name << " " << vkm::estimate_wallclock(t, net, compute) << "\n";
      } else {
        std::cout << vkm::estimate_wallclock(t, vkm::network_by_name(network), compute) << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
