#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "relaygen/harness.hpp"

namespace fs = std::filesystem;
using namespace relaygen;

namespace {

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos <= csv.size()) {
    const size_t comma = csv.find(',', pos);
    const size_t end = comma == std::string::npos ? csv.size() : comma;
    out.push_back(csv.substr(pos, end - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<uint64_t> parse_seeds(const std::string& csv) {
  std::vector<uint64_t> seeds;
  for (const auto& tok : split_csv(csv)) seeds.push_back(std::stoull(tok));
  return seeds;
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> values;
  for (const auto& tok : split_csv(csv)) values.push_back(std::stod(tok));
  return values;
}

void print_run_lines(const RunManifest& m) {
  for (const auto& r : m.runs)
    std::printf("%-28s steps=%llu wall=%.1fs episodes=%llu %s\n", r.agent_id.c_str(),
                static_cast<unsigned long long>(r.total_env_steps), r.wall_seconds,
                static_cast<unsigned long long>(r.episodes), r.status.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relaygen: actor-critic training and relay-evaluation workbench"};
  app.require_subcommand(1);

  std::string config_path, profile, seeds_csv, out_override;
  int jobs = 1;

  auto* train = app.add_subcommand("train", "train one agent per seed and write a manifest");
  train->add_option("--config", config_path, "experiment config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--profile", profile, "profile override: desk or paper");
  train->add_option("--seeds", seeds_csv, "comma-separated seed override");
  train->add_option("--out", out_override, "output directory override");

  std::string tests_path, strangers_path, relay_out;
  auto* relay = app.add_subcommand("relay", "relay-evaluate a fleet on a stranger fleet");
  relay->add_option("--config", config_path, "experiment config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  relay->add_option("--profile", profile, "profile override: desk or paper");
  relay->add_option("--tests", tests_path, "test-fleet manifest (default: <out_dir>/manifest.json)");
  relay->add_option("--strangers", strangers_path, "stranger-fleet manifest (default: the test fleet)");
  relay->add_option("--out", relay_out, "report directory (default: <out_dir>/relay)");
  relay->add_option("--jobs", jobs, "matrix cells evaluated in parallel")->check(CLI::PositiveNumber);

  std::string axis, values_csv;
  auto* sweep = app.add_subcommand("sweep", "train + relay once per axis value");
  sweep->add_option("--config", config_path, "experiment config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--profile", profile, "profile override: desk or paper");
  sweep->add_option("--axis", axis, "n_pretrained | l_r | gamma_ratio | n_candidates")->required();
  sweep->add_option("--values", values_csv, "comma-separated axis values")->required();
  sweep->add_option("--strangers", strangers_path, "shared stranger-fleet manifest");
  sweep->add_option("--out", out_override, "output directory override");
  sweep->add_option("--jobs", jobs, "matrix cells evaluated in parallel")->check(CLI::PositiveNumber);

  std::string source_path, export_csv;
  int n_states = 0;
  auto* exporter = app.add_subcommand("export-states", "dump labeled observations for embedding");
  exporter->add_option("--config", config_path, "experiment config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  exporter->add_option("--profile", profile, "profile override: desk or paper");
  exporter->add_option("--source", source_path,
                       "fleet manifest or .rgsa pool (default: <out_dir>/manifest.json)");
  exporter->add_option("--out", export_csv, "output CSV (default: <out_dir>/export/states.csv)");
  exporter->add_option("--n-states", n_states, "states per agent override")->check(CLI::PositiveNumber);

  std::vector<std::string> report_files;
  std::string report_out;
  auto* report = app.add_subcommand("report", "render grouped tables from result CSVs");
  report->add_option("files", report_files, "matrix / ordinary-eval CSVs")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "write the tables here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg;
    if (!app.got_subcommand(report)) {
      cfg = load_config_file(config_path, profile);
      if (!seeds_csv.empty()) cfg.seeds = parse_seeds(seeds_csv);
      if (!out_override.empty()) cfg.out_dir = out_override;
    }

    if (app.got_subcommand(train)) {
      RunManifest m = cmd_train(cfg);
      print_run_lines(m);
      std::printf("manifest: %s\n", (fs::path(cfg.out_dir) / "manifest.json").string().c_str());
      return m.all_ok() ? 0 : 1;
    }

    if (app.got_subcommand(relay)) {
      if (tests_path.empty()) tests_path = (fs::path(cfg.out_dir) / "manifest.json").string();
      if (relay_out.empty()) relay_out = (fs::path(cfg.out_dir) / "relay").string();
      RelayArtifacts art = cmd_relay(cfg, tests_path, strangers_path, relay_out, jobs);
      for (const auto& t : art.table_txts) std::printf("table:  %s\n", t.c_str());
      for (const auto& c : art.matrix_csvs) std::printf("matrix: %s\n", c.c_str());
      if (!art.ordinary_csv.empty()) std::printf("ordinary: %s\n", art.ordinary_csv.c_str());
      if (art.holes > 0) std::printf("holes: %d cells failed to evaluate\n", art.holes);
      return art.holes == 0 ? 0 : 1;
    }

    if (app.got_subcommand(sweep)) {
      SweepResult res = cmd_sweep(cfg, axis, parse_values(values_csv), strangers_path, jobs);
      std::ifstream summary(res.summary_path, std::ios::binary);
      std::cout << summary.rdbuf();
      std::printf("summary: %s\n", res.summary_path.c_str());
      return res.all_ok() ? 0 : 1;
    }

    if (app.got_subcommand(exporter)) {
      if (source_path.empty()) source_path = (fs::path(cfg.out_dir) / "manifest.json").string();
      if (export_csv.empty())
        export_csv = (fs::path(cfg.out_dir) / "export" / "states.csv").string();
      if (n_states > 0) cfg.export_n_states = n_states;
      cmd_export_states(cfg, source_path, export_csv);
      std::printf("states: %s\n", export_csv.c_str());
      return 0;
    }

    if (app.got_subcommand(report)) {
      const std::string text = cmd_report(report_files);
      if (report_out.empty()) {
        std::fputs(text.c_str(), stdout);
      } else {
        std::ofstream out(report_out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + report_out);
        out << text;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
