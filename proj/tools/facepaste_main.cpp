#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "facepaste/errors.hpp"
#include "facepaste/oracle.hpp"
#include "facepaste/runner.hpp"

namespace {

using namespace facepaste;

std::vector<std::pair<int, int>> parse_pairs(const std::vector<std::string>& specs) {
  std::vector<std::pair<int, int>> pairs;
  for (const std::string& s : specs) {
    auto pos = s.find(':');
    if (pos == std::string::npos) {
      throw ConfigError("pair must look like S:T, got " + s);
    }
    pairs.emplace_back(std::stoi(s.substr(0, pos)), std::stoi(s.substr(pos + 1)));
  }
  return pairs;
}

std::string default_run_id() {
  std::string ts = rfc3339_utc_now();  // 2026-08-22T12:34:56.789Z
  std::string id = "run-";
  for (char c : ts) {
    if (c == '-' || c == ':' || c == '.') continue;
    if (c == 'T') {
      id += '-';
      continue;
    }
    if (c == 'Z') break;
    id += c;
  }
  return id;
}

int cmd_attack(const std::string& config_path, const std::vector<std::string>& pair_specs,
               const std::string& mode, const std::string& run_id) {
  RunConfig cfg = load_run_config(config_path);
  if (!pair_specs.empty()) {
    cfg.pairs = parse_pairs(pair_specs);
    cfg.validate();
  }
  std::vector<MaskMode> modes;
  if (mode == "both") {
    modes = {MaskMode::manual, MaskMode::automatic};
  } else {
    modes = {mask_mode_from_string(mode)};
  }
  std::string id = run_id.empty() ? default_run_id() : run_id;
  std::string run_dir = cfg.output_dir + "/" + id;
  Report report = run_campaign(cfg, modes, run_dir);
  std::cout << report_text(report);
  std::cout << "results in " << run_dir << "\n";
  return 0;
}

int cmd_serve(const std::string& config_path, const std::string& bind_addr) {
  RunConfig cfg = load_run_config(config_path);
  FaceSet faces =
      cfg.faces_dir.empty() ? generate_toy_faces(cfg.faces_seed) : load_faces(cfg.faces_dir);
  SimulatedOracle oracle(faces);
  OracleServer server(std::move(oracle), cfg.budget);

  std::string host = "0.0.0.0";
  int port = 8080;
  auto pos = bind_addr.rfind(':');
  if (pos == std::string::npos) {
    host = bind_addr;
  } else {
    if (pos > 0) host = bind_addr.substr(0, pos);
    port = std::stoi(bind_addr.substr(pos + 1));
  }
  int bound = server.bind(host, port);
  std::cout << "serving on " << host << ":" << bound << "\n";
  server.run();
  return 0;
}

int cmd_pgd(const std::string& config_path, const std::vector<std::string>& pair_specs,
            bool transfer, const std::string& run_id) {
  RunConfig cfg = load_run_config(config_path);
  std::vector<std::pair<int, int>> pairs =
      pair_specs.empty() ? attack_pairs(cfg) : parse_pairs(pair_specs);
  PgdCampaignResult result = run_pgd_campaign(cfg, pairs, transfer);

  int hits = 0;
  for (const PgdPairOutcome& o : result.outcomes) {
    if (o.argmax_is_target) ++hits;
    std::printf("%d->%d  argmax_is_target=%d  final_ssim=%.6f  surrogate_confidence=%.6f",
                o.source_id, o.target_id, o.argmax_is_target ? 1 : 0, o.final_ssim,
                o.surrogate_confidence);
    if (o.transfer_confidence) {
      std::printf("  transfer_confidence=%.6f", *o.transfer_confidence);
    }
    std::printf("\n");
  }
  std::printf("argmax hits: %d/%zu\n", hits, result.outcomes.size());
  if (result.transfer_enabled) {
    std::printf("transfer confidence mean=%.6f max=%.6f\n", result.transfer_mean,
                result.transfer_max);
  }
  std::string id = run_id.empty() ? default_run_id() : run_id;
  std::string run_dir = cfg.output_dir + "/" + id;
  std::filesystem::create_directories(run_dir);
  std::ofstream out(run_dir + "/pgd_summary.json");
  out << pgd_summary_json(result) << '\n';
  std::cout << "summary in " << run_dir << "/pgd_summary.json\n";
  return 0;
}

int cmd_report(const std::string& run_dir) {
  std::vector<LogRecord> log = read_run_logs(run_dir);
  Report report = make_report(log);
  std::cout << report_text(report);
  std::ofstream out(run_dir + "/summary.json");
  out << report_json_string(report) << '\n';
  return 0;
}

int cmd_curve(const std::string& run_dir, double min, double max, int steps) {
  std::vector<LogRecord> log = read_run_logs(run_dir);
  write_curve_csv(tradeoff_curve(log, linspace_thresholds(min, max, steps)),
                  run_dir + "/curve.csv");
  std::cout << "wrote " << run_dir << "/curve.csv\n";
  return 0;
}

int cmd_scatter(const std::string& run_dir) {
  std::vector<LogRecord> log = read_run_logs(run_dir);
  write_scatter_csv(log, run_dir + "/scatter.csv");
  std::cout << "wrote " << run_dir << "/scatter.csv\n";
  return 0;
}

int cmd_gen_faces(std::uint64_t seed, const std::string& out_dir) {
  write_faces(generate_toy_faces(seed), out_dir);
  std::cout << "wrote 10 faces to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"face-pasting black-box attack toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> pair_specs;
  std::string mode = "both";
  std::string run_id;
  std::string bind_addr = "0.0.0.0:8080";
  bool transfer = false;
  std::string run_dir;
  double curve_min = 0.5;
  double curve_max = 1.0;
  int curve_steps = 51;
  std::uint64_t seed = 1;
  std::string out_dir = "faces";

  CLI::App* attack = app.add_subcommand("attack", "run attack campaigns");
  attack->add_option("--config", config_path, "run config JSON")->required();
  attack->add_option("--pair", pair_specs, "restrict to pair S:T (repeatable)");
  attack->add_option("--mode", mode, "manual|auto|both")
      ->check(CLI::IsMember({"manual", "auto", "both"}));
  attack->add_option("--run-id", run_id, "output directory name under output_dir");

  CLI::App* serve = app.add_subcommand("serve", "expose the simulated oracle over HTTP");
  serve->add_option("--config", config_path, "run config JSON")->required();
  serve->add_option("--bind", bind_addr, "host:port");

  CLI::App* pgd = app.add_subcommand("pgd", "white-box surrogate attack");
  pgd->add_option("--config", config_path, "run config JSON")->required();
  pgd->add_option("--pair", pair_specs, "restrict to pair S:T (repeatable)");
  pgd->add_flag("--transfer", transfer, "also score against a shifted-config oracle");
  pgd->add_option("--run-id", run_id, "output directory name under output_dir");

  CLI::App* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("run_dir", run_dir, "attack run directory")->required();

  CLI::App* curve = app.add_subcommand("curve", "stealthiness/confidence tradeoff sweep");
  curve->add_option("run_dir", run_dir, "attack run directory")->required();
  curve->add_option("--min", curve_min, "lowest threshold");
  curve->add_option("--max", curve_max, "highest threshold");
  curve->add_option("--steps", curve_steps, "threshold count");

  CLI::App* scatter = app.add_subcommand("scatter", "successful-query position/rotation CSV");
  scatter->add_option("run_dir", run_dir, "attack run directory")->required();

  CLI::App* gen = app.add_subcommand("gen-faces", "emit the deterministic toy face set");
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*attack) return cmd_attack(config_path, pair_specs, mode, run_id);
    if (*serve) return cmd_serve(config_path, bind_addr);
    if (*pgd) return cmd_pgd(config_path, pair_specs, transfer, run_id);
    if (*report) return cmd_report(run_dir);
    if (*curve) return cmd_curve(run_dir, curve_min, curve_max, curve_steps);
    if (*scatter) return cmd_scatter(run_dir);
    if (*gen) return cmd_gen_faces(seed, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
