#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "facepaste/bayesopt.hpp"
#include "facepaste/paste_attack.hpp"
#include "facepaste/pgd_attack.hpp"
#include "facepaste/toy_faces.hpp"

namespace facepaste {

struct RunConfig {
  std::uint64_t faces_seed = 1;
  std::string faces_dir;   // overrides the generator when set
  std::string mask_dir;
  std::string oracle_kind = "simulated";  // "simulated" | "remote"
  std::string remote_url;
  RemoteFieldMap remote_fields;
  int budget = 200;
  int init_queries = 50;
  std::vector<std::pair<int, int>> pairs;  // empty = all unequal pairs
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  int concurrency = 4;
  PgdConfig pgd;                       // crop_box width 0 = per-source default
  int pgd_transfer_embed_size = 32;

  void validate() const;
};

RunConfig load_run_config(const std::string& path);

// all 90 ordered unequal pairs, or the configured filter
std::vector<std::pair<int, int>> attack_pairs(const RunConfig& cfg);

struct LogRecord {
  int source_id = 0;
  int target_id = 0;
  int query_index = 0;
  PasteParams params;
  double confidence = 0.0;
  double stealthiness = 0.0;
  double objective = 0.0;
  bool success = false;
  std::string timestamp;  // RFC 3339 UTC
};

std::string attack_name(int source_id, int target_id);  // "s->t"
std::string serialize_record(const LogRecord& rec);     // one JSON line
LogRecord parse_record(const std::string& line);
std::vector<LogRecord> read_log(const std::string& path);

std::string rfc3339_utc_now();

struct AttackOutcome {
  int source_id = 0;
  int target_id = 0;
  MaskMode mode = MaskMode::manual;
  int queries = 0;
  double best_objective = 0.0;
  bool has_success = false;
  int first_success_index = 0;     // 1-based; 0 when no success
  double best_confidence = 0.0;    // highest-confidence successful query
  double best_stealthiness = 0.0;  // its stealthiness
  int best_success_index = 0;
  PasteParams best_success_params;
  std::string error;               // nonempty when the attack aborted early
};

struct CampaignResult {
  std::vector<AttackOutcome> outcomes;
};

// runs one mask mode over the pair filter on a worker pool, appending every
// query to <run_dir>/log_<mode>.jsonl (flushed per line)
CampaignResult run_matrix(const RunConfig& cfg, MaskMode mode, const std::string& run_dir);

struct CurvePoint {
  double threshold = 0.0;
  double total_confidence = 0.0;
  double total_stealthiness = 0.0;
  int dropped_attacks = 0;
};

// per attack: highest-confidence successful query with stealthiness >= tau
// (ties to higher stealthiness), summed over attacks
std::vector<CurvePoint> tradeoff_curve(const std::vector<LogRecord>& log,
                                       const std::vector<double>& thresholds);

std::vector<double> linspace_thresholds(double min, double max, int steps);

struct AttackSelection {
  int source_id = 0;
  int target_id = 0;
  bool success = false;
  double confidence = 0.0;
  double stealthiness = 0.0;
  int query_index = 0;
  int first_success_index = 0;
  PasteParams params;
};

struct ModeReport {
  std::string mode;  // "manual", "auto", "combined"
  int attacks = 0;
  int successes = 0;
  double total_confidence = 0.0;
  double total_stealthiness = 0.0;
  double mean_first_success = 0.0;  // over successful attacks
  std::vector<AttackSelection> selections;
};

struct Report {
  std::vector<ModeReport> modes;
  ModeReport combined;  // per attack, the mode whose selection wins on
                        // confidence (ties to stealthiness)
};

Report make_report(const std::vector<LogRecord>& log);
std::string report_text(const Report& report);
std::string report_json_string(const Report& report);

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);
void write_scatter_csv(const std::vector<LogRecord>& log, const std::string& path);

// reads every log_*.jsonl under run_dir (empty when none exist)
std::vector<LogRecord> read_run_logs(const std::string& run_dir);

// full campaign: per-mode matrices, then summary.json, curve.csv,
// scatter.csv, and best_<s>_<t>.png for every successful attack
Report run_campaign(const RunConfig& cfg, const std::vector<MaskMode>& modes,
                    const std::string& run_dir);

struct PgdPairOutcome {
  int source_id = 0;
  int target_id = 0;
  bool argmax_is_target = false;
  double final_ssim = 0.0;
  double surrogate_confidence = 0.0;
  std::optional<double> transfer_confidence;
};

struct PgdCampaignResult {
  std::vector<PgdPairOutcome> outcomes;
  double transfer_mean = 0.0;
  double transfer_max = 0.0;
  bool transfer_enabled = false;
};

PgdCampaignResult run_pgd_campaign(const RunConfig& cfg,
                                   const std::vector<std::pair<int, int>>& pairs, bool transfer);

std::string pgd_summary_json(const PgdCampaignResult& result);

}  // namespace facepaste
