#include "facepaste/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "facepaste/errors.hpp"
#include "facepaste/png_io.hpp"
#include "facepaste/rng.hpp"

namespace facepaste {

using nlohmann::json;

void RunConfig::validate() const {
  if (budget <= 0 || init_queries <= 0 || init_queries >= budget) {
    throw ConfigError("need 0 < init_queries < budget");
  }
  for (auto [s, t] : pairs) {
    if (s == t || s < 0 || s >= kNumClasses || t < 0 || t >= kNumClasses) {
      throw ConfigError("pair filter entries must be unequal class ids in 0..9");
    }
  }
  if (oracle_kind != "simulated" && oracle_kind != "remote") {
    throw ConfigError("oracle must be \"simulated\" or \"remote\"");
  }
  if (oracle_kind == "remote" && remote_url.empty()) {
    throw ConfigError("remote oracle requires a url");
  }
  if (concurrency < 1) {
    throw ConfigError("concurrency must be at least 1");
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config: " + path);
  }
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ConfigError("config is not a JSON object: " + path);
  }
  RunConfig cfg;
  cfg.faces_seed = j.value("faces_seed", cfg.faces_seed);
  cfg.faces_dir = j.value("faces_dir", cfg.faces_dir);
  cfg.mask_dir = j.value("mask_dir", cfg.mask_dir);
  if (j.contains("oracle")) {
    const json& o = j["oracle"];
    if (o.is_string()) {
      cfg.oracle_kind = o.get<std::string>();
    } else if (o.is_object()) {
      cfg.oracle_kind = o.value("type", cfg.oracle_kind);
      cfg.remote_url = o.value("url", cfg.remote_url);
      cfg.remote_fields.confidence = o.value("confidence_field", cfg.remote_fields.confidence);
      cfg.remote_fields.stealthiness =
          o.value("stealthiness_field", cfg.remote_fields.stealthiness);
      cfg.remote_fields.probabilities =
          o.value("probabilities_field", cfg.remote_fields.probabilities);
      cfg.remote_fields.queries_used =
          o.value("queries_used_field", cfg.remote_fields.queries_used);
    } else {
      throw ConfigError("oracle must be a string or an object");
    }
  }
  cfg.budget = j.value("budget", cfg.budget);
  cfg.init_queries = j.value("init_queries", cfg.init_queries);
  if (j.contains("pairs")) {
    for (const json& p : j["pairs"]) {
      if (!p.is_array() || p.size() != 2) {
        throw ConfigError("pairs entries must be [source, target]");
      }
      cfg.pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
  }
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.concurrency = j.value("concurrency", cfg.concurrency);
  if (j.contains("pgd")) {
    const json& p = j["pgd"];
    cfg.pgd.step_size = p.value("step_size", cfg.pgd.step_size);
    cfg.pgd.steps = p.value("steps", cfg.pgd.steps);
    cfg.pgd.ssim_floor = p.value("ssim_floor", cfg.pgd.ssim_floor);
    cfg.pgd.ssim_tolerance = p.value("ssim_tolerance", cfg.pgd.ssim_tolerance);
    cfg.pgd.crop_size = p.value("crop_size", cfg.pgd.crop_size);
    cfg.pgd.project_each_step = p.value("project_each_step", cfg.pgd.project_each_step);
    if (p.contains("crop_box")) {
      const json& b = p["crop_box"];
      cfg.pgd.crop_box = {b.value("x", 0), b.value("y", 0), b.value("width", 0),
                          b.value("height", 0)};
    }
    cfg.pgd_transfer_embed_size = p.value("transfer_embed_size", cfg.pgd_transfer_embed_size);
  }
  cfg.validate();
  return cfg;
}

std::vector<std::pair<int, int>> attack_pairs(const RunConfig& cfg) {
  if (!cfg.pairs.empty()) return cfg.pairs;
  std::vector<std::pair<int, int>> pairs;
  for (int s = 0; s < kNumClasses; ++s) {
    for (int t = 0; t < kNumClasses; ++t) {
      if (s != t) pairs.emplace_back(s, t);
    }
  }
  return pairs;
}

std::string attack_name(int source_id, int target_id) {
  return std::to_string(source_id) + "->" + std::to_string(target_id);
}

namespace {

json params_to_json(const PasteParams& p) {
  json j;
  j["cx"] = p.cx;
  j["cy"] = p.cy;
  j["sx"] = p.sx;
  j["sy"] = p.sy;
  j["theta"] = p.theta;
  j["mask_mode"] = to_string(p.mask_mode);
  if (p.mask_mode == MaskMode::manual) {
    j["bias"] = p.bias;
    j["slope"] = p.slope;
  } else {
    j["sigma"] = p.sigma;
  }
  return j;
}

PasteParams params_from_json(const json& j) {
  PasteParams p;
  p.cx = j.at("cx").get<double>();
  p.cy = j.at("cy").get<double>();
  p.sx = j.at("sx").get<double>();
  p.sy = j.at("sy").get<double>();
  p.theta = j.at("theta").get<double>();
  p.mask_mode = mask_mode_from_string(j.at("mask_mode").get<std::string>());
  if (p.mask_mode == MaskMode::manual) {
    p.bias = j.at("bias").get<double>();
    p.slope = j.at("slope").get<double>();
  } else {
    p.sigma = j.at("sigma").get<double>();
  }
  return p;
}

std::pair<int, int> parse_attack_name(const std::string& name) {
  auto pos = name.find("->");
  if (pos == std::string::npos) {
    throw InvalidParameterError("bad attack name: " + name);
  }
  return {std::stoi(name.substr(0, pos)), std::stoi(name.substr(pos + 2))};
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }
  return std::string(buf, end);
}

}  // namespace

std::string serialize_record(const LogRecord& rec) {
  json j;
  j["attack"] = attack_name(rec.source_id, rec.target_id);
  j["query_index"] = rec.query_index;
  j["params"] = params_to_json(rec.params);
  j["confidence"] = rec.confidence;
  j["stealthiness"] = rec.stealthiness;
  j["objective"] = rec.objective;
  j["success"] = rec.success;
  j["timestamp"] = rec.timestamp;
  return j.dump();
}

LogRecord parse_record(const std::string& line) {
  json j = json::parse(line);
  LogRecord rec;
  std::tie(rec.source_id, rec.target_id) = parse_attack_name(j.at("attack").get<std::string>());
  rec.query_index = j.at("query_index").get<int>();
  rec.params = params_from_json(j.at("params"));
  rec.confidence = j.at("confidence").get<double>();
  rec.stealthiness = j.at("stealthiness").get<double>();
  rec.objective = j.at("objective").get<double>();
  rec.success = j.at("success").get<bool>();
  rec.timestamp = j.at("timestamp").get<std::string>();
  return rec;
}

std::vector<LogRecord> read_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open log: " + path);
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  std::vector<LogRecord> records;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      records.push_back(parse_record(lines[i]));
    } catch (const std::exception&) {
      // a truncated final line is what an interrupted writer leaves behind
      if (i + 1 == lines.size()) break;
      throw;
    }
  }
  return records;
}

std::string rfc3339_utc_now() {
  using namespace std::chrono;
  auto now = system_clock::now();
  auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

namespace {

class LogSink {
 public:
  explicit LogSink(const std::string& path) : out_(path, std::ios::app) {
    if (!out_) {
      throw ConfigError("cannot open log for writing: " + path);
    }
  }

  void append(const LogRecord& rec) {
    std::string line = serialize_record(rec);
    std::lock_guard<std::mutex> lock(mu_);
    out_ << line << '\n';
    out_.flush();  // a crash after this point loses nothing already scored
  }

 private:
  std::ofstream out_;
  std::mutex mu_;
};

AttackOutcome summarize_attack(const BoState& state, const AttackSpec& spec) {
  AttackOutcome out;
  out.source_id = spec.source_id;
  out.target_id = spec.target_id;
  out.mode = spec.mask_mode;
  out.queries = static_cast<int>(state.history.size());
  out.best_objective = state.history.empty() ? 0.0 : state.best_objective;
  out.error = state.error;
  for (const BoObservation& obs : state.history) {
    if (!is_success(obs.result, spec.target_id)) continue;
    if (!out.has_success) {
      out.has_success = true;
      out.first_success_index = obs.result.query_index;
    }
    bool better = obs.result.confidence > out.best_confidence ||
                  (obs.result.confidence == out.best_confidence &&
                   obs.result.stealthiness > out.best_stealthiness);
    if (out.best_success_index == 0 || better) {
      out.best_confidence = obs.result.confidence;
      out.best_stealthiness = obs.result.stealthiness;
      out.best_success_index = obs.result.query_index;
      out.best_success_params = obs.params;
    }
  }
  return out;
}

}  // namespace

CampaignResult run_matrix(const RunConfig& cfg, MaskMode mode, const std::string& run_dir) {
  cfg.validate();
  FaceSet faces =
      cfg.faces_dir.empty() ? generate_toy_faces(cfg.faces_seed) : load_faces(cfg.faces_dir);
  MaskSet masks = build_mask_set(faces, cfg.mask_dir);
  std::vector<std::pair<int, int>> pairs = attack_pairs(cfg);

  std::filesystem::create_directories(run_dir);
  LogSink sink(run_dir + "/log_" + to_string(mode) + ".jsonl");

  SimulatedOracle simulated(faces);  // shared; read-only across workers

  CampaignResult result;
  result.outcomes.resize(pairs.size());
  std::atomic<std::size_t> next{0};
  const int workers = std::max(1, std::min<int>(cfg.concurrency, static_cast<int>(pairs.size())));

  auto work = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= pairs.size()) return;
      auto [s, t] = pairs[i];
      AttackSpec spec{s, t, mode, cfg.budget, cfg.init_queries};
      std::uint64_t seed = mix_seed(mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(s)),
                                             static_cast<std::uint64_t>(t)),
                                    mode == MaskMode::manual ? 1 : 2);
      auto on_query = [&, s, t](const BoObservation& obs) {
        LogRecord rec;
        rec.source_id = s;
        rec.target_id = t;
        rec.query_index = obs.result.query_index;
        rec.params = obs.params;
        rec.confidence = obs.result.confidence;
        rec.stealthiness = obs.result.stealthiness;
        rec.objective = obs.objective;
        rec.success = is_success(obs.result, t);
        rec.timestamp = rfc3339_utc_now();
        sink.append(rec);
      };
      BoState state;
      if (cfg.oracle_kind == "remote") {
        RemoteOracle remote({cfg.remote_url, cfg.remote_fields});
        state = optimize(spec, remote, faces, masks, seed, on_query);
      } else {
        state = optimize(spec, simulated, faces, masks, seed, on_query);
      }
      result.outcomes[i] = summarize_attack(state, spec);
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int i = 0; i < workers; ++i) pool.emplace_back(work);
  for (std::thread& th : pool) th.join();
  return result;
}

std::vector<double> linspace_thresholds(double min, double max, int steps) {
  if (steps < 1 || max < min) {
    throw InvalidParameterError("bad threshold range");
  }
  std::vector<double> out(steps);
  if (steps == 1) {
    out[0] = min;
    return out;
  }
  for (int i = 0; i < steps; ++i) {
    out[i] = min + (max - min) * i / (steps - 1);
  }
  return out;
}

std::vector<CurvePoint> tradeoff_curve(const std::vector<LogRecord>& log,
                                       const std::vector<double>& thresholds) {
  std::map<std::pair<int, int>, std::vector<const LogRecord*>> attacks;
  for (const LogRecord& rec : log) {
    if (rec.success) attacks[{rec.source_id, rec.target_id}].push_back(&rec);
  }
  // every attack present in the log participates, successful or not
  std::map<std::pair<int, int>, bool> seen;
  for (const LogRecord& rec : log) seen[{rec.source_id, rec.target_id}] = true;

  std::vector<CurvePoint> curve;
  curve.reserve(thresholds.size());
  for (double tau : thresholds) {
    CurvePoint point;
    point.threshold = tau;
    for (const auto& [key, unused] : seen) {
      const LogRecord* best = nullptr;
      auto it = attacks.find(key);
      if (it != attacks.end()) {
        for (const LogRecord* rec : it->second) {
          if (rec->stealthiness < tau) continue;
          if (best == nullptr || rec->confidence > best->confidence ||
              (rec->confidence == best->confidence &&
               rec->stealthiness > best->stealthiness)) {
            best = rec;
          }
        }
      }
      if (best == nullptr) {
        ++point.dropped_attacks;
      } else {
        point.total_confidence += best->confidence;
        point.total_stealthiness += best->stealthiness;
      }
    }
    curve.push_back(point);
  }
  return curve;
}

namespace {

ModeReport build_mode_report(const std::string& mode_name,
                             const std::map<std::pair<int, int>, AttackSelection>& selections) {
  ModeReport report;
  report.mode = mode_name;
  double first_success_sum = 0.0;
  for (const auto& [key, sel] : selections) {
    ++report.attacks;
    report.selections.push_back(sel);
    if (!sel.success) continue;
    ++report.successes;
    report.total_confidence += sel.confidence;
    report.total_stealthiness += sel.stealthiness;
    first_success_sum += sel.first_success_index;
  }
  report.mean_first_success =
      report.successes > 0 ? first_success_sum / report.successes : 0.0;
  return report;
}

}  // namespace

Report make_report(const std::vector<LogRecord>& log) {
  // selection per (mode, attack): highest confidence among successes,
  // ties to higher stealthiness
  std::map<std::string, std::map<std::pair<int, int>, AttackSelection>> by_mode;
  for (const LogRecord& rec : log) {
    std::string mode = to_string(rec.params.mask_mode);
    AttackSelection& sel = by_mode[mode][{rec.source_id, rec.target_id}];
    sel.source_id = rec.source_id;
    sel.target_id = rec.target_id;
    if (!rec.success) continue;
    if (!sel.success || sel.first_success_index > rec.query_index) {
      sel.first_success_index = rec.query_index;
    }
    bool better = !sel.success || rec.confidence > sel.confidence ||
                  (rec.confidence == sel.confidence && rec.stealthiness > sel.stealthiness);
    if (better) {
      sel.confidence = rec.confidence;
      sel.stealthiness = rec.stealthiness;
      sel.query_index = rec.query_index;
      sel.params = rec.params;
    }
    sel.success = true;
  }

  Report report;
  std::map<std::pair<int, int>, AttackSelection> combined;
  for (const auto& [mode, selections] : by_mode) {
    report.modes.push_back(build_mode_report(mode, selections));
    for (const auto& [key, sel] : selections) {
      auto it = combined.find(key);
      if (it == combined.end()) {
        combined[key] = sel;
        continue;
      }
      AttackSelection& cur = it->second;
      if (!sel.success) continue;
      bool better = !cur.success || sel.confidence > cur.confidence ||
                    (sel.confidence == cur.confidence && sel.stealthiness > cur.stealthiness);
      if (better) {
        int first = cur.success ? std::min(cur.first_success_index, sel.first_success_index)
                                : sel.first_success_index;
        cur = sel;
        cur.first_success_index = first;
      } else if (cur.success) {
        cur.first_success_index = std::min(cur.first_success_index, sel.first_success_index);
      }
    }
  }
  report.combined = build_mode_report("combined", combined);
  return report;
}

namespace {

void append_mode_text(std::ostringstream& out, const ModeReport& m) {
  out << m.mode << ": " << m.successes << "/" << m.attacks << " attacks succeeded"
      << ", total confidence " << m.total_confidence << ", total stealthiness "
      << m.total_stealthiness;
  if (m.successes > 0) {
    out << ", mean first success at query " << m.mean_first_success;
  }
  out << "\n";
}

json selection_to_json(const AttackSelection& sel) {
  json j;
  j["attack"] = attack_name(sel.source_id, sel.target_id);
  j["success"] = sel.success;
  if (sel.success) {
    j["confidence"] = sel.confidence;
    j["stealthiness"] = sel.stealthiness;
    j["query_index"] = sel.query_index;
    j["first_success_index"] = sel.first_success_index;
    j["params"] = params_to_json(sel.params);
  }
  return j;
}

json mode_report_to_json(const ModeReport& m) {
  json j;
  j["mode"] = m.mode;
  j["attacks"] = m.attacks;
  j["successes"] = m.successes;
  j["total_confidence"] = m.total_confidence;
  j["total_stealthiness"] = m.total_stealthiness;
  j["mean_first_success"] = m.mean_first_success;
  j["selections"] = json::array();
  for (const AttackSelection& sel : m.selections) {
    j["selections"].push_back(selection_to_json(sel));
  }
  return j;
}

}  // namespace

std::string report_text(const Report& report) {
  std::ostringstream out;
  if (report.modes.empty()) {
    out << "no records\n";
    return out.str();
  }
  for (const ModeReport& m : report.modes) append_mode_text(out, m);
  if (report.modes.size() > 1) append_mode_text(out, report.combined);
  return out.str();
}

std::string report_json_string(const Report& report) {
  json j;
  j["modes"] = json::array();
  for (const ModeReport& m : report.modes) j["modes"].push_back(mode_report_to_json(m));
  j["combined"] = mode_report_to_json(report.combined);
  return j.dump(2);
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write " + path);
  }
  out << "threshold,total_confidence,total_stealthiness,dropped_attacks\n";
  for (const CurvePoint& p : curve) {
    out << format_double(p.threshold) << ',' << format_double(p.total_confidence) << ','
        << format_double(p.total_stealthiness) << ',' << p.dropped_attacks << '\n';
  }
}

void write_scatter_csv(const std::vector<LogRecord>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write " + path);
  }
  out << "attack,cx,cy,theta,confidence,stealthiness,success\n";
  for (const LogRecord& rec : log) {
    if (!rec.success) continue;
    out << attack_name(rec.source_id, rec.target_id) << ',' << format_double(rec.params.cx)
        << ',' << format_double(rec.params.cy) << ',' << format_double(rec.params.theta) << ','
        << format_double(rec.confidence) << ',' << format_double(rec.stealthiness) << ",1\n";
  }
}

std::vector<LogRecord> read_run_logs(const std::string& run_dir) {
  std::vector<LogRecord> log;
  for (const char* name : {"log_manual.jsonl", "log_auto.jsonl"}) {
    std::filesystem::path p = std::filesystem::path(run_dir) / name;
    if (!std::filesystem::exists(p)) continue;
    std::vector<LogRecord> part = read_log(p.string());
    log.insert(log.end(), part.begin(), part.end());
  }
  return log;
}

Report run_campaign(const RunConfig& cfg, const std::vector<MaskMode>& modes,
                    const std::string& run_dir) {
  for (MaskMode mode : modes) {
    run_matrix(cfg, mode, run_dir);
  }
  std::vector<LogRecord> log = read_run_logs(run_dir);
  Report report = make_report(log);

  std::ofstream summary(run_dir + "/summary.json");
  summary << report_json_string(report) << '\n';
  summary.close();

  write_curve_csv(tradeoff_curve(log, linspace_thresholds(0.5, 1.0, 51)),
                  run_dir + "/curve.csv");
  write_scatter_csv(log, run_dir + "/scatter.csv");

  FaceSet faces =
      cfg.faces_dir.empty() ? generate_toy_faces(cfg.faces_seed) : load_faces(cfg.faces_dir);
  MaskSet masks = build_mask_set(faces, cfg.mask_dir);
  for (const AttackSelection& sel : report.combined.selections) {
    if (!sel.success) continue;
    RasterImage img = render(faces, masks, sel.source_id, sel.target_id, sel.params);
    write_png(run_dir + "/best_" + std::to_string(sel.source_id) + "_" +
                  std::to_string(sel.target_id) + ".png",
              img);
  }
  return report;
}

PgdCampaignResult run_pgd_campaign(const RunConfig& cfg,
                                   const std::vector<std::pair<int, int>>& pairs,
                                   bool transfer) {
  cfg.validate();
  FaceSet faces =
      cfg.faces_dir.empty() ? generate_toy_faces(cfg.faces_seed) : load_faces(cfg.faces_dir);
  SimulatedOracle surrogate(faces);
  SimOracleConfig transfer_cfg;
  transfer_cfg.embed_size = cfg.pgd_transfer_embed_size;
  std::optional<SimulatedOracle> evaluation;
  if (transfer) {
    evaluation.emplace(faces, transfer_cfg);
  }

  PgdCampaignResult result;
  result.transfer_enabled = transfer;
  for (auto [s, t] : pairs) {
    PgdConfig pgd = cfg.pgd;
    if (pgd.crop_box.width <= 0 || pgd.crop_box.height <= 0) {
      pgd.crop_box = default_crop_box(faces, s);
    }
    PgdResult r = run_pgd(s, t, surrogate, pgd, transfer ? &*evaluation : nullptr);
    PgdPairOutcome outcome;
    outcome.source_id = s;
    outcome.target_id = t;
    outcome.argmax_is_target = r.argmax_is_target;
    outcome.final_ssim = r.final_ssim;
    outcome.surrogate_confidence = r.final_probabilities[t];
    if (r.transfer) {
      outcome.transfer_confidence = r.transfer->confidence;
    }
    result.outcomes.push_back(outcome);
  }
  if (transfer && !result.outcomes.empty()) {
    double sum = 0.0;
    double mx = 0.0;
    for (const PgdPairOutcome& o : result.outcomes) {
      double c = o.transfer_confidence.value_or(0.0);
      sum += c;
      mx = std::max(mx, c);
    }
    result.transfer_mean = sum / static_cast<double>(result.outcomes.size());
    result.transfer_max = mx;
  }
  return result;
}

std::string pgd_summary_json(const PgdCampaignResult& result) {
  json j;
  j["pairs"] = json::array();
  int hits = 0;
  for (const PgdPairOutcome& o : result.outcomes) {
    json e;
    e["attack"] = attack_name(o.source_id, o.target_id);
    e["argmax_is_target"] = o.argmax_is_target;
    e["final_ssim"] = o.final_ssim;
    e["surrogate_confidence"] = o.surrogate_confidence;
    if (o.transfer_confidence) {
      e["transfer_confidence"] = *o.transfer_confidence;
    }
    j["pairs"].push_back(e);
    if (o.argmax_is_target) ++hits;
  }
  j["argmax_hits"] = hits;
  j["pair_count"] = static_cast<int>(result.outcomes.size());
  if (result.transfer_enabled) {
    j["transfer_mean_confidence"] = result.transfer_mean;
    j["transfer_max_confidence"] = result.transfer_max;
  }
  return j.dump(2);
}

}  // namespace facepaste
