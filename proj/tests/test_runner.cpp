#include <doctest.h>

#include <sys/types.h>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include "facepaste/errors.hpp"
#include "facepaste/runner.hpp"

using namespace facepaste;

namespace {

std::filesystem::path fresh_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

LogRecord make_record(int s, int t, int idx, double conf, double stealth, bool success,
                      MaskMode mode = MaskMode::manual) {
  LogRecord rec;
  rec.source_id = s;
  rec.target_id = t;
  rec.query_index = idx;
  rec.params.cx = 10.0 + idx;
  rec.params.cy = -4.5;
  rec.params.sx = 1.1;
  rec.params.sy = 0.9;
  rec.params.theta = 12.25;
  rec.params.mask_mode = mode;
  rec.params.bias = 0.4;
  rec.params.slope = 21.0;
  rec.params.sigma = 3.5;
  rec.confidence = conf;
  rec.stealthiness = stealth;
  rec.objective = conf + std::min(0.5, stealth);
  rec.success = success;
  rec.timestamp = "2026-01-02T03:04:05.678Z";
  return rec;
}

RunConfig small_config(const std::filesystem::path& out_dir) {
  RunConfig cfg;
  cfg.budget = 6;
  cfg.init_queries = 3;
  cfg.pairs = {{0, 1}};
  cfg.output_dir = out_dir.string();
  cfg.seed = 7;
  cfg.concurrency = 1;
  return cfg;
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("config validation catches inconsistent settings") {
  RunConfig cfg;
  cfg.validate();
  cfg.init_queries = 200;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.init_queries = 50;
  cfg.pairs = {{3, 3}};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.pairs = {{0, 1}};
  cfg.oracle_kind = "psychic";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.oracle_kind = "remote";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);  // remote needs a url
  cfg.remote_url = "http://127.0.0.1:9";
  cfg.validate();
}

TEST_CASE("config files load with nested oracle and pgd sections") {
  auto dir = fresh_dir("facepaste_cfg_tests");
  auto path = dir / "run.json";
  {
    std::ofstream out(path);
    out << R"({
      "faces_seed": 3,
      "budget": 44,
      "init_queries": 11,
      "seed": 9,
      "concurrency": 2,
      "pairs": [[0, 1], [4, 2]],
      "oracle": {"type": "remote", "url": "http://example.test:1234",
                 "confidence_field": "score"},
      "pgd": {"steps": 17, "ssim_floor": 0.5, "crop_box": {"x": 1, "y": 2,
              "width": 30, "height": 40}, "transfer_embed_size": 16}
    })";
  }
  auto cfg = load_run_config(path.string());
  CHECK(cfg.faces_seed == 3);
  CHECK(cfg.budget == 44);
  CHECK(cfg.init_queries == 11);
  CHECK(cfg.pairs.size() == 2);
  CHECK(cfg.pairs[1] == std::pair<int, int>(4, 2));
  CHECK(cfg.oracle_kind == "remote");
  CHECK(cfg.remote_url == "http://example.test:1234");
  CHECK(cfg.remote_fields.confidence == "score");
  CHECK(cfg.remote_fields.stealthiness == "stealthiness");
  CHECK(cfg.pgd.steps == 17);
  CHECK(cfg.pgd.crop_box.width == 30);
  CHECK(cfg.pgd_transfer_embed_size == 16);

  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK_THROWS_AS(load_run_config((dir / "broken.json").string()), ConfigError);
  CHECK_THROWS_AS(load_run_config((dir / "missing.json").string()), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("attack_pairs expands to all ninety ordered pairs") {
  RunConfig cfg;
  auto pairs = attack_pairs(cfg);
  CHECK(pairs.size() == 90);
  for (auto [s, t] : pairs) CHECK(s != t);
  cfg.pairs = {{1, 2}, {3, 4}};
  CHECK(attack_pairs(cfg) == cfg.pairs);
}

TEST_CASE("log records serialize and parse losslessly") {
  for (MaskMode mode : {MaskMode::manual, MaskMode::automatic}) {
    auto rec = make_record(2, 7, 13, 0.8125, 0.619140625, true, mode);
    auto line = serialize_record(rec);
    auto back = parse_record(line);
    CHECK(back.source_id == rec.source_id);
    CHECK(back.target_id == rec.target_id);
    CHECK(back.query_index == rec.query_index);
    CHECK(back.confidence == rec.confidence);
    CHECK(back.stealthiness == rec.stealthiness);
    CHECK(back.objective == rec.objective);
    CHECK(back.success == rec.success);
    CHECK(back.timestamp == rec.timestamp);
    CHECK(back.params.cx == rec.params.cx);
    CHECK(back.params.theta == rec.params.theta);
    CHECK(back.params.mask_mode == mode);
    if (mode == MaskMode::manual) {
      CHECK(back.params.bias == rec.params.bias);
      CHECK(back.params.slope == rec.params.slope);
    } else {
      CHECK(back.params.sigma == rec.params.sigma);
    }
    // round trip again: serialization is stable
    CHECK(serialize_record(back) == line);
  }
}

TEST_CASE("parse_record rejects garbage") {
  CHECK_THROWS(parse_record("{\"attack\": \"nonsense\"}"));
  CHECK_THROWS(parse_record("not json at all"));
}

TEST_CASE("timestamps are rfc3339 utc with milliseconds") {
  auto ts = rfc3339_utc_now();
  std::regex format(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{3}Z)");
  CHECK(std::regex_match(ts, format));
}

TEST_CASE("read_log tolerates a truncated final line") {
  auto dir = fresh_dir("facepaste_log_tests");
  auto path = dir / "log.jsonl";
  {
    std::ofstream out(path);
    out << serialize_record(make_record(0, 1, 1, 0.5, 0.9, true)) << "\n";
    out << serialize_record(make_record(0, 1, 2, 0.6, 0.8, true)) << "\n";
    out << "{\"attack\": \"0->1\", \"query_index\": 3, \"conf";  // killed mid-write
  }
  auto records = read_log(path.string());
  CHECK(records.size() == 2);
  CHECK(records[1].query_index == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("read_log still rejects corruption in the middle") {
  auto dir = fresh_dir("facepaste_log_corrupt");
  auto path = dir / "log.jsonl";
  {
    std::ofstream out(path);
    out << "garbage line\n";
    out << serialize_record(make_record(0, 1, 1, 0.5, 0.9, true)) << "\n";
  }
  CHECK_THROWS(read_log(path.string()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("tradeoff curve picks the best qualifying success per attack") {
  std::vector<LogRecord> log;
  log.push_back(make_record(0, 1, 1, 0.9, 0.55, true));
  log.push_back(make_record(0, 1, 2, 0.7, 0.80, true));
  log.push_back(make_record(0, 1, 3, 0.95, 0.30, false));  // not a success
  log.push_back(make_record(2, 3, 1, 0.8, 0.60, true));
  log.push_back(make_record(4, 5, 1, 0.99, 0.40, false));  // attack with no success

  auto curve = tradeoff_curve(log, {0.5, 0.6, 0.7, 0.9});
  REQUIRE(curve.size() == 4);

  CHECK(curve[0].threshold == 0.5);
  CHECK(curve[0].total_confidence == doctest::Approx(0.9 + 0.8).epsilon(1e-12));
  CHECK(curve[0].total_stealthiness == doctest::Approx(0.55 + 0.6).epsilon(1e-12));
  CHECK(curve[0].dropped_attacks == 1);  // 4->5 never succeeded

  CHECK(curve[1].total_confidence == doctest::Approx(0.7 + 0.8).epsilon(1e-12));
  CHECK(curve[1].total_stealthiness == doctest::Approx(0.8 + 0.6).epsilon(1e-12));
  CHECK(curve[1].dropped_attacks == 1);

  CHECK(curve[2].total_confidence == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(curve[2].dropped_attacks == 2);

  CHECK(curve[3].total_confidence == 0.0);
  CHECK(curve[3].dropped_attacks == 3);
}

TEST_CASE("dropped attacks never decrease along the curve") {
  std::vector<LogRecord> log;
  log.push_back(make_record(0, 1, 1, 0.9, 0.55, true));
  log.push_back(make_record(1, 0, 1, 0.8, 0.72, true));
  log.push_back(make_record(2, 3, 1, 0.7, 0.95, true));
  auto curve = tradeoff_curve(log, linspace_thresholds(0.5, 1.0, 26));
  for (std::size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].dropped_attacks >= curve[i - 1].dropped_attacks);
    CHECK(curve[i].total_confidence <= curve[i - 1].total_confidence + 1e-12);
  }
}

TEST_CASE("report selects per attack and combines modes by confidence") {
  std::vector<LogRecord> log;
  // attack 0->1, manual: two successes, best confidence 0.9
  log.push_back(make_record(0, 1, 5, 0.9, 0.55, true, MaskMode::manual));
  log.push_back(make_record(0, 1, 9, 0.7, 0.90, true, MaskMode::manual));
  // attack 0->1, auto: later first success, higher best confidence
  log.push_back(make_record(0, 1, 8, 0.95, 0.50, true, MaskMode::automatic));
  // attack 0->2, manual only
  log.push_back(make_record(0, 2, 3, 0.8, 0.9, true, MaskMode::manual));
  // attack 0->2, auto never succeeds
  log.push_back(make_record(0, 2, 4, 0.2, 0.3, false, MaskMode::automatic));

  auto report = make_report(log);
  REQUIRE(report.modes.size() == 2);  // sorted: "auto", "manual"
  const ModeReport& audo = report.modes[0];
  const ModeReport& manual = report.modes[1];
  CHECK(audo.mode == "auto");
  CHECK(manual.mode == "manual");

  CHECK(manual.attacks == 2);
  CHECK(manual.successes == 2);
  CHECK(manual.total_confidence == doctest::Approx(0.9 + 0.8).epsilon(1e-12));
  CHECK(manual.total_stealthiness == doctest::Approx(0.55 + 0.9).epsilon(1e-12));
  CHECK(manual.mean_first_success == doctest::Approx((5.0 + 3.0) / 2.0).epsilon(1e-12));

  CHECK(audo.attacks == 2);
  CHECK(audo.successes == 1);
  CHECK(audo.total_confidence == doctest::Approx(0.95).epsilon(1e-12));

  CHECK(report.combined.attacks == 2);
  CHECK(report.combined.successes == 2);
  // 0->1 takes the auto selection (0.95 > 0.9) with first success min(5, 8)
  CHECK(report.combined.total_confidence == doctest::Approx(0.95 + 0.8).epsilon(1e-12));
  CHECK(report.combined.total_stealthiness == doctest::Approx(0.50 + 0.9).epsilon(1e-12));
  for (const AttackSelection& sel : report.combined.selections) {
    if (sel.source_id == 0 && sel.target_id == 1) {
      CHECK(sel.confidence == 0.95);
      CHECK(sel.first_success_index == 5);
      CHECK(sel.params.mask_mode == MaskMode::automatic);
    }
  }

  auto text = report_text(report);
  CHECK(text.find("manual: 2/2 attacks succeeded") != std::string::npos);
  CHECK(text.find("auto: 1/2 attacks succeeded") != std::string::npos);
  CHECK(text.find("combined: 2/2 attacks succeeded") != std::string::npos);
}

TEST_CASE("confidence ties break toward higher stealthiness") {
  std::vector<LogRecord> log;
  log.push_back(make_record(0, 1, 1, 0.9, 0.55, true));
  log.push_back(make_record(0, 1, 2, 0.9, 0.75, true));
  log.push_back(make_record(0, 1, 3, 0.9, 0.60, true));
  auto report = make_report(log);
  REQUIRE(report.modes.size() == 1);
  REQUIRE(report.modes[0].selections.size() == 1);
  CHECK(report.modes[0].selections[0].stealthiness == 0.75);
  CHECK(report.modes[0].selections[0].query_index == 2);
}

TEST_CASE("empty logs make an empty report") {
  auto report = make_report({});
  CHECK(report.modes.empty());
  CHECK(report_text(report) == "no records\n");
}

TEST_CASE("csv writers emit the documented headers") {
  auto dir = fresh_dir("facepaste_csv_tests");
  std::vector<LogRecord> log;
  log.push_back(make_record(0, 1, 1, 0.875, 0.625, true));
  log.push_back(make_record(0, 1, 2, 0.25, 0.125, false));

  auto curve_path = (dir / "curve.csv").string();
  write_curve_csv(tradeoff_curve(log, {0.5, 0.6}), curve_path);
  std::ifstream curve_in(curve_path);
  std::string header;
  std::getline(curve_in, header);
  CHECK(header == "threshold,total_confidence,total_stealthiness,dropped_attacks");
  std::string row;
  std::getline(curve_in, row);
  CHECK(row == "0.5,0.875,0.625,0");

  auto scatter_path = (dir / "scatter.csv").string();
  write_scatter_csv(log, scatter_path);
  std::ifstream scatter_in(scatter_path);
  std::getline(scatter_in, header);
  CHECK(header == "attack,cx,cy,theta,confidence,stealthiness,success");
  int rows = 0;
  while (std::getline(scatter_in, row)) {
    if (row.empty()) continue;
    ++rows;
    CHECK(row.substr(0, 5) == "0->1,");
    CHECK(row.back() == '1');  // only successes are written
  }
  CHECK(rows == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("run_matrix writes one parseable line per query") {
  auto dir = fresh_dir("facepaste_matrix_tests");
  auto cfg = small_config(dir / "out");
  auto run_dir = (dir / "out" / "run1").string();
  auto result = run_matrix(cfg, MaskMode::manual, run_dir);
  REQUIRE(result.outcomes.size() == 1);
  CHECK(result.outcomes[0].queries == 6);
  CHECK(result.outcomes[0].error.empty());

  auto records = read_log(run_dir + "/log_manual.jsonl");
  REQUIRE(records.size() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(records[i].query_index == i + 1);
    CHECK(records[i].source_id == 0);
    CHECK(records[i].target_id == 1);
    CHECK(records[i].objective ==
          records[i].confidence + std::min(0.5, records[i].stealthiness));
    CHECK(records[i].params.mask_mode == MaskMode::manual);
    CHECK_FALSE(records[i].timestamp.empty());
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("run_matrix is deterministic apart from timestamps") {
  auto dir = fresh_dir("facepaste_det_tests");
  auto cfg = small_config(dir / "out");
  cfg.pairs = {{0, 1}, {2, 3}};
  cfg.concurrency = 2;
  run_matrix(cfg, MaskMode::manual, (dir / "out" / "a").string());
  run_matrix(cfg, MaskMode::manual, (dir / "out" / "b").string());
  auto a = read_log((dir / "out" / "a" / "log_manual.jsonl").string());
  auto b = read_log((dir / "out" / "b" / "log_manual.jsonl").string());
  REQUIRE(a.size() == b.size());
  auto key = [](const LogRecord& r) {
    return std::tuple(r.source_id, r.target_id, r.query_index);
  };
  std::sort(a.begin(), a.end(), [&](auto& x, auto& y) { return key(x) < key(y); });
  std::sort(b.begin(), b.end(), [&](auto& x, auto& y) { return key(x) < key(y); });
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i].timestamp.clear();
    b[i].timestamp.clear();
    CHECK(serialize_record(a[i]) == serialize_record(b[i]));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("run_campaign produces summary, curves and best images") {
  auto dir = fresh_dir("facepaste_campaign_tests");
  auto cfg = small_config(dir / "out");
  cfg.budget = 8;
  cfg.init_queries = 4;
  auto run_dir = (dir / "out" / "camp").string();
  auto report = run_campaign(cfg, {MaskMode::manual, MaskMode::automatic}, run_dir);
  CHECK(std::filesystem::exists(run_dir + "/log_manual.jsonl"));
  CHECK(std::filesystem::exists(run_dir + "/log_auto.jsonl"));
  CHECK(std::filesystem::exists(run_dir + "/summary.json"));
  CHECK(std::filesystem::exists(run_dir + "/curve.csv"));
  CHECK(std::filesystem::exists(run_dir + "/scatter.csv"));
  REQUIRE(report.modes.size() == 2);
  for (const AttackSelection& sel : report.combined.selections) {
    if (sel.success) {
      CHECK(std::filesystem::exists(run_dir + "/best_" + std::to_string(sel.source_id) + "_" +
                                    std::to_string(sel.target_id) + ".png"));
    }
  }
  // the stored curve at tau = 0.5 agrees with the recomputed one
  auto log = read_run_logs(run_dir);
  auto curve = tradeoff_curve(log, {0.5});
  double combined_conf = 0.0;
  for (const auto& sel : report.combined.selections) {
    if (sel.success) combined_conf += sel.confidence;
  }
  CHECK(curve[0].total_confidence == doctest::Approx(combined_conf).epsilon(1e-12));
  std::filesystem::remove_all(dir);
}

TEST_CASE("pgd campaign summarizes per-pair outcomes") {
  RunConfig cfg;
  cfg.pgd.steps = 6;
  auto result = run_pgd_campaign(cfg, {{0, 1}, {2, 3}}, true);
  REQUIRE(result.outcomes.size() == 2);
  CHECK(result.transfer_enabled);
  for (const auto& o : result.outcomes) {
    CHECK(o.final_ssim >= 0.5);
    CHECK(o.transfer_confidence.has_value());
  }
  CHECK(result.transfer_max >= result.transfer_mean);
  auto j = pgd_summary_json(result);
  CHECK(j.find("argmax_hits") != std::string::npos);
  CHECK(j.find("transfer_mean_confidence") != std::string::npos);
}

TEST_CASE("a crashed writer leaves a log the reader fully recovers") {
  auto dir = fresh_dir("facepaste_crash_tests");
  auto config_path = dir / "run.json";
  {
    std::ofstream out(config_path);
    out << R"({"budget": 120, "init_queries": 30, "seed": 5, "concurrency": 1,)"
        << R"( "pairs": [[0, 1]], "output_dir": ")" << (dir / "out").string() << R"("})";
  }
  auto log_path = dir / "out" / "crashrun" / "log_manual.jsonl";

  pid_t pid = fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    int devnull = open("/dev/null", O_WRONLY);
    if (devnull >= 0) {
      dup2(devnull, 1);
      dup2(devnull, 2);
    }
    execl(FACEPASTE_CLI_PATH, "facepaste", "attack", "--config", config_path.c_str(), "--mode",
          "manual", "--run-id", "crashrun", static_cast<char*>(nullptr));
    _exit(127);
  }

  // wait for a few flushed lines, then kill the writer mid-run
  std::size_t lines = 0;
  for (int i = 0; i < 600; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (!std::filesystem::exists(log_path)) continue;
    std::ifstream in(log_path);
    std::string line;
    lines = 0;
    while (std::getline(in, line)) {
      if (!line.empty()) ++lines;
    }
    if (lines >= 5) break;
  }
  kill(pid, SIGKILL);
  int status = 0;
  waitpid(pid, &status, 0);
  REQUIRE(lines >= 5);

  auto records = read_log(log_path.string());
  CHECK(records.size() >= 4);
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].query_index == static_cast<int>(i) + 1);
    CHECK(records[i].source_id == 0);
    CHECK(records[i].target_id == 1);
    CHECK(records[i].objective ==
          records[i].confidence + std::min(0.5, records[i].stealthiness));
  }
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
