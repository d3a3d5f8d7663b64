#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <agcfdia/pipeline.hpp>

using namespace agcfdia;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("agcfdia_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run run_cli(const std::string& args, const fs::path& dir) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd =
      std::string(AGCFDIA_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = io::read_file(out);
  r.err = io::read_file(err);
  return r;
}

nlohmann::json small_config_json() {
  return {{"seed", 5},
          {"threads", 1},
          {"dataset", {{"class_counts", {40, 40, 40, 40}}}},
          {"classifiers", {{{"variant", "rf"}, {"n_trees", 25}}, {{"variant", "dt"}}}}};
}

}  // namespace

TEST_CASE("pipeline config parsing", "[cli]") {
  const auto c = pipeline_config_from_json(small_config_json());
  CHECK(c.seed() == 5);
  CHECK(c.dataset.threads == 1);
  CHECK(c.classifiers.size() == 2);
  CHECK(std::get<ml::RandomForestConfig>(c.classifier("rf")).n_trees == 25);
  CHECK(std::get<ml::GbtConfig>(c.classifier("gbt")).seed == 5);

  CHECK(pipeline_config_from_json(small_config_json(), 9).seed() == 9);
  CHECK(pipeline_config_from_json(nlohmann::json::object()).classifiers.size() == 6);

  auto bad = small_config_json();
  bad["plant"] = {{"grc_limt", 0.1}};
  CHECK_THROWS_WITH(pipeline_config_from_json(bad), Catch::Matchers::ContainsSubstring("grc_limt"));
  bad = small_config_json();
  bad["selection"] = {{"fdr_q", 1.5}};
  CHECK_THROWS_AS(pipeline_config_from_json(bad), FormatError);
  bad = small_config_json();
  bad["classifiers"].push_back({{"variant", "dt"}});
  CHECK_THROWS_AS(pipeline_config_from_json(bad), FormatError);

  const auto back = pipeline_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
}

TEST_CASE("config syntax errors carry the file position", "[cli]") {
  const auto dir = scratch("syntax");
  io::write_file(dir / "cfg.json", "{\n  \"seed\": 3,\n  \"threads\": ,\n}\n");
  try {
    load_pipeline_config(dir / "cfg.json");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string what = e.what();
    CHECK(what.find("cfg.json") != std::string::npos);
    CHECK(what.find("line 3") != std::string::npos);
  }
}

TEST_CASE("stage-by-stage CLI pipeline", "[cli]") {
  const auto dir = scratch("pipeline");
  io::write_json(dir / "cfg.json", small_config_json());
  const std::string cfg = "--config " + (dir / "cfg.json").string() + " ";
  const auto d = dir.string();

  REQUIRE(run_cli(cfg + "gen-dataset --out " + d + "/data", dir).code == 0);
  CHECK(fs::exists(dir / "data" / "manifest.json"));
  REQUIRE(run_cli(cfg + "split " + d + "/data --out " + d + "/split", dir).code == 0);
  REQUIRE(run_cli(cfg + "featurize " + d + "/split/train --out " + d + "/train.csv", dir).code == 0);
  REQUIRE(run_cli(cfg + "featurize " + d + "/split/test --out " + d + "/test.csv", dir).code == 0);
  REQUIRE(run_cli(cfg + "select " + d + "/train.csv --out " + d + "/mask.json", dir).code == 0);
  REQUIRE(run_cli(cfg + "train " + d + "/train.csv " + d + "/mask.json --classifier dt --out " + d + "/dt.json", dir)
              .code == 0);
  const auto ev = run_cli(
      cfg + "evaluate " + d + "/dt.json " + d + "/test.csv " + d + "/mask.json --format json --out " + d + "/eval", dir);
  REQUIRE(ev.code == 0);

  const auto report = evaluate::report_from_json(io::read_json(dir / "eval" / "report.json"));
  CHECK(report.classifier == "Decision Tree");
  double total = 0;
  for (const auto& row : report.counts)
    for (double v : row) total += v;
  CHECK(total == 32.0);
  CHECK(fs::exists(dir / "eval" / "confusion.svg"));

  // the library path over the same files gives the same report
  const auto again = pipeline::evaluate(dir / "dt.json", dir / "test.csv", dir / "mask.json", dir / "eval2",
                                        evaluate::Format::Json, 1);
  CHECK(again == report);
}

TEST_CASE("simulate writes one row per recorded sample", "[cli]") {
  const auto dir = scratch("simulate");
  Scenario s;
  s.load_area = 2;
  s.load_magnitude = 0.05;
  s.load_time = 10.0;
  s.attack = AttackSpec{Channel::F1, AttackKind::STEP, 30.0, 10.0, 0.01, 0.0, 0.0};
  s.label = 1;
  io::write_json(dir / "scenario.json", nlohmann::json(s));
  const auto r = run_cli("simulate " + (dir / "scenario.json").string() + " --out " + (dir / "sim").string(), dir);
  REQUIRE(r.code == 0);
  const auto csv = io::read_file(dir / "sim" / "trajectory.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 801);
  CHECK(fs::exists(dir / "sim" / "trajectory.svg"));
}

TEST_CASE("exit codes", "[cli]") {
  const auto dir = scratch("codes");
  const auto missing = run_cli("featurize " + (dir / "nowhere").string() + " --out " + (dir / "x.csv").string(), dir);
  CHECK(missing.code == 3);
  CHECK(missing.err.find("nowhere") != std::string::npos);

  CHECK(run_cli("featurize --bogus-flag", dir).code == 2);
  CHECK(run_cli("no-such-command", dir).code == 2);
  CHECK(run_cli("--help", dir).code == 0);

  io::write_file(dir / "bad.json", "{\"seed\": 1, \"colour\": 2}");
  const auto bad = run_cli("--config " + (dir / "bad.json").string() + " gen-dataset --out " + (dir / "d").string(), dir);
  CHECK(bad.code == 3);
  CHECK(bad.err.find("colour") != std::string::npos);

  io::write_json(dir / "explode.json", {{"plant", {{"grc_limit", 1e300}, {"areas", {{{"integral_gain_KI", 1e9}},
                                                                                    {{"integral_gain_KI", 1e9}}}}}},
                                        {"simulation", {{"horizon", 300.0}}}});
  Scenario s;
  s.load_area = 1;
  s.load_magnitude = 0.1;
  s.load_time = 1.0;
  io::write_json(dir / "scenario.json", nlohmann::json(s));
  const auto blowup = run_cli("--config " + (dir / "explode.json").string() + " simulate " +
                                  (dir / "scenario.json").string() + " --out " + (dir / "sim").string(),
                              dir);
  CHECK(blowup.code == 4);
}
