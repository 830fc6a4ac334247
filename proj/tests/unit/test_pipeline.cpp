#include "causalmech/error.hpp"
#include "causalmech/graph.hpp"
#include "causalmech/pipeline.hpp"

#include "../support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

using namespace causalmech;
namespace fs = std::filesystem;

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(CAUSALMECH_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t line_count(const fs::path& p) {
  const auto text = testing::slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(testing::slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// Small chain data set written by the simulate command.
std::string simulate(const testing::TempDir& dir) {
  const auto data = (dir / "data").string();
  REQUIRE(cli("simulate --chain --nodes 3 --calibration 3 --test 2 --length 40 --seed 5 --out " + data) == 0);
  return data;
}

void write_config(const fs::path& path, const std::string& body) { testing::write_file(path, body); }

}  // namespace

TEST_CASE("profiles and config parsing") {
  const auto e1 = profile_config("example1");
  CHECK(e1.train.hidden_units == 32);
  CHECK(e1.train.layers == 2);
  CHECK(e1.train.dropout_rate == 0.2);
  CHECK(e1.train.batch_size == 32);
  CHECK(e1.train.epochs == 1000);
  CHECK(e1.uq.samples == 200);
  const auto t2 = profile_config("table2");
  CHECK(t2.train.layers == 3);
  CHECK(t2.train.batch_size == 128);
  CHECK(t2.train.dropout_rate == 0.0);
  CHECK_THROWS_AS(profile_config("nope"), UsageError);

  const auto cfg = config_from_json(
      R"({"manifest": "m.json", "seed": 4, "train": {"epochs": 7, "tasks": {"V1->V2": {"epochs": 3}}},
          "uq": {"samples": 10}})",
      "/base");
  CHECK(cfg.manifest == fs::path("/base/m.json"));
  CHECK(cfg.seed == 4);
  CHECK(cfg.train.epochs == 7);
  CHECK(cfg.task_train.size() == 1);
  CHECK(cfg.task_train.begin()->second.epochs == 3);
  CHECK(cfg.uq.samples == 10);
  CHECK(cfg.uq.dropout_rate == cfg.train.dropout_rate);

  const auto back = config_from_json(config_to_json(cfg), "/elsewhere");
  CHECK(back.manifest == cfg.manifest);
  CHECK(back.train == cfg.train);
  CHECK(back.task_train == cfg.task_train);

  CHECK_THROWS_AS(config_from_json(R"({"trian": {}})", "/"), UsageError);
  CHECK_THROWS_AS(config_from_json(R"({"uq": {"samples": 0}})", "/"), UsageError);
  CHECK(config_from_json(R"({"profile": "table2"})", "/").train.layers == 3);
  CHECK(config_from_json(R"({"profile": "table2"})", "/", std::string("example1")).train.layers == 2);
}

TEST_CASE("command line exit codes") {
  testing::TempDir dir;
  CHECK(cli("") == 1);
  CHECK(cli("bogus") == 1);
  CHECK(cli("discover --no-such-flag") == 1);
  CHECK(cli("discover --profile nope --manifest x") == 1);
  CHECK(cli("discover --out " + (dir / "o").string()) == 1);
  CHECK(cli("discover --manifest " + (dir / "missing.json").string()) == 2);
  CHECK(cli("--help") == 0);

  const auto data = simulate(dir);
  auto manifest = nlohmann::json::parse(testing::slurp(fs::path(data) / "manifest.json"));
  manifest["split"]["calibration"] = nlohmann::json::array();
  testing::write_file(fs::path(data) / "empty.json", manifest.dump());
  CHECK(cli("discover --manifest " + data + "/empty.json --out " + (dir / "o").string()) == 2);
}

TEST_CASE("discover, train, predict and evaluate through the command line") {
  testing::TempDir dir;
  const auto data = simulate(dir);
  const auto out = (dir / "out").string();
  write_config(dir / "cfg.json", R"({"manifest": "data/manifest.json", "out": "out", "truth": "data/truth.json",
    "train": {"epochs": 4, "hidden_units": 4}, "uq": {"samples": 200, "dropout_rate": 0.0}})");
  const auto cfg = "--config " + (dir / "cfg.json").string();

  REQUIRE(cli(cfg + " discover") == 0);
  CHECK(fs::exists(fs::path(out) / "consensus.json"));
  CHECK(fs::exists(fs::path(out) / "consensus.dot"));
  CHECK(fs::exists(fs::path(out) / "graphs" / "exp000.json"));
  CHECK(read_csv(fs::path(out) / "inclusion.csv")[0] ==
        std::vector<std::string>{"from", "to", "count", "total", "inclusion", "kept"});
  const auto log = testing::slurp(fs::path(out) / "discovery_log.txt");
  CHECK(log.find("shd consensus ") != std::string::npos);
  const auto consensus = graph_from_json(testing::slurp(fs::path(out) / "consensus.json"));
  CHECK(consensus.parents(consensus.index_of("U")).empty());

  REQUIRE(cli(cfg + " train") == 0);
  const std::size_t tasks = decompose(consensus).tasks.size();
  CHECK(line_count(fs::path(out) / "training_loss.csv") == 1 + 4 * tasks);
  CHECK(fs::exists(fs::path(out) / "models" / "plan.json"));

  REQUIRE(cli(cfg + " predict --experiment exp003") == 0);
  const auto bands = read_csv(fs::path(out) / "predictions" / "exp003" / "intervals.csv");
  REQUIRE(bands.size() > 1);
  for (std::size_t r = 1; r < bands.size(); ++r) CHECK(bands[r][3] == bands[r][5]);
  std::set<std::string> indices;
  for (const auto& row : read_csv(fs::path(out) / "predictions" / "exp003" / "ensemble.csv")) {
    if (row[0] == "V2") indices.insert(row[1]);
  }
  CHECK(indices.size() == 200);
  CHECK(read_csv(fs::path(out) / "predictions" / "ecdf.csv").back()[1] == "1");
  CHECK(fs::exists(fs::path(out) / "predictions" / "summary.json"));

  CHECK(cli(cfg + " predict --experiment nope") == 2);

  REQUIRE(cli(cfg + " evaluate") == 0);
  const auto eval = nlohmann::json::parse(testing::slurp(fs::path(out) / "evaluation" / "evaluation.json"));
  CHECK(eval.contains("shd"));
  CHECK(fs::exists(fs::path(out) / "evaluation" / "ecdf_test.csv"));
}

TEST_CASE("training on the two-root six-node graph writes three models") {
  testing::TempDir dir;
  const std::vector<std::string> names{"V1", "V2", "V3", "V4", "V5", "V6"};
  nlohmann::json manifest;
  for (const auto& n : names) {
    manifest["nodes"].push_back({{"name", n}, {"columns", {n}}, {"kind", "scalar"},
                                 {"role", n == "V1" ? "root" : (n == "V6" || n == "V4" ? "leaf" : "unconstrained")}});
  }
  std::mt19937_64 rng(3);
  for (int k = 0; k < 3; ++k) {
    const auto id = "e" + std::to_string(k);
    const Matrix m = testing::gaussian(30, 6, rng);
    std::ostringstream csv;
    csv << "V1,V2,V3,V4,V5,V6\n";
    for (Eigen::Index t = 0; t < 30; ++t) {
      for (int c = 0; c < 6; ++c) csv << (c ? "," : "") << m(t, c);
      csv << '\n';
    }
    testing::write_file(dir / (id + ".csv"), csv.str());
    manifest["experiments"].push_back({{"id", id}, {"path", id + ".csv"}});
  }
  manifest["split"] = {{"calibration", {"e0", "e1"}}, {"test", {"e2"}}};
  testing::write_file(dir / "manifest.json", manifest.dump());

  CausalGraph g(names);
  for (auto [a, b] : std::vector<std::pair<int, int>>{{1, 3}, {1, 4}, {1, 5}, {2, 4}, {2, 5}, {2, 6}, {3, 6}, {5, 6}}) {
    g.add_directed(static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b - 1));
  }
  write_text(dir / "two_root.json", graph_to_json(g));

  auto cfg = profile_config("example1");
  cfg.manifest = dir / "manifest.json";
  cfg.graph = dir / "two_root.json";
  cfg.out = dir / "out";
  cfg.train.epochs = 2;
  cfg.train.hidden_units = 3;
  run_train(cfg);
  int model_files = 0;
  for (const auto& entry : fs::directory_iterator(dir / "out" / "models")) {
    model_files += entry.path().filename().string().rfind("task_", 0) == 0;
  }
  CHECK(model_files == 3);
  CHECK(line_count(dir / "out" / "training_loss.csv") == 1 + 2 * 3);

  CausalGraph single({"V1", "V2", "V3", "V4", "V5", "V6"});
  single.add_directed(0, 2);
  write_text(dir / "single.json", graph_to_json(single));
  cfg.graph = dir / "single.json";
  cfg.out = dir / "out1";
  run_train(cfg);
  CHECK(fs::exists(dir / "out1" / "models" / "task_0.json"));
  CHECK_FALSE(fs::exists(dir / "out1" / "models" / "task_1.json"));

  CausalGraph cyclic(names);
  cyclic.add_directed(0, 1);
  cyclic.add_directed(1, 2);
  cyclic.add_directed(2, 0);
  write_text(dir / "cyclic.json", graph_to_json(cyclic));
  cfg.graph = dir / "cyclic.json";
  CHECK_THROWS(run_train(cfg));
}

TEST_CASE("metrics command on a contact dump") {
  testing::TempDir dir;
  const std::string header = "particle_a,particle_b,n1,n2,n3,normal_force\n";
  for (int s = 0; s < 3; ++s) {
    testing::write_file(dir / "dump" / ("contacts_" + std::to_string(s) + ".csv"),
                        header + "0,1,1,0,0,2\n1,2,0,1,0,1\n" + (s == 1 ? "" : "0,2,0,0,1,3\n"));
  }
  REQUIRE(cli("metrics " + (dir / "dump").string() + " --out " + (dir / "out").string()) == 0);
  const auto rows = read_csv(dir / "out" / "features.csv");
  CHECK(rows.size() == 4);
  CHECK(rows[0][0] == "step");
  CHECK(rows[0][1] == "density");
  CHECK(rows[1][1] == "1");
  CHECK(std::stod(rows[2][1]) == doctest::Approx(2.0 / 3.0));
  CHECK(cli("metrics " + (dir / "none").string()) == 2);
}
