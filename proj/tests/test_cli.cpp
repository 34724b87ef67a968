#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "json.hpp"

#include "craft/cli.hpp"
#include "craft/io.hpp"

namespace fs = std::filesystem;
using craft::io::read_file;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run craft_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "craft");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = craft::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void check_error_line(const Run& r, int code) {
  CHECK(r.code == code);
  REQUIRE(!r.err.empty());
  CHECK(r.err.back() == '\n');
  CHECK(r.err.find('\n') == r.err.size() - 1);
  const auto j = nlohmann::json::parse(r.err);
  CHECK(j.contains("error"));
  CHECK(j.contains("message"));
  CHECK(j["exit_code"] == code);
}

fs::path scratch_dir(const char* name) {
  const fs::path d = fs::temp_directory_path() / ("craft_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

const char* kSmallConfig = R"({
  "format_version": 1,
  "seed": 3,
  "train": {"total_steps": 40, "batch_size": 16, "log_every": 10},
  "schedule": {"lambda_init": 1.0}
})";

}  // namespace

TEST_CASE("usage errors exit with 2 and one JSON line") {
  const fs::path d = scratch_dir("usage");
  check_error_line(craft_cli({"gen-data", "--task", "fold", "--out", (d / "x.ndjson").string()}), 2);
  check_error_line(craft_cli({"gen-data", "--task", "insert", "--episodes", "0", "--out", (d / "x.ndjson").string()}),
                   2);
  CHECK(!fs::exists(d / "x.ndjson"));
  check_error_line(craft_cli({}), 2);
  check_error_line(craft_cli({"frobnicate"}), 2);
  check_error_line(craft_cli({"train", "--variant", "base"}), 2);

  const std::string missing = (d / "nowhere.ndjson").string();
  const Run r = craft_cli({"train", "--data", missing, "--variant", "base", "--out", (d / "m.json").string()});
  check_error_line(r, 2);
  CHECK(r.err.find(missing) != std::string::npos);

  write_text(d / "bad_key.json", R"({"format_version": 1, "train": {"epochs": 3}})");
  const Run k = craft_cli({"ablate", "--config", (d / "bad_key.json").string(), "--csv", (d / "a.csv").string()});
  check_error_line(k, 2);
  CHECK(k.err.find("train.epochs") != std::string::npos);

  write_text(d / "no_version.json", R"({"seed": 1})");
  check_error_line(craft_cli({"ablate", "--config", (d / "no_version.json").string(), "--csv", "a.csv"}), 2);
  write_text(d / "horizon.json", R"({"format_version": 1, "horizon": 16})");
  check_error_line(craft_cli({"ablate", "--config", (d / "horizon.json").string(), "--csv", "a.csv"}), 2);

  check_error_line(craft_cli({"--threads", "0", "metrics", "--data", "x", "--csv", "y"}), 2);
}

TEST_CASE("gen-data, train, eval and metrics end to end") {
  const fs::path d = scratch_dir("pipeline");
  const std::string data = (d / "insert.ndjson").string();
  const Run g = craft_cli({"gen-data", "--task", "insert", "--episodes", "20", "--seed", "5", "--out", data});
  REQUIRE(g.code == 0);
  CHECK(g.out.find("wrote 20 episodes") != std::string::npos);
  const std::string first = read_file(data);
  const auto side = nlohmann::json::parse(read_file(data + ".config.json"));
  CHECK(side["command"] == "gen-data");
  CHECK(side["flags"]["episodes"] == 20);

  REQUIRE(craft_cli({"gen-data", "--task", "insert", "--episodes", "20", "--seed", "5", "--out", data}).code == 0);
  CHECK(read_file(data) == first);

  write_text(d / "small.json", kSmallConfig);
  const std::string cfg = (d / "small.json").string();
  const std::string craft_model = (d / "craft.json").string();
  const std::string base_model = (d / "base.json").string();
  REQUIRE(craft_cli({"train", "--config", cfg, "--data", data, "--variant", "craft", "--out", craft_model}).code == 0);
  REQUIRE(craft_cli({"train", "--config", cfg, "--data", data, "--variant", "base", "--out", base_model}).code == 0);

  SUBCASE("training logs") {
    std::istringstream craft_log(read_file(craft_model + ".log.csv"));
    std::string line;
    std::getline(craft_log, line);
    CHECK(line == "step,l_task,l_vib_v,l_vib_l,lambda");
    std::getline(craft_log, line);
    CHECK(line.substr(line.rfind(',') + 1) == "1");

    std::istringstream base_log(read_file(base_model + ".log.csv"));
    std::getline(base_log, line);
    int rows = 0;
    while (std::getline(base_log, line)) {
      std::vector<std::string> cols;
      std::stringstream ss(line);
      for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
      REQUIRE(cols.size() == 5);
      CHECK(cols[2] == "0");
      CHECK(cols[3] == "0");
      ++rows;
    }
    CHECK(rows == 5);

    const auto eff = nlohmann::json::parse(read_file(craft_model + ".config.json"))["config"];
    CHECK(eff["train"]["total_steps"] == 40);
    CHECK(eff["demos"] == 50);
    CHECK(eff["schedule"]["t_decay"] == 10.0);
    CHECK(eff["task"]["wall_x"] == 0.6);
  }

  SUBCASE("retraining is byte-identical") {
    const std::string again = (d / "craft2.json").string();
    REQUIRE(craft_cli({"train", "--config", cfg, "--data", data, "--variant", "craft", "--out", again}).code == 0);
    CHECK(read_file(again) == read_file(craft_model));
  }

  SUBCASE("evaluation") {
    const std::string csv = (d / "eval.csv").string();
    const Run e = craft_cli({"eval", "--model", craft_model, "--task", "insert", "--episodes", "4", "--seed", "9",
                             "--ood", "task", "--csv", csv, "--plot", (d / "eval.svg").string()});
    REQUIRE(e.code == 0);
    const std::string text = read_file(csv);
    CHECK(text.rfind("variant,task,regime,episodes,successes,success_rate,seed\ncraft,insert,ood_task,4,", 0) == 0);
    CHECK(read_file(d / "eval.svg").rfind("<svg", 0) == 0);

    const std::string csv1 = (d / "eval1.csv").string();
    REQUIRE(craft_cli({"--threads", "1", "eval", "--model", craft_model, "--task", "insert", "--episodes", "4",
                       "--seed", "9", "--ood", "task", "--csv", csv1})
                .code == 0);
    CHECK(read_file(csv1) == text);

    check_error_line(craft_cli({"eval", "--model", craft_model, "--task", "insert", "--episodes", "0", "--csv", csv}),
                     2);
    check_error_line(craft_cli({"eval", "--model", craft_model, "--task", "insert", "--ood", "planet", "--csv", csv}),
                     2);

    const std::string corrupt = (d / "corrupt.json").string();
    std::string model = read_file(craft_model);
    model.resize(model.size() / 2);
    write_text(corrupt, model);
    check_error_line(craft_cli({"eval", "--model", corrupt, "--task", "insert", "--csv", csv}), 1);
  }

  SUBCASE("metrics") {
    const std::string csv = (d / "metrics.csv").string();
    const Run m = craft_cli({"metrics", "--data", data, "--csv", csv});
    REQUIRE(m.code == 0);
    const std::string text = read_file(csv);
    CHECK(text.rfind("task,samples,h_vision,h_q,h_tau_obs,h_tau_ext,mi_tau_obs_0,mi_tau_obs_1,mi_q_0,mi_q_1,A,B\n", 0) ==
          0);
    CHECK(m.out == text);
    REQUIRE(craft_cli({"metrics", "--data", data, "--csv", csv}).code == 0);
    CHECK(read_file(csv) == text);
  }

  SUBCASE("corrupt dataset is a runtime fault") {
    std::string broken = first;
    broken.replace(broken.find('\n') + 1, 1, "#");
    write_text(d / "broken.ndjson", broken);
    const Run r = craft_cli({"metrics", "--data", (d / "broken.ndjson").string(), "--csv", (d / "m.csv").string()});
    check_error_line(r, 1);
    CHECK(r.err.find("line 2") != std::string::npos);
    CHECK(!fs::exists(d / "m.csv"));
  }
}

TEST_CASE("ablate on a reduced config") {
  const fs::path d = scratch_dir("ablate");
  write_text(d / "cfg.json", R"({
    "format_version": 1,
    "demos": 20,
    "eval_episodes": 2,
    "tasks": ["wipe"],
    "ood": false,
    "train": {"total_steps": 20, "batch_size": 8, "log_every": 10}
  })");
  const std::string csv = (d / "abl.csv").string();
  const Run a = craft_cli({"ablate", "--config", (d / "cfg.json").string(), "--csv", csv});
  REQUIRE(a.code == 0);
  const std::string text = read_file(csv);
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "variant,task,regime,episodes,successes,success_rate,seed");
  std::vector<std::string> variants;
  while (std::getline(lines, line)) variants.push_back(line.substr(0, line.find(',')));
  CHECK(variants == std::vector<std::string>{"base", "vib", "craft"});

  const std::string csv2 = (d / "abl2.csv").string();
  REQUIRE(craft_cli({"ablate", "--config", (d / "cfg.json").string(), "--csv", csv2}).code == 0);
  CHECK(read_file(csv2) == text);
  const auto side = nlohmann::json::parse(read_file(csv + ".config.json"));
  CHECK(side["config"]["eval_episodes"] == 2);
  CHECK(side["config"]["format_version"] == 1);
}
