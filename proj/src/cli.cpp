#include "craft/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "craft/errors.hpp"
#include "craft/infometrics.hpp"
#include "craft/io.hpp"
#include "craft/learn.hpp"

namespace craft::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- config ----------------------------------------------------------------

struct Config {
  learn::AblationConfig run;
  int horizon = data::kHorizon;
  std::optional<std::string> data_path;
  std::optional<std::string> out_path;
  std::optional<std::string> csv_path;
};

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw UsageError("config: " + where_ + " must be an object");
  }
  void allow(std::initializer_list<const char*> keys) const {
    for (const auto& [k, v] : j_.items()) {
      bool known = false;
      for (const char* a : keys) known = known || k == a;
      if (!known) throw UsageError("config: unknown key '" + where_ + k + "'");
    }
  }
  const json* find(const char* key) const {
    const auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }
  template <class T>
  void get(const char* key, T& out) const {
    const json* v = find(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw UsageError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw UsageError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw UsageError("");
      } else {
        if (!v->is_string()) throw UsageError("");
      }
      out = v->get<T>();
    } catch (const std::exception&) {
      throw UsageError("config: '" + where_ + key + "' has the wrong type");
    }
  }

 private:
  const json& j_;
  std::string where_;
};

Config parse_config(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  Config c;
  const ObjectReader r(j, "");
  r.allow({"format_version", "seed", "data_seed", "eval_seed", "demos", "eval_episodes", "tasks", "ood",
           "schedule_ablation", "horizon", "train", "schedule", "task", "paths"});
  const json* version = r.find("format_version");
  if (!version) throw UsageError("config: format_version is required");
  if (!version->is_number_integer() || version->get<int>() != 1)
    throw UsageError("config: unsupported format_version " + version->dump());

  learn::AblationConfig& a = c.run;
  r.get("seed", a.train.seed);
  r.get("data_seed", a.data_seed);
  r.get("eval_seed", a.eval_seed);
  r.get("demos", a.demos);
  r.get("eval_episodes", a.eval_episodes);
  r.get("ood", a.ood);
  r.get("schedule_ablation", a.schedule_ablation);
  r.get("horizon", c.horizon);
  if (const json* tasks = r.find("tasks")) {
    if (!tasks->is_array() || tasks->empty()) throw UsageError("config: 'tasks' must be a non-empty array");
    a.tasks.clear();
    for (const auto& t : *tasks) {
      if (!t.is_string()) throw UsageError("config: 'tasks' entries must be strings");
      try {
        a.tasks.push_back(world::parse_task(t.get<std::string>()));
      } catch (const ContractViolation&) {
        throw UsageError("config: unknown task '" + t.get<std::string>() + "'");
      }
    }
  }
  if (const json* t = r.find("train")) {
    const ObjectReader tr(*t, "train.");
    tr.allow({"total_steps", "batch_size", "lr", "log_every"});
    tr.get("total_steps", a.train.total_steps);
    tr.get("batch_size", a.train.batch_size);
    tr.get("lr", a.train.lr);
    tr.get("log_every", a.train.log_every);
  }
  if (const json* s = r.find("schedule")) {
    const ObjectReader sr(*s, "schedule.");
    sr.allow({"lambda_init", "t_decay"});
    sr.get("lambda_init", a.train.lambda_init);
    double t_decay = 0.0;
    if (sr.find("t_decay")) {
      sr.get("t_decay", t_decay);
      a.train.t_decay = t_decay;
    }
  }
  if (const json* t = r.find("task")) {
    const ObjectReader tr(*t, "task.");
    tr.allow({"episode_len", "wall_x"});
    tr.get("episode_len", a.task_template.episode_len);
    tr.get("wall_x", a.task_template.wall_x);
  }
  if (const json* p = r.find("paths")) {
    const ObjectReader pr(*p, "paths.");
    pr.allow({"data", "out", "csv"});
    std::string s;
    if (pr.find("data")) pr.get("data", s), c.data_path = s;
    if (pr.find("out")) pr.get("out", s), c.out_path = s;
    if (pr.find("csv")) pr.get("csv", s), c.csv_path = s;
  }
  if (c.horizon != data::kHorizon)
    throw UsageError("config: horizon " + std::to_string(c.horizon) + " is not supported (this build uses 8)");
  try {
    a.validate();
  } catch (const ContractViolation& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  return c;
}

json effective_json(const Config& c) {
  const learn::AblationConfig& a = c.run;
  json tasks = json::array();
  for (auto t : a.tasks) tasks.push_back(std::string(world::to_string(t)));
  json j;
  j["format_version"] = 1;
  j["seed"] = a.train.seed;
  j["data_seed"] = a.data_seed;
  j["eval_seed"] = a.eval_seed;
  j["demos"] = a.demos;
  j["eval_episodes"] = a.eval_episodes;
  j["tasks"] = tasks;
  j["ood"] = a.ood;
  j["schedule_ablation"] = a.schedule_ablation;
  j["horizon"] = c.horizon;
  j["train"] = {{"total_steps", a.train.total_steps},
                {"batch_size", a.train.batch_size},
                {"lr", a.train.lr},
                {"log_every", a.train.log_every}};
  const vib::Schedule s = a.train.schedule();
  j["schedule"] = {{"lambda_init", s.lambda_init}, {"t_decay", s.t_decay}};
  j["task"] = {{"episode_len", a.task_template.episode_len}, {"wall_x", a.task_template.wall_x}};
  json paths = json::object();
  if (c.data_path) paths["data"] = *c.data_path;
  if (c.out_path) paths["out"] = *c.out_path;
  if (c.csv_path) paths["csv"] = *c.csv_path;
  j["paths"] = paths;
  return j;
}

void write_sidecar(const fs::path& artifact, const std::string& command, json flags, const json& config) {
  json j;
  j["command"] = command;
  j["flags"] = std::move(flags);
  if (!config.is_null()) j["config"] = config;
  io::write_atomic(artifact.string() + ".config.json", j.dump(2) + "\n");
}

// ---- output helpers --------------------------------------------------------

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '<') out += "&lt;";
    else if (ch == '>') out += "&gt;";
    else if (ch == '&') out += "&amp;";
    else out += ch;
  }
  return out;
}

std::string bar_chart_svg(const std::vector<learn::AblationRow>& rows) {
  const int bar = 28, gap = 10, left = 60, top = 20, height = 200;
  const int width = left + static_cast<int>(rows.size()) * (bar + gap) + 20;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << top + height + 120
    << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + height
    << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const int y = top + height - tick * height / 4;
    s << "<text x=\"" << left - 6 << "\" y=\"" << y + 3 << "\" text-anchor=\"end\">" << tick * 25 << "%</text>\n";
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const int x = left + gap + static_cast<int>(i) * (bar + gap);
    const int h = static_cast<int>(std::lround(r.success_rate * height));
    const char* fill = r.variant == "craft" ? "#c0392b" : r.variant == "vib" ? "#e67e22" : "#7f8c8d";
    s << "<rect x=\"" << x << "\" y=\"" << top + height - h << "\" width=\"" << bar << "\" height=\"" << h
      << "\" fill=\"" << fill << "\"/>\n";
    const std::string label =
        r.variant + " " + std::string(world::to_string(r.task)) + " " + std::string(world::to_string(r.regime));
    s << "<text transform=\"translate(" << x + bar / 2 << "," << top + height + 6 << ") rotate(60)\">"
      << escape_xml(label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string log_csv(const learn::TrainLog& log) {
  std::string out = "step,l_task,l_vib_v,l_vib_l,lambda\n";
  char line[256];
  for (const auto& e : log.entries) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g\n", e.step, e.loss.l_task, e.loss.l_vib_vision,
                  e.loss.l_vib_language, e.loss.lambda_t);
    out += line;
  }
  return out;
}

world::TaskId task_flag(const std::string& s) {
  try {
    return world::parse_task(s);
  } catch (const ContractViolation&) {
    throw UsageError("unknown task '" + s + "' (expected insert or wipe)");
  }
}

data::DemoSet load_data(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("data file not found: " + path);
  return data::read_ndjson(path);
}

int apply_threads(int flag) {
  int n = flag;
  if (n == 0) {
    if (const char* env = std::getenv("CRAFT_THREADS"); env && *env) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (*end != '\0' || v <= 0 || v > 4096) throw UsageError(std::string("CRAFT_THREADS is not a positive integer: ") + env);
      n = static_cast<int>(v);
    }
  }
  if (n < 0) throw UsageError("--threads must be positive");
  if (n > 0) omp_set_num_threads(n);
  return n;
}

struct Fail {
  int code;
  const char* kind;
};

int report(std::ostream& err, Fail f, const std::string& message) {
  err << json{{"error", f.kind}, {"exit_code", f.code}, {"message", message}}.dump() << "\n";
  return f.code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Force-aware curriculum behaviour cloning on a simulated planar arm", "craft"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: CRAFT_THREADS or all cores)")
      ->check(CLI::PositiveNumber);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Record expert demonstrations as NDJSON");
  std::string gen_task, gen_out;
  int gen_episodes = data::kDefaultEpisodes;
  std::uint64_t gen_seed = 1;
  gen->add_option("--task", gen_task, "insert | wipe")->required();
  gen->add_option("--episodes", gen_episodes, "Successful episodes to keep");
  gen->add_option("--seed", gen_seed, "Generation seed");
  gen->add_option("--out", gen_out, "Output NDJSON path")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a policy on a dataset");
  std::string tr_config, tr_data, tr_variant, tr_out, tr_log;
  tr->add_option("--config", tr_config, "Config JSON");
  tr->add_option("--data", tr_data, "Dataset NDJSON");
  tr->add_option("--variant", tr_variant, "base | vib | craft")->required();
  tr->add_option("--out", tr_out, "Model JSON path");
  tr->add_option("--log", tr_log, "Training log CSV (default: <out>.log.csv)");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a model in closed loop");
  std::string ev_model, ev_task, ev_ood, ev_csv, ev_plot, ev_config;
  int ev_episodes = 50;
  std::uint64_t ev_seed = 2024;
  ev->add_option("--model", ev_model, "Model JSON")->required();
  ev->add_option("--task", ev_task, "insert | wipe")->required();
  ev->add_option("--episodes", ev_episodes, "Episodes");
  ev->add_option("--seed", ev_seed, "Scene seed");
  ev->add_option("--ood", ev_ood, "object | task");
  ev->add_option("--csv", ev_csv, "Result CSV")->required();
  ev->add_option("--plot", ev_plot, "Optional SVG bar chart");
  ev->add_option("--config", ev_config, "Config JSON (task geometry)");

  // ablate
  auto* ab = app.add_subcommand("ablate", "Train and evaluate all variants");
  std::string ab_config, ab_csv, ab_plot;
  bool ab_schedule = false;
  ab->add_option("--config", ab_config, "Config JSON");
  ab->add_option("--csv", ab_csv, "Result CSV");
  ab->add_flag("--schedule-ablation", ab_schedule, "Add constant and zero lambda rows");
  ab->add_option("--plot", ab_plot, "Optional SVG bar chart");

  // metrics
  auto* me = app.add_subcommand("metrics", "Entropy and mutual-information report for a dataset");
  std::string me_data, me_csv;
  me->add_option("--data", me_data, "Dataset NDJSON")->required();
  me->add_option("--csv", me_csv, "Report CSV")->required();

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      return report(err, {kExitUsage, "usage"}, e.what());
    }
    apply_threads(threads);

    if (gen->parsed()) {
      const world::TaskId task = task_flag(gen_task);
      if (gen_episodes <= 0) throw UsageError("--episodes must be positive");
      EpisodeSetup setup;
      setup.task.task = task;
      data::GenerationReport rep;
      const data::DemoSet set = data::generate_dataset(setup, gen_episodes, gen_seed, &rep);
      data::write_ndjson(set, gen_out);
      write_sidecar(gen_out, "gen-data",
                    {{"task", gen_task}, {"episodes", gen_episodes}, {"seed", gen_seed}, {"out", gen_out}},
                    json());
      out << "wrote " << set.episodes.size() << " episodes (" << set.record_count() << " records) to " << gen_out
          << "\n";
      out << "expert: " << rep.successes << " successes in " << rep.attempts << " attempts ("
          << rep.faults << " faults), success rate " << static_cast<double>(rep.successes) / rep.attempts << "\n";
      return kExitOk;
    }

    if (tr->parsed()) {
      const auto variant = policy::parse_variant(tr_variant);
      if (!variant) throw UsageError("unknown variant '" + tr_variant + "' (expected base, vib or craft)");
      Config c = tr_config.empty() ? Config{} : parse_config(tr_config);
      if (tr_data.empty() && c.data_path) tr_data = *c.data_path;
      if (tr_out.empty() && c.out_path) tr_out = *c.out_path;
      if (tr_data.empty()) throw UsageError("train needs --data");
      if (tr_out.empty()) throw UsageError("train needs --out");
      if (tr_log.empty()) tr_log = tr_out + ".log.csv";
      const data::DemoSet set = load_data(tr_data);
      if (set.header.horizon != c.horizon)
        throw UsageError("dataset horizon " + std::to_string(set.header.horizon) + " does not match config horizon " +
                         std::to_string(c.horizon));
      learn::TrainConfig tc = c.run.train;
      tc.variant = *variant;
      const learn::TrainResult r = learn::train(tc, set);
      policy::save_model(r.model, tr_out);
      io::write_atomic(tr_log, log_csv(r.log));
      write_sidecar(tr_out, "train",
                    {{"config", tr_config}, {"data", tr_data}, {"variant", tr_variant}, {"out", tr_out},
                     {"log", tr_log}},
                    effective_json(c));
      char buf[64];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(r.log.checksum));
      out << "trained " << tr_variant << " for " << tc.total_steps << " steps in " << r.log.wall_seconds
          << " s; final l_task " << r.log.entries.back().loss.l_task << "; checksum " << buf << "\n";
      out << "wrote " << tr_out << " and " << tr_log << "\n";
      return kExitOk;
    }

    if (ev->parsed()) {
      const world::TaskId task = task_flag(ev_task);
      if (ev_episodes <= 0) throw UsageError("--episodes must be positive");
      world::Regime regime = world::Regime::InDist;
      if (!ev_ood.empty()) {
        if (ev_ood == "object") regime = world::Regime::OODObject;
        else if (ev_ood == "task") regime = world::Regime::OODTask;
        else throw UsageError("unknown --ood '" + ev_ood + "' (expected object or task)");
      }
      Config c = ev_config.empty() ? Config{} : parse_config(ev_config);
      if (!fs::exists(ev_model)) throw UsageError("model file not found: " + ev_model);
      const policy::Model model = policy::load_model(ev_model);
      EpisodeSetup setup{c.run.task_template, c.run.arm, c.run.gains};
      setup.task.task = task;
      const learn::EvalResult r = learn::eval_success_rate(model, setup, regime, ev_episodes, ev_seed);
      const learn::AblationRow row{std::string(policy::to_string(model.params.variant)), task, regime,
                                   r.episodes, r.successes, r.success_rate, ev_seed};
      io::write_atomic(ev_csv, std::string(learn::kResultsHeader) + "\n" + learn::format_row(row) + "\n");
      if (!ev_plot.empty()) io::write_atomic(ev_plot, bar_chart_svg({row}));
      write_sidecar(ev_csv, "eval",
                    {{"model", ev_model}, {"task", ev_task}, {"episodes", ev_episodes}, {"seed", ev_seed},
                     {"ood", ev_ood}, {"csv", ev_csv}, {"plot", ev_plot}, {"config", ev_config}},
                    effective_json(c));
      out << learn::format_row(row) << "\n";
      return kExitOk;
    }

    if (ab->parsed()) {
      Config c = ab_config.empty() ? Config{} : parse_config(ab_config);
      if (ab_schedule) c.run.schedule_ablation = true;
      if (ab_csv.empty() && c.csv_path) ab_csv = *c.csv_path;
      if (ab_csv.empty()) throw UsageError("ablate needs --csv");
      const learn::AblationTable table =
          learn::run_ablation(c.run, [&out](const std::string& s) { out << s << "\n" << std::flush; });
      io::write_atomic(ab_csv, learn::to_csv(table));
      if (!ab_plot.empty()) io::write_atomic(ab_plot, bar_chart_svg(table.rows));
      write_sidecar(ab_csv, "ablate", {{"config", ab_config}, {"csv", ab_csv}, {"plot", ab_plot}},
                    effective_json(c));
      out << "wrote " << table.rows.size() << " rows to " << ab_csv << "\n";
      return kExitOk;
    }

    if (me->parsed()) {
      const data::DemoSet set = load_data(me_data);
      const info::EntropyReport rep = info::modality_report(set);
      const std::string csv = info::report_csv(rep, std::string(world::to_string(set.header.task.task)));
      io::write_atomic(me_csv, csv);
      write_sidecar(me_csv, "metrics", {{"data", me_data}, {"csv", me_csv}}, json());
      out << csv;
      return kExitOk;
    }
    return report(err, {kExitUsage, "usage"}, "no command given");
  } catch (const UsageError& e) {
    return report(err, {kExitUsage, "usage"}, e.what());
  } catch (const FormatError& e) {
    return report(err, {kExitRuntime, "format"}, e.what());
  } catch (const DataError& e) {
    return report(err, {kExitRuntime, "data"}, e.what());
  } catch (const GenerationFault& e) {
    return report(err, {kExitRuntime, "generation"}, e.what());
  } catch (const TrainingFault& e) {
    return report(err, {kExitRuntime, "training"}, e.what());
  } catch (const EstimatorError& e) {
    return report(err, {kExitRuntime, "estimator"}, e.what());
  } catch (const std::exception& e) {
    return report(err, {kExitRuntime, "runtime"}, e.what());
  }
}

}  // namespace craft::cli
