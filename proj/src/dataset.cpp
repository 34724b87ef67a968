#include "craft/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "craft/base64.hpp"
#include "craft/errors.hpp"
#include "craft/expert.hpp"
#include "craft/io.hpp"

namespace craft::data {
namespace {

using json = nlohmann::ordered_json;

json vec_json(const Vec2& v) { return json::array({v[0], v[1]}); }

json stats_json(const ChannelStats& s) { return {{"mean", s.mean}, {"std", s.std}}; }

// Running sums in a fixed order; population standard deviation.
struct Moments {
  std::vector<double> sum, sumsq;
  std::size_t n = 0;

  explicit Moments(std::size_t dims) : sum(dims, 0.0), sumsq(dims, 0.0) {}
  void add(std::size_t i, double v) {
    sum[i] += v;
    sumsq[i] += v * v;
  }
  ChannelStats finish() const {
    ChannelStats s;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      const double m = sum[i] / static_cast<double>(n);
      const double var = std::max(sumsq[i] / static_cast<double>(n) - m * m, 0.0);
      s.mean.push_back(m);
      s.std.push_back(std::max(std::sqrt(var), kStdFloor));
    }
    return s;
  }
};

class LineReader {
 public:
  LineReader(const json& j, std::size_t line) : j_(j), line_(line) {}

  const json& at(const char* key) const {
    const auto it = j_.find(key);
    if (it == j_.end()) fail(std::string("missing field '") + key + "'");
    return *it;
  }
  double num(const json& v, const char* what) const {
    if (!v.is_number()) fail(std::string("field '") + what + "' is not a number");
    return v.get<double>();
  }
  double number(const char* key) const { return num(at(key), key); }
  std::uint64_t uint(const char* key) const {
    const json& v = at(key);
    if (!v.is_number_unsigned()) fail(std::string("field '") + key + "' is not an unsigned integer");
    return v.get<std::uint64_t>();
  }
  std::string str(const char* key) const {
    const json& v = at(key);
    if (!v.is_string()) fail(std::string("field '") + key + "' is not a string");
    return v.get<std::string>();
  }
  Vec2 vec2(const json& v, const char* key) const {
    if (!v.is_array() || v.size() != 2) fail(std::string("field '") + key + "' must be a 2-element array");
    return {num(v[0], key), num(v[1], key)};
  }
  Vec2 vec2(const char* key) const { return vec2(at(key), key); }
  std::vector<double> numbers(const json& v, const char* key, std::size_t n) const {
    if (!v.is_array() || v.size() != n) fail(std::string("field '") + key + "' has the wrong length");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(num(x, key));
    return out;
  }
  ChannelStats stats(const json& v, const char* key, std::size_t n) const {
    if (!v.is_object()) fail(std::string("stats '") + key + "' must be an object");
    LineReader sub(v, line_);
    return {numbers(sub.at("mean"), key, n), numbers(sub.at("std"), key, n)};
  }
  [[noreturn]] void fail(const std::string& what) const { throw FormatError(line_, what); }

 private:
  const json& j_;
  std::size_t line_;
};

json header_json(const DatasetHeader& h) {
  json j;
  j["type"] = "header";
  j["format_version"] = h.format_version;
  j["task"] = std::string(world::to_string(h.task.task));
  j["episode_len"] = h.task.episode_len;
  j["wall_x"] = h.task.wall_x;
  j["dt_ctrl"] = h.dt_ctrl;
  j["horizon"] = h.horizon;
  j["gains"] = {{"stiffness", vec_json(h.gains.stiffness)}, {"damping", vec_json(h.gains.damping)}};
  j["arm"] = {{"l1", h.arm.l1}, {"l2", h.arm.l2}, {"m1", h.arm.m1}, {"m2", h.arm.m2}};
  j["episode_count"] = h.episode_count;
  j["seed"] = h.seed;
  j["attempts"] = h.attempts;
  j["stats"] = {{"vision", stats_json(h.stats.vision)},
                {"q", stats_json(h.stats.q)},
                {"tau", stats_json(h.stats.tau)},
                {"action", stats_json(h.stats.action)}};
  return j;
}

DatasetHeader parse_header(const json& j) {
  const LineReader r(j, 1);
  if (!j.is_object()) r.fail("header must be a JSON object");
  DatasetHeader h;
  const json& version = r.at("format_version");
  if (!version.is_number_integer() || version.get<int>() != kFormatVersion)
    r.fail("unsupported format_version " + version.dump() + " (expected 1)");
  try {
    h.task.task = world::parse_task(r.str("task"));
  } catch (const ContractViolation& e) {
    r.fail(e.what());
  }
  h.task.episode_len = static_cast<int>(r.uint("episode_len"));
  h.task.wall_x = r.number("wall_x");
  h.dt_ctrl = r.number("dt_ctrl");
  h.horizon = static_cast<int>(r.uint("horizon"));
  const LineReader g(r.at("gains"), 1);
  h.gains.stiffness = g.vec2("stiffness");
  h.gains.damping = g.vec2("damping");
  const LineReader a(r.at("arm"), 1);
  h.arm = {a.number("l1"), a.number("l2"), a.number("m1"), a.number("m2")};
  h.episode_count = static_cast<std::uint32_t>(r.uint("episode_count"));
  h.seed = r.uint("seed");
  h.attempts = static_cast<std::uint32_t>(r.uint("attempts"));
  const LineReader s(r.at("stats"), 1);
  h.stats.vision = r.stats(s.at("vision"), "vision", world::kVisionPixels);
  h.stats.q = r.stats(s.at("q"), "q", 2);
  h.stats.tau = r.stats(s.at("tau"), "tau", 2);
  h.stats.action = r.stats(s.at("action"), "action", 2);
  return h;
}

json record_json(const DemoRecord& r) {
  json j;
  j["episode_id"] = r.episode_id;
  j["t"] = r.t;
  j["vision"] = base64::encode(r.vision);
  j["lang_id"] = r.lang_id;
  j["q"] = vec_json(r.q);
  j["qdot"] = vec_json(r.qdot);
  j["tau_obs"] = vec_json(r.tau_obs);
  j["tau_ext"] = vec_json(r.tau_ext);
  j["qddot"] = vec_json(r.qddot);
  j["q_d"] = vec_json(r.q_d);
  j["q_cmd"] = vec_json(r.q_cmd);
  return j;
}

DemoRecord parse_record(const json& j, std::size_t line) {
  const LineReader r(j, line);
  if (!j.is_object()) r.fail("record must be a JSON object");
  DemoRecord rec;
  rec.episode_id = static_cast<std::uint32_t>(r.uint("episode_id"));
  rec.t = static_cast<std::uint32_t>(r.uint("t"));
  const auto bytes = base64::decode(r.str("vision"));
  if (!bytes) r.fail("vision payload is not valid base64");
  if (bytes->size() != world::kVisionPixels)
    r.fail("vision payload has " + std::to_string(bytes->size()) + " bytes, expected 320");
  std::copy(bytes->begin(), bytes->end(), rec.vision.begin());
  const std::uint64_t lang = r.uint("lang_id");
  if (lang > 1) r.fail("lang_id out of range");
  rec.lang_id = static_cast<std::uint8_t>(lang);
  rec.q = r.vec2("q");
  rec.qdot = r.vec2("qdot");
  rec.tau_obs = r.vec2("tau_obs");
  rec.tau_ext = r.vec2("tau_ext");
  rec.qddot = r.vec2("qddot");
  rec.q_d = r.vec2("q_d");
  rec.q_cmd = r.vec2("q_cmd");
  return rec;
}

}  // namespace

bool DatasetHeader::operator==(const DatasetHeader& o) const {
  return format_version == o.format_version && task.task == o.task.task && task.episode_len == o.task.episode_len &&
         task.wall_x == o.task.wall_x && dt_ctrl == o.dt_ctrl && horizon == o.horizon &&
         gains.stiffness == o.gains.stiffness && gains.damping == o.gains.damping && arm.l1 == o.arm.l1 &&
         arm.l2 == o.arm.l2 && arm.m1 == o.arm.m1 && arm.m2 == o.arm.m2 && episode_count == o.episode_count &&
         seed == o.seed && attempts == o.attempts && stats == o.stats;
}

std::size_t DemoSet::record_count() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.size();
  return n;
}

void chunk_targets(const std::vector<DemoRecord>& episode, std::size_t t, int horizon, Vec2* out) {
  for (int k = 0; k < horizon; ++k) out[k] = episode[std::min(t + k, episode.size() - 1)].q_cmd;
}

NormStats compute_stats(const DemoSet& set) {
  const int H = set.header.horizon;
  Moments vision(world::kVisionPixels), q(2), tau(2), action(2);
  std::vector<Vec2> chunk(H);
  for (const auto& ep : set.episodes) {
    for (std::size_t t = 0; t < ep.size(); ++t) {
      const DemoRecord& r = ep[t];
      for (int i = 0; i < world::kVisionPixels; ++i) vision.add(i, r.vision[i] / 255.0);
      chunk_targets(ep, t, H, chunk.data());
      for (int j = 0; j < 2; ++j) {
        q.add(j, r.q[j]);
        tau.add(j, r.tau_obs[j]);
        for (int k = 0; k < H; ++k) action.add(j, chunk[k][j] - r.q[j]);
      }
      ++vision.n;
      ++q.n;
      ++tau.n;
      action.n += H;
    }
  }
  if (q.n == 0) throw DataError("cannot compute statistics of an empty dataset");
  return {vision.finish(), q.finish(), tau.finish(), action.finish()};
}

DemoSet generate_dataset(const EpisodeSetup& setup, int n_episodes, std::uint64_t seed, GenerationReport* report) {
  if (n_episodes <= 0) throw ContractViolation("n_episodes must be positive");
  const auto n = static_cast<std::size_t>(n_episodes);
  const std::size_t max_attempts = 5 * n;
  const RngStream root = RngStream(seed).derive("gen").derive(world::to_string(setup.task.task));

  DemoSet set;
  GenerationReport rep;
  std::size_t next = 0;
  while (set.episodes.size() < n && next < max_attempts) {
    const std::size_t wave = std::min(n - set.episodes.size(), max_attempts - next);
    std::vector<EpisodeResult> results(wave);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < wave; ++i) {
      const RngStream stream = root.derive(next + i);
      RngStream scene_rng = stream.derive("scene");
      const world::Scene scene = world::sample_scene(setup.task, world::Regime::InDist, scene_rng);
      expert::ScriptedExpert expert;
      results[i] = run_episode(setup, scene, expert, stream.derive("episode"), true);
    }
    for (auto& res : results) {
      ++rep.attempts;
      rep.faults += res.fault;
      if (!res.report.success || set.episodes.size() == n) continue;
      const auto id = static_cast<std::uint32_t>(set.episodes.size());
      for (auto& r : res.records) r.episode_id = id;
      set.episodes.push_back(std::move(res.records));
      ++rep.successes;
    }
    next += wave;
  }
  if (report) *report = rep;
  if (set.episodes.size() < n)
    throw GenerationFault("only " + std::to_string(set.episodes.size()) + " of " + std::to_string(n) +
                          " expert episodes succeeded in " + std::to_string(max_attempts) + " attempts");

  set.header.task = setup.task;
  set.header.arm = setup.arm;
  set.header.gains = setup.gains;
  set.header.episode_count = static_cast<std::uint32_t>(n);
  set.header.seed = seed;
  set.header.attempts = rep.attempts;
  set.header.stats = compute_stats(set);
  return set;
}

bool torque_identity_holds(const DatasetHeader& header, const DemoRecord& r) {
  sim::ArmState s;
  s.q = r.q;
  s.qdot = r.qdot;
  const sim::TorqueObservation obs =
      sim::observed_torque(header.arm, s, {r.q_d, Vec2::Zero()}, header.gains, r.qddot, r.tau_ext);
  return obs.tau_obs[0] == r.tau_obs[0] && obs.tau_obs[1] == r.tau_obs[1];
}

std::string to_ndjson(const DemoSet& set) {
  std::string out = header_json(set.header).dump();
  out += '\n';
  for (const auto& ep : set.episodes)
    for (const auto& r : ep) {
      out += record_json(r).dump();
      out += '\n';
    }
  return out;
}

void write_ndjson(const DemoSet& set, const std::filesystem::path& path) { io::write_atomic(path, to_ndjson(set)); }

DemoSet parse_ndjson(std::istream& in, bool verify_torque) {
  DemoSet set;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) throw FormatError(lineno, "empty line");
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!have_header) {
      set.header = parse_header(j);
      have_header = true;
      continue;
    }
    DemoRecord r = parse_record(j, lineno);
    if (r.episode_id == set.episodes.size()) set.episodes.emplace_back();
    if (set.episodes.empty() || r.episode_id + 1 != set.episodes.size())
      throw FormatError(lineno, "episode_id " + std::to_string(r.episode_id) + " out of order");
    auto& ep = set.episodes.back();
    if (r.t != ep.size()) throw FormatError(lineno, "tick " + std::to_string(r.t) + " out of order");
    if (ep.size() >= static_cast<std::size_t>(set.header.task.episode_len))
      throw FormatError(lineno, "episode longer than episode_len");
    if (verify_torque && !torque_identity_holds(set.header, r))
      throw FormatError(lineno, "tau_obs violates the impedance torque identity");
    ep.push_back(r);
  }
  if (!have_header) throw FormatError(0, "empty dataset file");
  if (set.episodes.size() != set.header.episode_count)
    throw FormatError(lineno, "header announces " + std::to_string(set.header.episode_count) + " episodes, found " +
                                  std::to_string(set.episodes.size()));
  return set;
}

DemoSet read_ndjson(const std::filesystem::path& path, bool verify_torque) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return parse_ndjson(in, verify_torque);
}

}  // namespace craft::data
