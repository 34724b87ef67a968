#include "craft/model_io.hpp"

#include "json.hpp"

#include "craft/errors.hpp"
#include "craft/io.hpp"

namespace craft::policy {
namespace {

using json = nlohmann::ordered_json;

json stats_json(const data::ChannelStats& s) { return {{"mean", s.mean}, {"std", s.std}}; }

data::ChannelStats read_stats(const json& j, std::size_t n, const char* name) {
  data::ChannelStats s{j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
  if (s.mean.size() != n || s.std.size() != n)
    throw DataError(std::string("model stats '") + name + "' have the wrong length");
  for (double v : s.std)
    if (!(v > 0.0)) throw DataError(std::string("model stats '") + name + "' contain a non-positive std");
  return s;
}

json architecture() {
  return {{"vision_dim", world::kVisionPixels}, {"vision_embed", kVisionEmbed},
          {"language_tokens", kLanguageTokens}, {"language_embed", kLanguageEmbed},
          {"proprio_dim", kProprioDim},         {"proprio_embed", kProprioEmbed},
          {"vision_latent", kVisionLatent},     {"language_latent", kLanguageLatent},
          {"hidden", kHidden},                  {"horizon", data::kHorizon},
          {"log_sigma_clamp", {vib::kLogSigmaMin, vib::kLogSigmaMax}}};
}

}  // namespace

std::string model_to_json(const Model& m) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["variant"] = std::string(to_string(m.params.variant));
  j["task"] = std::string(world::to_string(m.task));
  j["seed"] = m.seed;
  j["architecture"] = architecture();
  j["schedule"] = {{"lambda_init", m.schedule.lambda_init}, {"t_decay", m.schedule.t_decay}};
  j["stats"] = {{"vision", stats_json(m.stats.vision)},
                {"q", stats_json(m.stats.q)},
                {"tau", stats_json(m.stats.tau)},
                {"action", stats_json(m.stats.action)}};
  json params = json::object();
  for (const auto& r : const_cast<PolicyParams&>(m.params).refs())
    params[r.name] = {{"shape", r.value->shape}, {"data", r.value->data}};
  j["params"] = std::move(params);
  return j.dump() + "\n";
}

Model model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("model is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw DataError("unsupported model format_version " + j.at("format_version").dump());
    if (j.at("architecture") != architecture()) throw DataError("model architecture does not match this build");
    Model m;
    const auto variant = parse_variant(j.at("variant").get<std::string>());
    if (!variant) throw DataError("unknown model variant " + j.at("variant").dump());
    m.task = world::parse_task(j.at("task").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.schedule.lambda_init = j.at("schedule").at("lambda_init").get<double>();
    m.schedule.t_decay = j.at("schedule").at("t_decay").get<double>();
    m.schedule.validate();
    const json& s = j.at("stats");
    m.stats.vision = read_stats(s.at("vision"), world::kVisionPixels, "vision");
    m.stats.q = read_stats(s.at("q"), 2, "q");
    m.stats.tau = read_stats(s.at("tau"), 2, "tau");
    m.stats.action = read_stats(s.at("action"), 2, "action");

    RngStream unused(0);
    m.params = init_params(*variant, unused);
    const json& params = j.at("params");
    auto refs = m.params.refs();
    if (params.size() != refs.size()) throw DataError("model has the wrong number of parameter tensors");
    for (auto& r : refs) {
      const json& p = params.at(r.name);
      if (p.at("shape").get<std::vector<std::size_t>>() != r.value->shape)
        throw DataError("parameter '" + r.name + "' has the wrong shape");
      auto values = p.at("data").get<std::vector<double>>();
      if (values.size() != r.value->size()) throw DataError("parameter '" + r.name + "' has the wrong size");
      r.value->data = std::move(values);
      if (!r.value->all_finite()) throw DataError("parameter '" + r.name + "' is not finite");
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model: ") + e.what());
  } catch (const ContractViolation& e) {
    throw DataError(std::string("malformed model: ") + e.what());
  }
}

void save_model(const Model& m, const std::filesystem::path& path) { io::write_atomic(path, model_to_json(m)); }

Model load_model(const std::filesystem::path& path) { return model_from_json(io::read_file(path)); }

}  // namespace craft::policy
