#pragma once

#include <filesystem>
#include <string>

#include "craft/policy.hpp"

namespace craft::policy {

inline constexpr int kModelFormatVersion = 1;

/// A trained policy together with everything needed to run it.
struct Model {
  PolicyParams params;
  vib::Schedule schedule;
  data::NormStats stats;
  world::TaskId task = world::TaskId::Insert;  // task of the training data
  std::uint64_t seed = 0;
};

std::string model_to_json(const Model& m);
/// Throws DataError describing the first problem found.
Model model_from_json(const std::string& text);

void save_model(const Model& m, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace craft::policy
