#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "craft/episode.hpp"

namespace craft::data {

inline constexpr int kFormatVersion = 1;
inline constexpr int kHorizon = 8;
inline constexpr double kStdFloor = 1e-6;
inline constexpr int kDefaultEpisodes = 50;

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;

  bool operator==(const ChannelStats&) const = default;
};

/// Per-channel normalization, computed over the whole dataset. `action` holds
/// the statistics of chunk offsets q_cmd[t+k] - q[t] per joint.
struct NormStats {
  ChannelStats vision;
  ChannelStats q;
  ChannelStats tau;
  ChannelStats action;

  bool operator==(const NormStats&) const = default;
};

struct DatasetHeader {
  int format_version = kFormatVersion;
  world::TaskSpec task;
  double dt_ctrl = sim::kControlDt;
  int horizon = kHorizon;
  sim::ImpedanceGains gains;
  sim::ArmParams arm;
  std::uint32_t episode_count = 0;
  std::uint64_t seed = 0;
  std::uint32_t attempts = 0;  // expert episodes run to collect the set
  NormStats stats;

  EpisodeSetup setup() const { return {task, arm, gains}; }
  bool operator==(const DatasetHeader& o) const;
};

struct DemoSet {
  DatasetHeader header;
  std::vector<std::vector<DemoRecord>> episodes;

  std::size_t record_count() const;
  bool operator==(const DemoSet&) const = default;
};

/// Target chunk for sample (episode, t): q_cmd at t..t+H-1, padded with the
/// final command past the end of the episode.
void chunk_targets(const std::vector<DemoRecord>& episode, std::size_t t, int horizon, Vec2* out);

NormStats compute_stats(const DemoSet& set);

struct GenerationReport {
  std::uint32_t attempts = 0;
  std::uint32_t successes = 0;
  std::uint32_t faults = 0;
};

/// Runs the scripted expert on in-distribution scenes and keeps the first
/// `n_episodes` successful episodes in attempt order. Attempt i uses the stream
/// (seed, "gen", task, i), so the result does not depend on thread count.
/// Throws GenerationFault when 5 n attempts do not yield n successes.
DemoSet generate_dataset(const EpisodeSetup& setup, int n_episodes, std::uint64_t seed,
                         GenerationReport* report = nullptr);

/// Torque identity: stored tau_obs equals a recomputation from the stored
/// state, target, acceleration and load torque, bit for bit.
bool torque_identity_holds(const DatasetHeader& header, const DemoRecord& r);

std::string to_ndjson(const DemoSet& set);
void write_ndjson(const DemoSet& set, const std::filesystem::path& path);

/// Throws FormatError naming the offending 1-based line.
DemoSet parse_ndjson(std::istream& in, bool verify_torque = true);
DemoSet read_ndjson(const std::filesystem::path& path, bool verify_torque = true);

}  // namespace craft::data
