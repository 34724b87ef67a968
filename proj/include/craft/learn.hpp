#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "craft/model_io.hpp"

namespace craft::learn {

using policy::Variant;

struct TrainConfig {
  Variant variant = Variant::VibForce;
  int total_steps = 5000;
  int batch_size = 64;
  double lr = 1e-3;
  double lambda_init = 1.0;
  std::optional<double> t_decay;  // defaults to total_steps / 4
  bool constant_lambda = false;   // schedule ablation: lambda(t) = lambda_init throughout
  std::uint64_t seed = 7;
  int log_every = 50;

  vib::Schedule schedule() const;
  void validate() const;
};

/// Training samples drawn uniformly with replacement over all (episode, t).
struct Batch {
  policy::ObservationBatch obs;
  nn::Tensor target;  // B x 16 normalized chunk
  std::vector<std::pair<std::uint32_t, std::uint32_t>> index;
};

class BatchSampler {
 public:
  /// Throws DataError for an empty set and ContractViolation when `horizon`
  /// differs from the set's.
  BatchSampler(const data::DemoSet& set, int horizon, int batch_size, Variant variant, RngStream rng);
  Batch next();
  Batch make(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& index) const;

 private:
  const data::DemoSet& set_;
  int batch_size_;
  Variant variant_;
  RngStream rng_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> all_;
};

struct TrainLogEntry {
  int step = 0;
  vib::LossBreakdown loss;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  double wall_seconds = 0.0;
  std::uint64_t checksum = 0;
};

struct TrainResult {
  policy::Model model;
  TrainLog log;
};

/// Adam on l_total with lambda = lambda_at(step). Streams: (seed, "init"),
/// (seed, "batch") and (seed, "noise"), shared by all variants, so variants
/// see the same batches. Step 0 and every `log_every` steps are logged, plus
/// the final step.
TrainResult train(const TrainConfig& config, const data::DemoSet& set);

/// Replays a trained model in closed loop: one Eval-mode query per 8 ticks.
class PolicyController final : public Controller {
 public:
  explicit PolicyController(const policy::Model& model) : model_(model) {}
  void reset(const world::Scene& scene, RngStream& rng) override;
  Vec2 command(TickContext& ctx) override;
  const std::vector<int>& chunk_starts() const { return chunk_starts_; }

 private:
  const policy::Model& model_;
  policy::Chunk chunk_{};
  std::vector<int> chunk_starts_;
};

struct RolloutTrace {
  EpisodeResult episode;
  std::vector<int> chunk_starts;
};

RolloutTrace rollout(const policy::Model& model, const EpisodeSetup& setup, const world::Scene& scene,
                     const RngStream& rng);

struct EpisodeOutcome {
  bool success = false;
  bool fault = false;
  std::uint64_t digest = 0;
};

struct EvalResult {
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::vector<EpisodeOutcome> outcomes;
};

using ControllerFactory = std::function<std::unique_ptr<Controller>()>;

/// Episode i uses the stream (seed, "eval", task, regime, i) for both its
/// scene and its episode noise, so every controller meets the same scenes and
/// results do not depend on thread count.
EvalResult evaluate(const EpisodeSetup& setup, world::Regime regime, int n_episodes, std::uint64_t seed,
                    const ControllerFactory& make_controller);

EvalResult eval_success_rate(const policy::Model& model, const EpisodeSetup& setup, world::Regime regime,
                             int n_episodes, std::uint64_t seed);

struct AblationConfig {
  TrainConfig train;
  int demos = data::kDefaultEpisodes;
  int eval_episodes = 50;
  std::uint64_t data_seed = 1;
  std::uint64_t eval_seed = 2024;
  std::vector<world::TaskId> tasks{world::TaskId::Insert, world::TaskId::Wipe};
  bool ood = true;
  bool schedule_ablation = false;
  world::TaskSpec task_template;
  sim::ArmParams arm;
  sim::ImpedanceGains gains;

  void validate() const;
};

struct AblationRow {
  std::string variant;  // base | vib | craft | craft_const | craft_zero
  world::TaskId task = world::TaskId::Insert;
  world::Regime regime = world::Regime::InDist;
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::uint64_t seed = 0;
};

struct AblationTable {
  std::vector<AblationRow> rows;

  /// Mean success rate of `variant` over tasks for a regime; `any_ood`
  /// averages both out-of-distribution regimes.
  double mean_rate(const std::string& variant, world::Regime regime) const;
  double mean_ood_rate(const std::string& variant) const;
};

inline constexpr const char* kResultsHeader = "variant,task,regime,episodes,successes,success_rate,seed";
std::string format_row(const AblationRow& row);
std::string to_csv(const AblationTable& table);

using Progress = std::function<void(const std::string&)>;

/// Generates one dataset per task, trains every variant on it with the same
/// seeds, and evaluates all models on the same scene seeds.
AblationTable run_ablation(const AblationConfig& config, const Progress& progress = {});

}  // namespace craft::learn
