#include "craft/learn.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>

#include <omp.h>

#include "craft/errors.hpp"

namespace craft::learn {

using policy::Model;
using world::Regime;
using world::TaskId;

vib::Schedule TrainConfig::schedule() const {
  return {lambda_init, t_decay.value_or(static_cast<double>(total_steps) / 4.0)};
}

void TrainConfig::validate() const {
  if (total_steps <= 0) throw ContractViolation("total_steps must be positive");
  if (batch_size <= 0) throw ContractViolation("batch_size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ContractViolation("lr must be positive");
  if (log_every <= 0) throw ContractViolation("log_every must be positive");
  schedule().validate();
}

BatchSampler::BatchSampler(const data::DemoSet& set, int horizon, int batch_size, Variant variant, RngStream rng)
    : set_(set), batch_size_(batch_size), variant_(variant), rng_(rng) {
  if (horizon != set.header.horizon) throw ContractViolation("batch horizon does not match the dataset header");
  if (batch_size <= 0) throw ContractViolation("batch_size must be positive");
  for (std::uint32_t e = 0; e < set.episodes.size(); ++e)
    for (std::uint32_t t = 0; t < set.episodes[e].size(); ++t) all_.emplace_back(e, t);
  if (all_.empty()) throw DataError("cannot sample batches from an empty dataset");
}

Batch BatchSampler::next() {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> index(batch_size_);
  for (auto& i : index) i = all_[rng_.below(all_.size())];
  return make(index);
}

Batch BatchSampler::make(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& index) const {
  Batch b{policy::ObservationBatch(index.size()), nn::Tensor({index.size(), policy::kChunkDim}), index};
  policy::Chunk chunk;
  for (std::size_t row = 0; row < index.size(); ++row) {
    const auto& ep = set_.episodes.at(index[row].first);
    const DemoRecord& r = ep.at(index[row].second);
    b.obs.set(row, r, set_.header.stats, variant_);
    data::chunk_targets(ep, index[row].second, data::kHorizon, chunk.data());
    policy::normalize_chunk(chunk, r.q, set_.header.stats, b.target.row(row));
  }
  return b;
}

TrainResult train(const TrainConfig& config, const data::DemoSet& set) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const RngStream root(config.seed);
  RngStream init_rng = root.derive("init");
  RngStream noise_rng = root.derive("noise");

  TrainResult out;
  Model& m = out.model;
  m.params = policy::init_params(config.variant, init_rng);
  m.schedule = config.schedule();
  m.stats = set.header.stats;
  m.task = set.header.task.task;
  m.seed = config.seed;

  BatchSampler sampler(set, data::kHorizon, config.batch_size, config.variant, root.derive("batch"));
  auto params = m.params.refs();
  nn::AdamState adam = nn::make_adam(params, config.lr);

  for (int step = 0; step < config.total_steps; ++step) {
    const Batch batch = sampler.next();
    const double t = config.constant_lambda ? 0.0 : static_cast<double>(step);
    policy::Gradients g = policy::policy_backward(batch.obs, m.params, batch.target, t, m.schedule, &noise_rng);
    if (step % config.log_every == 0 || step == config.total_steps - 1) out.log.entries.push_back({step, g.loss});
    auto grads = g.grads.refs();
    nn::adam_step(params, grads, adam);
  }
  out.log.checksum = nn::checksum(params);
  out.log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void PolicyController::reset(const world::Scene&, RngStream&) { chunk_starts_.clear(); }

Vec2 PolicyController::command(TickContext& ctx) {
  const int k = ctx.tick() % data::kHorizon;
  if (k == 0) {
    const SensorSnapshot& s = ctx.sensor();
    policy::ObservationBatch obs(1);
    obs.set(0, ctx.vision(), static_cast<std::uint8_t>(ctx.scene().task), s.state.q, s.torque.tau_obs, model_.stats,
            model_.params.variant);
    const policy::PolicyOutput out = policy::policy_forward(obs, model_.params, vib::Mode::Eval, nullptr);
    chunk_ = policy::to_chunk(out.y, 0, s.state.q, model_.stats);
    chunk_starts_.push_back(ctx.tick());
  }
  return chunk_[k];
}

RolloutTrace rollout(const Model& model, const EpisodeSetup& setup, const world::Scene& scene,
                     const RngStream& rng) {
  PolicyController controller(model);
  RolloutTrace out;
  out.episode = run_episode(setup, scene, controller, rng, false);
  out.chunk_starts = controller.chunk_starts();
  return out;
}

EvalResult evaluate(const EpisodeSetup& setup, Regime regime, int n_episodes, std::uint64_t seed,
                    const ControllerFactory& make_controller) {
  if (n_episodes < 1) throw ContractViolation("evaluation needs at least one episode");
  const RngStream root =
      RngStream(seed).derive("eval").derive(world::to_string(setup.task.task)).derive(world::to_string(regime));
  EvalResult out;
  out.episodes = n_episodes;
  out.outcomes.resize(n_episodes);

  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_episodes; ++i) {
    try {
      const RngStream ep = root.derive(static_cast<std::uint64_t>(i));
      RngStream scene_rng = ep.derive("scene");
      const world::Scene scene = world::sample_scene(setup.task, regime, scene_rng);
      auto controller = make_controller();
      const EpisodeResult r = run_episode(setup, scene, *controller, ep.derive("episode"), false);
      out.outcomes[i] = {r.report.success && !r.fault, r.fault, r.digest};
    } catch (...) {
#pragma omp critical(craft_eval_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  for (const auto& o : out.outcomes) out.successes += o.success ? 1 : 0;
  out.success_rate = static_cast<double>(out.successes) / static_cast<double>(n_episodes);
  return out;
}

EvalResult eval_success_rate(const Model& model, const EpisodeSetup& setup, Regime regime, int n_episodes,
                             std::uint64_t seed) {
  return evaluate(setup, regime, n_episodes, seed,
                  [&model] { return std::make_unique<PolicyController>(model); });
}

void AblationConfig::validate() const {
  train.validate();
  if (demos <= 0) throw ContractViolation("demos must be positive");
  if (eval_episodes <= 0) throw ContractViolation("eval_episodes must be positive");
  if (tasks.empty()) throw ContractViolation("ablation needs at least one task");
  task_template.validate();
  arm.validate();
  gains.validate();
}

double AblationTable::mean_rate(const std::string& variant, Regime regime) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rows)
    if (r.variant == variant && r.regime == regime) {
      sum += r.success_rate;
      ++n;
    }
  if (n == 0) throw ContractViolation("no ablation rows for variant " + variant);
  return sum / n;
}

double AblationTable::mean_ood_rate(const std::string& variant) const {
  return 0.5 * (mean_rate(variant, Regime::OODObject) + mean_rate(variant, Regime::OODTask));
}

std::string format_row(const AblationRow& r) {
  char rate[32];
  std::snprintf(rate, sizeof rate, "%.6f", r.success_rate);
  return r.variant + "," + std::string(world::to_string(r.task)) + "," + std::string(world::to_string(r.regime)) +
         "," + std::to_string(r.episodes) + "," + std::to_string(r.successes) + "," + rate + "," +
         std::to_string(r.seed);
}

std::string to_csv(const AblationTable& table) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const auto& r : table.rows) out += format_row(r) + "\n";
  return out;
}

AblationTable run_ablation(const AblationConfig& config, const Progress& progress) {
  config.validate();
  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };

  struct Job {
    std::string label;
    TrainConfig train;
  };
  std::vector<Job> jobs;
  for (Variant v : {Variant::Base, Variant::VibOnly, Variant::VibForce}) {
    TrainConfig c = config.train;
    c.variant = v;
    jobs.push_back({std::string(policy::to_string(v)), c});
  }
  if (config.schedule_ablation) {
    TrainConfig c = config.train;
    c.variant = Variant::VibForce;
    c.constant_lambda = true;
    jobs.push_back({"craft_const", c});
    c.constant_lambda = false;
    c.lambda_init = 0.0;
    jobs.push_back({"craft_zero", c});
  }

  std::vector<Regime> regimes{Regime::InDist};
  if (config.ood) {
    regimes.push_back(Regime::OODObject);
    regimes.push_back(Regime::OODTask);
  }

  AblationTable table;
  for (TaskId task : config.tasks) {
    EpisodeSetup setup{config.task_template, config.arm, config.gains};
    setup.task.task = task;
    say("generating " + std::string(world::to_string(task)) + " demonstrations");
    const data::DemoSet set = data::generate_dataset(setup, config.demos, config.data_seed);

    std::vector<Model> models(jobs.size());
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      try {
        models[j] = train(jobs[j].train, set).model;
      } catch (...) {
#pragma omp critical(craft_train_error)
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
    say("trained " + std::to_string(jobs.size()) + " models on " + std::string(world::to_string(task)));

    for (std::size_t j = 0; j < jobs.size(); ++j)
      for (Regime regime : regimes) {
        const EvalResult r = eval_success_rate(models[j], setup, regime, config.eval_episodes, config.eval_seed);
        table.rows.push_back(
            {jobs[j].label, task, regime, r.episodes, r.successes, r.success_rate, config.eval_seed});
        say(format_row(table.rows.back()));
      }
  }
  return table;
}

}  // namespace craft::learn
