#pragma once

// Variational information bottleneck on perceptual embeddings, trained with a
// KL penalty towards a fixed N(0, I) prior whose weight decays exponentially.

#include <span>

#include "craft/nn.hpp"
#include "craft/rng.hpp"

namespace craft::vib {

inline constexpr double kLogSigmaMin = -6.0;
inline constexpr double kLogSigmaMax = 4.0;

/// Separate linear heads for the posterior mean and log standard deviation.
struct VibHead {
  nn::Linear mu;
  nn::Linear log_sigma;

  std::size_t in() const { return mu.in(); }
  std::size_t latent() const { return mu.out(); }
};

VibHead make_head(std::size_t in, std::size_t latent, RngStream& rng);

enum class Mode { Train, Eval };

/// Batched latent triple (rows = batch items).
struct VibOutput {
  nn::Tensor f_c;
  nn::Tensor mu;
  nn::Tensor sigma;
  nn::Tensor eps;
  nn::Tensor raw_log_sigma;  // pre-clamp head output
};

/// Train: f_c = mu + sigma * eps, eps ~ N(0, I) drawn from `rng` row by row.
/// Eval: f_c = mu, eps = 0. `forced_eps`, when given, replaces the draw
/// (used to freeze the noise for gradient checks).
VibOutput vib_forward(const nn::Tensor& h, const VibHead& head, Mode mode, RngStream* rng,
                      const nn::Tensor* forced_eps = nullptr);

/// 1/2 sum_i (-log sigma_i^2 + mu_i^2 + sigma_i^2 - 1) for one sample.
double kl_divergence(std::span<const double> mu, std::span<const double> sigma);
/// Batch mean of the per-sample KL.
double kl_loss(const nn::Tensor& mu, const nn::Tensor& sigma);

/// Elementwise dKL/dmu = mu and dKL/dsigma = sigma - 1/sigma (per sample, no
/// batch scaling).
void kl_backward(const nn::Tensor& mu, const nn::Tensor& sigma, nn::Tensor& dmu, nn::Tensor& dsigma);

/// Backpropagates through the head. `d_fc` is dL/df_c; the KL enters with
/// weight `kl_weight` per sample (lambda / batch for a batch-mean loss).
/// Accumulates into `grad` and writes dL/dh into `dh` when non-null.
void vib_backward(const nn::Tensor& h, const VibHead& head, const VibOutput& out, const nn::Tensor& d_fc,
                  double kl_weight, VibHead& grad, nn::Tensor* dh);

struct Schedule {
  double lambda_init = 1.0;
  double t_decay = 1250.0;  // optimizer steps

  void validate() const;
};

/// lambda(t) = lambda_init * exp(-t / t_decay); throws ContractViolation for t < 0.
double lambda_at(double t, const Schedule& schedule);

struct LossBreakdown {
  double l_task = 0.0;
  double l_vib_vision = 0.0;
  double l_vib_language = 0.0;
  double lambda_t = 0.0;
  double l_total = 0.0;
};

/// l_total = l_task + lambda(t) (l_vib_vision + l_vib_language).
LossBreakdown total_loss(double l_task, double l_vib_vision, double l_vib_language, double t,
                         const Schedule& schedule);

struct MiBoundReport {
  double kl_mean = 0.0;
  double mi_estimate = 0.0;
  bool bound_holds = false;
};

inline constexpr double kMiBoundSlack = 0.05;
inline constexpr std::size_t kMiMinSamples = 10000;

/// Checks the variational bound I(h; f_c) <= E[KL] on a one-dimensional latent:
/// the KL mean is the closed form, the MI a 16x16 histogram estimate.
/// Throws EstimatorError below 10^4 samples.
MiBoundReport mi_upper_bound_check(std::span<const double> h, std::span<const double> mu,
                                   std::span<const double> sigma, std::span<const double> f_c);

}  // namespace craft::vib
