#include "craft/vib.hpp"

#include <algorithm>
#include <cmath>

#include "craft/errors.hpp"
#include "craft/infometrics.hpp"
#include "craft/kernels.hpp"

namespace craft::vib {

using nn::Tensor;

VibHead make_head(std::size_t in, std::size_t latent, RngStream& rng) {
  VibHead h;
  h.mu = nn::make_linear(in, latent, rng);
  h.log_sigma = nn::make_linear(in, latent, rng);
  return h;
}

VibOutput vib_forward(const Tensor& h, const VibHead& head, Mode mode, RngStream* rng, const Tensor* forced_eps) {
  VibOutput out;
  kernels::linear_forward(h, head.mu, out.mu);
  kernels::linear_forward(h, head.log_sigma, out.raw_log_sigma);
  const std::size_t n = out.mu.size();
  out.sigma = Tensor(out.mu.shape);
  out.eps = Tensor(out.mu.shape);
  out.f_c = Tensor(out.mu.shape);
  for (std::size_t k = 0; k < n; ++k)
    out.sigma.data[k] = std::exp(std::clamp(out.raw_log_sigma.data[k], kLogSigmaMin, kLogSigmaMax));

  if (mode == Mode::Train) {
    if (forced_eps) {
      if (forced_eps->size() != n) throw ContractViolation("vib_forward: forced noise has wrong shape");
      out.eps.data = forced_eps->data;
    } else {
      if (!rng) throw ContractViolation("vib_forward: Train mode needs a random stream");
      for (double& e : out.eps.data) e = rng->normal();
    }
  }
  for (std::size_t k = 0; k < n; ++k) out.f_c.data[k] = out.mu.data[k] + out.sigma.data[k] * out.eps.data[k];
  return out;
}

double kl_divergence(std::span<const double> mu, std::span<const double> sigma) {
  if (mu.size() != sigma.size()) throw ContractViolation("kl: mu and sigma differ in length");
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw ContractViolation("kl: sigma must be positive");
    const double var = sigma[i] * sigma[i];
    acc += -std::log(var) + mu[i] * mu[i] + var - 1.0;
  }
  return 0.5 * acc;
}

double kl_loss(const Tensor& mu, const Tensor& sigma) {
  if (mu.shape != sigma.shape) throw ContractViolation("kl_loss: shape mismatch");
  const std::size_t B = mu.rows();
  double acc = 0.0;
  for (std::size_t b = 0; b < B; ++b) acc += kl_divergence(mu.row(b), sigma.row(b));
  return acc / static_cast<double>(B);
}

void kl_backward(const Tensor& mu, const Tensor& sigma, Tensor& dmu, Tensor& dsigma) {
  if (mu.shape != sigma.shape) throw ContractViolation("kl_backward: shape mismatch");
  dmu = Tensor(mu.shape);
  dsigma = Tensor(mu.shape);
  for (std::size_t k = 0; k < mu.size(); ++k) {
    dmu.data[k] = mu.data[k];
    dsigma.data[k] = sigma.data[k] - 1.0 / sigma.data[k];
  }
}

void vib_backward(const Tensor& h, const VibHead& head, const VibOutput& out, const Tensor& d_fc, double kl_weight,
                  VibHead& grad, Tensor* dh) {
  Tensor kl_dmu, kl_dsigma;
  kl_backward(out.mu, out.sigma, kl_dmu, kl_dsigma);
  Tensor dmu(out.mu.shape), draw(out.mu.shape);
  for (std::size_t k = 0; k < out.mu.size(); ++k) {
    dmu.data[k] = d_fc.data[k] + kl_weight * kl_dmu.data[k];
    const double dsigma = d_fc.data[k] * out.eps.data[k] + kl_weight * kl_dsigma.data[k];
    const double raw = out.raw_log_sigma.data[k];
    const bool inside = raw > kLogSigmaMin && raw < kLogSigmaMax;
    draw.data[k] = inside ? dsigma * out.sigma.data[k] : 0.0;
  }
  kernels::linear_backward_params(h, dmu, grad.mu);
  kernels::linear_backward_params(h, draw, grad.log_sigma);
  if (dh) {
    Tensor from_sigma;
    kernels::linear_backward_input(dmu, head.mu, *dh);
    kernels::linear_backward_input(draw, head.log_sigma, from_sigma);
    for (std::size_t k = 0; k < dh->size(); ++k) dh->data[k] += from_sigma.data[k];
  }
}

void Schedule::validate() const {
  if (!(t_decay > 0.0)) throw ContractViolation("schedule: t_decay must be positive");
  if (!(lambda_init >= 0.0)) throw ContractViolation("schedule: lambda_init must be non-negative");
}

double lambda_at(double t, const Schedule& schedule) {
  if (t < 0.0) throw ContractViolation("lambda_at: negative step");
  schedule.validate();
  return schedule.lambda_init * std::exp(-t / schedule.t_decay);
}

LossBreakdown total_loss(double l_task, double l_vib_vision, double l_vib_language, double t,
                         const Schedule& schedule) {
  if (!std::isfinite(l_task) || !std::isfinite(l_vib_vision) || !std::isfinite(l_vib_language))
    throw TrainingFault("non-finite loss component");
  LossBreakdown out;
  out.l_task = l_task;
  out.l_vib_vision = l_vib_vision;
  out.l_vib_language = l_vib_language;
  out.lambda_t = lambda_at(t, schedule);
  out.l_total = l_task + out.lambda_t * (l_vib_vision + l_vib_language);
  return out;
}

MiBoundReport mi_upper_bound_check(std::span<const double> h, std::span<const double> mu,
                                   std::span<const double> sigma, std::span<const double> f_c) {
  const std::size_t n = h.size();
  if (mu.size() != n || sigma.size() != n || f_c.size() != n)
    throw EstimatorError("mi_upper_bound_check: sample arrays differ in length");
  if (n < kMiMinSamples) throw EstimatorError("mi_upper_bound_check: need at least 10^4 samples");
  MiBoundReport rep;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += kl_divergence(mu.subspan(i, 1), sigma.subspan(i, 1));
  rep.kl_mean = acc / static_cast<double>(n);
  rep.mi_estimate = info::hist_mi(h, f_c).value;
  rep.bound_holds = rep.mi_estimate <= rep.kl_mean + kMiBoundSlack;
  return rep;
}

}  // namespace craft::vib
