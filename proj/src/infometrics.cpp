#include "craft/infometrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "craft/errors.hpp"

namespace craft::info {
namespace {

// Entropy from bin counts, summed in ascending count order so that any
// permutation of the bins (and of the two MI arguments) gives the same bits.
double entropy_of_counts(std::vector<std::size_t> counts, std::size_t n) {
  std::sort(counts.begin(), counts.end());
  const double total = static_cast<double>(n);
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

void HistogramSpec::validate() const {
  if (bins < 2) throw ContractViolation("histogram needs at least 2 bins");
}

std::vector<int> bin_indices(std::span<const double> x, const HistogramSpec& spec) {
  spec.validate();
  std::vector<int> out(x.size(), 0);
  if (x.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  if (*lo_it == *hi_it) return out;
  const double lo = *lo_it - kRangePad;
  const double hi = *hi_it + kRangePad;
  const double width = (hi - lo) / spec.bins;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw EstimatorError("histogram input is not finite");
    out[i] = std::clamp(static_cast<int>((x[i] - lo) / width), 0, spec.bins - 1);
  }
  return out;
}

double label_entropy(std::span<const int> labels, int bins) {
  std::vector<std::size_t> counts(bins, 0);
  for (int l : labels) ++counts.at(l);
  return entropy_of_counts(std::move(counts), labels.size());
}

double hist_entropy(std::span<const double> x, const HistogramSpec& spec) {
  if (x.size() < kMinEntropySamples) throw EstimatorError("entropy needs at least 100 samples");
  const auto labels = bin_indices(x, spec);
  return label_entropy(labels, spec.bins);
}

MiEstimate hist_mi(std::span<const double> x, std::span<const double> y, const HistogramSpec& spec) {
  if (x.size() != y.size()) throw EstimatorError("mutual information needs series of equal length");
  if (x.size() < kMinMiSamples) throw EstimatorError("mutual information needs at least 10^4 samples");
  const auto bx = bin_indices(x, spec);
  const auto by = bin_indices(y, spec);
  const auto B = static_cast<std::size_t>(spec.bins);
  std::vector<std::size_t> joint(B * B, 0);
  for (std::size_t i = 0; i < x.size(); ++i) ++joint[bx[i] * B + by[i]];
  const double hx = label_entropy(bx, spec.bins);
  const double hy = label_entropy(by, spec.bins);
  const double hxy = entropy_of_counts(std::move(joint), x.size());
  MiEstimate m;
  // Summing the marginals in sorted order keeps I(x;y) == I(y;x) exactly.
  m.raw = (std::min(hx, hy) + std::max(hx, hy)) - hxy;
  m.value = std::max(m.raw, 0.0);
  m.bins = spec.bins;
  m.samples = x.size();
  return m;
}

EntropyReport modality_report(const data::DemoSet& set, const HistogramSpec& spec) {
  if (set.episodes.size() < static_cast<std::size_t>(kMinReportEpisodes))
    throw EstimatorError("modality report needs at least 20 episodes");
  const std::size_t n = set.record_count();
  if (n < kMinMiSamples) throw EstimatorError("modality report needs at least 10^4 records");
  std::vector<std::vector<double>> pixels(world::kVisionPixels, std::vector<double>(n));
  std::vector<double> q[2], tau[2], ext[2];
  for (int j = 0; j < 2; ++j) {
    q[j].reserve(n);
    tau[j].reserve(n);
    ext[j].reserve(n);
  }
  std::size_t k = 0;
  for (const auto& ep : set.episodes)
    for (const auto& r : ep) {
      for (int i = 0; i < world::kVisionPixels; ++i) pixels[i][k] = r.vision[i];
      for (int j = 0; j < 2; ++j) {
        q[j].push_back(r.q[j]);
        tau[j].push_back(r.tau_obs[j]);
        ext[j].push_back(r.tau_ext[j]);
      }
      ++k;
    }

  EntropyReport rep;
  rep.samples = n;
  std::vector<double> pixel_h(world::kVisionPixels);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < world::kVisionPixels; ++i) pixel_h[i] = hist_entropy(pixels[i], spec);
  for (double h : pixel_h) rep.vision += h;
  bool b = true;
  for (int j = 0; j < 2; ++j) {
    rep.q += hist_entropy(q[j], spec);
    rep.tau_obs += hist_entropy(tau[j], spec);
    rep.tau_ext += hist_entropy(ext[j], spec);
    rep.mi_tau_obs[j] = hist_mi(tau[j], ext[j], spec).value;
    rep.mi_q[j] = hist_mi(q[j], ext[j], spec).value;
    b = b && rep.mi_tau_obs[j] >= rep.mi_q[j] - kMiSlack;
  }
  rep.verdict_a = rep.vision > rep.tau_obs && rep.tau_obs > rep.q;
  rep.verdict_b = b;
  return rep;
}

std::string report_csv(const EntropyReport& r, const std::string& task) {
  std::string out =
      "task,samples,h_vision,h_q,h_tau_obs,h_tau_ext,mi_tau_obs_0,mi_tau_obs_1,mi_q_0,mi_q_1,A,B\n";
  char line[512];
  std::snprintf(line, sizeof line, "%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%s,%s\n", task.c_str(), r.samples,
                r.vision, r.q, r.tau_obs, r.tau_ext, r.mi_tau_obs[0], r.mi_tau_obs[1], r.mi_q[0], r.mi_q[1],
                r.verdict_a ? "true" : "false", r.verdict_b ? "true" : "false");
  return out + line;
}

}  // namespace craft::info
