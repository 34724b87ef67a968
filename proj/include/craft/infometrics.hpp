#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "craft/dataset.hpp"

namespace craft::info {

inline constexpr int kDefaultBins = 16;
inline constexpr std::size_t kMinEntropySamples = 100;
inline constexpr std::size_t kMinMiSamples = 10000;
inline constexpr int kMinReportEpisodes = 20;
inline constexpr double kRangePad = 1e-9;
inline constexpr double kMiSlack = 0.02;

/// Bins per dimension; the range is the sample min/max widened by 1e-9.
struct HistogramSpec {
  int bins = kDefaultBins;
  void validate() const;
};

/// Bin index of every sample (all zero for a constant series).
std::vector<int> bin_indices(std::span<const double> x, const HistogramSpec& spec = {});

/// Plug-in Shannon entropy (nats) of the binned samples.
/// Throws EstimatorError below 100 samples.
double hist_entropy(std::span<const double> x, const HistogramSpec& spec = {});
// Entropy of pre-binned labels.
double label_entropy(std::span<const int> labels, int bins);

struct MiEstimate {
  double value = 0.0;  // floored at 0
  double raw = 0.0;    // before flooring
  int bins = kDefaultBins;
  std::size_t samples = 0;
};

/// H(x) + H(y) - H(x, y) on a shared bins x bins grid. Symmetric bit for bit.
/// Throws EstimatorError on a length mismatch or fewer than 10^4 samples.
MiEstimate hist_mi(std::span<const double> x, std::span<const double> y, const HistogramSpec& spec = {});

struct EntropyReport {
  double vision = 0.0;   // sum over the 320 pixels
  double q = 0.0;        // sum over both joints
  double tau_obs = 0.0;
  double tau_ext = 0.0;
  double mi_tau_obs[2] = {0.0, 0.0};  // I(tau_obs_i; tau_ext_i)
  double mi_q[2] = {0.0, 0.0};        // I(q_i; tau_ext_i)
  std::size_t samples = 0;
  bool verdict_a = false;  // H(vision) > H(tau_obs) > H(q)
  bool verdict_b = false;  // I(tau_obs_i; tau_ext_i) >= I(q_i; tau_ext_i) - 0.02 for both joints
};

/// Throws EstimatorError for fewer than 20 episodes.
EntropyReport modality_report(const data::DemoSet& set, const HistogramSpec& spec = {});

std::string report_csv(const EntropyReport& r, const std::string& task);

}  // namespace craft::info
