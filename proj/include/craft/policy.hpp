#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "craft/dataset.hpp"
#include "craft/nn.hpp"
#include "craft/vib.hpp"

namespace craft::policy {

enum class Variant { Base, VibOnly, VibForce };

// base | vib | craft
std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view s);

inline constexpr std::size_t kVisionEmbed = 32;
inline constexpr std::size_t kLanguageTokens = 2;
inline constexpr std::size_t kLanguageEmbed = 8;
inline constexpr std::size_t kProprioDim = 2;
inline constexpr std::size_t kProprioEmbed = 16;
inline constexpr std::size_t kVisionLatent = 16;
inline constexpr std::size_t kLanguageLatent = 4;
inline constexpr std::size_t kHidden = 64;
inline constexpr std::size_t kChunkDim = data::kHorizon * 2;

inline constexpr std::size_t kBaseParamCount = 19184;
inline constexpr std::size_t kVibParamCount = 19032;

bool uses_vib(Variant v);
// Trunk input width: 36 with the bottleneck, 56 without.
std::size_t trunk_input(Variant v);

struct PolicyParams {
  Variant variant = Variant::Base;
  nn::Linear vision_enc;
  nn::Embedding language;
  nn::Linear proprio_enc;
  vib::VibHead vib_vision;  // empty for Base
  vib::VibHead vib_language;
  nn::Linear trunk0;
  nn::Linear trunk1;
  nn::Linear trunk2;

  /// Named parameter list in a fixed order (used by Adam and serialization).
  std::vector<nn::ParamRef> refs();
  std::size_t parameter_count() const;
};

PolicyParams init_params(Variant variant, RngStream& rng);
PolicyParams zeros_like(const PolicyParams& p);

/// Normalized inputs for a batch. `q` is the raw joint position each chunk is
/// expressed relative to; `proprio` is normalized q (Base, VibOnly) or
/// normalized tau_obs (VibForce).
struct ObservationBatch {
  nn::Tensor vision;
  std::vector<std::uint8_t> lang;
  nn::Tensor proprio;
  nn::Tensor q;

  explicit ObservationBatch(std::size_t batch = 0);
  std::size_t size() const { return lang.size(); }

  void set(std::size_t row, std::span<const std::uint8_t> pixels, std::uint8_t lang_id, const Vec2& joint_q,
           const Vec2& tau_obs, const data::NormStats& stats, Variant variant);
  void set(std::size_t row, const DemoRecord& r, const data::NormStats& stats, Variant variant) {
    set(row, r.vision, r.lang_id, r.q, r.tau_obs, stats, variant);
  }
};

struct Embeddings {
  nn::Tensor f_v;  // B x 32
  nn::Tensor f_l;  // B x 8
  nn::Tensor f_p;  // B x 16
};

Embeddings encode(const ObservationBatch& obs, const PolicyParams& params);

struct ForwardCache {
  Embeddings emb;
  vib::VibOutput vision;
  vib::VibOutput language;
  nn::Tensor z;
  nn::Tensor a0;
  nn::Tensor a1;
};

struct PolicyOutput {
  nn::Tensor y;  // B x 16 normalized chunk offsets
  double kl_vision = 0.0;
  double kl_language = 0.0;
  ForwardCache cache;
};

/// Train mode draws the bottleneck noise from `rng` (required for VIB
/// variants); Eval uses the posterior mean.
PolicyOutput policy_forward(const ObservationBatch& obs, const PolicyParams& params, vib::Mode mode,
                            RngStream* rng);

using Chunk = std::array<Vec2, data::kHorizon>;

/// Absolute joint targets for batch row `row`: q + mean + std * y.
Chunk to_chunk(const nn::Tensor& y, std::size_t row, const Vec2& q, const data::NormStats& stats);
/// Inverse of to_chunk for training targets.
void normalize_chunk(const Chunk& chunk, const Vec2& q, const data::NormStats& stats, std::span<double> out);

struct Gradients {
  PolicyParams grads;
  vib::LossBreakdown loss;
};

/// Gradients of l_total = MSE(y, target) + lambda(t) (KL_v + KL_l) with the
/// noise drawn from `rng` held fixed. Throws TrainingFault on a non-finite
/// loss.
Gradients policy_backward(const ObservationBatch& obs, const PolicyParams& params, const nn::Tensor& target,
                          double t, const vib::Schedule& schedule, RngStream* rng);

}  // namespace craft::policy
