#include "craft/policy.hpp"

#include <cmath>

#include "craft/errors.hpp"
#include "craft/kernels.hpp"

namespace craft::policy {

using nn::Tensor;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Base: return "base";
    case Variant::VibOnly: return "vib";
    case Variant::VibForce: return "craft";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "base") return Variant::Base;
  if (s == "vib") return Variant::VibOnly;
  if (s == "craft") return Variant::VibForce;
  return std::nullopt;
}

bool uses_vib(Variant v) { return v != Variant::Base; }

std::size_t trunk_input(Variant v) {
  return uses_vib(v) ? kVisionLatent + kLanguageLatent + kProprioEmbed : kVisionEmbed + kLanguageEmbed + kProprioEmbed;
}

namespace {

void add_linear(std::vector<nn::ParamRef>& out, const std::string& name, nn::Linear& l) {
  out.push_back({name + ".weight", &l.weight});
  out.push_back({name + ".bias", &l.bias});
}

nn::Linear zero_linear(const nn::Linear& l) { return {Tensor(l.weight.shape), Tensor(l.bias.shape)}; }

vib::VibHead zero_head(const vib::VibHead& h) {
  if (h.mu.weight.size() == 0) return {};
  return {zero_linear(h.mu), zero_linear(h.log_sigma)};
}

// Copies columns [offset, offset + src.cols()) of each row.
void put_columns(Tensor& dst, const Tensor& src, std::size_t offset) {
  for (std::size_t b = 0; b < src.rows(); ++b)
    for (std::size_t c = 0; c < src.cols(); ++c) dst(b, offset + c) = src(b, c);
}

Tensor take_columns(const Tensor& src, std::size_t offset, std::size_t width) {
  Tensor out({src.rows(), width});
  for (std::size_t b = 0; b < src.rows(); ++b)
    for (std::size_t c = 0; c < width; ++c) out(b, c) = src(b, offset + c);
  return out;
}

}  // namespace

std::vector<nn::ParamRef> PolicyParams::refs() {
  std::vector<nn::ParamRef> out;
  add_linear(out, "vision_enc", vision_enc);
  out.push_back({"language.table", &language.table});
  add_linear(out, "proprio_enc", proprio_enc);
  if (uses_vib(variant)) {
    add_linear(out, "vib_vision.mu", vib_vision.mu);
    add_linear(out, "vib_vision.log_sigma", vib_vision.log_sigma);
    add_linear(out, "vib_language.mu", vib_language.mu);
    add_linear(out, "vib_language.log_sigma", vib_language.log_sigma);
  }
  add_linear(out, "trunk0", trunk0);
  add_linear(out, "trunk1", trunk1);
  add_linear(out, "trunk2", trunk2);
  return out;
}

std::size_t PolicyParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& r : const_cast<PolicyParams*>(this)->refs()) n += r.value->size();
  return n;
}

PolicyParams init_params(Variant variant, RngStream& rng) {
  PolicyParams p;
  p.variant = variant;
  p.vision_enc = nn::make_linear(world::kVisionPixels, kVisionEmbed, rng);
  p.language = nn::make_embedding(kLanguageTokens, kLanguageEmbed, rng);
  p.proprio_enc = nn::make_linear(kProprioDim, kProprioEmbed, rng);
  if (uses_vib(variant)) {
    p.vib_vision = vib::make_head(kVisionEmbed, kVisionLatent, rng);
    p.vib_language = vib::make_head(kLanguageEmbed, kLanguageLatent, rng);
  }
  p.trunk0 = nn::make_linear(trunk_input(variant), kHidden, rng);
  p.trunk1 = nn::make_linear(kHidden, kHidden, rng);
  p.trunk2 = nn::make_linear(kHidden, kChunkDim, rng);
  return p;
}

PolicyParams zeros_like(const PolicyParams& p) {
  PolicyParams z;
  z.variant = p.variant;
  z.vision_enc = zero_linear(p.vision_enc);
  z.language.table = Tensor(p.language.table.shape);
  z.proprio_enc = zero_linear(p.proprio_enc);
  z.vib_vision = zero_head(p.vib_vision);
  z.vib_language = zero_head(p.vib_language);
  z.trunk0 = zero_linear(p.trunk0);
  z.trunk1 = zero_linear(p.trunk1);
  z.trunk2 = zero_linear(p.trunk2);
  return z;
}

ObservationBatch::ObservationBatch(std::size_t batch)
    : vision({batch, world::kVisionPixels}), lang(batch, 0), proprio({batch, kProprioDim}), q({batch, 2}) {}

void ObservationBatch::set(std::size_t row, std::span<const std::uint8_t> pixels, std::uint8_t lang_id,
                           const Vec2& joint_q, const Vec2& tau_obs, const data::NormStats& stats,
                           Variant variant) {
  if (row >= size()) throw ContractViolation("observation row out of range");
  if (pixels.size() != world::kVisionPixels) throw ContractViolation("observation needs 320 pixels");
  if (lang_id >= kLanguageTokens) throw ContractViolation("lang_id out of range");
  auto v = vision.row(row);
  for (std::size_t i = 0; i < pixels.size(); ++i)
    v[i] = (pixels[i] / 255.0 - stats.vision.mean[i]) / stats.vision.std[i];
  lang[row] = lang_id;
  const bool force = variant == Variant::VibForce;
  const data::ChannelStats& ps = force ? stats.tau : stats.q;
  const Vec2& raw = force ? tau_obs : joint_q;
  for (int j = 0; j < 2; ++j) {
    proprio(row, j) = (raw[j] - ps.mean[j]) / ps.std[j];
    q(row, j) = joint_q[j];
  }
}

Embeddings encode(const ObservationBatch& obs, const PolicyParams& params) {
  Embeddings e;
  kernels::linear_forward(obs.vision, params.vision_enc, e.f_v);
  kernels::tanh_inplace(e.f_v);
  e.f_l = Tensor({obs.size(), kLanguageEmbed});
  for (std::size_t b = 0; b < obs.size(); ++b) {
    const auto src = params.language.table.row(obs.lang[b]);
    std::copy(src.begin(), src.end(), e.f_l.row(b).begin());
  }
  kernels::linear_forward(obs.proprio, params.proprio_enc, e.f_p);
  kernels::tanh_inplace(e.f_p);
  return e;
}

PolicyOutput policy_forward(const ObservationBatch& obs, const PolicyParams& params, vib::Mode mode,
                            RngStream* rng) {
  PolicyOutput out;
  ForwardCache& c = out.cache;
  c.emb = encode(obs, params);
  const std::size_t B = obs.size();
  c.z = Tensor({B, trunk_input(params.variant)});
  if (uses_vib(params.variant)) {
    if (mode == vib::Mode::Train && !rng) throw ContractViolation("policy_forward: Train mode needs a stream");
    c.vision = vib::vib_forward(c.emb.f_v, params.vib_vision, mode, rng);
    c.language = vib::vib_forward(c.emb.f_l, params.vib_language, mode, rng);
    out.kl_vision = vib::kl_loss(c.vision.mu, c.vision.sigma);
    out.kl_language = vib::kl_loss(c.language.mu, c.language.sigma);
    put_columns(c.z, c.vision.f_c, 0);
    put_columns(c.z, c.language.f_c, kVisionLatent);
    put_columns(c.z, c.emb.f_p, kVisionLatent + kLanguageLatent);
  } else {
    put_columns(c.z, c.emb.f_v, 0);
    put_columns(c.z, c.emb.f_l, kVisionEmbed);
    put_columns(c.z, c.emb.f_p, kVisionEmbed + kLanguageEmbed);
  }
  kernels::linear_forward(c.z, params.trunk0, c.a0);
  kernels::tanh_inplace(c.a0);
  kernels::linear_forward(c.a0, params.trunk1, c.a1);
  kernels::tanh_inplace(c.a1);
  kernels::linear_forward(c.a1, params.trunk2, out.y);
  return out;
}

Chunk to_chunk(const Tensor& y, std::size_t row, const Vec2& q, const data::NormStats& stats) {
  Chunk chunk;
  for (int k = 0; k < data::kHorizon; ++k)
    for (int j = 0; j < 2; ++j)
      chunk[k][j] = q[j] + stats.action.mean[j] + stats.action.std[j] * y(row, 2 * k + j);
  return chunk;
}

void normalize_chunk(const Chunk& chunk, const Vec2& q, const data::NormStats& stats, std::span<double> out) {
  if (out.size() != kChunkDim) throw ContractViolation("normalize_chunk: output must hold 16 values");
  for (int k = 0; k < data::kHorizon; ++k)
    for (int j = 0; j < 2; ++j)
      out[2 * k + j] = (chunk[k][j] - q[j] - stats.action.mean[j]) / stats.action.std[j];
}

Gradients policy_backward(const ObservationBatch& obs, const PolicyParams& params, const Tensor& target, double t,
                          const vib::Schedule& schedule, RngStream* rng) {
  const std::size_t B = obs.size();
  if (target.rows() != B || target.cols() != kChunkDim) throw ContractViolation("policy_backward: bad target shape");
  const PolicyOutput out = policy_forward(obs, params, vib::Mode::Train, rng);
  const ForwardCache& c = out.cache;

  double sq = 0.0;
  Tensor dy(out.y.shape);
  const double scale = 2.0 / static_cast<double>(out.y.size());
  for (std::size_t k = 0; k < out.y.size(); ++k) {
    const double d = out.y.data[k] - target.data[k];
    sq += d * d;
    dy.data[k] = scale * d;
  }
  Gradients g{zeros_like(params), {}};
  g.loss = vib::total_loss(sq / static_cast<double>(out.y.size()), out.kl_vision, out.kl_language, t, schedule);
  PolicyParams& gp = g.grads;

  Tensor da1, da0, dz;
  kernels::linear_backward_params(c.a1, dy, gp.trunk2);
  kernels::linear_backward_input(dy, params.trunk2, da1);
  kernels::tanh_backward_inplace(c.a1, da1);
  kernels::linear_backward_params(c.a0, da1, gp.trunk1);
  kernels::linear_backward_input(da1, params.trunk1, da0);
  kernels::tanh_backward_inplace(c.a0, da0);
  kernels::linear_backward_params(c.z, da0, gp.trunk0);
  kernels::linear_backward_input(da0, params.trunk0, dz);

  Tensor df_v, df_l, df_p;
  if (uses_vib(params.variant)) {
    const double kl_weight = g.loss.lambda_t / static_cast<double>(B);
    vib::vib_backward(c.emb.f_v, params.vib_vision, c.vision, take_columns(dz, 0, kVisionLatent), kl_weight,
                      gp.vib_vision, &df_v);
    vib::vib_backward(c.emb.f_l, params.vib_language, c.language, take_columns(dz, kVisionLatent, kLanguageLatent),
                      kl_weight, gp.vib_language, &df_l);
    df_p = take_columns(dz, kVisionLatent + kLanguageLatent, kProprioEmbed);
  } else {
    df_v = take_columns(dz, 0, kVisionEmbed);
    df_l = take_columns(dz, kVisionEmbed, kLanguageEmbed);
    df_p = take_columns(dz, kVisionEmbed + kLanguageEmbed, kProprioEmbed);
  }

  kernels::tanh_backward_inplace(c.emb.f_v, df_v);
  kernels::linear_backward_params(obs.vision, df_v, gp.vision_enc);
  for (std::size_t b = 0; b < B; ++b) {
    auto dst = gp.language.table.row(obs.lang[b]);
    const auto src = df_l.row(b);
    for (std::size_t i = 0; i < kLanguageEmbed; ++i) dst[i] += src[i];
  }
  kernels::tanh_backward_inplace(c.emb.f_p, df_p);
  kernels::linear_backward_params(obs.proprio, df_p, gp.proprio_enc);
  return g;
}

}  // namespace craft::policy
