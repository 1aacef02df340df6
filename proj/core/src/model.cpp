#include "lsm/model.hpp"

#include <algorithm>
#include <cmath>

namespace lsm::model {

namespace {

std::vector<double> xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(fan_in * fan_out);
  for (auto& v : w) v = rng.uniform(-limit, limit);
  return w;
}

ag::Tensor weight(std::size_t in, std::size_t out, Rng& rng) {
  return ag::Tensor::parameter({in, out}, xavier(in, out, rng));
}

// Small reconstruction head so an untrained model predicts near zero.
ag::Tensor small_weight(std::size_t in, std::size_t out, Rng& rng) {
  std::vector<double> w(in * out);
  for (auto& v : w) v = 0.02 * rng.normal();
  return ag::Tensor::parameter({in, out}, std::move(w));
}

ag::Tensor filled(std::size_t n, double v) {
  return ag::Tensor::parameter({n}, std::vector<double>(n, v));
}

Block make_block(std::size_t d, std::size_t mlp_ratio, Rng& rng) {
  Block b;
  b.ln1_g = filled(d, 1.0);
  b.ln1_b = filled(d, 0.0);
  b.w_qkv = weight(d, 3 * d, rng);
  b.b_qkv = filled(3 * d, 0.0);
  b.w_o = weight(d, d, rng);
  b.b_o = filled(d, 0.0);
  b.ln2_g = filled(d, 1.0);
  b.ln2_b = filled(d, 0.0);
  b.w_1 = weight(d, mlp_ratio * d, rng);
  b.b_1 = filled(mlp_ratio * d, 0.0);
  b.w_2 = weight(mlp_ratio * d, d, rng);
  b.b_2 = filled(d, 0.0);
  return b;
}

void register_block(std::vector<optim::NamedParam>& out, const std::string& prefix, const Block& b) {
  out.push_back({prefix + ".ln1_g", b.ln1_g, false});
  out.push_back({prefix + ".ln1_b", b.ln1_b, false});
  out.push_back({prefix + ".w_qkv", b.w_qkv, true});
  out.push_back({prefix + ".b_qkv", b.b_qkv, false});
  out.push_back({prefix + ".w_o", b.w_o, true});
  out.push_back({prefix + ".b_o", b.b_o, false});
  out.push_back({prefix + ".ln2_g", b.ln2_g, false});
  out.push_back({prefix + ".ln2_b", b.ln2_b, false});
  out.push_back({prefix + ".w_1", b.w_1, true});
  out.push_back({prefix + ".b_1", b.b_1, false});
  out.push_back({prefix + ".w_2", b.w_2, true});
  out.push_back({prefix + ".b_2", b.b_2, false});
}

ag::Tensor linear(const ag::Tensor& x, const ag::Tensor& w, const ag::Tensor& b) {
  return ag::add(ag::matmul(x, w), b);
}

}  // namespace

void ModelConfig::validate() const {
  if (enc_dim == 0 || dec_dim == 0 || enc_heads == 0 || dec_heads == 0) {
    throw InvalidArgument("model widths and head counts must be positive");
  }
  if (enc_dim % enc_heads != 0 || dec_dim % dec_heads != 0) {
    throw InvalidArgument("model width must be divisible by its head count");
  }
  if (enc_dim % 4 != 0 || dec_dim % 4 != 0) {
    throw InvalidArgument("model widths must be multiples of 4 for 2-D positional tables");
  }
  if (mlp_ratio == 0) throw InvalidArgument("mlp_ratio must be positive");
  (void)grid();
}

ModelConfig variant(std::string_view name) {
  ModelConfig c;
  c.variant = std::string(name);
  if (name == "tiny") {
    c.enc_blocks = 4, c.dec_blocks = 2, c.enc_dim = 192, c.dec_dim = 128, c.enc_heads = 3, c.dec_heads = 4;
  } else if (name == "small") {
    c.enc_blocks = 8, c.dec_blocks = 2, c.enc_dim = 256, c.dec_dim = 192, c.enc_heads = 4, c.dec_heads = 4;
  } else if (name == "base") {
    c.enc_blocks = 12, c.dec_blocks = 8, c.enc_dim = 768, c.dec_dim = 512, c.enc_heads = 12, c.dec_heads = 16;
  } else if (name == "large") {
    c.enc_blocks = 24, c.dec_blocks = 8, c.enc_dim = 1024, c.dec_dim = 512, c.enc_heads = 16, c.dec_heads = 16;
  } else {
    throw InvalidArgument("unknown model variant: " + std::string(name));
  }
  return c;
}

std::size_t block_params(std::size_t d, std::size_t mlp_ratio) {
  const std::size_t attn = d * 3 * d + 3 * d + d * d + d;
  const std::size_t mlp = d * mlp_ratio * d + mlp_ratio * d + mlp_ratio * d * d + d;
  return attn + mlp + 4 * d;  // two layer norms
}

std::size_t encoder_param_count(const ModelConfig& c) {
  const std::size_t pd = c.patch_time * c.patch_signals;
  return pd * c.enc_dim + c.enc_dim + c.enc_blocks * block_params(c.enc_dim, c.mlp_ratio) +
         2 * c.enc_dim;
}

std::size_t decoder_param_count(const ModelConfig& c) {
  const std::size_t pd = c.patch_time * c.patch_signals;
  return c.enc_dim * c.dec_dim + c.dec_dim + c.dec_dim +
         c.dec_blocks * block_params(c.dec_dim, c.mlp_ratio) + 2 * c.dec_dim + c.dec_dim * pd + pd;
}

std::size_t count_params(const ModelConfig& c) {
  return encoder_param_count(c) + decoder_param_count(c);
}

double estimate_flops(const ModelConfig& c, const masking::PatchGrid& grid, double mask_ratio) {
  const double n = static_cast<double>(grid.num_patches());
  const double masked = std::floor(mask_ratio * n + 0.5);
  const double visible = n - masked;
  ModelConfig gc = c;
  gc.patch_time = grid.patch_time;
  gc.patch_signals = grid.patch_signals;
  const double enc = 2.0 * static_cast<double>(encoder_param_count(gc)) * visible;
  const double dec = 2.0 * static_cast<double>(decoder_param_count(gc)) * n;
  // Scores q k^T and the mix p v, 2 T^2 d FLOPs each, per block.
  const double enc_attn = static_cast<double>(c.enc_blocks) * 4.0 * visible * visible * static_cast<double>(c.enc_dim);
  const double dec_attn = static_cast<double>(c.dec_blocks) * 4.0 * n * n * static_cast<double>(c.dec_dim);
  return (enc + dec + enc_attn + dec_attn) / 1e9;
}

std::vector<double> sincos_2d(std::size_t n_time, std::size_t n_signal, std::size_t dim) {
  if (dim % 4 != 0) throw InvalidArgument("sincos_2d needs dim divisible by 4");
  const std::size_t quarter = dim / 4;
  std::vector<double> out(n_time * n_signal * dim);
  for (std::size_t t = 0; t < n_time; ++t) {
    for (std::size_t s = 0; s < n_signal; ++s) {
      double* row = out.data() + (t * n_signal + s) * dim;
      for (std::size_t i = 0; i < quarter; ++i) {
        const double omega = 1.0 / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(quarter));
        row[i] = std::sin(static_cast<double>(t) * omega);
        row[quarter + i] = std::cos(static_cast<double>(t) * omega);
        row[2 * quarter + i] = std::sin(static_cast<double>(s) * omega);
        row[3 * quarter + i] = std::cos(static_cast<double>(s) * omega);
      }
    }
  }
  return out;
}

MaeModel::MaeModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  grid_ = cfg_.grid();
  const std::size_t pd = grid_.patch_dim();
  real_mask_ = masking::real_cell_mask(grid_);
  enc_pos_ = sincos_2d(grid_.n_time_patches, grid_.n_signal_patches, cfg_.enc_dim);
  dec_pos_ = sincos_2d(grid_.n_time_patches, grid_.n_signal_patches, cfg_.dec_dim);

  Rng rng(seed);
  patch_w_ = weight(pd, cfg_.enc_dim, rng);
  patch_b_ = filled(cfg_.enc_dim, 0.0);
  params_.push_back({"enc.patch_w", patch_w_, true});
  params_.push_back({"enc.patch_b", patch_b_, false});
  for (std::size_t i = 0; i < cfg_.enc_blocks; ++i) {
    enc_blocks_.push_back(make_block(cfg_.enc_dim, cfg_.mlp_ratio, rng));
    register_block(params_, "enc.block" + std::to_string(i), enc_blocks_.back());
  }
  enc_norm_g_ = filled(cfg_.enc_dim, 1.0);
  enc_norm_b_ = filled(cfg_.enc_dim, 0.0);
  params_.push_back({"enc.norm_g", enc_norm_g_, false});
  params_.push_back({"enc.norm_b", enc_norm_b_, false});
  encoder_param_end_ = params_.size();

  dec_embed_w_ = weight(cfg_.enc_dim, cfg_.dec_dim, rng);
  dec_embed_b_ = filled(cfg_.dec_dim, 0.0);
  std::vector<double> mt(cfg_.dec_dim);
  for (auto& v : mt) v = 0.02 * rng.normal();
  mask_token_ = ag::Tensor::parameter({1, cfg_.dec_dim}, mt);
  params_.push_back({"dec.embed_w", dec_embed_w_, true});
  params_.push_back({"dec.embed_b", dec_embed_b_, false});
  params_.push_back({"dec.mask_token", mask_token_, false});
  for (std::size_t i = 0; i < cfg_.dec_blocks; ++i) {
    dec_blocks_.push_back(make_block(cfg_.dec_dim, cfg_.mlp_ratio, rng));
    register_block(params_, "dec.block" + std::to_string(i), dec_blocks_.back());
  }
  dec_norm_g_ = filled(cfg_.dec_dim, 1.0);
  dec_norm_b_ = filled(cfg_.dec_dim, 0.0);
  head_w_ = small_weight(cfg_.dec_dim, pd, rng);
  head_b_ = filled(pd, 0.0);
  params_.push_back({"dec.norm_g", dec_norm_g_, false});
  params_.push_back({"dec.norm_b", dec_norm_b_, false});
  params_.push_back({"dec.head_w", head_w_, true});
  params_.push_back({"dec.head_b", head_b_, false});
}

std::vector<optim::NamedParam> MaeModel::encoder_params() const {
  return {params_.begin(), params_.begin() + static_cast<std::ptrdiff_t>(encoder_param_end_)};
}

std::size_t MaeModel::num_params() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

ag::Tensor MaeModel::run_blocks(ag::Tensor x, const std::vector<Block>& blocks, std::size_t batch,
                                std::size_t tokens, std::size_t heads) const {
  for (const auto& b : blocks) {
    auto h = ag::layer_norm(x, b.ln1_g, b.ln1_b);
    auto a = ag::attention(linear(h, b.w_qkv, b.b_qkv), batch, tokens, heads);
    x = ag::add(x, linear(a, b.w_o, b.b_o));
    h = ag::layer_norm(x, b.ln2_g, b.ln2_b);
    x = ag::add(x, linear(ag::gelu(linear(h, b.w_1, b.b_1)), b.w_2, b.b_2));
  }
  return x;
}

ag::Tensor MaeModel::encode_tokens(const ag::Tensor& patch_rows,
                                   const std::vector<std::size_t>& positions, std::size_t batch,
                                   std::size_t tokens) const {
  const std::size_t d = cfg_.enc_dim;
  std::vector<double> pos(positions.size() * d);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    std::copy_n(enc_pos_.begin() + static_cast<std::ptrdiff_t>(positions[i] * d), d,
                pos.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  auto x = ag::add(linear(patch_rows, patch_w_, patch_b_),
                   ag::Tensor::constant({positions.size(), d}, std::move(pos)));
  x = run_blocks(x, enc_blocks_, batch, tokens, cfg_.enc_heads);
  return ag::layer_norm(x, enc_norm_g_, enc_norm_b_);
}

ForwardOutput MaeModel::forward(const Batch& batch) const {
  const std::size_t n = grid_.num_patches(), pd = grid_.patch_dim(), bs = batch.size;
  if (bs == 0) throw InvalidArgument("forward: empty batch");
  if (batch.input.size() != bs * n * pd || batch.target.size() != bs * n * pd ||
      batch.masked.size() != bs * n) {
    throw InvalidArgument("forward: batch tensors do not match the model's " +
                          std::to_string(grid_.patch_time) + "x" + std::to_string(grid_.patch_signals) +
                          " patch grid");
  }
  std::size_t hidden = 0;
  for (std::size_t p = 0; p < n; ++p) hidden += batch.masked[p];
  const std::size_t visible = n - hidden;
  for (std::size_t b = 1; b < bs; ++b) {
    std::size_t h = 0;
    for (std::size_t p = 0; p < n; ++p) h += batch.masked[b * n + p];
    if (h != hidden) throw InvalidArgument("forward: samples hide different patch counts");
  }

  std::vector<double> input(batch.input.size());
  for (std::size_t i = 0; i < input.size(); ++i) input[i] = batch.input[i] * real_mask_[i % (n * pd)];

  std::vector<std::size_t> vis_rows, vis_pos, full_index(bs * n);
  vis_rows.reserve(bs * visible);
  for (std::size_t b = 0; b < bs; ++b) {
    for (std::size_t p = 0; p < n; ++p) {
      if (batch.masked[b * n + p]) {
        full_index[b * n + p] = bs * visible;  // the mask token row
      } else {
        full_index[b * n + p] = vis_rows.size();
        vis_rows.push_back(b * n + p);
        vis_pos.push_back(p);
      }
    }
  }

  const auto in = ag::Tensor::constant({bs * n, pd}, std::move(input));
  auto enc = encode_tokens(ag::gather(in, vis_rows), vis_pos, bs, visible);
  auto y = linear(enc, dec_embed_w_, dec_embed_b_);
  auto full = ag::gather(ag::concat({y, mask_token_}), full_index);
  full = ag::add(ag::reshape(full, {bs, n, cfg_.dec_dim}),
                 ag::Tensor::constant({n, cfg_.dec_dim}, dec_pos_));
  full = ag::reshape(full, {bs * n, cfg_.dec_dim});
  full = run_blocks(full, dec_blocks_, bs, n, cfg_.dec_heads);
  full = ag::layer_norm(full, dec_norm_g_, dec_norm_b_);
  auto pred = linear(full, head_w_, head_b_);

  std::vector<double> weights(bs * n * pd, 0.0);
  for (std::size_t r = 0; r < bs * n; ++r) {
    if (!batch.masked[r]) continue;
    const std::size_t p = r % n;
    for (std::size_t k = 0; k < pd; ++k) weights[r * pd + k] = real_mask_[p * pd + k];
  }
  ForwardOutput out;
  out.target = ag::Tensor::constant({bs * n, pd}, batch.target);
  out.loss = ag::mse_loss(pred, out.target, weights);
  out.reconstruction = pred;
  out.encoder_tokens = visible;
  return out;
}

ag::Tensor MaeModel::encode_all(const std::vector<double>& patches, std::size_t batch) const {
  const std::size_t n = grid_.num_patches(), pd = grid_.patch_dim();
  if (patches.size() != batch * n * pd) throw InvalidArgument("encode_all: patch tensor size mismatch");
  std::vector<double> input(patches.size());
  for (std::size_t i = 0; i < input.size(); ++i) input[i] = patches[i] * real_mask_[i % (n * pd)];
  std::vector<std::size_t> pos(batch * n);
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i % n;
  auto x = encode_tokens(ag::Tensor::constant({batch * n, pd}, std::move(input)), pos, batch, n);
  return ag::reshape(x, {batch, n, cfg_.enc_dim});
}

Embedding MaeModel::embed(const frames::SensorFrame& prepared) const {
  ag::NoGradGuard no_grad;
  const auto x = encode_all(frame_patches(prepared, grid_), 1);
  Embedding e;
  e.patches.assign(x.value().begin(), x.value().end());
  const std::size_t n = grid_.num_patches(), d = cfg_.enc_dim;
  e.pooled.assign(d, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t k = 0; k < d; ++k) e.pooled[k] += e.patches[p * d + k] / static_cast<double>(n);
  }
  return e;
}

void MaeModel::load_values(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) throw SchemaError("parameter list length mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (values[i].size() != params_[i].tensor.size()) {
      throw SchemaError("parameter " + params_[i].name + " has the wrong size");
    }
    auto dst = params_[i].tensor;
    std::copy(values[i].begin(), values[i].end(), dst.mutable_value().begin());
  }
}

std::vector<std::vector<double>> MaeModel::values() const {
  std::vector<std::vector<double>> out;
  for (const auto& p : params_) out.emplace_back(p.tensor.value().begin(), p.tensor.value().end());
  return out;
}

std::vector<double> frame_patches(const frames::SensorFrame& prepared, const masking::PatchGrid& grid) {
  return masking::patchify(prepared.values, grid);
}

// --- Augmentation -----------------------------------------------------------

std::vector<double> flip_time(std::span<const double> values, std::size_t signals, std::size_t minutes) {
  if (values.size() != signals * minutes) throw InvalidArgument("flip_time: size mismatch");
  std::vector<double> out(values.size());
  for (std::size_t s = 0; s < signals; ++s) {
    for (std::size_t m = 0; m < minutes; ++m) out[s * minutes + m] = values[s * minutes + minutes - 1 - m];
  }
  return out;
}

std::vector<double> stretch_time(std::span<const double> values, double factor, double offset,
                                 std::size_t signals, std::size_t minutes) {
  if (factor < 1.0) throw InvalidArgument("stretch factor must be >= 1");
  if (values.size() != signals * minutes) throw InvalidArgument("stretch_time: size mismatch");
  std::vector<double> out(values.size());
  const double last = static_cast<double>(minutes - 1);
  for (std::size_t m = 0; m < minutes; ++m) {
    const double src = std::clamp((static_cast<double>(m) + offset) / factor, 0.0, last);
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, minutes - 1);
    const double f = src - static_cast<double>(lo);
    for (std::size_t s = 0; s < signals; ++s) {
      const double a = values[s * minutes + lo], b = values[s * minutes + hi];
      out[s * minutes + m] = f == 0.0 ? a : a + f * (b - a);
    }
  }
  return out;
}

std::vector<double> augment(std::span<const double> values, const AugmentSpec& spec,
                            std::uint64_t seed, std::size_t signals, std::size_t minutes) {
  if (spec.stretch_max < 1.0) throw InvalidArgument("stretch_max must be >= 1");
  if (spec.noise_sigma < 0.0) throw InvalidArgument("noise_sigma must be >= 0");
  Rng rng(seed);
  std::vector<double> out(values.begin(), values.end());
  if (spec.flip_p > 0.0 && rng.bernoulli(spec.flip_p)) out = flip_time(out, signals, minutes);
  if (spec.stretch_max > 1.0) {
    const double factor = rng.uniform(1.0, spec.stretch_max);
    const double offset = rng.uniform(0.0, (factor - 1.0) * static_cast<double>(minutes));
    out = stretch_time(out, factor, offset, signals, minutes);
  }
  if (spec.noise_sigma > 0.0) {
    for (auto& v : out) v += spec.noise_sigma * rng.normal();
  }
  return out;
}

}  // namespace lsm::model
