#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "duolens/bundle.hpp"
#include "duolens/errors.hpp"
#include "duolens/tensor.hpp"
#include "duolens/tokenizer.hpp"

namespace duolens {

enum class Pooling { Cls, Mean };

inline std::string to_string(Pooling p) { return p == Pooling::Cls ? "cls" : "mean"; }

inline Pooling parse_pooling(std::string_view s) {
  if (s == "cls") return Pooling::Cls;
  if (s == "mean") return Pooling::Mean;
  throw DataError("unknown pooling mode '" + std::string(s) + "' (expected cls or mean)");
}

struct EncoderConfig {
  std::uint32_t vocab_size = 1000;
  std::uint32_t hidden = 64;
  std::uint32_t layers = 2;
  std::uint32_t heads = 4;
  std::uint32_t ffn = 256;
  std::uint32_t max_positions = 512;
  float layer_norm_eps = 1e-5f;
  std::uint32_t position_offset = 0;
  Pooling pooling = Pooling::Mean;

  // Desk-scale preset used for tests and the synthetic workflows.
  static EncoderConfig tiny() { return EncoderConfig{}; }

  void validate() const {
    if (hidden == 0 || heads == 0 || layers == 0 || ffn == 0 || vocab_size == 0 || max_positions == 0) {
      throw DataError("encoder config dimensions must be positive");
    }
    if (hidden % heads != 0) {
      throw DataError("encoder hidden size " + std::to_string(hidden) + " is not divisible by " +
                      std::to_string(heads) + " heads");
    }
    if (position_offset != 0 && position_offset != 2) throw DataError("position_offset must be 0 or 2");
    if (!(layer_norm_eps > 0.0f)) throw DataError("layer_norm_eps must be positive");
  }

  void write_metadata(std::map<std::string, std::string>& m) const {
    m["kind"] = "encoder";
    m["vocab_size"] = std::to_string(vocab_size);
    m["hidden"] = std::to_string(hidden);
    m["layers"] = std::to_string(layers);
    m["heads"] = std::to_string(heads);
    m["ffn"] = std::to_string(ffn);
    m["max_positions"] = std::to_string(max_positions);
    char eps[32];
    std::snprintf(eps, sizeof eps, "%.9g", static_cast<double>(layer_norm_eps));
    m["layer_norm_eps"] = eps;
    m["position_offset"] = std::to_string(position_offset);
    m["pooling"] = to_string(pooling);
  }

  static EncoderConfig from_metadata(const TensorBundle& b) {
    auto u32 = [&](const char* key) {
      const std::string v = b.require_meta(key);
      try {
        return static_cast<std::uint32_t>(std::stoul(v));
      } catch (const std::exception&) {
        throw BundleError(std::string("bundle metadata '") + key + "' is not an integer: " + v);
      }
    };
    EncoderConfig c;
    c.vocab_size = u32("vocab_size");
    c.hidden = u32("hidden");
    c.layers = u32("layers");
    c.heads = u32("heads");
    c.ffn = u32("ffn");
    c.max_positions = u32("max_positions");
    c.position_offset = u32("position_offset");
    try {
      c.layer_norm_eps = std::stof(b.require_meta("layer_norm_eps"));
    } catch (const std::invalid_argument&) {
      throw BundleError("bundle metadata 'layer_norm_eps' is not a number");
    }
    c.pooling = parse_pooling(b.meta("pooling").value_or("mean"));
    c.validate();
    return c;
  }
};

// Canonical parameter names and shapes. Weight matrices are [out x in].
// `embed.pos` carries max_positions + position_offset rows; `embed.type` may
// have any number of rows (only row 0 is read).
inline std::vector<std::pair<std::string, Tensor::Shape>> canonical_parameters(const EncoderConfig& c,
                                                                               std::size_t type_rows = 1) {
  const std::size_t d = c.hidden, f = c.ffn;
  std::vector<std::pair<std::string, Tensor::Shape>> p{
      {"embed.word", {c.vocab_size, d}},
      {"embed.pos", {static_cast<std::size_t>(c.max_positions) + c.position_offset, d}},
      {"embed.type", {type_rows, d}},
      {"embed.ln.gamma", {d}},
      {"embed.ln.beta", {d}},
  };
  for (std::uint32_t i = 0; i < c.layers; ++i) {
    const std::string l = "layer." + std::to_string(i) + ".";
    for (const char* m : {"q", "k", "v", "o"}) {
      p.push_back({l + "attn." + m + ".w", {d, d}});
      p.push_back({l + "attn." + m + ".b", {d}});
    }
    p.push_back({l + "attn.ln.gamma", {d}});
    p.push_back({l + "attn.ln.beta", {d}});
    p.push_back({l + "ffn.w1", {f, d}});
    p.push_back({l + "ffn.b1", {f}});
    p.push_back({l + "ffn.w2", {d, f}});
    p.push_back({l + "ffn.b2", {d}});
    p.push_back({l + "ffn.ln.gamma", {d}});
    p.push_back({l + "ffn.ln.beta", {d}});
  }
  return p;
}

class EncoderModel {
 public:
  EncoderModel(EncoderConfig config, TensorBundle params) : config_(config), params_(std::move(params)) {
    config_.validate();
    const Tensor* type = params_.find("embed.type");
    const std::size_t type_rows = (type && type->rank() == 2) ? type->dim(0) : 1;
    for (const auto& [name, shape] : canonical_parameters(config_, type_rows)) {
      const Tensor* t = params_.find(name);
      if (!t) throw BundleError("encoder bundle is missing parameter '" + name + "'");
      if (t->shape() != shape) {
        throw BundleError("encoder parameter '" + name + "' has shape " + t->shape_string() + ", expected " +
                          Tensor::shape_string(shape));
      }
    }
    config_.write_metadata(params_.metadata());
  }

  // Reads the config from the bundle's metadata.
  explicit EncoderModel(const TensorBundle& params) : EncoderModel(EncoderConfig::from_metadata(params), params) {}

  const EncoderConfig& config() const noexcept { return config_; }
  const TensorBundle& params() const noexcept { return params_; }
  const Tensor& param(const std::string& name) const { return params_.get(name); }

 private:
  EncoderConfig config_;
  TensorBundle params_;
};

inline EncoderModel load_encoder(const std::filesystem::path& path) { return EncoderModel(load_bundle(path)); }

struct RandomInit {
  float weight_std = 0.02f;
  // Also randomize biases and layer-norm affine parameters (tests use this to
  // exercise every parameter path).
  bool perturb_all = false;
};

inline EncoderModel make_random_encoder(const EncoderConfig& config, std::uint64_t seed, RandomInit init = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, init.weight_std);
  TensorBundle b;
  for (const auto& [name, shape] : canonical_parameters(config)) {
    Tensor t(shape);
    const bool is_gamma = name.ends_with(".gamma");
    const bool is_bias = name.ends_with(".beta") || name.ends_with(".b") || name.ends_with(".b1") ||
                         name.ends_with(".b2");
    for (float& v : t.data()) {
      if (is_gamma) {
        v = 1.0f + (init.perturb_all ? normal(rng) : 0.0f);
      } else if (is_bias) {
        v = init.perturb_all ? normal(rng) : 0.0f;
      } else {
        v = normal(rng);
      }
    }
    b.add(name, std::move(t));
  }
  return EncoderModel(config, std::move(b));
}

namespace detail {

inline void check_input(const EncoderModel& m, const Encoding& enc) {
  const auto& c = m.config();
  if (enc.size() == 0) throw DataError("encoder input is empty");
  if (enc.attention_mask.size() != enc.size()) throw DataError("attention mask length differs from ids");
  if (enc.size() > c.max_positions) {
    throw DataError("input length " + std::to_string(enc.size()) + " exceeds max_positions " +
                    std::to_string(c.max_positions) + "; chunk the input first");
  }
  for (std::uint32_t id : enc.ids) {
    if (id >= c.vocab_size) {
      throw DataError("token id " + std::to_string(id) + " >= vocab_size " + std::to_string(c.vocab_size));
    }
  }
}

}  // namespace detail

// Post-norm transformer encoder over a batch. Inputs shorter than the longest
// are padded (mask 0) internally; each result has the input's own length.
inline std::vector<Tensor> forward_batch(const EncoderModel& m, std::span<const Encoding> batch) {
  const auto& c = m.config();
  if (batch.empty()) return {};
  std::size_t seq = 0;
  for (const auto& enc : batch) {
    detail::check_input(m, enc);
    seq = std::max(seq, enc.size());
  }
  const std::size_t bsz = batch.size(), d = c.hidden, heads = c.heads, dh = d / heads;

  std::vector<std::uint8_t> mask(bsz * seq, 0);
  Tensor x({bsz * seq, d});
  {
    const Tensor& word = m.param("embed.word");
    const Tensor& pos = m.param("embed.pos");
    const Tensor& type = m.param("embed.type");
    for (std::size_t b = 0; b < bsz; ++b) {
      const Encoding& enc = batch[b];
      for (std::size_t t = 0; t < seq; ++t) {
        const bool real = t < enc.size();
        const std::uint32_t id = real ? enc.ids[t] : 0;
        mask[b * seq + t] = real ? enc.attention_mask[t] : 0;
        auto xr = x.row(b * seq + t);
        auto wr = word.row(id);
        auto pr = pos.row(t + c.position_offset);
        auto tr = type.row(0);
        for (std::size_t k = 0; k < d; ++k) xr[k] = wr[k] + pr[k] + tr[k];
      }
    }
    x = layer_norm(x, m.param("embed.ln.gamma"), m.param("embed.ln.beta"), c.layer_norm_eps);
  }

  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  for (std::uint32_t li = 0; li < c.layers; ++li) {
    const std::string l = "layer." + std::to_string(li) + ".";
    const Tensor q = linear(x, m.param(l + "attn.q.w"), m.param(l + "attn.q.b"));
    const Tensor k = linear(x, m.param(l + "attn.k.w"), m.param(l + "attn.k.b"));
    const Tensor v = linear(x, m.param(l + "attn.v.w"), m.param(l + "attn.v.b"));
    Tensor ctx({bsz * seq, d});
    Tensor scores({seq, seq});
    for (std::size_t b = 0; b < bsz; ++b) {
      const std::size_t base = b * seq;
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < seq; ++i) {
          auto qi = q.row(base + i).subspan(off, dh);
          auto srow = scores.row(i);
          for (std::size_t j = 0; j < seq; ++j) {
            srow[j] = kernels::dot<float>(qi, k.row(base + j).subspan(off, dh)) * scale +
                      (mask[base + j] ? 0.0f : -1e9f);
          }
          kernels::softmax_inplace<float>(srow);
          auto out = ctx.row(base + i).subspan(off, dh);
          for (std::size_t j = 0; j < seq; ++j) {
            const float p = srow[j];
            if (p == 0.0f) continue;
            auto vj = v.row(base + j).subspan(off, dh);
            for (std::size_t e = 0; e < dh; ++e) out[e] += p * vj[e];
          }
        }
      }
    }
    const Tensor attn = linear(ctx, m.param(l + "attn.o.w"), m.param(l + "attn.o.b"));
    x = layer_norm(add(x, attn), m.param(l + "attn.ln.gamma"), m.param(l + "attn.ln.beta"), c.layer_norm_eps);
    const Tensor hidden = gelu(linear(x, m.param(l + "ffn.w1"), m.param(l + "ffn.b1")));
    const Tensor ff = linear(hidden, m.param(l + "ffn.w2"), m.param(l + "ffn.b2"));
    x = layer_norm(add(x, ff), m.param(l + "ffn.ln.gamma"), m.param(l + "ffn.ln.beta"), c.layer_norm_eps);
  }

  std::vector<Tensor> out;
  out.reserve(bsz);
  for (std::size_t b = 0; b < bsz; ++b) {
    const std::size_t n = batch[b].size();
    out.emplace_back(Tensor::Shape{n, d}, x.data().subspan(b * seq * d, n * d));
  }
  return out;
}

inline Tensor forward(const EncoderModel& m, const Encoding& enc) {
  return std::move(forward_batch(m, std::span<const Encoding>(&enc, 1)).front());
}

// cls: row 0. mean: average of rows whose mask is 1.
inline Tensor pool(const Tensor& h, std::span<const std::uint8_t> mask, Pooling mode) {
  if (h.rank() != 2 || h.dim(0) != mask.size()) {
    throw ShapeError("pool: hidden states " + h.shape_string() + " do not match mask of length " +
                     std::to_string(mask.size()));
  }
  std::size_t live = 0;
  for (auto m : mask) live += m ? 1 : 0;
  if (live == 0) throw DataError("pool: attention mask is all zero (empty input)");
  const std::size_t d = h.cols();
  Tensor out({d});
  if (mode == Pooling::Cls) {
    std::copy(h.row(0).begin(), h.row(0).end(), out.data().begin());
    return out;
  }
  std::vector<double> acc(d, 0.0);
  for (std::size_t r = 0; r < h.dim(0); ++r) {
    if (!mask[r]) continue;
    auto hr = h.row(r);
    for (std::size_t k = 0; k < d; ++k) acc[k] += hr[k];
  }
  for (std::size_t k = 0; k < d; ++k) out[k] = static_cast<float>(acc[k] / static_cast<double>(live));
  return out;
}

}  // namespace duolens
