#pragma once

// Gated fusion head over two pooled encoder vectors:
//
//   g     = sigmoid(W_g [hA; hB] + b_g)
//   fused = g * (W_A hA + b_A) + (1 - g) * (W_B hB + b_B)
//   z     = w . fused + b
//
// Parameters are stored as f32 tensors; all head arithmetic runs in f64.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "duolens/bundle.hpp"
#include "duolens/chunking.hpp"
#include "duolens/errors.hpp"
#include "duolens/metrics.hpp"
#include "duolens/tensor.hpp"

namespace duolens {

namespace detail {

inline double dot_f64(std::span<const float> w, std::span<const float> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += static_cast<double>(w[i]) * static_cast<double>(x[i]);
  return s;
}

inline void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (float& v : t.data()) v = static_cast<float>(u(rng));
}

}  // namespace detail

struct ClassWeights {
  double w0 = 1.0;
  double w1 = 1.0;

  double operator[](int label) const noexcept { return label == 1 ? w1 : w0; }

  // w_c = N / (2 N_c).
  static ClassWeights from_labels(std::span<const int> labels) {
    std::size_t n1 = 0;
    for (int y : labels) n1 += (y == 1);
    const std::size_t n0 = labels.size() - n1;
    if (n0 == 0 || n1 == 0) throw DataError("class-balanced weights undefined: training split has a single class");
    const double n = static_cast<double>(labels.size());
    return {n / (2.0 * static_cast<double>(n0)), n / (2.0 * static_cast<double>(n1))};
  }
};

// Class-balanced binary cross-entropy on logits, averaged over N.
inline double cb_bce(std::span<const double> z, std::span<const int> y, const ClassWeights& cw) {
  if (z.size() != y.size() || z.empty()) throw DataError("cb_bce needs equal, non-empty logits and labels");
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    // -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z)
    total += cw[y[i]] * (y[i] == 1 ? kernels::softplus(-z[i]) : kernels::softplus(z[i]));
  }
  return total / static_cast<double>(z.size());
}

struct FuseResult {
  std::vector<double> fused;
  std::vector<double> gate;
  std::vector<double> proj_a;
  std::vector<double> proj_b;
};

class FusionHead {
 public:
  static constexpr const char* kParamNames[] = {"head.w_a", "head.b_a", "head.w_b", "head.b_b",
                                                "head.w_g", "head.b_g", "head.w",   "head.b"};

  Tensor w_a, b_a, w_b, b_b, w_g, b_g, w, b;

  FusionHead() = default;

  static FusionHead zeros(std::size_t dim_a, std::size_t dim_b, std::size_t dim_f) {
    if (dim_a == 0 || dim_b == 0 || dim_f == 0) throw DataError("fusion head dimensions must be >= 1");
    FusionHead h;
    h.w_a = Tensor({dim_f, dim_a});
    h.b_a = Tensor({dim_f});
    h.w_b = Tensor({dim_f, dim_b});
    h.b_b = Tensor({dim_f});
    h.w_g = Tensor({dim_f, dim_a + dim_b});
    h.b_g = Tensor({dim_f});
    h.w = Tensor({dim_f});
    h.b = Tensor({1});
    return h;
  }

  // Weights uniform in +-1/sqrt(fan_in); biases zero.
  static FusionHead initialized(std::size_t dim_a, std::size_t dim_b, std::size_t dim_f, std::uint64_t seed) {
    FusionHead h = zeros(dim_a, dim_b, dim_f);
    std::mt19937_64 rng(seed);
    detail::fill_uniform(h.w_a, 1.0 / std::sqrt(static_cast<double>(dim_a)), rng);
    detail::fill_uniform(h.w_b, 1.0 / std::sqrt(static_cast<double>(dim_b)), rng);
    detail::fill_uniform(h.w_g, 1.0 / std::sqrt(static_cast<double>(dim_a + dim_b)), rng);
    detail::fill_uniform(h.w, 1.0 / std::sqrt(static_cast<double>(dim_f)), rng);
    return h;
  }

  std::size_t dim_a() const { return w_a.dim(1); }
  std::size_t dim_b() const { return w_b.dim(1); }
  std::size_t dim_f() const { return w_a.dim(0); }

  std::vector<Tensor*> parameters() { return {&w_a, &b_a, &w_b, &b_b, &w_g, &b_g, &w, &b}; }
  std::vector<const Tensor*> parameters() const { return {&w_a, &b_a, &w_b, &b_b, &w_g, &b_g, &w, &b}; }

  void validate() const {
    const std::size_t f = w_a.rank() == 2 ? w_a.dim(0) : 0;
    const bool ok = f > 0 && w_b.rank() == 2 && w_b.dim(0) == f && w_g.rank() == 2 && w_g.dim(0) == f &&
                    w_g.dim(1) == w_a.dim(1) + w_b.dim(1) && b_a.numel() == f && b_b.numel() == f &&
                    b_g.numel() == f && w.numel() == f && b.numel() == 1;
    if (!ok) throw ShapeError("fusion head parameters have inconsistent shapes");
    for (const Tensor* t : parameters()) {
      for (float v : t->data()) {
        if (!std::isfinite(v)) throw DataError("fusion head has a non-finite parameter");
      }
    }
  }

  TensorBundle to_bundle() const {
    TensorBundle bundle;
    auto params = parameters();
    for (std::size_t i = 0; i < params.size(); ++i) bundle.add(kParamNames[i], *params[i]);
    auto& m = bundle.metadata();
    m["kind"] = "fusion-head";
    m["d_A"] = std::to_string(dim_a());
    m["d_B"] = std::to_string(dim_b());
    m["d_f"] = std::to_string(dim_f());
    return bundle;
  }

  static FusionHead from_bundle(const TensorBundle& bundle) {
    FusionHead h;
    auto params = h.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = bundle.get(kParamNames[i]);
    h.validate();
    return h;
  }
};

inline FuseResult fuse_forward(const FusionHead& h, std::span<const float> ha, std::span<const float> hb) {
  if (ha.size() != h.dim_a() || hb.size() != h.dim_b()) {
    throw ShapeError("fuse_forward: inputs of size " + std::to_string(ha.size()) + " and " +
                     std::to_string(hb.size()) + " do not match head dims " + std::to_string(h.dim_a()) + " and " +
                     std::to_string(h.dim_b()));
  }
  const std::size_t f = h.dim_f(), da = h.dim_a();
  FuseResult r;
  r.fused.resize(f);
  r.gate.resize(f);
  r.proj_a.resize(f);
  r.proj_b.resize(f);
  for (std::size_t i = 0; i < f; ++i) {
    const auto wg = h.w_g.row(i);
    const double a = detail::dot_f64(wg.subspan(0, da), ha) + detail::dot_f64(wg.subspan(da), hb) + h.b_g[i];
    const double g = kernels::sigmoid(a);
    const double pa = detail::dot_f64(h.w_a.row(i), ha) + h.b_a[i];
    const double pb = detail::dot_f64(h.w_b.row(i), hb) + h.b_b[i];
    r.gate[i] = g;
    r.proj_a[i] = pa;
    r.proj_b[i] = pb;
    r.fused[i] = g * pa + (1.0 - g) * pb;
  }
  return r;
}

inline double classify_logit(const FusionHead& h, std::span<const double> fused) {
  if (fused.size() != h.dim_f()) throw ShapeError("classify_logit: fused vector has the wrong size");
  double z = h.b[0];
  for (std::size_t i = 0; i < fused.size(); ++i) z += static_cast<double>(h.w[i]) * fused[i];
  return z;
}

inline double head_logit(const FusionHead& h, std::span<const float> ha, std::span<const float> hb) {
  return classify_logit(h, fuse_forward(h, ha, hb).fused);
}

// Pooled feature rows for a set of training items. `group` maps each row to
// the document it came from (several rows per document when chunked).
struct PairedFeatures {
  Tensor a;  // [N x d_A]
  Tensor b;  // [N x d_B]
  std::vector<int> labels;
  std::vector<std::size_t> group;
  std::size_t n_groups = 0;
  std::vector<int> group_labels;

  std::size_t size() const noexcept { return labels.size(); }
};

// Gradients in f64, one buffer per parameter in `parameters()` order.
struct Gradients {
  std::vector<std::vector<double>> grads;
  double loss = 0.0;
};

inline Gradients zero_gradients(const std::vector<const Tensor*>& params) {
  Gradients g;
  for (const Tensor* t : params) g.grads.emplace_back(t->numel(), 0.0);
  return g;
}

// Analytic gradients of cb_bce(classify_logit(fuse_forward(.))) over the rows `idx`.
inline Gradients head_gradients(const FusionHead& h, const PairedFeatures& data, std::span<const std::size_t> idx,
                                const ClassWeights& cw) {
  if (idx.empty()) throw DataError("head_gradients needs a non-empty batch");
  Gradients g = zero_gradients(h.parameters());
  auto& gw_a = g.grads[0];
  auto& gb_a = g.grads[1];
  auto& gw_b = g.grads[2];
  auto& gb_b = g.grads[3];
  auto& gw_g = g.grads[4];
  auto& gb_g = g.grads[5];
  auto& gw = g.grads[6];
  auto& gb = g.grads[7];
  const std::size_t f = h.dim_f(), da = h.dim_a(), db = h.dim_b();
  const double inv_n = 1.0 / static_cast<double>(idx.size());
  for (std::size_t s : idx) {
    const auto ha = data.a.row(s);
    const auto hb = data.b.row(s);
    const FuseResult r = fuse_forward(h, ha, hb);
    const double z = classify_logit(h, r.fused);
    const int y = data.labels[s];
    g.loss += cw[y] * (y == 1 ? kernels::softplus(-z) : kernels::softplus(z)) * inv_n;
    const double delta = inv_n * cw[y] * (kernels::sigmoid(z) - static_cast<double>(y));
    gb[0] += delta;
    for (std::size_t i = 0; i < f; ++i) {
      gw[i] += delta * r.fused[i];
      const double dfused = delta * h.w[i];
      const double dpa = dfused * r.gate[i];
      const double dpb = dfused * (1.0 - r.gate[i]);
      const double dpre = dfused * (r.proj_a[i] - r.proj_b[i]) * r.gate[i] * (1.0 - r.gate[i]);
      gb_a[i] += dpa;
      gb_b[i] += dpb;
      gb_g[i] += dpre;
      double* wa = &gw_a[i * da];
      for (std::size_t k = 0; k < da; ++k) wa[k] += dpa * ha[k];
      double* wb = &gw_b[i * db];
      for (std::size_t k = 0; k < db; ++k) wb[k] += dpb * hb[k];
      double* wg = &gw_g[i * (da + db)];
      for (std::size_t k = 0; k < da; ++k) wg[k] += dpre * ha[k];
      for (std::size_t k = 0; k < db; ++k) wg[da + k] += dpre * hb[k];
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Linear probe: logistic regression on one encoder's frozen pooled vectors.

class LinearProbe {
 public:
  Tensor w, b;

  static LinearProbe zeros(std::size_t dim) {
    LinearProbe p;
    p.w = Tensor({dim});
    p.b = Tensor({1});
    return p;
  }

  std::size_t dim() const { return w.numel(); }
  std::vector<Tensor*> parameters() { return {&w, &b}; }
  std::vector<const Tensor*> parameters() const { return {&w, &b}; }

  double logit(std::span<const float> x) const { return detail::dot_f64(w.data(), x) + b[0]; }

  TensorBundle to_bundle() const {
    TensorBundle bundle;
    bundle.add("probe.w", w);
    bundle.add("probe.b", b);
    bundle.metadata()["kind"] = "linear-probe";
    bundle.metadata()["d"] = std::to_string(dim());
    return bundle;
  }
};

inline Gradients probe_gradients(const LinearProbe& p, const Tensor& x, std::span<const int> labels,
                                 std::span<const std::size_t> idx, const ClassWeights& cw) {
  if (idx.empty()) throw DataError("probe_gradients needs a non-empty batch");
  Gradients g = zero_gradients(p.parameters());
  const double inv_n = 1.0 / static_cast<double>(idx.size());
  for (std::size_t s : idx) {
    const auto xs = x.row(s);
    const double z = p.logit(xs);
    const int y = labels[s];
    g.loss += cw[y] * (y == 1 ? kernels::softplus(-z) : kernels::softplus(z)) * inv_n;
    const double delta = inv_n * cw[y] * (kernels::sigmoid(z) - static_cast<double>(y));
    for (std::size_t k = 0; k < xs.size(); ++k) g.grads[0][k] += delta * xs[k];
    g.grads[1][0] += delta;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Optimization

enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
  float lr = 1e-3f;
  std::uint32_t epochs = 20;
  std::uint32_t batch = 32;
  std::uint64_t seed = 42;
  OptimizerKind optimizer = OptimizerKind::Adam;
  float momentum = 0.9f;  // sgd only
  std::uint32_t patience = 5;
  std::uint32_t fusion_dim = 256;

  void validate() const {
    if (!(lr >= 0.0f) || !std::isfinite(lr)) throw DataError("learning rate must be finite and >= 0");
    if (epochs < 1) throw DataError("epochs must be >= 1");
    if (batch < 1) throw DataError("batch must be >= 1");
    if (fusion_dim < 1) throw DataError("fusion_dim must be >= 1");
  }
};

class Optimizer {
 public:
  Optimizer(const TrainConfig& tc, const std::vector<Tensor*>& params) : tc_(tc) {
    for (const Tensor* t : params) {
      m_.emplace_back(t->numel(), 0.0);
      v_.emplace_back(t->numel(), 0.0);
    }
  }

  void step(const std::vector<Tensor*>& params, const Gradients& g) {
    ++t_;
    const double lr = tc_.lr;
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto data = params[p]->data();
      const auto& grad = g.grads[p];
      auto& m = m_[p];
      auto& v = v_[p];
      for (std::size_t i = 0; i < data.size(); ++i) {
        double update;
        if (tc_.optimizer == OptimizerKind::Adam) {
          m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
          v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
          update = (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        } else {
          m[i] = tc_.momentum * m[i] + grad[i];
          update = m[i];
        }
        data[i] = static_cast<float>(static_cast<double>(data[i]) - lr * update);
      }
    }
  }

 private:
  TrainConfig tc_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

struct EpochLog {
  std::uint32_t epoch = 0;
  double train_loss = 0.0;
  double dev_auroc = 0.0;
};

template <class Model>
struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  std::uint32_t best_epoch = 0;
  double best_dev_auroc = 0.0;
};

inline nlohmann::ordered_json to_json(const std::vector<EpochLog>& log) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& e : log) j.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"dev_auroc", e.dev_auroc}});
  return j;
}

// Mini-batch training with seeded per-epoch shuffling. After every epoch the
// dev documents are scored (chunk logits aggregated by mean) and the model with
// the best dev AUROC is kept; ties keep the earlier epoch. Training stops early
// once `patience` epochs pass without improvement.
template <class Model, class GradFn, class DevLogitFn>
TrainResult<Model> fit(Model model, std::span<const int> train_labels, std::size_t n_dev_groups,
                       std::span<const int> dev_group_labels, std::span<const std::size_t> dev_group,
                       const TrainConfig& tc, GradFn&& gradients, DevLogitFn&& dev_logits) {
  tc.validate();
  if (train_labels.empty()) throw DataError("training split is empty");
  if (n_dev_groups == 0) throw DataError("dev split is empty");
  const ClassWeights cw = ClassWeights::from_labels(train_labels);
  std::mt19937_64 rng(tc.seed);
  Optimizer opt(tc, model.parameters());
  std::vector<std::size_t> order(train_labels.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult<Model> res{model, {}, 0, -1.0};
  std::uint32_t since_best = 0;
  for (std::uint32_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch) {
      const std::size_t end = std::min(order.size(), start + tc.batch);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      const Gradients g = gradients(model, idx, cw);
      loss_sum += g.loss * static_cast<double>(idx.size());
      opt.step(model.parameters(), g);
    }
    const std::vector<double> item_logits = dev_logits(model);
    const std::vector<double> doc_logits = aggregate_groups(item_logits, dev_group, n_dev_groups);
    const double dev_auroc = auroc(doc_logits, dev_group_labels);
    res.log.push_back({epoch, loss_sum / static_cast<double>(order.size()), dev_auroc});
    if (dev_auroc > res.best_dev_auroc) {
      res.best_dev_auroc = dev_auroc;
      res.best_epoch = epoch;
      res.model = model;
      since_best = 0;
    } else if (++since_best >= tc.patience && tc.patience > 0) {
      break;
    }
  }
  return res;
}

inline std::vector<double> head_logits(const FusionHead& h, const PairedFeatures& data) {
  std::vector<double> z(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) z[i] = head_logit(h, data.a.row(i), data.b.row(i));
  return z;
}

inline TrainResult<FusionHead> train_head_on_features(const PairedFeatures& train, const PairedFeatures& dev,
                                                      const TrainConfig& tc) {
  if (train.size() == 0) throw DataError("training split is empty");
  FusionHead init = FusionHead::initialized(train.a.cols(), train.b.cols(), tc.fusion_dim, tc.seed);
  return fit(
      std::move(init), train.labels, dev.n_groups, dev.group_labels, dev.group, tc,
      [&](const FusionHead& h, std::span<const std::size_t> idx, const ClassWeights& cw) {
        return head_gradients(h, train, idx, cw);
      },
      [&](const FusionHead& h) { return head_logits(h, dev); });
}

// Single-encoder features for the probe.
struct ProbeFeatures {
  Tensor x;  // [N x d]
  std::vector<int> labels;
  std::vector<std::size_t> group;
  std::size_t n_groups = 0;
  std::vector<int> group_labels;

  std::size_t size() const noexcept { return labels.size(); }
};

inline std::vector<double> probe_logits(const LinearProbe& p, const Tensor& x) {
  std::vector<double> z(x.rows());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = p.logit(x.row(i));
  return z;
}

inline TrainResult<LinearProbe> linear_probe_fit_on_features(const ProbeFeatures& train, const ProbeFeatures& dev,
                                                            const TrainConfig& tc) {
  if (train.size() == 0) throw DataError("training split is empty");
  return fit(
      LinearProbe::zeros(train.x.cols()), train.labels, dev.n_groups, dev.group_labels, dev.group, tc,
      [&](const LinearProbe& p, std::span<const std::size_t> idx, const ClassWeights& cw) {
        return probe_gradients(p, train.x, train.labels, idx, cw);
      },
      [&](const LinearProbe& p) { return probe_logits(p, dev.x); });
}

}  // namespace duolens
