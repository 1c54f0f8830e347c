#pragma once

// Document scoring: tokenize -> chunk -> encode with both encoders -> fuse ->
// aggregate chunk logits -> temperature-scale -> threshold.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "duolens/bundle.hpp"
#include "duolens/chunking.hpp"
#include "duolens/encoder.hpp"
#include "duolens/errors.hpp"
#include "duolens/fusion.hpp"
#include "duolens/metrics.hpp"
#include "duolens/sample.hpp"
#include "duolens/tokenizer.hpp"

namespace duolens {

// Runs fn(i) for i in [0, n). Results must be written to per-index slots so
// the outcome does not depend on scheduling. The first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// --threads fallback: DUOLENS_THREADS, then the machine's parallelism.
inline unsigned default_threads() {
  if (const char* env = std::getenv("DUOLENS_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct EncoderBranch {
  EncoderModel model;
  Tokenizer tokenizer;

  Pooling pooling() const noexcept { return model.config().pooling; }
  std::size_t hidden() const noexcept { return model.config().hidden; }
};

struct Calibration {
  double temperature = 1.0;

  double probability(double logit) const { return kernels::sigmoid(logit / temperature); }
};

inline double calibrated_nll(std::span<const double> logits, std::span<const int> labels, double temperature) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i] / temperature;
    total += labels[i] == 1 ? kernels::softplus(-z) : kernels::softplus(z);
  }
  return total / static_cast<double>(logits.size());
}

// Golden-section search on ln T over [ln 0.05, ln 10] for the temperature that
// minimizes dev NLL of sigmoid(z / T). Falls back to T = 1 if that is no worse.
inline Calibration fit_temperature(std::span<const double> logits, std::span<const int> labels) {
  if (logits.size() != labels.size() || logits.empty()) throw DataError("fit_temperature needs aligned dev logits");
  std::size_t n1 = 0;
  for (int y : labels) n1 += (y == 1);
  if (n1 == 0 || n1 == labels.size()) throw DataError("fit_temperature needs both classes in the dev split");

  auto nll = [&](double u) { return calibrated_nll(logits, labels, std::exp(u)); };
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = std::log(0.05), hi = std::log(10.0);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = nll(x1), f2 = nll(x2);
  while (hi - lo > 1e-6) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = nll(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = nll(x2);
    }
  }
  const double u = 0.5 * (lo + hi);
  Calibration c{std::exp(u)};
  if (nll(u) > calibrated_nll(logits, labels, 1.0)) c.temperature = 1.0;
  return c;
}

// Threshold maximizing TPR - FPR over the observed scores. Reported only.
inline double youden_threshold(std::span<const double> scores, std::span<const int> labels) {
  std::vector<double> cands(scores.begin(), scores.end());
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  std::size_t pos = 0;
  for (int y : labels) pos += (y == 1);
  const std::size_t neg = labels.size() - pos;
  double best_j = -2.0, best_t = 0.5;
  for (double t : cands) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) (labels[i] == 1 ? tp : fp)++;
    }
    const double j = (pos ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0) -
                     (neg ? static_cast<double>(fp) / static_cast<double>(neg) : 0.0);
    if (j > best_j) {
      best_j = j;
      best_t = t;
    }
  }
  return best_t;
}

struct DetectorOptions {
  std::uint32_t window = 512;
  std::uint32_t stride = 448;
  Aggregation aggregation = Aggregation::Mean;
  double threshold = 0.5;
  bool chunking = true;
};

struct Detection {
  std::string id;
  double score = 0.0;
  int label = 0;
  std::vector<double> per_chunk;
  std::uint32_t n_chunks = 0;

  bool operator==(const Detection&) const = default;
};

inline nlohmann::ordered_json to_json(const Detection& d) {
  nlohmann::ordered_json j;
  j["id"] = d.id;
  j["score"] = d.score;
  j["label"] = d.label;
  j["n_chunks"] = d.n_chunks;
  j["per_chunk"] = d.per_chunk;
  return j;
}

// One chunk as seen by both encoders, framed with [CLS] ... [SEP].
struct ChunkInputs {
  Encoding a;
  Encoding b;
};

namespace detail {

inline Encoding frame(const Tokenizer& tok, std::span<const std::uint32_t> ids, std::span<const std::size_t> offsets,
                      std::size_t end_offset) {
  Encoding e;
  e.push(tok.specials().cls, offsets.empty() ? end_offset : offsets.front());
  for (std::size_t i = 0; i < ids.size(); ++i) e.push(ids[i], offsets[i]);
  e.push(tok.specials().sep, end_offset);
  return e;
}

inline Encoding frame_prefix(const Tokenizer& tok, const Encoding& content, std::size_t max_content,
                             std::size_t end_offset) {
  const std::size_t n = std::min(content.size(), max_content);
  const std::size_t end = n < content.size() ? content.offsets[n] : end_offset;
  return frame(tok, std::span(content.ids).first(n), std::span(content.offsets).first(n), end);
}

}  // namespace detail

// Splits a document into chunk inputs. The chunk plan is computed in encoder
// A's token space; encoder B re-tokenizes the byte span each chunk covers and
// keeps at most window - 2 content tokens. With chunking disabled the document
// must fit one window for encoder A and is framed directly.
inline std::vector<ChunkInputs> chunk_document(const EncoderBranch& a, const EncoderBranch& b, std::string_view text,
                                               const DetectorOptions& opt) {
  const Encoding ea = a.tokenizer.encode(text);
  if (ea.size() == 0) throw DataError("document is empty after tokenization");
  const std::size_t slots = opt.window >= 2 ? opt.window - 2 : 0;
  std::vector<ChunkInputs> out;
  if (!opt.chunking) {
    if (ea.size() > slots) {
      throw DataError("document has " + std::to_string(ea.size()) + " tokens but chunking is disabled (window " +
                      std::to_string(opt.window) + ")");
    }
    const Encoding eb = b.tokenizer.encode(text);
    out.push_back({detail::frame_prefix(a.tokenizer, ea, slots, text.size()),
                   detail::frame_prefix(b.tokenizer, eb, slots, text.size())});
    return out;
  }
  const ChunkPlan plan = chunk(ea.size(), opt.window, opt.stride);
  for (const auto& c : plan.chunks) {
    // The first chunk starts at byte 0 and the last ends at the text end, so a
    // single-chunk plan hands encoder B the whole document.
    const std::size_t byte_begin = c.start == 0 ? 0 : ea.offsets[c.start];
    const std::size_t byte_end = c.end < ea.size() ? ea.offsets[c.end] : text.size();
    Encoding ca = detail::frame(a.tokenizer, std::span(ea.ids).subspan(c.start, c.size()),
                                std::span(ea.offsets).subspan(c.start, c.size()), byte_end);
    const std::string_view piece = text.substr(byte_begin, byte_end - byte_begin);
    Encoding eb = b.tokenizer.encode(piece);
    for (auto& o : eb.offsets) o += byte_begin;
    out.push_back({std::move(ca), detail::frame_prefix(b.tokenizer, eb, slots, byte_end)});
  }
  return out;
}

struct ChunkFeatures {
  Tensor a;  // pooled [d_A]
  Tensor b;  // pooled [d_B]
};

inline std::vector<ChunkFeatures> document_features(const EncoderBranch& a, const EncoderBranch& b,
                                                    std::string_view text, const DetectorOptions& opt) {
  std::vector<ChunkFeatures> out;
  for (const auto& ci : chunk_document(a, b, text, opt)) {
    out.push_back({pool(forward(a.model, ci.a), ci.a.attention_mask, a.pooling()),
                   pool(forward(b.model, ci.b), ci.b.attention_mask, b.pooling())});
  }
  return out;
}

class Detector {
 public:
  Detector(EncoderBranch a, EncoderBranch b, FusionHead head, Calibration cal = {}, DetectorOptions opt = {})
      : a_(std::move(a)), b_(std::move(b)), head_(std::move(head)), cal_(cal), opt_(opt) {
    head_.validate();
    if (head_.dim_a() != a_.hidden() || head_.dim_b() != b_.hidden()) {
      throw ShapeError("fusion head expects encoder widths " + std::to_string(head_.dim_a()) + " and " +
                       std::to_string(head_.dim_b()) + ", got " + std::to_string(a_.hidden()) + " and " +
                       std::to_string(b_.hidden()));
    }
    if (!(cal_.temperature > 0.0)) throw DataError("temperature must be positive");
  }

  Detection detect(std::string_view text, std::string id = {}) const {
    Detection d;
    d.id = std::move(id);
    const auto feats = document_features(a_, b_, text, opt_);
    for (std::size_t k = 0; k < feats.size(); ++k) {
      const double z = head_logit(head_, feats[k].a.data(), feats[k].b.data());
      if (std::isnan(z)) throw InternalError("NaN logit at chunk " + std::to_string(k));
      d.per_chunk.push_back(z);
    }
    d.n_chunks = static_cast<std::uint32_t>(d.per_chunk.size());
    const double z = aggregate(d.per_chunk, opt_.aggregation);
    d.score = cal_.probability(z);
    d.label = d.score >= opt_.threshold ? 1 : 0;
    return d;
  }

  // Aggregated raw logit (before calibration).
  double document_logit(std::string_view text) const {
    const auto feats = document_features(a_, b_, text, opt_);
    std::vector<double> z;
    for (const auto& f : feats) z.push_back(head_logit(head_, f.a.data(), f.b.data()));
    return aggregate(z, opt_.aggregation);
  }

  std::vector<Detection> detect_batch(std::span<const Sample> docs, unsigned threads = 1) const {
    std::vector<Detection> out(docs.size());
    parallel_for(docs.size(), threads, [&](std::size_t i) { out[i] = detect(docs[i].text, docs[i].id); });
    return out;
  }

  const EncoderBranch& branch_a() const noexcept { return a_; }
  const EncoderBranch& branch_b() const noexcept { return b_; }
  const FusionHead& head() const noexcept { return head_; }
  const Calibration& calibration() const noexcept { return cal_; }
  void set_calibration(Calibration c) { cal_ = c; }
  const DetectorOptions& options() const noexcept { return opt_; }
  DetectorOptions& options() noexcept { return opt_; }

 private:
  EncoderBranch a_;
  EncoderBranch b_;
  FusionHead head_;
  Calibration cal_;
  DetectorOptions opt_;
};

// ---------------------------------------------------------------------------
// Feature extraction and training over documents (encoders stay frozen).

inline PairedFeatures extract_features(const EncoderBranch& a, const EncoderBranch& b, std::span<const Sample> docs,
                                       const DetectorOptions& opt, unsigned threads = 1) {
  std::vector<std::vector<ChunkFeatures>> per_doc(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) { per_doc[i] = document_features(a, b, docs[i].text, opt); });
  std::size_t rows = 0;
  for (const auto& v : per_doc) rows += v.size();
  PairedFeatures f;
  f.n_groups = docs.size();
  if (rows == 0) return f;
  f.a = Tensor({rows, a.hidden()});
  f.b = Tensor({rows, b.hidden()});
  std::size_t r = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    f.group_labels.push_back(docs[i].label);
    for (const auto& cf : per_doc[i]) {
      std::copy(cf.a.data().begin(), cf.a.data().end(), f.a.row(r).begin());
      std::copy(cf.b.data().begin(), cf.b.data().end(), f.b.row(r).begin());
      f.labels.push_back(docs[i].label);
      f.group.push_back(i);
      ++r;
    }
  }
  return f;
}

inline ProbeFeatures extract_probe_features(const EncoderBranch& enc, std::span<const Sample> docs,
                                            const DetectorOptions& opt, unsigned threads = 1) {
  std::vector<std::vector<Tensor>> per_doc(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) {
    const Encoding e = enc.tokenizer.encode(docs[i].text);
    if (e.size() == 0) throw DataError("document '" + docs[i].id + "' is empty after tokenization");
    const std::size_t slots = opt.window - 2;
    std::vector<ChunkRange> ranges;
    if (!opt.chunking || e.size() <= slots) {
      ranges.push_back({0, std::min(e.size(), slots)});
    } else {
      ranges = chunk(e.size(), opt.window, opt.stride).chunks;
    }
    for (const auto& c : ranges) {
      const std::size_t end_off = c.end < e.size() ? e.offsets[c.end] : docs[i].text.size();
      const Encoding framed = detail::frame(enc.tokenizer, std::span(e.ids).subspan(c.start, c.size()),
                                            std::span(e.offsets).subspan(c.start, c.size()), end_off);
      per_doc[i].push_back(pool(forward(enc.model, framed), framed.attention_mask, enc.pooling()));
    }
  });
  std::size_t rows = 0;
  for (const auto& v : per_doc) rows += v.size();
  ProbeFeatures f;
  f.n_groups = docs.size();
  if (rows == 0) return f;
  f.x = Tensor({rows, enc.hidden()});
  std::size_t r = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    f.group_labels.push_back(docs[i].label);
    for (const auto& t : per_doc[i]) {
      std::copy(t.data().begin(), t.data().end(), f.x.row(r).begin());
      f.labels.push_back(docs[i].label);
      f.group.push_back(i);
      ++r;
    }
  }
  return f;
}

inline void require_both_classes(std::span<const Sample> docs, const char* what) {
  bool has0 = false, has1 = false;
  for (const auto& s : docs) (s.label == 1 ? has1 : has0) = true;
  if (!(has0 && has1)) {
    throw DataError(std::string(what) + " split has a single class: class-balanced weights undefined");
  }
}

// Trains the fusion head on frozen encoders. Every chunk is a training item
// carrying its document's label; dev AUROC is measured on aggregated document
// logits.
inline TrainResult<FusionHead> train_head(const EncoderBranch& a, const EncoderBranch& b,
                                          std::span<const Sample> train, std::span<const Sample> dev,
                                          const TrainConfig& tc, const DetectorOptions& opt = {},
                                          unsigned threads = 1) {
  tc.validate();
  require_both_classes(train, "training");
  if (dev.empty()) throw DataError("dev split is empty");
  const PairedFeatures ft = extract_features(a, b, train, opt, threads);
  const PairedFeatures fd = extract_features(a, b, dev, opt, threads);
  return train_head_on_features(ft, fd, tc);
}

inline TrainResult<LinearProbe> linear_probe_fit(const EncoderBranch& enc, std::span<const Sample> train,
                                                 std::span<const Sample> dev, const TrainConfig& tc,
                                                 const DetectorOptions& opt = {}, unsigned threads = 1) {
  tc.validate();
  require_both_classes(train, "training");
  if (dev.empty()) throw DataError("dev split is empty");
  const ProbeFeatures ft = extract_probe_features(enc, train, opt, threads);
  const ProbeFeatures fd = extract_probe_features(enc, dev, opt, threads);
  return linear_probe_fit_on_features(ft, fd, tc);
}

// Head bundle = head tensors + metadata describing how it was trained.
inline TensorBundle head_bundle(const FusionHead& h, const EncoderBranch& a, const EncoderBranch& b,
                                std::uint64_t seed, std::optional<Calibration> cal = std::nullopt) {
  TensorBundle bundle = h.to_bundle();
  auto& m = bundle.metadata();
  m["pooling_A"] = to_string(a.pooling());
  m["pooling_B"] = to_string(b.pooling());
  m["seed"] = std::to_string(seed);
  if (cal) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", cal->temperature);
    m["temperature"] = buf;
  }
  return bundle;
}

inline Calibration calibration_from_bundle(const TensorBundle& bundle) {
  Calibration c;
  if (auto t = bundle.meta("temperature")) {
    try {
      c.temperature = std::stod(*t);
    } catch (const std::exception&) {
      throw BundleError("head metadata 'temperature' is not a number");
    }
    if (!(c.temperature > 0.0)) throw BundleError("head metadata 'temperature' must be positive");
  }
  return c;
}

}  // namespace duolens
