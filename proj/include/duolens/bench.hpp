#pragma once

// Throughput / latency / peak-memory measurement of the detector forward path
// at a fixed input length. Inputs are truncated or padded so every sample
// costs the same, which is what makes runs comparable.

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "duolens/encoder.hpp"
#include "duolens/fusion.hpp"
#include "duolens/metrics.hpp"
#include "duolens/pipeline.hpp"
#include "duolens/sample.hpp"
#include "duolens/tensor.hpp"

namespace duolens {

struct BenchOptions {
  std::size_t seq_len = 512;
  std::size_t warmup = 3;   // untimed batches before each measured run
  std::size_t repeats = 10;  // measured passes per batch size; the fastest is reported
};

struct BenchRow {
  std::size_t batch = 0;
  std::size_t samples = 0;
  double samples_per_sec = 0.0;
  LatencyStats latency_ms;  // per batch
  std::uint64_t peak_bytes = 0;
};

struct BenchReport {
  std::size_t seq_len = 0;
  std::size_t warmup = 0;
  std::size_t repeats = 0;
  unsigned threads = 1;
  std::vector<BenchRow> rows;
};

// Content truncated to seq_len - 2, framed, then padded with mask-0 positions
// to exactly seq_len.
inline Encoding fixed_length_input(const Tokenizer& tok, std::string_view text, std::size_t seq_len) {
  const Encoding content = tok.encode(text);
  Encoding e = detail::frame_prefix(tok, content, seq_len - 2, text.size());
  while (e.size() < seq_len) e.push(tok.specials().pad, text.size(), 0);
  return e;
}

// One forward of both encoders plus the head over a batch; returns the logits.
inline std::vector<double> score_batch(const EncoderBranch& a, const EncoderBranch& b, const FusionHead& head,
                                       std::span<const Encoding> ea, std::span<const Encoding> eb) {
  const auto ha = forward_batch(a.model, ea);
  const auto hb = forward_batch(b.model, eb);
  std::vector<double> z(ea.size());
  for (std::size_t i = 0; i < ea.size(); ++i) {
    const Tensor pa = pool(ha[i], ea[i].attention_mask, a.pooling());
    const Tensor pb = pool(hb[i], eb[i].attention_mask, b.pooling());
    z[i] = head_logit(head, pa.data(), pb.data());
  }
  return z;
}

// Measures each batch size over all of `docs` (the last batch may be short).
// One pass gives samples_per_sec = N / sum of timed batch durations and the
// p50/p95 batch latency. Each row reports the fastest of `repeats` passes:
// on a shared machine the slow passes measure other tenants, not the engine.
// Peak bytes come from the allocation meter, reset before each pass.
inline BenchReport bench(const EncoderBranch& a, const EncoderBranch& b, const FusionHead& head,
                         std::span<const Sample> docs, std::span<const std::size_t> batch_sizes,
                         const BenchOptions& opt = {}) {
  if (docs.empty()) throw DataError("bench needs at least one sample");
  if (opt.seq_len < 3) throw DataError("bench seq_len must be at least 3");
  if (opt.repeats < 1) throw DataError("bench repeats must be at least 1");
  if (opt.seq_len > a.model.config().max_positions || opt.seq_len > b.model.config().max_positions) {
    throw DataError("bench seq_len exceeds an encoder's max_positions");
  }
  std::vector<Encoding> ea, eb;
  for (const auto& s : docs) {
    ea.push_back(fixed_length_input(a.tokenizer, s.text, opt.seq_len));
    eb.push_back(fixed_length_input(b.tokenizer, s.text, opt.seq_len));
  }
  BenchReport rep;
  rep.seq_len = opt.seq_len;
  rep.warmup = opt.warmup;
  rep.repeats = opt.repeats;
  using clock = std::chrono::steady_clock;
  const std::size_t n = ea.size();
  for (std::size_t bs : batch_sizes) {
    if (bs == 0) throw DataError("batch sizes must be positive");
  }
  for (std::size_t bs : batch_sizes) {
    for (std::size_t w = 0; w < opt.warmup; ++w) {
      // Warmup cycles through the data so a short corpus still fills a batch.
      std::vector<Encoding> wa, wb;
      for (std::size_t k = 0; k < bs; ++k) {
        wa.push_back(ea[(w * bs + k) % n]);
        wb.push_back(eb[(w * bs + k) % n]);
      }
      score_batch(a, b, head, wa, wb);
    }
  }
  // Passes are interleaved across batch sizes so a slow stretch of machine
  // time spreads over every row rather than skewing one.
  const std::size_t rows = batch_sizes.size();
  struct Pass {
    double total = 0.0;
    LatencyStats latency;
  };
  std::vector<std::optional<Pass>> best(rows);
  std::vector<std::uint64_t> peak(rows, 0);
  for (std::size_t r = 0; r < opt.repeats; ++r) {
    for (std::size_t i = 0; i < rows; ++i) {
      const std::size_t bs = batch_sizes[i];
      allocation_meter().reset_peak();
      std::vector<double> lat;
      Pass pass;
      for (std::size_t start = 0; start < n; start += bs) {
        const std::size_t len = std::min(bs, n - start);
        const auto sa = std::span<const Encoding>(ea).subspan(start, len);
        const auto sb = std::span<const Encoding>(eb).subspan(start, len);
        const auto t0 = clock::now();
        score_batch(a, b, head, sa, sb);
        const double sec = std::chrono::duration<double>(clock::now() - t0).count();
        pass.total += sec;
        lat.push_back(sec * 1e3);
      }
      pass.latency = {percentile(lat, 50.0), percentile(lat, 95.0)};
      if (!best[i] || pass.total < best[i]->total) best[i] = pass;
      peak[i] = std::max(peak[i], allocation_meter().peak_bytes());
    }
  }
  for (std::size_t i = 0; i < rows; ++i) {
    BenchRow row;
    row.batch = batch_sizes[i];
    row.samples = n;
    row.samples_per_sec = best[i]->total > 0.0 ? static_cast<double>(n) / best[i]->total : 0.0;
    row.latency_ms = best[i]->latency;
    row.peak_bytes = peak[i];
    rep.rows.push_back(row);
  }
  return rep;
}

inline nlohmann::ordered_json to_json(const BenchReport& r) {
  nlohmann::ordered_json j;
  j["seq_len"] = r.seq_len;
  j["warmup_batches"] = r.warmup;
  j["repeats"] = r.repeats;
  j["threads"] = r.threads;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    j["rows"].push_back({{"batch", row.batch},
                         {"samples", row.samples},
                         {"samples_per_sec", row.samples_per_sec},
                         {"latency_ms", {{"p50", row.latency_ms.p50}, {"p95", row.latency_ms.p95}}},
                         {"peak_bytes", row.peak_bytes}});
  }
  return j;
}

inline std::string to_csv(const BenchReport& r) {
  std::string out = "batch,samples,samples_per_sec,latency_p50_ms,latency_p95_ms,peak_bytes\n";
  for (const auto& row : r.rows) {
    out += std::to_string(row.batch) + "," + std::to_string(row.samples) + "," +
           format_metric(row.samples_per_sec, 3) + "," + format_metric(row.latency_ms.p50, 3) + "," +
           format_metric(row.latency_ms.p95, 3) + "," + std::to_string(row.peak_bytes) + "\n";
  }
  return out;
}

}  // namespace duolens
