#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "duolens/errors.hpp"
#include "duolens/sample.hpp"

namespace duolens {

// Mann-Whitney AUROC with midranks for ties:
//   (R1 - n1 (n1 + 1) / 2) / (n1 n0)
// where R1 is the rank sum of the positives.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("auroc: scores and labels differ in length");
  std::size_t n1 = 0;
  for (int y : labels) n1 += (y == 1);
  const std::size_t n0 = labels.size() - n1;
  if (n1 == 0 || n0 == 0) throw DataError("AUROC undefined: only one class present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share the midrank.
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum += midrank;
    }
    i = j;
  }
  const double u = rank_sum - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);
  return u / (static_cast<double>(n1) * static_cast<double>(n0));
}

struct Confusion {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  double accuracy() const noexcept { return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0; }
  bool operator==(const Confusion&) const = default;
};

inline Confusion confusion(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw DataError("confusion: preds and labels differ in length");
  Confusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == 1) {
      (labels[i] == 1 ? c.tp : c.fp)++;
    } else {
      (labels[i] == 0 ? c.tn : c.fn)++;
    }
  }
  return c;
}

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// A zero denominator contributes 0 to precision, recall, or F1.
inline ClassStats class_stats(const Confusion& c, int cls) {
  const double tp = static_cast<double>(cls == 1 ? c.tp : c.tn);
  const double fp = static_cast<double>(cls == 1 ? c.fp : c.fn);
  const double fn = static_cast<double>(cls == 1 ? c.fn : c.fp);
  ClassStats s;
  s.precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
  s.recall = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
  s.f1 = (2 * tp + fp + fn) > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
  return s;
}

inline double f1_macro(std::span<const int> preds, std::span<const int> labels) {
  if (preds.empty()) throw DataError("f1_macro needs at least one prediction");
  const Confusion c = confusion(preds, labels);
  return 0.5 * (class_stats(c, 0).f1 + class_stats(c, 1).f1);
}

// Linear interpolation between closest ranks; p in [0, 100].
inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct LatencyStats {
  double p50 = 0.0;
  double p95 = 0.0;
};

struct EvalReport {
  std::size_t n = 0;
  std::optional<double> auroc;  // absent when the split has one class
  double f1_macro = 0.0;
  double accuracy = 0.0;
  std::map<std::string, double> per_language;
  std::map<std::string, std::size_t> per_language_count;
  std::map<int, ClassStats> per_class;
  Confusion confusion;
  // Wall-clock figures; filled by callers that time the run.
  double samples_per_sec = 0.0;
  LatencyStats latency_ms;
  std::uint64_t peak_bytes = 0;
};

// Anything with `id`, `score` and `label` members can be scored.
template <class Scored>
EvalReport accuracy_report(std::span<const Scored> detections, std::span<const Sample> samples) {
  std::unordered_map<std::string, const Scored*> by_id;
  for (const auto& d : detections) by_id.emplace(d.id, &d);
  std::vector<std::string> missing;
  for (const auto& s : samples) {
    if (!by_id.count(s.id)) missing.push_back(s.id);
  }
  if (!missing.empty() || detections.size() != samples.size()) {
    std::set<std::string> sample_ids;
    for (const auto& s : samples) sample_ids.insert(s.id);
    for (const auto& d : detections) {
      if (!sample_ids.count(d.id)) missing.push_back(d.id);
    }
    std::string msg = "detections and samples do not join by id; unmatched ids:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw DataError(msg);
  }

  std::vector<double> scores;
  std::vector<int> preds, labels;
  std::map<std::string, std::pair<std::size_t, std::size_t>> lang;  // correct, total
  for (const auto& s : samples) {
    const Scored& d = *by_id.at(s.id);
    scores.push_back(static_cast<double>(d.score));
    preds.push_back(d.label);
    labels.push_back(s.label);
    auto& [ok, tot] = lang[s.language];
    ok += (d.label == s.label);
    ++tot;
  }
  EvalReport r;
  r.n = samples.size();
  r.confusion = confusion(preds, labels);
  if (r.confusion.tp + r.confusion.fn > 0 && r.confusion.tn + r.confusion.fp > 0) r.auroc = auroc(scores, labels);
  r.f1_macro = samples.empty() ? 0.0 : f1_macro(preds, labels);
  r.accuracy = r.confusion.accuracy();
  for (const auto& [l, ct] : lang) {
    r.per_language[l] = static_cast<double>(ct.first) / static_cast<double>(ct.second);
    r.per_language_count[l] = ct.second;
  }
  r.per_class[0] = class_stats(r.confusion, 0);
  r.per_class[1] = class_stats(r.confusion, 1);
  return r;
}

inline nlohmann::ordered_json to_json(const EvalReport& r, bool include_timing = true) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["auroc"] = r.auroc ? nlohmann::ordered_json(*r.auroc) : nlohmann::ordered_json(nullptr);
  j["f1_macro"] = r.f1_macro;
  j["accuracy"] = r.accuracy;
  nlohmann::ordered_json pl = nlohmann::ordered_json::object();
  for (const auto& [l, a] : r.per_language) pl[l] = {{"accuracy", a}, {"n", r.per_language_count.at(l)}};
  j["per_language"] = pl;
  nlohmann::ordered_json pc = nlohmann::ordered_json::object();
  for (const auto& [c, s] : r.per_class) {
    pc[std::to_string(c)] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  }
  j["per_class"] = pc;
  j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
  if (include_timing) {
    j["samples_per_sec"] = r.samples_per_sec;
    j["latency_ms"] = {{"p50", r.latency_ms.p50}, {"p95", r.latency_ms.p95}};
    j["peak_bytes"] = r.peak_bytes;
  }
  return j;
}

inline std::string format_metric(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// One header row plus one data row.
inline std::string to_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "n,auroc,f1_macro,accuracy,tp,fp,tn,fn\n";
  os << r.n << ',' << (r.auroc ? format_metric(*r.auroc) : std::string("-")) << ','
     << format_metric(r.f1_macro) << ',' << format_metric(r.accuracy) << ',' << r.confusion.tp << ','
     << r.confusion.fp << ',' << r.confusion.tn << ',' << r.confusion.fn << '\n';
  return os.str();
}

inline std::string per_language_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "language,n,accuracy\n";
  for (const auto& [l, a] : r.per_language) os << l << ',' << r.per_language_count.at(l) << ',' << format_metric(a) << '\n';
  return os.str();
}

// Rows: training language of the checkpoint. Columns: evaluation language.
// The diagonal is withheld.
struct CrossLangMatrix {
  std::vector<std::string> languages;
  std::vector<std::vector<std::optional<double>>> cells;

  std::optional<double> cell(const std::string& row, const std::string& col) const {
    return cells.at(index(row)).at(index(col));
  }

  std::size_t index(const std::string& lang) const {
    auto it = std::find(languages.begin(), languages.end(), lang);
    if (it == languages.end()) throw DataError("language '" + lang + "' is not in the matrix");
    return static_cast<std::size_t>(it - languages.begin());
  }

  std::size_t defined_cells() const {
    std::size_t n = 0;
    for (const auto& r : cells) {
      for (const auto& c : r) n += c.has_value();
    }
    return n;
  }

  // Row labels are "<model> (<language>)" when a model name is given.
  std::string to_csv(const std::string& model_name = "", int digits = 4) const {
    std::ostringstream os;
    os << "train_language";
    for (const auto& l : languages) os << ',' << l;
    os << '\n';
    for (std::size_t r = 0; r < languages.size(); ++r) {
      os << (model_name.empty() ? languages[r] : model_name + " (" + languages[r] + ")");
      for (std::size_t c = 0; c < languages.size(); ++c) {
        os << ',' << (cells[r][c] ? format_metric(*cells[r][c], digits) : std::string("-"));
      }
      os << '\n';
    }
    return os.str();
  }
};

// `predict` maps a checkpoint's language and an evaluation corpus to 0/1 predictions.
using CorpusPredictor = std::function<std::vector<int>(const std::string& checkpoint, std::span<const Sample>)>;

inline CrossLangMatrix cross_language_matrix(const std::vector<std::string>& checkpoint_languages,
                                             const std::map<std::string, std::vector<Sample>>& corpora,
                                             const CorpusPredictor& predict) {
  std::set<std::string> langs;
  for (const auto& [l, _] : corpora) langs.insert(l);
  for (const auto& l : checkpoint_languages) {
    if (!corpora.count(l)) throw DataError("no evaluation corpus for checkpoint language '" + l + "'");
  }
  if (langs.size() < 2) throw DataError("cross-language evaluation needs at least two languages");
  CrossLangMatrix m;
  m.languages.assign(langs.begin(), langs.end());
  m.cells.assign(m.languages.size(), std::vector<std::optional<double>>(m.languages.size()));
  const std::set<std::string> have(checkpoint_languages.begin(), checkpoint_languages.end());
  for (std::size_t r = 0; r < m.languages.size(); ++r) {
    if (!have.count(m.languages[r])) continue;
    for (std::size_t c = 0; c < m.languages.size(); ++c) {
      if (r == c) continue;
      const auto& corpus = corpora.at(m.languages[c]);
      if (corpus.empty()) throw DataError("evaluation corpus for '" + m.languages[c] + "' is empty");
      const auto preds = predict(m.languages[r], corpus);
      if (preds.size() != corpus.size()) throw InternalError("predictor returned the wrong number of labels");
      std::size_t ok = 0;
      for (std::size_t i = 0; i < corpus.size(); ++i) ok += (preds[i] == corpus[i].label);
      m.cells[r][c] = static_cast<double>(ok) / static_cast<double>(corpus.size());
    }
  }
  return m;
}

}  // namespace duolens
