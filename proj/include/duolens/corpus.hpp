#pragma once

// Corpus construction: ingest labeled JSONL pools, balance labels within each
// language, split into train/dev/test, and the two code perturbations used for
// robustness evaluation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "duolens/errors.hpp"
#include "duolens/lexer.hpp"
#include "duolens/sample.hpp"

namespace duolens {

struct Pool {
  std::vector<Sample> samples;
  std::size_t duplicates_dropped = 0;
};

namespace detail {

inline void ingest_stream(std::istream& in, const std::string& name, Pool& pool,
                          std::unordered_set<std::string>& ids, std::unordered_set<std::string>& texts) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    Sample s;
    try {
      s = sample_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError(where + ": invalid JSON: " + e.what());
    } catch (const CorpusError& e) {
      throw CorpusError(where + ": " + e.what());
    }
    if (!ids.insert(s.id).second) throw CorpusError(where + ": duplicate id '" + s.id + "'");
    if (!texts.insert(s.text).second) {
      ++pool.duplicates_dropped;
      continue;
    }
    pool.samples.push_back(std::move(s));
  }
}

}  // namespace detail

// Reads one JSONL stream. `name` is used in error messages.
inline Pool ingest_stream(std::istream& in, const std::string& name = "<stream>") {
  Pool pool;
  std::unordered_set<std::string> ids, texts;
  detail::ingest_stream(in, name, pool, ids, texts);
  return pool;
}

// Union of several JSONL files in the given order. Ids must be unique across
// all files; a text seen before is dropped (first occurrence wins).
inline Pool ingest(const std::vector<std::filesystem::path>& paths) {
  Pool pool;
  std::unordered_set<std::string> ids, texts;
  for (const auto& p : paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw CorpusError("cannot open " + p.string());
    detail::ingest_stream(in, p.string(), pool, ids, texts);
  }
  return pool;
}

inline std::vector<Sample> read_jsonl(const std::filesystem::path& path) { return ingest({path}).samples; }

inline void write_jsonl(std::ostream& out, const std::vector<Sample>& samples) {
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_jsonl(out, samples);
}

inline void sort_by_id(std::vector<Sample>& v) {
  std::sort(v.begin(), v.end(), [](const Sample& a, const Sample& b) { return a.id < b.id; });
}

struct PoolCensus {
  std::map<std::pair<std::string, int>, std::uint32_t> counts;
  std::map<std::string, std::uint32_t> per_language_cap;

  std::uint32_t count(const std::string& lang, int label) const {
    auto it = counts.find({lang, label});
    return it == counts.end() ? 0 : it->second;
  }
};

inline PoolCensus census(const std::vector<Sample>& pool) {
  PoolCensus c;
  for (const auto& s : pool) ++c.counts[{s.language, s.label}];
  std::map<std::string, bool> langs;
  for (const auto& [key, n] : c.counts) langs[key.first] = true;
  for (const auto& [lang, _] : langs) c.per_language_cap[lang] = std::min(c.count(lang, 0), c.count(lang, 1));
  return c;
}

inline nlohmann::ordered_json to_json(const PoolCensus& c) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [lang, cap] : c.per_language_cap) {
    j[lang] = {{"human", c.count(lang, 0)}, {"machine", c.count(lang, 1)}, {"cap", cap}};
  }
  return j;
}

struct BalanceResult {
  std::vector<Sample> corpus;  // sorted by id
  PoolCensus census;
  std::vector<std::string> dropped_languages;
  std::vector<std::string> warnings;
};

namespace detail {

// Seeded uniform choice of k of the items without replacement (partial
// Fisher-Yates); the input order must already be canonical.
template <class T>
std::vector<T> sample_without_replacement(std::vector<T> items, std::size_t k, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < k && i + 1 < items.size(); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
  items.resize(std::min(k, items.size()));
  return items;
}

}  // namespace detail

// Keeps, for every language, cap = min(#human, #machine) samples of each label.
inline BalanceResult balance(std::vector<Sample> pool, std::uint64_t seed) {
  if (pool.empty()) throw CorpusError("cannot balance an empty pool");
  sort_by_id(pool);
  BalanceResult r;
  r.census = census(pool);
  std::map<std::pair<std::string, int>, std::vector<Sample>> strata;
  for (auto& s : pool) strata[{s.language, s.label}].push_back(std::move(s));
  std::mt19937_64 rng(seed);
  for (const auto& [lang, cap] : r.census.per_language_cap) {
    if (cap == 0) {
      r.dropped_languages.push_back(lang);
      r.warnings.push_back("language '" + lang + "' has only one label; dropped");
      continue;
    }
    for (int label : {0, 1}) {
      auto kept = detail::sample_without_replacement(std::move(strata[{lang, label}]), cap, rng);
      for (auto& s : kept) r.corpus.push_back(std::move(s));
    }
  }
  sort_by_id(r.corpus);
  return r;
}

struct SplitFractions {
  double train = 0.8, dev = 0.1, test = 0.1;
};

struct Splits {
  std::vector<Sample> train, dev, test;  // each sorted by id
  std::vector<std::string> warnings;
};

// Stratified by (language, label). Each stratum is shuffled with the shared
// seeded generator; dev and test take floor(f * n), train keeps the rest.
inline Splits split(std::vector<Sample> corpus, std::uint64_t seed, SplitFractions f = {}) {
  if (f.train < 0 || f.dev < 0 || f.test < 0 || std::abs(f.train + f.dev + f.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  sort_by_id(corpus);
  std::map<std::pair<std::string, int>, std::vector<Sample>> strata;
  for (auto& s : corpus) strata[{s.language, s.label}].push_back(std::move(s));
  std::mt19937_64 rng(seed);
  Splits out;
  for (auto& [key, items] : strata) {
    const std::size_t n = items.size();
    if (n < 3) {
      out.warnings.push_back("stratum (" + key.first + ", " + std::to_string(key.second) + ") has " +
                             std::to_string(n) + " sample(s); all assigned to train");
      for (auto& s : items) out.train.push_back(std::move(s));
      continue;
    }
    std::shuffle(items.begin(), items.end(), rng);
    const auto n_dev = static_cast<std::size_t>(std::floor(f.dev * static_cast<double>(n) + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(f.test * static_cast<double>(n) + 1e-9));
    for (std::size_t i = 0; i < n; ++i) {
      auto& dst = i < n_dev ? out.dev : i < n_dev + n_test ? out.test : out.train;
      dst.push_back(std::move(items[i]));
    }
  }
  sort_by_id(out.train);
  sort_by_id(out.dev);
  sort_by_id(out.test);
  return out;
}

// ---------------------------------------------------------------------------
// Perturbations

enum class Transform { Rename, Reformat };

inline const char* to_string(Transform t) noexcept { return t == Transform::Rename ? "rename" : "reformat"; }

inline Transform parse_transform(std::string_view s) {
  if (s == "rename") return Transform::Rename;
  if (s == "reformat") return Transform::Reformat;
  throw ConfigError("unknown transform '" + std::string(s) + "' (expected rename|reformat)");
}

struct PerturbRecord {
  std::string original_id;
  Transform transform = Transform::Rename;
  std::vector<std::pair<std::string, std::string>> mapping;  // original -> new, by first appearance
};

inline nlohmann::ordered_json to_json(const PerturbRecord& r) {
  nlohmann::ordered_json j;
  j["original_id"] = r.original_id;
  j["transform"] = to_string(r.transform);
  if (r.transform == Transform::Rename) {
    j["mapping"] = nlohmann::ordered_json::object();
    for (const auto& [from, to] : r.mapping) j["mapping"][from] = to;
  }
  return j;
}

// Every distinct non-keyword identifier becomes v<k>, k counting from 0 in
// order of first appearance. Strings, comments and preprocessor lines are
// left as they are. Names already of the form v<k> are renamed like any other.
inline std::pair<std::string, PerturbRecord> perturb_rename(std::string_view code, std::string_view language,
                                                            std::uint64_t /*seed*/ = 0) {
  const auto lang = lex::parse_language(language);
  PerturbRecord rec;
  rec.transform = Transform::Rename;
  std::unordered_map<std::string, std::string> names;
  std::string out;
  out.reserve(code.size());
  for (const auto& t : lex::tokenize(code, lang)) {
    if (t.kind != lex::TokenKind::Identifier) {
      out += t.text;
      continue;
    }
    auto [it, fresh] = names.try_emplace(t.text, "v" + std::to_string(names.size()));
    if (fresh) rec.mapping.emplace_back(t.text, it->second);
    out += it->second;
  }
  return {std::move(out), std::move(rec)};
}

inline std::vector<std::string> identifier_tokens(std::string_view code, std::string_view language) {
  std::vector<std::string> ids;
  for (auto& t : lex::tokenize(code, lex::parse_language(language))) {
    if (t.kind == lex::TokenKind::Identifier) ids.push_back(std::move(t.text));
  }
  return ids;
}

// Whitespace-only rewrite: leading indentation is re-expressed with tabs or
// four-space units (seeded), runs of blank lines become exactly one or two
// (seeded), trailing whitespace is removed. Idempotent for a fixed seed.
inline std::string perturb_reformat(std::string_view code, std::uint64_t seed) {
  if (code.empty()) return {};
  std::mt19937_64 rng(seed);
  const bool use_tabs = std::bernoulli_distribution(0.5)(rng);
  const int blank_run = std::bernoulli_distribution(0.5)(rng) ? 2 : 1;

  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (true) {
    const std::size_t nl = code.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(code.substr(pos));
      break;
    }
    lines.push_back(code.substr(pos, nl - pos));
    pos = nl + 1;
  }
  const bool trailing_newline = !code.empty() && code.back() == '\n';
  if (trailing_newline) lines.pop_back();

  auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; };
  std::string out;
  out.reserve(code.size());
  int pending_blanks = 0;
  bool first = true;
  auto emit_line = [&](std::string_view text) {
    if (!first) out += '\n';
    first = false;
    out += text;
  };
  for (std::string_view line : lines) {
    std::size_t end = line.size();
    while (end > 0 && is_ws(line[end - 1])) --end;
    line = line.substr(0, end);
    if (line.empty()) {
      ++pending_blanks;
      continue;
    }
    if (pending_blanks > 0) {
      for (int i = 0; i < blank_run; ++i) emit_line({});
      pending_blanks = 0;
    }
    std::size_t cols = 0, k = 0;
    for (; k < line.size() && (line[k] == ' ' || line[k] == '\t'); ++k) cols += line[k] == '\t' ? 4 : 1;
    std::string indent = use_tabs ? std::string(cols / 4, '\t') : std::string(cols / 4 * 4, ' ');
    indent.append(cols % 4, ' ');
    emit_line(indent + std::string(line.substr(k)));
  }
  if (pending_blanks > 0) {
    for (int i = 0; i < blank_run; ++i) emit_line({});
  }
  if (trailing_newline) out += '\n';
  return out;
}

// Removes every whitespace byte; used to check that reformatting only touched whitespace.
inline std::string strip_whitespace(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  }
  return out;
}

// Per-sample seed so results do not depend on corpus order.
inline std::uint64_t sample_seed(std::uint64_t seed, std::string_view id) noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : id) h = (h ^ c) * 1099511628211ull;
  return h ^ (seed * 0x9E3779B97F4A7C15ull);
}

struct PerturbedCorpus {
  std::vector<Sample> samples;
  std::vector<PerturbRecord> records;
};

inline PerturbedCorpus perturb_corpus(const std::vector<Sample>& in, Transform t, std::uint64_t seed) {
  PerturbedCorpus out;
  for (const auto& s : in) {
    Sample p = s;
    PerturbRecord rec;
    const std::uint64_t ss = sample_seed(seed, s.id);
    if (t == Transform::Rename) {
      try {
        std::tie(p.text, rec) = perturb_rename(s.text, s.language, ss);
      } catch (const DataError& e) {
        throw CorpusError("sample '" + s.id + "': " + e.what());
      }
    } else {
      p.text = perturb_reformat(s.text, ss);
      rec.transform = Transform::Reformat;
    }
    // A perturbation that strips a document to nothing would break the schema.
    if (p.text.empty()) p.text = s.text;
    rec.original_id = s.id;
    out.samples.push_back(std::move(p));
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace duolens
