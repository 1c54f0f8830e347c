#pragma once

// Run configuration for the command-line workflows. A config is a JSON file;
// relative paths inside it resolve against the file's directory and unknown
// keys are rejected so typos fail loudly.
//
// {
//   "encoder_a": {"bundle": "a.dlt", "pooling": "mean",
//                 "tokenizer": {"kind": "byte-bpe", "vocab": "a.json", "merges": "a.merges"}},
//   "encoder_b": "b.dlt",              // shorthand: tokenizer named in the bundle metadata
//   "head": "head.dlt",
//   "data": {"dir": "splits"},         // or explicit "train"/"dev"/"test" files
//   "chunking": {"enabled": true, "window": 512, "stride": 448, "aggregation": "mean"},
//   "threshold": 0.5,
//   "seed": 42,
//   "train": {"lr": 0.001, "epochs": 20, "batch": 32, "optimizer": "adam",
//             "momentum": 0.9, "patience": 5, "fusion_dim": 256},
//   "bench": {"samples": 32, "warmup": 3, "repeats": 10, "seq_len": 512}
// }

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "duolens/bundle.hpp"
#include "duolens/encoder.hpp"
#include "duolens/errors.hpp"
#include "duolens/fusion.hpp"
#include "duolens/pipeline.hpp"
#include "duolens/tokenizer.hpp"

namespace duolens {

namespace fs = std::filesystem;

struct TokenizerSpec {
  VocabKind kind = VocabKind::WordPiece;
  fs::path vocab;
  fs::path merges;
  bool lowercase = false;
};

struct EncoderSpec {
  fs::path bundle;
  std::optional<TokenizerSpec> tokenizer;  // falls back to the bundle metadata
  std::optional<Pooling> pooling;          // overrides the bundle's pooling
};

struct BenchConfig {
  std::uint32_t samples = 32;
  std::uint32_t warmup = 3;
  std::uint32_t repeats = 10;
  std::uint32_t seq_len = 512;
};

struct RunConfig {
  std::optional<EncoderSpec> encoder_a, encoder_b;
  std::optional<fs::path> head;
  std::map<std::string, fs::path> data;  // split name -> JSONL file
  DetectorOptions detector;
  TrainConfig train;
  BenchConfig bench;

  std::uint64_t seed() const noexcept { return train.seed; }

  const EncoderSpec& require_encoder(char which) const {
    const auto& e = which == 'a' ? encoder_a : encoder_b;
    if (!e) throw ConfigError(std::string("config is missing 'encoder_") + which + "'");
    return *e;
  }

  const fs::path& require_head() const {
    if (!head) throw ConfigError("config is missing 'head'");
    return *head;
  }

  const fs::path& split_path(const std::string& name) const {
    auto it = data.find(name);
    if (it == data.end()) throw ConfigError("config names no '" + name + "' split under 'data'");
    return it->second;
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where, std::set<std::string> allowed) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) {
      throw ConfigError("config: unknown key '" + (where.empty() ? k : where + "." + k) + "'");
    }
  }
}

template <class T>
T get_as(const nlohmann::json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: '" + where + "' has the wrong type");
  }
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path raw(p);
  return raw.is_absolute() ? raw : (base / raw).lexically_normal();
}

inline TokenizerSpec parse_tokenizer(const nlohmann::json& j, const fs::path& base, const std::string& where) {
  check_keys(j, where, {"kind", "vocab", "merges", "lowercase"});
  TokenizerSpec t;
  if (!j.contains("kind") || !j.contains("vocab")) throw ConfigError("config: '" + where + "' needs kind and vocab");
  try {
    t.kind = parse_vocab_kind(get_as<std::string>(j["kind"], where + ".kind"));
  } catch (const TokenizerError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  t.vocab = resolve(base, get_as<std::string>(j["vocab"], where + ".vocab"));
  if (j.contains("merges")) t.merges = resolve(base, get_as<std::string>(j["merges"], where + ".merges"));
  if (j.contains("lowercase")) t.lowercase = get_as<bool>(j["lowercase"], where + ".lowercase");
  return t;
}

inline EncoderSpec parse_encoder(const nlohmann::json& j, const fs::path& base, const std::string& where) {
  EncoderSpec e;
  if (j.is_string()) {
    e.bundle = resolve(base, j.get<std::string>());
    return e;
  }
  check_keys(j, where, {"bundle", "tokenizer", "pooling"});
  if (!j.contains("bundle")) throw ConfigError("config: '" + where + ".bundle' is required");
  e.bundle = resolve(base, get_as<std::string>(j["bundle"], where + ".bundle"));
  if (j.contains("tokenizer")) e.tokenizer = parse_tokenizer(j["tokenizer"], base, where + ".tokenizer");
  if (j.contains("pooling")) {
    try {
      e.pooling = parse_pooling(get_as<std::string>(j["pooling"], where + ".pooling"));
    } catch (const DataError& err) {
      throw ConfigError(std::string("config: ") + err.what());
    }
  }
  return e;
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j, const fs::path& base) {
  using detail::get_as;
  detail::check_keys(j, "", {"encoder_a", "encoder_b", "head", "data", "chunking", "threshold", "seed", "train",
                             "bench"});
  RunConfig c;
  if (j.contains("encoder_a")) c.encoder_a = detail::parse_encoder(j["encoder_a"], base, "encoder_a");
  if (j.contains("encoder_b")) c.encoder_b = detail::parse_encoder(j["encoder_b"], base, "encoder_b");
  if (j.contains("head")) c.head = detail::resolve(base, get_as<std::string>(j["head"], "head"));
  if (j.contains("data")) {
    const auto& d = j["data"];
    detail::check_keys(d, "data", {"dir", "train", "dev", "test"});
    if (d.contains("dir")) {
      const fs::path dir = detail::resolve(base, get_as<std::string>(d["dir"], "data.dir"));
      for (const char* s : {"train", "dev", "test"}) c.data[s] = dir / (std::string(s) + ".jsonl");
    }
    for (const char* s : {"train", "dev", "test"}) {
      if (d.contains(s)) c.data[s] = detail::resolve(base, get_as<std::string>(d[s], std::string("data.") + s));
    }
  }
  if (j.contains("chunking")) {
    const auto& ch = j["chunking"];
    detail::check_keys(ch, "chunking", {"enabled", "window", "stride", "aggregation"});
    if (ch.contains("enabled")) c.detector.chunking = get_as<bool>(ch["enabled"], "chunking.enabled");
    if (ch.contains("window")) c.detector.window = get_as<std::uint32_t>(ch["window"], "chunking.window");
    if (ch.contains("stride")) c.detector.stride = get_as<std::uint32_t>(ch["stride"], "chunking.stride");
    if (ch.contains("aggregation")) {
      try {
        c.detector.aggregation = parse_aggregation(get_as<std::string>(ch["aggregation"], "chunking.aggregation"));
      } catch (const DataError& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    }
  }
  if (j.contains("threshold")) {
    c.detector.threshold = get_as<double>(j["threshold"], "threshold");
    if (!(c.detector.threshold >= 0.0 && c.detector.threshold <= 1.0)) {
      throw ConfigError("config: 'threshold' must lie in [0, 1]");
    }
  }
  if (j.contains("seed")) c.train.seed = get_as<std::uint64_t>(j["seed"], "seed");
  if (j.contains("train")) {
    const auto& t = j["train"];
    detail::check_keys(t, "train", {"lr", "epochs", "batch", "optimizer", "momentum", "patience", "fusion_dim"});
    if (t.contains("lr")) c.train.lr = get_as<double>(t["lr"], "train.lr");
    if (t.contains("epochs")) c.train.epochs = get_as<std::uint32_t>(t["epochs"], "train.epochs");
    if (t.contains("batch")) c.train.batch = get_as<std::uint32_t>(t["batch"], "train.batch");
    if (t.contains("momentum")) c.train.momentum = get_as<double>(t["momentum"], "train.momentum");
    if (t.contains("patience")) c.train.patience = get_as<std::uint32_t>(t["patience"], "train.patience");
    if (t.contains("fusion_dim")) c.train.fusion_dim = get_as<std::uint32_t>(t["fusion_dim"], "train.fusion_dim");
    if (t.contains("optimizer")) {
      const auto o = get_as<std::string>(t["optimizer"], "train.optimizer");
      if (o == "adam") {
        c.train.optimizer = OptimizerKind::Adam;
      } else if (o == "sgd") {
        c.train.optimizer = OptimizerKind::Sgd;
      } else {
        throw ConfigError("config: 'train.optimizer' must be adam or sgd");
      }
    }
    try {
      c.train.validate();
    } catch (const DataError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  if (j.contains("bench")) {
    const auto& b = j["bench"];
    detail::check_keys(b, "bench", {"samples", "warmup", "repeats", "seq_len"});
    if (b.contains("samples")) c.bench.samples = get_as<std::uint32_t>(b["samples"], "bench.samples");
    if (b.contains("warmup")) c.bench.warmup = get_as<std::uint32_t>(b["warmup"], "bench.warmup");
    if (b.contains("repeats")) c.bench.repeats = get_as<std::uint32_t>(b["repeats"], "bench.repeats");
    if (b.contains("seq_len")) c.bench.seq_len = get_as<std::uint32_t>(b["seq_len"], "bench.seq_len");
    if (c.bench.samples == 0 || c.bench.repeats == 0 || c.bench.seq_len < 3) {
      throw ConfigError("config: bench needs samples >= 1, repeats >= 1, seq_len >= 3");
    }
  }
  if (c.detector.window < 3 || c.detector.stride < 1 || c.detector.stride > c.detector.window - 2) {
    throw ConfigError("config: chunking needs window >= 3 and 1 <= stride <= window - 2");
  }
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

inline const char* to_string(OptimizerKind k) noexcept { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

// Every setting after defaults and path resolution, for the echo written next to outputs.
inline nlohmann::ordered_json resolved(const RunConfig& c) {
  using oj = nlohmann::ordered_json;
  auto enc = [](const std::optional<EncoderSpec>& e) -> oj {
    if (!e) return nullptr;
    oj j;
    j["bundle"] = e->bundle.generic_string();
    if (e->tokenizer) {
      j["tokenizer"] = {{"kind", to_string(e->tokenizer->kind)},
                        {"vocab", e->tokenizer->vocab.generic_string()},
                        {"merges", e->tokenizer->merges.generic_string()},
                        {"lowercase", e->tokenizer->lowercase}};
    } else {
      j["tokenizer"] = "from-bundle";
    }
    j["pooling"] = e->pooling ? oj(to_string(*e->pooling)) : oj("from-bundle");
    return j;
  };
  oj j;
  j["encoder_a"] = enc(c.encoder_a);
  j["encoder_b"] = enc(c.encoder_b);
  j["head"] = c.head ? oj(c.head->generic_string()) : oj(nullptr);
  j["data"] = oj::object();
  for (const auto& [k, v] : c.data) j["data"][k] = v.generic_string();
  j["chunking"] = {{"enabled", c.detector.chunking},
                   {"window", c.detector.window},
                   {"stride", c.detector.stride},
                   {"aggregation", to_string(c.detector.aggregation)}};
  j["threshold"] = c.detector.threshold;
  j["seed"] = c.train.seed;
  j["train"] = {{"lr", c.train.lr},
                {"epochs", c.train.epochs},
                {"batch", c.train.batch},
                {"optimizer", to_string(c.train.optimizer)},
                {"momentum", c.train.momentum},
                {"patience", c.train.patience},
                {"fusion_dim", c.train.fusion_dim}};
  j["bench"] = {{"samples", c.bench.samples},
                {"warmup", c.bench.warmup},
                {"repeats", c.bench.repeats},
                {"seq_len", c.bench.seq_len}};
  return j;
}

// Tokenizer recorded in an encoder bundle's metadata: keys tokenizer, vocab,
// merges, lowercase; paths relative to the bundle file.
inline TokenizerSpec tokenizer_from_metadata(const TensorBundle& b, const fs::path& bundle_path) {
  TokenizerSpec t;
  const fs::path base = bundle_path.parent_path();
  const auto kind = b.meta("tokenizer");
  const auto vocab = b.meta("vocab");
  if (!kind || !vocab) {
    throw ConfigError("encoder bundle " + bundle_path.string() +
                      " names no tokenizer; give one under the encoder's 'tokenizer' key");
  }
  t.kind = parse_vocab_kind(*kind);
  t.vocab = detail::resolve(base, *vocab);
  if (auto m = b.meta("merges")) t.merges = detail::resolve(base, *m);
  t.lowercase = b.meta("lowercase").value_or("false") == "true";
  return t;
}

inline void set_tokenizer_metadata(TensorBundle& b, const TokenizerSpec& t, const fs::path& bundle_path) {
  const fs::path base = bundle_path.parent_path();
  auto rel = [&](const fs::path& p) {
    const fs::path r = p.lexically_relative(base.empty() ? "." : base);
    return (r.empty() ? p : r).generic_string();
  };
  b.metadata()["tokenizer"] = to_string(t.kind);
  b.metadata()["vocab"] = rel(t.vocab);
  if (!t.merges.empty()) b.metadata()["merges"] = rel(t.merges);
  b.metadata()["lowercase"] = t.lowercase ? "true" : "false";
}

inline EncoderBranch load_branch(const EncoderSpec& spec) {
  TensorBundle bundle = load_bundle(spec.bundle);
  const TokenizerSpec t = spec.tokenizer ? *spec.tokenizer : tokenizer_from_metadata(bundle, spec.bundle);
  EncoderConfig cfg = EncoderConfig::from_metadata(bundle);
  if (spec.pooling) cfg.pooling = *spec.pooling;
  EncoderModel model(cfg, std::move(bundle));
  Tokenizer tok = load_tokenizer(t.kind, t.vocab, t.merges, t.lowercase);
  if (tok.vocab().size() > cfg.vocab_size) {
    throw ConfigError("tokenizer for " + spec.bundle.string() + " has " + std::to_string(tok.vocab().size()) +
                      " tokens but the encoder embeds only " + std::to_string(cfg.vocab_size));
  }
  return {std::move(model), std::move(tok)};
}

}  // namespace duolens
