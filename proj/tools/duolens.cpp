// duolens: command-line front end for dataset building, head training,
// calibration, detection, evaluation and benchmarking.
//
// Exit codes: 0 ok, 1 usage, 2 bad input data or config, 3 internal error.
// Primary outputs are deterministic for fixed inputs and seed; wall-clock
// figures go to separate *.timing.json files.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "duolens/duolens.hpp"

namespace {

namespace fs = std::filesystem;
using namespace duolens;
using oj = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

void log(const std::string& msg) { std::cerr << "duolens: " << msg << "\n"; }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

unsigned thread_count(int flag) {
  if (flag > 0) return static_cast<unsigned>(flag);
  if (const char* env = std::getenv("DUOLENS_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("DUOLENS_THREADS must be a positive integer, got '") + env + "'");
  }
  return default_threads();
}

// ---------------------------------------------------------------------------
// Output helpers. "-" means stdout.

void write_text(const std::string& dest, const std::string& content) {
  if (dest == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  const fs::path p(dest);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + dest);
  out << content;
  if (!out) throw DataError("write failed for " + dest);
}

std::string dump(const oj& j) { return j.dump(2) + "\n"; }

// Echo and timing files sit next to a file output; nothing is written for stdout.
void write_sidecars(const std::string& primary, const oj& echo, const oj& timing) {
  if (primary == "-") return;
  write_text(primary + ".config.json", dump(echo));
  write_text(primary + ".timing.json", dump(timing));
}

void write_dir_sidecars(const fs::path& dir, const oj& echo, const oj& timing) {
  write_text((dir / "resolved_config.json").string(), dump(echo));
  write_text((dir / "timing.json").string(), dump(timing));
}

std::vector<Sample> read_samples(const std::string& src) {
  if (src == "-") return ingest_stream(std::cin, "<stdin>").samples;
  return read_jsonl(src);
}

std::string samples_jsonl(const std::vector<Sample>& s) {
  std::ostringstream os;
  write_jsonl(os, s);
  return os.str();
}

// ---------------------------------------------------------------------------
// Head bundles remember how they were trained so that calibrate and
// cross-eval can rebuild the detector without a config file.

void record_branch(TensorBundle& head, const std::string& suffix, const EncoderSpec& spec, const fs::path& head_path) {
  const fs::path base = head_path.parent_path().empty() ? fs::path(".") : head_path.parent_path();
  auto rel = [&](const fs::path& p) {
    const fs::path r = fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(base).lexically_normal());
    return (r.empty() ? p : r).generic_string();
  };
  auto& m = head.metadata();
  m["encoder_" + suffix] = rel(spec.bundle);
  TokenizerSpec t = spec.tokenizer ? *spec.tokenizer : tokenizer_from_metadata(load_bundle(spec.bundle), spec.bundle);
  m["tokenizer_" + suffix] = to_string(t.kind);
  m["vocab_" + suffix] = rel(t.vocab);
  if (!t.merges.empty()) m["merges_" + suffix] = rel(t.merges);
  m["lowercase_" + suffix] = t.lowercase ? "true" : "false";
}

void record_options(TensorBundle& head, const DetectorOptions& o) {
  auto& m = head.metadata();
  m["chunking"] = o.chunking ? "true" : "false";
  m["window"] = std::to_string(o.window);
  m["stride"] = std::to_string(o.stride);
  m["aggregation"] = to_string(o.aggregation);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", o.threshold);
  m["threshold"] = buf;
}

EncoderSpec branch_from_head(const TensorBundle& head, const std::string& suffix, const fs::path& head_path) {
  const fs::path base = head_path.parent_path();
  auto need = [&](const std::string& key) {
    auto v = head.meta(key);
    if (!v) throw BundleError("head " + head_path.string() + " lacks metadata '" + key + "'; pass a --config");
    return *v;
  };
  EncoderSpec s;
  s.bundle = (base / need("encoder_" + suffix)).lexically_normal();
  TokenizerSpec t;
  t.kind = parse_vocab_kind(need("tokenizer_" + suffix));
  t.vocab = (base / need("vocab_" + suffix)).lexically_normal();
  if (auto m = head.meta("merges_" + suffix)) t.merges = (base / *m).lexically_normal();
  t.lowercase = head.meta("lowercase_" + suffix).value_or("false") == "true";
  s.tokenizer = t;
  s.pooling = parse_pooling(need("pooling_" + suffix));
  return s;
}

DetectorOptions options_from_head(const TensorBundle& head) {
  DetectorOptions o;
  auto num = [&](const char* key, auto fallback) {
    auto v = head.meta(key);
    if (!v) return fallback;
    try {
      return static_cast<decltype(fallback)>(std::stod(*v));
    } catch (const std::exception&) {
      throw BundleError(std::string("head metadata '") + key + "' is not a number");
    }
  };
  o.window = num("window", o.window);
  o.stride = num("stride", o.stride);
  o.threshold = num("threshold", o.threshold);
  if (auto a = head.meta("aggregation")) o.aggregation = parse_aggregation(*a);
  o.chunking = head.meta("chunking").value_or("true") == "true";
  return o;
}

Detector detector_from_head(const fs::path& head_path) {
  const TensorBundle hb = load_bundle(head_path);
  return Detector(load_branch(branch_from_head(hb, "A", head_path)), load_branch(branch_from_head(hb, "B", head_path)),
                  FusionHead::from_bundle(hb), calibration_from_bundle(hb), options_from_head(hb));
}

// Config encoders win; a config without them falls back to the head's record.
Detector detector_from_config(const RunConfig& c) {
  const fs::path head_path = c.require_head();
  const TensorBundle hb = load_bundle(head_path);
  const EncoderSpec sa = c.encoder_a ? *c.encoder_a : branch_from_head(hb, "A", head_path);
  const EncoderSpec sb = c.encoder_b ? *c.encoder_b : branch_from_head(hb, "B", head_path);
  return Detector(load_branch(sa), load_branch(sb), FusionHead::from_bundle(hb), calibration_from_bundle(hb),
                  c.detector);
}

oj command_echo(const std::string& command, oj args, const std::optional<RunConfig>& c, unsigned threads) {
  oj j;
  j["command"] = command;
  j["args"] = std::move(args);
  j["threads"] = threads;
  if (c) j["config"] = resolved(*c);
  return j;
}

// Detections plus per-document latency and the allocation peak of the run.
struct TimedDetections {
  std::vector<Detection> detections;
  std::vector<double> latency_ms;
  double wall_seconds = 0.0;
  std::uint64_t peak_bytes = 0;
};

TimedDetections detect_timed(const Detector& det, std::span<const Sample> docs, unsigned threads) {
  TimedDetections out;
  out.detections.resize(docs.size());
  out.latency_ms.resize(docs.size());
  allocation_meter().reset_peak();
  const auto t0 = Clock::now();
  parallel_for(docs.size(), threads, [&](std::size_t i) {
    const auto s = Clock::now();
    out.detections[i] = det.detect(docs[i].text, docs[i].id);
    out.latency_ms[i] = seconds_since(s) * 1e3;
  });
  out.wall_seconds = seconds_since(t0);
  out.peak_bytes = allocation_meter().peak_bytes();
  return out;
}

oj timing_json(const TimedDetections& t) {
  oj j;
  j["n"] = t.detections.size();
  j["wall_seconds"] = t.wall_seconds;
  j["samples_per_sec"] = t.wall_seconds > 0 ? static_cast<double>(t.detections.size()) / t.wall_seconds : 0.0;
  j["latency_ms"] = {{"p50", percentile(t.latency_ms, 50)}, {"p95", percentile(t.latency_ms, 95)}};
  j["peak_bytes"] = t.peak_bytes;
  return j;
}

std::string detections_jsonl(const std::vector<Detection>& d) {
  std::string s;
  for (const auto& x : d) s += to_json(x).dump() + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Subcommands

struct SynthArgs {
  std::string out;
  std::string task = "text";
  std::uint64_t seed = 42;
  std::size_t n_train = 2000, n_dev = 500, n_test = 500, per_class = 60;
};

void save_encoder(const EncoderModel& m, const TokenizerSpec& t, const fs::path& path) {
  TensorBundle b = m.params();
  set_tokenizer_metadata(b, t, path);
  save_bundle(b, path);
}

void run_synth(const SynthArgs& a) {
  const fs::path dir(a.out);
  fs::create_directories(dir / "vocab");
  EncoderConfig ca = EncoderConfig::tiny(), cb = EncoderConfig::tiny();
  ca.pooling = Pooling::Mean;
  cb.pooling = Pooling::Cls;
  oj cfg;
  cfg["encoder_a"] = "encoder_a.dlt";
  cfg["encoder_b"] = "encoder_b.dlt";
  cfg["head"] = "head.dlt";
  cfg["data"] = {{"dir", "splits"}};
  cfg["seed"] = a.seed;
  if (a.task == "text") {
    save_wordpiece_vocab(synthetic::word_wordpiece_vocab(), dir / "vocab/words.txt");
    const TokenizerSpec t{VocabKind::WordPiece, dir / "vocab/words.txt", {}, false};
    save_encoder(make_random_encoder(ca, a.seed + 1), t, dir / "encoder_a.dlt");
    save_encoder(make_random_encoder(cb, a.seed + 2), t, dir / "encoder_b.dlt");
    fs::create_directories(dir / "splits");
    const std::pair<const char*, std::size_t> parts[] = {{"train", a.n_train}, {"dev", a.n_dev}, {"test", a.n_test}};
    std::uint64_t k = 0;
    for (const auto& [name, n] : parts) {
      synthetic::TextTaskOptions o;
      o.id_prefix = name;
      write_jsonl(dir / "splits" / (std::string(name) + ".jsonl"), synthetic::disjoint_vocab_corpus(n, a.seed + 100 * k++, o));
    }
  } else if (a.task == "code") {
    save_bpe_vocab(synthetic::code_bpe_vocab(), dir / "vocab/code-bpe.json", dir / "vocab/code-bpe.merges");
    save_wordpiece_vocab(synthetic::code_wordpiece_vocab(), dir / "vocab/code-wordpiece.txt");
    save_encoder(make_random_encoder(ca, a.seed + 1),
                 {VocabKind::ByteBpe, dir / "vocab/code-bpe.json", dir / "vocab/code-bpe.merges", false},
                 dir / "encoder_a.dlt");
    save_encoder(make_random_encoder(cb, a.seed + 2), {VocabKind::WordPiece, dir / "vocab/code-wordpiece.txt", {}, false},
                 dir / "encoder_b.dlt");
    std::map<std::string, std::vector<Sample>> by_lang;
    for (auto& s : synthetic::code_corpus(a.per_class, a.seed)) by_lang[s.language].push_back(std::move(s));
    fs::create_directories(dir / "pools");
    for (const auto& [lang, v] : by_lang) write_jsonl(dir / "pools" / (lang + ".jsonl"), v);
  } else {
    throw ConfigError("unknown synth task '" + a.task + "' (expected text|code)");
  }
  write_text((dir / "config.json").string(), dump(cfg));
  // Fail now rather than at train time if a tokenizer does not fit its encoder.
  const RunConfig rc = load_config(dir / "config.json");
  load_branch(rc.require_encoder('a'));
  load_branch(rc.require_encoder('b'));
  log("synthetic " + a.task + " task written to " + dir.string());
}

struct BuildArgs {
  std::string pools, out;
  std::uint64_t seed = 42;
};

void run_build_dataset(const BuildArgs& a, unsigned threads) {
  const auto t0 = Clock::now();
  const fs::path pools(a.pools), out(a.out);
  if (!fs::is_directory(pools)) throw DataError("pools directory " + a.pools + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(pools)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .jsonl files under " + a.pools);
  const Pool pool = ingest(files);
  BalanceResult bal = balance(pool.samples, a.seed);
  const std::size_t balanced = bal.corpus.size();
  const Splits sp = split(std::move(bal.corpus), a.seed);
  fs::create_directories(out);
  write_jsonl(out / "train.jsonl", sp.train);
  write_jsonl(out / "dev.jsonl", sp.dev);
  write_jsonl(out / "test.jsonl", sp.test);
  write_text((out / "census.json").string(), dump(to_json(bal.census)));
  oj m;
  m["seed"] = a.seed;
  m["pool_files"] = oj::array();
  for (const auto& f : files) m["pool_files"].push_back(f.filename().generic_string());
  m["pool_samples"] = pool.samples.size();
  m["duplicates_dropped"] = pool.duplicates_dropped;
  m["balanced_samples"] = balanced;
  m["dropped_languages"] = bal.dropped_languages;
  m["counts"] = {{"train", sp.train.size()}, {"dev", sp.dev.size()}, {"test", sp.test.size()}};
  std::vector<std::string> warnings = bal.warnings;
  warnings.insert(warnings.end(), sp.warnings.begin(), sp.warnings.end());
  m["warnings"] = warnings;
  write_text((out / "manifest.json").string(), dump(m));
  for (const auto& w : warnings) log("warning: " + w);
  write_dir_sidecars(out, command_echo("build-dataset", {{"pools", a.pools}, {"out", a.out}, {"seed", a.seed}}, {}, threads),
                     {{"wall_seconds", seconds_since(t0)}});
  log("build-dataset: " + std::to_string(sp.train.size()) + "/" + std::to_string(sp.dev.size()) + "/" +
      std::to_string(sp.test.size()) + " train/dev/test samples");
}

struct TrainArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> seed = std::nullopt) {
  RunConfig c = load_config(path);
  if (seed) c.train.seed = *seed;
  return c;
}

void run_train_head(const TrainArgs& a, unsigned threads) {
  const auto t0 = Clock::now();
  const RunConfig c = load_run_config(a.config, a.seed);
  const EncoderBranch ea = load_branch(c.require_encoder('a'));
  const EncoderBranch eb = load_branch(c.require_encoder('b'));
  const auto train = read_jsonl(c.split_path("train"));
  const auto dev = read_jsonl(c.split_path("dev"));
  log("train-head: " + std::to_string(train.size()) + " train / " + std::to_string(dev.size()) + " dev documents");
  const auto r = train_head(ea, eb, train, dev, c.train, c.detector, threads);
  const fs::path out(a.out);
  TensorBundle hb = head_bundle(r.model, ea, eb, c.seed());
  record_branch(hb, "A", c.require_encoder('a'), out);
  record_branch(hb, "B", c.require_encoder('b'), out);
  record_options(hb, c.detector);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_bundle(hb, out);
  oj summary;
  summary["best_epoch"] = r.best_epoch;
  summary["best_dev_auroc"] = r.best_dev_auroc;
  summary["epochs"] = to_json(r.log);
  write_text(a.out + ".train.json", dump(summary));
  write_sidecars(a.out, command_echo("train-head", {{"config", a.config}, {"out", a.out}}, c, threads),
                 {{"wall_seconds", seconds_since(t0)}});
  log("train-head: best epoch " + std::to_string(r.best_epoch) + ", dev AUROC " + format_metric(r.best_dev_auroc, 4));
}

struct ProbeArgs {
  std::string config, encoder, out = "-";
};

void run_probe(const ProbeArgs& a, unsigned threads) {
  const auto t0 = Clock::now();
  const RunConfig c = load_run_config(a.config);
  // Reuse the config's tokenizer and pooling when the encoder is one of its branches.
  EncoderSpec spec{fs::path(a.encoder), std::nullopt, std::nullopt};
  for (const auto* e : {&c.encoder_a, &c.encoder_b}) {
    if (*e && fs::weakly_canonical((*e)->bundle) == fs::weakly_canonical(spec.bundle)) spec = **e;
  }
  const EncoderBranch enc = load_branch(spec);
  const auto train = read_jsonl(c.split_path("train"));
  const auto dev = read_jsonl(c.split_path("dev"));
  const auto r = linear_probe_fit(enc, train, dev, c.train, c.detector, threads);
  oj rep;
  rep["encoder"] = a.encoder;
  rep["best_epoch"] = r.best_epoch;
  rep["best_dev_auroc"] = r.best_dev_auroc;
  if (c.data.count("test")) {
    const auto test = read_jsonl(c.split_path("test"));
    const ProbeFeatures f = extract_probe_features(enc, test, c.detector, threads);
    const auto z = aggregate_groups(probe_logits(r.model, f.x), f.group, f.n_groups, c.detector.aggregation);
    struct Scored {
      std::string id;
      double score;
      int label;
    };
    std::vector<Scored> scored;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const double p = kernels::sigmoid(z[i]);
      scored.push_back({test[i].id, p, p >= c.detector.threshold ? 1 : 0});
    }
    rep["test"] = to_json(accuracy_report<Scored>(scored, test), false);
  }
  rep["epochs"] = to_json(r.log);
  if (a.out != "-") {
    TensorBundle pb = r.model.to_bundle();
    pb.metadata()["pooling"] = to_string(enc.pooling());
    pb.metadata()["seed"] = std::to_string(c.seed());
    save_bundle(pb, a.out);
    write_text(a.out + ".report.json", dump(rep));
    write_sidecars(a.out, command_echo("probe", {{"config", a.config}, {"encoder", a.encoder}, {"out", a.out}}, c, threads),
                   {{"wall_seconds", seconds_since(t0)}});
  } else {
    write_text("-", dump(rep));
  }
}

struct CalibrateArgs {
  std::string head, dev, out;
};

void run_calibrate(const CalibrateArgs& a, unsigned threads) {
  const auto t0 = Clock::now();
  const Detector det = detector_from_head(a.head);
  const auto dev = read_jsonl(a.dev);
  std::vector<double> z(dev.size());
  std::vector<int> y(dev.size());
  parallel_for(dev.size(), threads, [&](std::size_t i) {
    z[i] = det.document_logit(dev[i].text);
    y[i] = dev[i].label;
  });
  const Calibration cal = fit_temperature(z, y);
  TensorBundle hb = load_bundle(a.head);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", cal.temperature);
  hb.metadata()["temperature"] = buf;
  const std::string out = a.out.empty() ? a.head : a.out;
  save_bundle(hb, out);
  oj r;
  r["temperature"] = cal.temperature;
  r["n"] = dev.size();
  r["dev_nll_before"] = calibrated_nll(z, y, 1.0);
  r["dev_nll_after"] = calibrated_nll(z, y, cal.temperature);
  write_text(out + ".calibration.json", dump(r));
  write_text(out + ".calibration.config.json",
             dump(command_echo("calibrate", {{"head", a.head}, {"dev", a.dev}, {"out", out}}, {}, threads)));
  write_text(out + ".calibration.timing.json", dump(oj{{"wall_seconds", seconds_since(t0)}}));
  write_text("-", dump(r));
}

struct DetectArgs {
  std::string config, in = "-", out = "-";
};

// Detection input only needs `text`; `id` defaults to the 1-based line number.
std::vector<Sample> read_detect_input(const std::string& src) {
  std::ifstream file;
  if (src != "-") {
    file.open(src, std::ios::binary);
    if (!file) throw DataError("cannot open " + src);
  }
  std::istream& in = src == "-" ? std::cin : file;
  std::vector<Sample> docs;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = (src == "-" ? std::string("<stdin>") : src) + ":" + std::to_string(n);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
      throw DataError(where + ": expected an object with a string 'text'");
    }
    Sample s;
    s.text = j["text"].get<std::string>();
    s.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "line-" + std::to_string(n);
    docs.push_back(std::move(s));
  }
  return docs;
}

void run_detect(const DetectArgs& a, unsigned threads) {
  const RunConfig c = load_run_config(a.config);
  const Detector det = detector_from_config(c);
  const auto docs = read_detect_input(a.in);
  const TimedDetections t = detect_timed(det, docs, threads);
  write_text(a.out, detections_jsonl(t.detections));
  write_sidecars(a.out, command_echo("detect", {{"config", a.config}, {"in", a.in}, {"out", a.out}}, c, threads),
                 timing_json(t));
}

struct EvalArgs {
  std::string config, split = "test", out;
  bool by_language = false;
  std::vector<std::string> retention;
  std::optional<std::uint64_t> seed;
};

void run_eval(const EvalArgs& a, unsigned threads) {
  const RunConfig c = load_run_config(a.config, a.seed);
  const Detector det = detector_from_config(c);
  const auto docs = read_jsonl(c.split_path(a.split));
  const TimedDetections t = detect_timed(det, docs, threads);
  const EvalReport rep = accuracy_report<Detection>(t.detections, docs);
  oj report = to_json(rep, false);
  if (rep.auroc) {
    // Dev AUROC can saturate in an early epoch whose 0.5 threshold is still off; report the best cut.
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      s.push_back(t.detections[i].score);
      y.push_back(docs[i].label);
    }
    report["youden_threshold"] = youden_threshold(s, y);
  }
  oj timing;
  timing["clean"] = timing_json(t);

  oj retention = oj::array();
  for (const auto& name : a.retention) {
    const Transform tr = parse_transform(name);
    const PerturbedCorpus pc = perturb_corpus(docs, tr, c.seed());
    const TimedDetections tp = detect_timed(det, pc.samples, threads);
    const EvalReport prep = accuracy_report<Detection>(tp.detections, pc.samples);
    oj r;
    r["transform"] = to_string(tr);
    r["seed"] = c.seed();
    r["n"] = pc.samples.size();
    r["clean_auroc"] = rep.auroc ? oj(*rep.auroc) : oj(nullptr);
    r["perturbed_auroc"] = prep.auroc ? oj(*prep.auroc) : oj(nullptr);
    r["retention"] = rep.auroc && prep.auroc && *rep.auroc > 0 ? oj(*prep.auroc / *rep.auroc) : oj(nullptr);
    r["target"] = 0.92;
    r["clean_f1_macro"] = rep.f1_macro;
    r["perturbed_f1_macro"] = prep.f1_macro;
    // Lexical tokens (whitespace aside) before and after, per sample.
    std::size_t same = 0, lexed = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      try {
        const auto lang = lex::parse_language(docs[i].language);
        ++lexed;
        same += lex::count_significant(lex::tokenize(docs[i].text, lang)) ==
                lex::count_significant(lex::tokenize(pc.samples[i].text, lang));
      } catch (const DataError&) {
        // Not a code language the lexer knows.
      }
    }
    r["lexed_samples"] = lexed;
    r["token_count_preserved"] = lexed ? oj(static_cast<double>(same) / static_cast<double>(lexed)) : oj(nullptr);
    retention.push_back(r);
    timing[std::string("perturbed_") + to_string(tr)] = timing_json(tp);
  }

  if (a.out.empty()) {
    if (!a.retention.empty()) report["retention"] = retention;
    if (a.by_language) report["per_language_csv"] = per_language_csv(rep);
    write_text("-", dump(report));
    log("eval: " + format_metric(timing["clean"]["samples_per_sec"].get<double>(), 1) + " samples/sec");
    return;
  }
  const fs::path out(a.out);
  fs::create_directories(out);
  write_text((out / "report.json").string(), dump(report));
  write_text((out / "report.csv").string(), to_csv(rep));
  write_text((out / "detections.jsonl").string(), detections_jsonl(t.detections));
  if (a.by_language) write_text((out / "per_language.csv").string(), per_language_csv(rep));
  if (!a.retention.empty()) write_text((out / "retention.json").string(), dump(retention));
  oj args{{"config", a.config}, {"split", a.split}, {"out", a.out}, {"by_language", a.by_language}};
  args["retention"] = a.retention;
  write_dir_sidecars(out, command_echo("eval", args, c, threads), timing);
}

struct CrossArgs {
  std::string checkpoints, corpora, out = "-", name = "DuoLens";
};

void run_cross_eval(const CrossArgs& a, unsigned threads) {
  const auto t0 = Clock::now();
  std::map<std::string, fs::path> heads;
  for (const auto& e : fs::directory_iterator(a.checkpoints)) {
    if (e.is_regular_file() && e.path().extension() == ".dlt") heads[e.path().stem().string()] = e.path();
  }
  std::map<std::string, std::vector<Sample>> corpora;
  for (const auto& e : fs::directory_iterator(a.corpora)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") corpora[e.path().stem().string()] = read_jsonl(e.path());
  }
  if (heads.empty()) throw DataError("no .dlt checkpoints under " + a.checkpoints);
  std::vector<std::string> langs;
  std::map<std::string, Detector> detectors;
  for (const auto& [lang, path] : heads) {
    langs.push_back(lang);
    detectors.emplace(lang, detector_from_head(path));
  }
  const CrossLangMatrix m = cross_language_matrix(langs, corpora, [&](const std::string& ckpt, std::span<const Sample> docs) {
    std::vector<int> preds;
    for (const auto& d : detectors.at(ckpt).detect_batch(docs, threads)) preds.push_back(d.label);
    return preds;
  });
  write_text(a.out, m.to_csv(a.name));
  write_sidecars(a.out, command_echo("cross-eval", {{"checkpoints", a.checkpoints}, {"corpora", a.corpora}, {"out", a.out}}, {}, threads),
                 {{"wall_seconds", seconds_since(t0)}});
}

struct PerturbArgs {
  std::string transform, in = "-", out = "-", records;
  std::uint64_t seed = 42;
};

void run_perturb(const PerturbArgs& a, unsigned threads) {
  const auto t0 = Clock::now();
  const Transform t = parse_transform(a.transform);
  const auto docs = read_samples(a.in);
  const PerturbedCorpus pc = perturb_corpus(docs, t, a.seed);
  write_text(a.out, samples_jsonl(pc.samples));
  if (!a.records.empty()) {
    std::string s;
    for (const auto& r : pc.records) s += to_json(r).dump() + "\n";
    write_text(a.records, s);
  }
  write_sidecars(a.out, command_echo("perturb", {{"transform", a.transform}, {"in", a.in}, {"out", a.out}, {"seed", a.seed}}, {}, threads),
                 {{"wall_seconds", seconds_since(t0)}});
}

struct BenchArgs {
  std::string config, out = "-", csv;
  std::vector<std::size_t> batch{1, 8, 32};
  std::optional<std::uint32_t> samples, seq_len, warmup, repeats;
};

void run_bench(const BenchArgs& a, unsigned threads) {
  const RunConfig c = load_run_config(a.config);
  const Detector det = detector_from_config(c);
  const std::size_t n = a.samples.value_or(c.bench.samples);
  std::vector<Sample> docs;
  if (c.data.count("test")) docs = read_jsonl(c.split_path("test"));
  if (docs.empty()) docs = synthetic::disjoint_vocab_corpus(n, c.seed());
  if (docs.size() > n) docs.resize(n);
  BenchOptions o;
  o.seq_len = a.seq_len.value_or(c.bench.seq_len);
  o.warmup = a.warmup.value_or(c.bench.warmup);
  o.repeats = a.repeats.value_or(c.bench.repeats);
  BenchReport r = bench(det.branch_a(), det.branch_b(), det.head(), docs, a.batch, o);
  r.threads = threads;
  write_text(a.out, dump(to_json(r)));
  if (!a.csv.empty()) write_text(a.csv, to_csv(r));
  if (a.out != "-") {
    write_text(a.out + ".config.json",
               dump(command_echo("bench", {{"config", a.config}, {"batch", a.batch}, {"out", a.out}}, c, threads)));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"duolens: dual-encoder detector of machine-generated text and code"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  int threads_flag = 0;
  app.add_option("--threads", threads_flag, "Worker threads (default: $DUOLENS_THREADS, else all cores)")
      ->check(CLI::PositiveNumber);

  std::function<void(unsigned)> run;

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Write a synthetic task: random tiny encoders, vocabularies, data, config");
  synth->add_option("--out", sy.out, "Output directory")->required();
  synth->add_option("--task", sy.task, "text (disjoint-vocabulary splits) or code (per-language pools)")
      ->check(CLI::IsMember({"text", "code"}));
  synth->add_option("--seed", sy.seed, "Seed for encoders and data");
  synth->add_option("--n-train", sy.n_train, "Text task: training documents");
  synth->add_option("--n-dev", sy.n_dev, "Text task: dev documents");
  synth->add_option("--n-test", sy.n_test, "Text task: test documents");
  synth->add_option("--per-class", sy.per_class, "Code task: samples per label per language");
  synth->callback([&] { run = [&](unsigned) { run_synth(sy); }; });

  BuildArgs ba;
  auto* build = app.add_subcommand("build-dataset", "Ingest pools, balance labels per language, split 80/10/10");
  build->add_option("--pools", ba.pools, "Directory of pool .jsonl files")->required();
  build->add_option("--out", ba.out, "Output directory for train/dev/test.jsonl")->required();
  build->add_option("--seed", ba.seed, "Seed for balancing and splitting");
  build->callback([&] { run = [&](unsigned t) { run_build_dataset(ba, t); }; });

  TrainArgs ta;
  auto* train = app.add_subcommand("train-head", "Train the fusion head on frozen encoders");
  train->add_option("--config", ta.config, "Run config JSON")->required();
  train->add_option("--out", ta.out, "Output head bundle (.dlt)")->required();
  train->add_option("--seed", ta.seed, "Override the config seed");
  train->callback([&] { run = [&](unsigned t) { run_train_head(ta, t); }; });

  ProbeArgs pa;
  auto* probe = app.add_subcommand("probe", "Fit a linear probe on one frozen encoder");
  probe->add_option("--config", pa.config, "Run config JSON (data splits, training settings)")->required();
  probe->add_option("--encoder", pa.encoder, "Encoder bundle to probe")->required();
  probe->add_option("--out", pa.out, "Probe bundle path, or - to print the report only");
  probe->callback([&] { run = [&](unsigned t) { run_probe(pa, t); }; });

  CalibrateArgs ca;
  auto* calib = app.add_subcommand("calibrate", "Fit a temperature on dev data and store it in the head bundle");
  calib->add_option("--head", ca.head, "Head bundle written by train-head")->required();
  calib->add_option("--dev", ca.dev, "Dev split .jsonl")->required();
  calib->add_option("--out", ca.out, "Output bundle (default: overwrite --head)");
  calib->callback([&] { run = [&](unsigned t) { run_calibrate(ca, t); }; });

  DetectArgs da;
  auto* detect = app.add_subcommand("detect", "Score documents; one JSON detection per input line");
  detect->add_option("--config", da.config, "Run config JSON naming the head")->required();
  detect->add_option("--in", da.in, "Input .jsonl with a 'text' field per line, or -");
  detect->add_option("--out", da.out, "Output .jsonl, or -");
  detect->callback([&] { run = [&](unsigned t) { run_detect(da, t); }; });

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a split: AUROC, macro-F1, accuracy, confusion");
  eval->add_option("--config", ea.config, "Run config JSON")->required();
  eval->add_option("--split", ea.split, "Split name under the config's data");
  eval->add_flag("--by-language", ea.by_language, "Also write per-language accuracy");
  eval->add_option("--retention", ea.retention, "Perturbations to evaluate against (rename, reformat)")
      ->delimiter(',')
      ->check(CLI::IsMember({"rename", "reformat"}));
  eval->add_option("--seed", ea.seed, "Override the config seed (perturbations)");
  eval->add_option("--out", ea.out, "Output directory (default: report JSON on stdout)");
  eval->callback([&] { run = [&](unsigned t) { run_eval(ea, t); }; });

  CrossArgs xa;
  auto* cross = app.add_subcommand("cross-eval", "Accuracy of per-language checkpoints on the other languages");
  cross->add_option("--checkpoints", xa.checkpoints, "Directory of <language>.dlt head bundles")->required();
  cross->add_option("--corpora", xa.corpora, "Directory of <language>.jsonl evaluation corpora")->required();
  cross->add_option("--out", xa.out, "Output CSV, or -");
  cross->add_option("--name", xa.name, "Row label prefix");
  cross->callback([&] { run = [&](unsigned t) { run_cross_eval(xa, t); }; });

  PerturbArgs pe;
  auto* perturb = app.add_subcommand("perturb", "Apply identifier renaming or whitespace reformatting");
  perturb->add_option("--transform", pe.transform, "rename or reformat")->required()->check(CLI::IsMember({"rename", "reformat"}));
  perturb->add_option("--in", pe.in, "Input .jsonl, or -");
  perturb->add_option("--out", pe.out, "Output .jsonl, or -");
  perturb->add_option("--seed", pe.seed, "Perturbation seed");
  perturb->add_option("--records", pe.records, "Also write one record per sample (renaming map) here");
  perturb->callback([&] { run = [&](unsigned t) { run_perturb(pe, t); }; });

  BenchArgs be;
  auto* bench_cmd = app.add_subcommand("bench", "Throughput, latency and peak tensor bytes at a fixed input length");
  bench_cmd->add_option("--config", be.config, "Run config JSON naming the head")->required();
  bench_cmd->add_option("--batch", be.batch, "Comma-separated batch sizes")->delimiter(',')->check(CLI::PositiveNumber);
  bench_cmd->add_option("--samples", be.samples, "Documents per run (default: config bench.samples)");
  bench_cmd->add_option("--seq-len", be.seq_len, "Tokens per input (default: config bench.seq_len)");
  bench_cmd->add_option("--warmup", be.warmup, "Untimed batches per batch size");
  bench_cmd->add_option("--repeats", be.repeats, "Measured passes per batch size; the fastest is reported")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", be.out, "Output JSON, or -");
  bench_cmd->add_option("--csv", be.csv, "Also write a CSV table here");
  bench_cmd->callback([&] { run = [&](unsigned t) { run_bench(be, t); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    run(thread_count(threads_flag));
    return 0;
  } catch (const DataError& e) {
    std::cerr << "duolens: error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "duolens: error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "duolens: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "duolens: internal error: " << e.what() << "\n";
    return 3;
  }
}
