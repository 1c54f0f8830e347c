// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance <path to duolens CLI> <work dir>
//
// End-to-end criteria drive the real CLI; the rest call the library directly.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duolens/duolens.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace duolens;
using nlohmann::json;

namespace {

std::string g_cli;
fs::path g_work;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool cond, const std::string& what) {
  if (!cond) throw Failure(what);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Failure("missing output " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void cli(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " > " + (g_work / "last_cli.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (code != 0) throw Failure("`duolens " + args + "` exited " + std::to_string(code) + ": " + slurp(g_work / "last_cli.log"));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// ---------------------------------------------------------------------------
// Shared synthetic text task: written by `synth`, trained twice by
// `train-head` (the determinism check compares the two runs).

fs::path text_dir() { return g_work / "text"; }
fs::path run_dir(int k) { return g_work / ("run" + std::to_string(k)); }

struct TextTask {
  bool ready = false;
  double train_seconds = 0;
  std::string error;
};

TextTask& text_task() {
  static TextTask t = [] {
    TextTask t;
    try {
      cli("synth --task text --seed 42 --out " + q(text_dir()));
      for (int k : {1, 2}) {
        fs::create_directories(run_dir(k));
        std::ofstream(run_dir(k) / "config.json")
            << R"({"encoder_a": "../text/encoder_a.dlt", "encoder_b": "../text/encoder_b.dlt",
                  "head": "head.dlt", "data": {"dir": "../text/splits"}, "seed": 42,
                  "train": {"epochs": 20}})";
        const auto t0 = std::chrono::steady_clock::now();
        cli("--threads 1 train-head --config " + q(run_dir(k) / "config.json") + " --out " + q(run_dir(k) / "head.dlt"));
        if (k == 1) t.train_seconds = seconds_since(t0);
        cli("--threads 1 eval --config " + q(run_dir(k) / "config.json") + " --split test --out " + q(run_dir(k) / "eval"));
      }
      t.ready = true;
    } catch (const std::exception& e) {
      t.error = e.what();
    }
    return t;
  }();
  if (!t.ready) throw Failure("synthetic text task unavailable: " + t.error);
  return t;
}

Detector trained_detector(const DetectorOptions& opt = {}) {
  text_task();
  const RunConfig c = load_config(run_dir(1) / "config.json");
  const TensorBundle hb = load_bundle(c.require_head());
  return Detector(load_branch(c.require_encoder('a')), load_branch(c.require_encoder('b')), FusionHead::from_bundle(hb),
                  calibration_from_bundle(hb), opt);
}

// ---------------------------------------------------------------------------
// Criteria

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  std::size_t draws = 0, entries = 0;
  for (std::uint64_t s = 0; s < 60; ++s) {
    for (const auto& d : {gradcheck::head_draw(1000 + s), gradcheck::probe_draw(2000 + s)}) {
      worst = std::max(worst, d.max_rel_error);
      entries += d.checked;
      ++draws;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && draws >= 50 && secs < 10.0,
          "max rel error " + fmt(worst) + " over " + std::to_string(draws) + " draws (" + std::to_string(entries) +
              " entries), " + fmt(secs, 3) + " s"};
}

Outcome auroc_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(7);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 500)(rng);
    const int levels = std::uniform_int_distribution<int>(1, 30)(rng);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng() % 2);
      s[i] = std::uniform_int_distribution<int>(0, levels)(rng) + 0.5 * y[i] * (trial % 3 == 0);
    }
    y[0] = 0;
    y[n - 1] = 1;
    worst = std::max(worst, std::abs(auroc(s, y) - oracle::auroc_pairs(s, y)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 5.0, "max |diff| " + fmt(worst) + " on 100 instances, " + fmt(secs, 3) + " s"};
}

Outcome synthetic_task() {
  const TextTask& t = text_task();
  const json rep = json::parse(slurp(run_dir(1) / "eval/report.json"));
  const json tr = json::parse(slurp(run_dir(1) / "head.dlt.train.json"));
  const double a = rep["auroc"].get<double>(), f1 = rep["f1_macro"].get<double>();
  const std::size_t epochs = tr["epochs"].size();
  expect(rep["n"] == 500, "test split should hold 500 documents");
  const auto train = read_jsonl(text_dir() / "splits/train.jsonl");
  const auto dev = read_jsonl(text_dir() / "splits/dev.jsonl");
  expect(train.size() == 2000 && dev.size() == 500, "train/dev should hold 2000/500 documents");
  return {a >= 0.99 && f1 >= 0.95 && epochs <= 20 && t.train_seconds < 120.0,
          "test AUROC " + fmt(a) + ", macro-F1 " + fmt(f1) + ", " + std::to_string(epochs) + " epochs (best " +
              tr["best_epoch"].dump() + "), train-head " + fmt(t.train_seconds, 3) + " s single-threaded"};
}

Outcome calibration() {
  const Detector det = trained_detector();
  const auto dev = read_jsonl(text_dir() / "splits/dev.jsonl");
  const auto test = read_jsonl(text_dir() / "splits/test.jsonl");
  std::vector<double> zd, zt;
  std::vector<int> yd, yt;
  for (const auto& s : dev) {
    zd.push_back(det.document_logit(s.text));
    yd.push_back(s.label);
  }
  for (const auto& s : test) {
    zt.push_back(det.document_logit(s.text));
    yt.push_back(s.label);
  }
  const Calibration cal = fit_temperature(zd, yd);
  const double before = calibrated_nll(zd, yd, 1.0), after = calibrated_nll(zd, yd, cal.temperature);
  std::vector<double> p1, pt;
  std::size_t flips = 0;
  for (double z : zt) {
    p1.push_back(Calibration{}.probability(z));
    pt.push_back(cal.probability(z));
    flips += (p1.back() >= 0.5) != (pt.back() >= 0.5);
  }
  const double a1 = auroc(p1, yt), at = auroc(pt, yt);
  return {after < before && a1 == at && flips == 0,
          "T " + fmt(cal.temperature, 6) + ", dev NLL " + fmt(before, 8) + " -> " + fmt(after, 8) + ", test AUROC " +
              fmt(a1, 8) + " -> " + fmt(at, 8) + ", " + std::to_string(flips) + " label flips"};
}

Outcome chunking() {
  DetectorOptions direct;
  direct.chunking = false;
  const Detector dc = trained_detector(), dd = trained_detector(direct);
  std::mt19937_64 rng(510);
  std::size_t identical = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = i < 4 ? std::size_t{507 + static_cast<std::size_t>(i)}
                                : std::uniform_int_distribution<std::size_t>(1, 510)(rng);
    const std::string text = synthetic::word_document(n, rng);
    expect(dc.branch_a().tokenizer.encode(text).size() == n, "fuzzed document has the wrong token count");
    identical += dc.detect(text, "d") == dd.detect(text, "d");
  }
  // Long documents: every content token lands in some chunk, starts advance by
  // the stride, and each chunk is exactly its slice of the full encoding.
  std::size_t long_ok = 0;
  for (int i = 0; i < 5; ++i) {
    const std::string text = synthetic::word_document(2000, rng);
    const Encoding full = dc.branch_a().tokenizer.encode(text);
    const ChunkPlan plan = chunk(full.size());
    const auto chunks = chunk_document(dc.branch_a(), dc.branch_b(), text, DetectorOptions{});
    bool ok = chunks.size() == plan.chunks.size() && plan.chunks.back().end == full.size();
    std::vector<char> covered(full.size(), 0);
    for (std::size_t k = 0; ok && k < chunks.size(); ++k) {
      const auto& r = plan.chunks[k];
      const auto& ids = chunks[k].a.ids;
      ok = ids.size() == r.size() + 2 && ids.size() <= 512 && chunks[k].b.size() <= 512 &&
           (k == 0 ? r.start == 0 : r.start - plan.chunks[k - 1].start == 448) &&
           std::equal(ids.begin() + 1, ids.end() - 1, full.ids.begin() + static_cast<std::ptrdiff_t>(r.start));
      for (std::size_t t = r.start; t < r.end; ++t) covered[t] = 1;
    }
    ok = ok && std::all_of(covered.begin(), covered.end(), [](char c) { return c == 1; });
    long_ok += ok;
  }
  return {identical == 200 && long_ok == 5, std::to_string(identical) + "/200 short documents bit-identical, " +
                                                std::to_string(long_ok) + "/5 2000-token documents cover and stride"};
}

Sample pool_sample(const std::string& lang, int label, std::size_t k) {
  Sample s;
  s.id = lang + "-" + std::to_string(label) + "-" + std::to_string(k);
  s.text = "text " + s.id;
  s.language = lang;
  s.label = label;
  s.source = "pool";
  return s;
}

Outcome balance_procedure() {
  std::vector<Sample> small;
  for (auto [lang, h, m] : {std::tuple{"py", 10, 7}, std::tuple{"go", 5, 9}}) {
    for (int k = 0; k < h; ++k) small.push_back(pool_sample(lang, 0, k));
    for (int k = 0; k < m; ++k) small.push_back(pool_sample(lang, 1, k));
  }
  const PoolCensus cs = census(balance(small, 42).corpus);
  const bool small_ok = cs.count("py", 0) == 7 && cs.count("py", 1) == 7 && cs.count("go", 0) == 5 &&
                        cs.count("go", 1) == 5 && cs.counts.size() == 4;

  // Seven languages, each with 6000 of its scarcer label and a surplus of the other.
  std::vector<Sample> pool;
  const auto& langs = synthetic::code_languages();
  for (std::size_t i = 0; i < langs.size(); ++i) {
    const std::size_t extra = 150 + 97 * i;
    const std::size_t human = i % 2 ? 6000 + extra : 6000, machine = i % 2 ? 6000 : 6000 + extra;
    for (std::size_t k = 0; k < human; ++k) pool.push_back(pool_sample(langs[i], 0, k));
    for (std::size_t k = 0; k < machine; ++k) pool.push_back(pool_sample(langs[i], 1, k));
  }
  const BalanceResult big = balance(pool, 42);
  const PoolCensus cb = census(big.corpus);
  bool big_ok = big.corpus.size() == 84000;
  for (const auto& l : langs) big_ok = big_ok && cb.count(l, 0) == 6000 && cb.count(l, 1) == 6000;
  std::set<std::string> ids;
  for (const auto& s : big.corpus) ids.insert(s.id);
  big_ok = big_ok && ids.size() == big.corpus.size();
  return {small_ok && big_ok, std::string("{py:10/7, go:5/9} -> py ") + std::to_string(cs.count("py", 0)) + "+" +
                                  std::to_string(cs.count("py", 1)) + ", go " + std::to_string(cs.count("go", 0)) + "+" +
                                  std::to_string(cs.count("go", 1)) + "; census pool of " + std::to_string(pool.size()) +
                                  " -> " + std::to_string(big.corpus.size()) + " (6000 per class per language)"};
}

Outcome perturbation_retention() {
  const fs::path d = g_work / "code";
  cli("synth --task code --seed 42 --per-class 20 --out " + q(d));
  cli("build-dataset --pools " + q(d / "pools") + " --out " + q(d / "splits") + " --seed 42");
  cli("train-head --config " + q(d / "config.json") + " --out " + q(d / "head.dlt"));
  cli("eval --config " + q(d / "config.json") + " --retention rename,reformat --out " + q(d / "eval"));
  const json rep = json::parse(slurp(d / "eval/retention.json"));
  expect(rep.size() == 2, "retention report should cover both transforms");
  std::string detail;
  bool ok = true;
  for (const auto& r : rep) {
    ok = ok && r["retention"].is_number() && r["perturbed_auroc"].is_number();
    detail += r["transform"].get<std::string>() + " retention " + fmt(r["retention"].get<double>()) + "; ";
    if (r["transform"] == "rename") {
      ok = ok && r["token_count_preserved"] == 1.0 && r["lexed_samples"] == r["n"];
    }
  }
  // Token counts over the whole synthetic code corpus, not only the test split.
  const auto corpus = synthetic::code_corpus(100, 42);
  const PerturbedCorpus pc = perturb_corpus(corpus, Transform::Rename, 42);
  std::size_t same = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto lang = lex::parse_language(corpus[i].language);
    same += lex::count_significant(lex::tokenize(corpus[i].text, lang)) ==
            lex::count_significant(lex::tokenize(pc.samples[i].text, lang));
  }
  ok = ok && same == corpus.size();
  return {ok, detail + "rename keeps token counts on " + std::to_string(same) + "/" + std::to_string(corpus.size()) +
                  " samples (retention target 0.92 is informational)"};
}

Outcome bench_repro() {
  text_task();
  std::vector<json> runs;
  for (int k : {1, 2}) {
    const fs::path out = g_work / ("bench" + std::to_string(k) + ".json");
    cli("--threads 1 bench --config " + q(run_dir(1) / "config.json") +
        " --batch 1,2,4 --samples 8 --seq-len 128 --warmup 2 --repeats 40 --out " + q(out));
    runs.push_back(json::parse(slurp(out)));
  }
  double worst = 0;
  bool complete = runs[0]["rows"].size() == 3 && runs[1]["rows"].size() == 3;
  for (std::size_t r = 0; complete && r < 3; ++r) {
    const auto& a = runs[0]["rows"][r];
    const auto& b = runs[1]["rows"][r];
    for (const auto& [x, y] : {std::pair{a["samples_per_sec"], b["samples_per_sec"]},
                               std::pair{a["latency_ms"]["p50"], b["latency_ms"]["p50"]},
                               std::pair{a["latency_ms"]["p95"], b["latency_ms"]["p95"]},
                               std::pair{a["peak_bytes"], b["peak_bytes"]}}) {
      const double u = x.get<double>(), v = y.get<double>();
      complete = complete && u > 0 && v > 0;
      if (u > 0 && v > 0) worst = std::max(worst, std::abs(u - v) / std::min(u, v));
    }
  }
  return {complete && worst <= 0.25,
          "largest run-to-run difference " + fmt(100 * worst, 3) + "% over samples/sec, p50, p95, peak bytes at batch 1,2,4"};
}

Outcome determinism() {
  text_task();
  std::vector<std::string> compared;
  auto same = [&](const fs::path& a, const fs::path& b) {
    expect(slurp(a) == slurp(b), a.filename().string() + " differs between runs");
    compared.push_back(a.filename().string());
  };
  const fs::path pools = g_work / "code/pools";
  if (!fs::exists(pools)) cli("synth --task code --seed 42 --per-class 20 --out " + q(g_work / "code"));
  for (int k : {1, 2}) cli("build-dataset --pools " + q(pools) + " --out " + q(g_work / ("dataset" + std::to_string(k))) + " --seed 7");
  for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl", "census.json", "manifest.json"}) {
    same(g_work / "dataset1" / f, g_work / "dataset2" / f);
  }
  for (const char* f : {"head.dlt", "head.dlt.train.json"}) same(run_dir(1) / f, run_dir(2) / f);
  for (const char* f : {"report.json", "report.csv", "detections.jsonl"}) {
    same(run_dir(1) / "eval" / f, run_dir(2) / "eval" / f);
  }
  std::string list;
  for (const auto& c : compared) list += (list.empty() ? "" : ", ") + c;
  return {true, std::to_string(compared.size()) + " primary outputs byte-identical (" + list + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: acceptance <duolens cli> <work dir>\n";
    return 2;
  }
  g_cli = argv[1];
  g_work = fs::absolute(argv[2]);
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient-correctness", gradients},
      {"auroc-oracle-equivalence", auroc_oracle},
      {"synthetic-end-to-end", synthetic_task},
      {"calibration", calibration},
      {"chunking-identity", chunking},
      {"balance-procedure", balance_procedure},
      {"perturbation-retention-harness", perturbation_retention},
      {"bench-reproducibility", bench_repro},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failed ? 1 : 0;
}
