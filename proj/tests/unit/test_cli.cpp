#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "catch_amalgamated.hpp"
#include "duolens/bundle.hpp"
#include "duolens/corpus.hpp"
#include "duolens/metrics.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// stderr is folded into the captured output.
Run sh(const std::string& args, const std::string& stdin_text = {}) {
  std::string cmd = std::string(DUOLENS_CLI_PATH) + " " + args + " 2>&1";
  if (!stdin_text.empty()) {
    const fs::path in = fs::temp_directory_path() / "duolens_cli_stdin.txt";
    std::ofstream(in) << stdin_text;
    cmd += " < " + in.string();
  } else {
    cmd += " < /dev/null";
  }
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A small synthetic task with a trained head, built once.
const fs::path& task_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "duolens_cli_task";
    fs::remove_all(d);
    const std::string q = d.string();
    REQUIRE(sh("synth --out " + q + " --n-train 200 --n-dev 60 --n-test 60").code == 0);
    const auto r = sh("--threads 2 train-head --config " + q + "/config.json --out " + q + "/head.dlt");
    INFO(r.out);
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("usage errors exit 1 with usage text") {
  auto r = sh("detect --config x.json --no-such-flag");
  CHECK(r.code == 1);
  CHECK(r.out.find("Usage:") != std::string::npos);
  CHECK(sh("").code == 1);
  CHECK(sh("frobnicate").code == 1);
  CHECK(sh("eval --config x.json --retention shuffle").code == 1);
  CHECK(sh("--threads 0 detect --config x.json").code == 1);
}

TEST_CASE("every subcommand documents its flags") {
  const std::map<std::string, std::vector<std::string>> flags{
      {"synth", {"--out", "--task", "--seed", "--n-train", "--n-dev", "--n-test", "--per-class"}},
      {"build-dataset", {"--pools", "--out", "--seed"}},
      {"train-head", {"--config", "--out", "--seed"}},
      {"probe", {"--config", "--encoder", "--out"}},
      {"calibrate", {"--head", "--dev", "--out"}},
      {"detect", {"--config", "--in", "--out"}},
      {"eval", {"--config", "--split", "--by-language", "--retention", "--seed", "--out"}},
      {"cross-eval", {"--checkpoints", "--corpora", "--out", "--name"}},
      {"perturb", {"--transform", "--in", "--out", "--seed", "--records"}},
      {"bench", {"--config", "--batch", "--samples", "--seq-len", "--warmup", "--repeats", "--out", "--csv"}}};
  for (const auto& [cmd, fl] : flags) {
    const auto r = sh(cmd + " --help");
    INFO(cmd);
    CHECK(r.code == 0);
    for (const auto& f : fl) CHECK(r.out.find(f) != std::string::npos);
  }
  CHECK(sh("--help").out.find("--threads") != std::string::npos);
}

TEST_CASE("bad inputs exit 2") {
  CHECK(sh("detect --config /nonexistent/config.json").code == 2);
  const fs::path d = fs::temp_directory_path() / "duolens_cli_bad";
  fs::create_directories(d);
  std::ofstream(d / "config.json") << R"({"head": "h.dlt", "chunking": {"window": 8, "stride": 9}})";
  const auto r = sh("detect --config " + (d / "config.json").string());
  CHECK(r.code == 2);
  CHECK(r.out.find("stride") != std::string::npos);
  CHECK(sh("build-dataset --pools " + d.string() + " --out " + (d / "o").string()).code == 2);
}

TEST_CASE("detect reads one sample from stdin") {
  const std::string cfg = (task_dir() / "config.json").string();
  const auto r = sh("detect --config " + cfg + " --in - --out -", "{\"id\": \"s1\", \"text\": \"w600 w700 w900\"}\n");
  INFO(r.out);
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> all;
  while (std::getline(lines, line)) all.push_back(line);
  REQUIRE(all.size() == 1);
  const auto j = nlohmann::json::parse(all[0]);
  CHECK(j["id"] == "s1");
  CHECK(j["n_chunks"] == 1);
  CHECK(j["label"] == (j["score"].get<double>() >= 0.5 ? 1 : 0));
  CHECK(sh("detect --config " + cfg, "not json\n").code == 2);
}

TEST_CASE("eval report agrees with metrics on its own detections") {
  const fs::path d = task_dir();
  const fs::path out = d / "eval";
  const auto r = sh("eval --config " + (d / "config.json").string() + " --by-language --out " + out.string());
  INFO(r.out);
  REQUIRE(r.code == 0);
  const auto rep = nlohmann::json::parse(slurp(out / "report.json"));
  std::vector<double> scores;
  std::vector<int> labels;
  const auto test = duolens::read_jsonl(d / "splits/test.jsonl");
  std::istringstream det(slurp(out / "detections.jsonl"));
  std::string line;
  for (std::size_t i = 0; std::getline(det, line); ++i) {
    const auto j = nlohmann::json::parse(line);
    REQUIRE(j["id"] == test[i].id);
    scores.push_back(j["score"].get<double>());
    labels.push_back(test[i].label);
  }
  REQUIRE(scores.size() == test.size());
  CHECK(rep["auroc"].get<double>() == duolens::auroc(scores, labels));
  CHECK(rep["n"] == test.size());
  CHECK(!rep.contains("samples_per_sec"));
  CHECK(fs::exists(out / "timing.json"));
  CHECK(fs::exists(out / "resolved_config.json"));
  CHECK(slurp(out / "per_language.csv").rfind("language,n,accuracy\nsynthetic,60,", 0) == 0);
}

TEST_CASE("calibrate stores a temperature the detector then uses") {
  const fs::path d = task_dir();
  const auto r = sh("calibrate --head " + (d / "head.dlt").string() + " --dev " + (d / "splits/dev.jsonl").string() +
                    " --out " + (d / "head_cal.dlt").string());
  INFO(r.out);
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(d / "head_cal.dlt.calibration.json"));
  CHECK(j["dev_nll_after"].get<double>() <= j["dev_nll_before"].get<double>());
  const auto b = duolens::load_bundle(d / "head_cal.dlt");
  CHECK(std::stod(*b.meta("temperature")) == j["temperature"].get<double>());
  CHECK(b.meta("encoder_A") == "encoder_a.dlt");
}

TEST_CASE("perturb writes to stdout") {
  const std::string in = "{\"id\":\"a\",\"text\":\"def f(x):\\n    return x\\n\",\"language\":\"python\",\"label\":1}\n";
  const auto r = sh("perturb --transform rename --in - --seed 3", in);
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["text"] == "def v0(v1):\n    return v1\n");
}
