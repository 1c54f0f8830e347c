#include <random>

#include "catch_amalgamated.hpp"
#include "duolens/metrics.hpp"
#include "oracles.hpp"

using namespace duolens;

namespace {

struct Scored {
  std::string id;
  double score = 0;
  int label = 0;
};

Sample sample(std::string id, int label, std::string lang = "python") {
  Sample s;
  s.id = std::move(id);
  s.text = "x";
  s.language = std::move(lang);
  s.label = label;
  s.source = "t";
  return s;
}

}  // namespace

TEST_CASE("auroc small cases") {
  CHECK(auroc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
  CHECK(auroc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{0, 0, 1, 1}) == 0.0);
  CHECK(auroc(std::vector<double>(6, 0.3), std::vector<int>{0, 1, 0, 1, 1, 0}) == 0.5);
  CHECK_THROWS_WITH(auroc(std::vector<double>{1, 2}, std::vector<int>{1, 1}),
                    Catch::Matchers::ContainsSubstring("AUROC undefined"));
}

TEST_CASE("auroc equals the all-pairs oracle") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 500)(rng);
    // Coarse scores force plenty of ties.
    const int levels = std::uniform_int_distribution<int>(2, 40)(rng);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng() % 2);
      s[i] = std::uniform_int_distribution<int>(0, levels)(rng) / double(levels) + 0.1 * y[i];
    }
    y[0] = 0;
    y[1] = 1;
    REQUIRE(std::abs(auroc(s, y) - oracle::auroc_pairs(s, y)) < 1e-9);
  }
}

TEST_CASE("macro f1") {
  const std::vector<int> labels{0, 1, 0, 1};
  CHECK(f1_macro(labels, labels) == 1.0);
  const std::vector<int> all1(4, 1);
  CHECK(f1_macro(all1, labels) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  const Confusion c = confusion(all1, labels);
  CHECK(class_stats(c, 1).f1 == Catch::Approx(2.0 / 3.0));
  CHECK(class_stats(c, 0).f1 == 0.0);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> p(30), y(30), ps(30), ys(30);
    for (std::size_t i = 0; i < 30; ++i) {
      p[i] = static_cast<int>(rng() % 2);
      y[i] = static_cast<int>(rng() % 2);
      ps[i] = 1 - p[i];
      ys[i] = 1 - y[i];
    }
    CHECK(f1_macro(p, y) == Catch::Approx(f1_macro(ps, ys)).epsilon(1e-12));
  }
}

TEST_CASE("accuracy report") {
  std::vector<Sample> samples{sample("a", 0), sample("b", 1), sample("c", 1, "go"), sample("d", 0, "go")};
  std::vector<Scored> dets{{"d", 0.2, 0}, {"c", 0.4, 0}, {"b", 0.9, 1}, {"a", 0.1, 0}};
  const EvalReport r = accuracy_report<Scored>(dets, samples);
  CHECK(r.n == 4);
  CHECK(r.accuracy == 0.75);
  CHECK(r.confusion == Confusion{1, 0, 2, 1});
  CHECK(r.confusion.total() == 4);
  CHECK(*r.auroc == 1.0);
  CHECK(r.per_language.at("python") == 1.0);
  CHECK(r.per_language.at("go") == 0.5);
  const auto j = to_json(r, false);
  CHECK(!j.contains("samples_per_sec"));
  CHECK(to_json(r).contains("latency_ms"));
  CHECK(to_csv(r) == "n,auroc,f1_macro,accuracy,tp,fp,tn,fn\n4,1.000000,0.733333,0.750000,1,0,2,1\n");

  // Single-language corpus: per-language accuracy is the overall accuracy.
  std::vector<Sample> one{sample("a", 0), sample("b", 1)};
  std::vector<Scored> od{{"a", 0.7, 1}, {"b", 0.8, 1}};
  const EvalReport r1 = accuracy_report<Scored>(od, one);
  CHECK(r1.per_language.size() == 1);
  CHECK(r1.per_language.begin()->second == r1.accuracy);

  std::vector<Scored> wrong{{"a", 0.7, 1}, {"zzz", 0.8, 1}};
  CHECK_THROWS_WITH(accuracy_report<Scored>(wrong, one),
                    Catch::Matchers::ContainsSubstring("b") && Catch::Matchers::ContainsSubstring("zzz"));
}

TEST_CASE("three-place report figures for a fixed confusion and ranking") {
  // 40 positives and 40 negatives: 1576 of 1600 pairs ordered correctly gives
  // AUROC 0.985; the confusion is searched so macro-F1 rounds to 0.937.
  constexpr int n = 40;
  std::uint64_t tp = 0, tn = 0;
  bool found = false;
  for (std::uint64_t a = 0; a <= n && !found; ++a) {
    for (std::uint64_t b = 0; b <= n && !found; ++b) {
      const Confusion c{a, n - b, b, n - a};
      if (format_metric(0.5 * (class_stats(c, 0).f1 + class_stats(c, 1).f1), 3) == "0.937") {
        tp = a;
        tn = b;
        found = true;
      }
    }
  }
  REQUIRE(found);
  std::vector<Sample> samples;
  std::vector<Scored> dets;
  for (int i = 0; i < n; ++i) {
    samples.push_back(sample("n" + std::to_string(i), 0));
    dets.push_back({"n" + std::to_string(i), double(i), i >= int(tn) ? 1 : 0});
  }
  for (int i = 0; i < n; ++i) {
    samples.push_back(sample("p" + std::to_string(i), 1));
    // One positive sits below the top 24 negatives; the rest are above all of them.
    dets.push_back({"p" + std::to_string(i), i == 0 ? 15.5 : 100.0 + i, i < int(tp) ? 1 : 0});
  }
  const EvalReport r = accuracy_report<Scored>(dets, samples);
  CHECK(format_metric(*r.auroc, 3) == "0.985");
  CHECK(format_metric(r.f1_macro, 3) == "0.937");
  CHECK(to_json(r)["f1_macro"].get<double>() == r.f1_macro);
}

TEST_CASE("cross-language matrix") {
  std::map<std::string, std::vector<Sample>> corpora{
      {"java", {sample("j0", 0, "java"), sample("j1", 1, "java")}},
      {"c", {sample("c0", 0, "c"), sample("c1", 1, "c"), sample("c2", 1, "c")}}};
  auto predict = [](const std::string& ckpt, std::span<const Sample> corpus) {
    std::vector<int> out;
    for (const auto& s : corpus) out.push_back(ckpt == "java" ? 1 : s.label);
    return out;
  };
  const CrossLangMatrix m = cross_language_matrix({"c", "java"}, corpora, predict);
  CHECK(m.defined_cells() == 2);
  CHECK(!m.cell("c", "c"));
  CHECK(*m.cell("java", "c") == Catch::Approx(2.0 / 3.0));
  CHECK(*m.cell("c", "java") == 1.0);
  CHECK(m.to_csv("DuoLens") == "train_language,c,java\nDuoLens (c),-,1.0000\nDuoLens (java),0.6667,-\n");

  CHECK_THROWS_AS(cross_language_matrix({"go"}, corpora, predict), DataError);
  std::map<std::string, std::vector<Sample>> single{{"c", corpora["c"]}};
  CHECK_THROWS_AS(cross_language_matrix({"c"}, single, predict), DataError);
}

TEST_CASE("percentiles") {
  CHECK(percentile({5}, 95) == 5);
  CHECK(percentile({1, 2, 3, 4}, 50) == 2.5);
  CHECK(percentile({4, 3, 2, 1, 0}, 100) == 4);
  CHECK(percentile({}, 50) == 0);
}
