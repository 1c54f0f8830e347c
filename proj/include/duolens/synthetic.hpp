#pragma once

// Self-contained fixtures for running the whole system without pretrained
// weights: tiny vocabularies, random frozen encoders, and two labeled corpora.
//
//  * disjoint-vocabulary task: documents are runs of words "w<id>"; class 0
//    draws ids from [4, 500) (0..3 are specials), class 1 from [500, 1000).
//  * code-like task: short functions in seven languages, where the two
//    classes differ in naming, indentation and commenting habits.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "duolens/encoder.hpp"
#include "duolens/pipeline.hpp"
#include "duolens/sample.hpp"
#include "duolens/tokenizer.hpp"

namespace duolens::synthetic {

inline constexpr std::uint32_t kVocabSize = 1000;
inline constexpr std::uint32_t kClassBoundary = 500;
inline constexpr std::uint32_t kFirstWord = 4;

// "[PAD]" "[UNK]" "[CLS]" "[SEP]" "w4" ... "w999": token id == its number.
inline std::vector<std::string> word_tokens() {
  std::vector<std::string> t{"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  for (std::uint32_t i = kFirstWord; i < kVocabSize; ++i) t.push_back("w" + std::to_string(i));
  return t;
}

inline Vocab word_wordpiece_vocab() { return Vocab::wordpiece(word_tokens()); }

struct TextTaskOptions {
  std::size_t min_words = 48;
  std::size_t max_words = 96;
  std::string language = "synthetic";
  std::string id_prefix = "doc";
};

// n documents, labels alternating 0,1,0,... so any prefix is balanced.
inline std::vector<Sample> disjoint_vocab_corpus(std::size_t n, std::uint64_t seed, const TextTaskOptions& o = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(o.min_words, o.max_words);
  std::uniform_int_distribution<std::uint32_t> low(kFirstWord, kClassBoundary - 1), high(kClassBoundary, kVocabSize - 1);
  std::vector<Sample> out;
  out.reserve(n);
  const int width = static_cast<int>(std::to_string(std::max<std::size_t>(n, 1) - 1).size());
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    const std::string num = std::to_string(i);
    s.id = o.id_prefix + "-" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(width, num.size()), '0') + num;
    s.label = static_cast<int>(i % 2);
    s.language = o.language;
    s.source = "synthetic";
    const std::size_t k = len(rng);
    for (std::size_t w = 0; w < k; ++w) {
      if (w) s.text += ' ';
      s.text += "w" + std::to_string(s.label ? high(rng) : low(rng));
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Document with exactly n word tokens under word_wordpiece_vocab.
inline std::string word_document(std::size_t n, std::mt19937_64& rng, std::uint32_t lo = kFirstWord,
                                 std::uint32_t hi = kVocabSize - 1) {
  std::uniform_int_distribution<std::uint32_t> id(lo, hi);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += "w" + std::to_string(id(rng));
  }
  return s;
}

inline EncoderBranch word_branch(Vocab v, std::uint64_t seed, Pooling pooling = Pooling::Mean) {
  EncoderConfig c = EncoderConfig::tiny();
  c.pooling = pooling;
  return {make_random_encoder(c, seed), Tokenizer(std::move(v))};
}

// ---------------------------------------------------------------------------
// Code-like corpus

inline const std::array<std::string, 7>& code_languages() {
  static const std::array<std::string, 7> l{"c", "cpp", "csharp", "go", "java", "javascript", "python"};
  return l;
}

namespace detail {

inline std::string pick(std::mt19937_64& rng, const std::vector<std::string>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

inline std::string camel(const std::string& snake) {
  std::string out;
  bool up = false;
  for (char c : snake) {
    if (c == '_') {
      up = true;
    } else {
      out += up ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c;
      up = false;
    }
  }
  return out;
}

// One function in `lang`; the class shows in names, layout and comments.
inline std::string code_function(const std::string& lang, bool machine, std::mt19937_64& rng) {
  const bool py = lang == "python";
  const bool go = lang == "go";
  const bool snake = py || lang == "c";
  auto name = [&](const std::vector<std::string>& human, const std::vector<std::string>& gen) {
    const std::string n = pick(rng, machine ? gen : human);
    return snake ? n : camel(n);
  };
  const std::string fn = name({"f", "go2", "calc", "do_it", "proc", "g", "run"},
                              {"compute_total", "calculate_sum", "process_values", "find_maximum",
                               "count_matches", "accumulate_result"});
  const std::string a = name({"a", "x", "arr", "v", "p"}, {"values", "input_values", "numbers", "data_items"});
  const std::string n = name({"n", "len", "sz", "m"}, {"count", "length", "item_count", "size_limit"});
  const std::string acc = name({"s", "r", "t", "tmp", "res"}, {"result", "total_sum", "accumulator", "running_total"});
  const std::string i = machine ? name({"i"}, {"index", "idx", "position"}) : pick(rng, {"i", "j", "k"});
  const int bound = std::uniform_int_distribution<int>(2, 99)(rng);
  const std::string ind = machine ? "    " : pick(rng, {"\t", "  "});
  const std::string cm = py ? "# " : "// ";
  const bool comments = machine || std::bernoulli_distribution(0.15)(rng);
  const std::string op = pick(rng, {"+", "-", "*", "^"});

  std::vector<std::string> lines;
  auto L = [&](int depth, const std::string& s) {
    std::string line;
    for (int d = 0; d < depth; ++d) line += ind;
    lines.push_back(line + s);
  };
  auto comment = [&](int depth, const std::string& text) {
    if (comments) L(depth, cm + text);
  };
  const std::string elem = a + "[" + i + "]";
  const std::string cond = elem + " > " + std::to_string(bound);
  const std::string update = acc + " = " + acc + " " + op + " " + elem;

  if (py) {
    comment(0, machine ? "Compute the aggregate of the values above the threshold." : "quick hack");
    L(0, "def " + fn + "(" + a + ", " + n + "):");
    L(1, acc + " = 0");
    comment(1, "Iterate over every element in the input.");
    L(1, "for " + i + " in range(" + n + "):");
    L(2, "if " + cond + ":");
    L(3, update);
    if (machine) lines.emplace_back();
    L(1, "return " + acc);
  } else if (go) {
    comment(0, machine ? "Compute the aggregate of the values above the threshold." : "quick hack");
    L(0, "func " + fn + "(" + a + " []int, " + n + " int) int {");
    L(1, acc + " := 0");
    comment(1, "Iterate over every element in the input.");
    L(1, "for " + i + " := 0; " + i + " < " + n + "; " + i + "++ {");
    L(2, "if " + cond + " {");
    L(3, update);
    L(2, "}");
    L(1, "}");
    if (machine) lines.emplace_back();
    L(1, "return " + acc);
    L(0, "}");
  } else {
    std::string header, decl, loop;
    if (lang == "java" || lang == "csharp") {
      const std::string f = lang == "csharp" ? std::string(1, static_cast<char>(std::toupper(fn[0]))) + fn.substr(1) : fn;
      header = "public static int " + f + "(int[] " + a + ", int " + n + ")";
      decl = (lang == "csharp" && machine ? "var " : "int ") + acc + " = 0;";
      loop = "for (int " + i + " = 0; " + i + " < " + n + "; " + i + "++)";
    } else if (lang == "javascript") {
      header = "function " + fn + "(" + a + ", " + n + ")";
      decl = (machine ? "let " : "var ") + acc + " = 0;";
      loop = "for (let " + i + " = 0; " + i + " < " + n + "; " + i + "++)";
    } else {
      header = "int " + fn + "(const int *" + a + ", int " + n + ")";
      decl = (lang == "cpp" && machine ? "auto " : "int ") + acc + " = 0;";
      loop = "for (int " + i + " = 0; " + i + " < " + n + "; " + i + "++)";
    }
    comment(0, machine ? "Compute the aggregate of the values above the threshold." : "quick hack");
    L(0, header + " {");
    L(1, decl);
    comment(1, "Iterate over every element in the input.");
    L(1, loop + " {");
    L(2, "if (" + cond + ") {");
    L(3, update + ";");
    L(2, "}");
    L(1, "}");
    if (machine) lines.emplace_back();
    L(1, "return " + acc + ";");
    L(0, "}");
  }
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

}  // namespace detail

// `per_class` samples of each label for each of the seven languages; each
// document holds one to three functions.
inline std::vector<Sample> code_corpus(std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  std::set<std::string> seen;
  for (const auto& lang : code_languages()) {
    for (int label : {0, 1}) {
      for (std::size_t k = 0; k < per_class;) {
        const int fns = std::uniform_int_distribution<int>(1, 3)(rng);
        std::string text;
        for (int f = 0; f < fns; ++f) {
          if (f) text += "\n";
          text += detail::code_function(lang, label == 1, rng);
        }
        if (!seen.insert(text).second) continue;  // keep texts unique for ingest
        Sample s;
        s.id = lang + "-" + std::to_string(label) + "-" + std::string(4 - std::min<std::size_t>(4, std::to_string(k).size()), '0') +
               std::to_string(k);
        s.text = std::move(text);
        s.language = lang;
        s.label = label;
        s.source = "synthetic-code";
        out.push_back(std::move(s));
        ++k;
      }
    }
  }
  return out;
}

// Byte-level BPE vocabulary for the code corpus: specials, the 256 byte
// symbols, then merges that assemble common keywords and identifier pieces.
inline Vocab code_bpe_vocab() {
  std::vector<std::string> tokens{"<s>", "<pad>", "</s>", "<unk>"};
  const auto& alpha = duolens::detail::byte_alphabet();
  tokens.insert(tokens.end(), alpha.begin(), alpha.end());
  std::set<std::string> have(tokens.begin(), tokens.end());
  std::vector<std::pair<std::string, std::string>> merges;
  auto chain = [&](const std::string& word) {
    std::vector<std::string> sym;
    for (unsigned char c : word) sym.push_back(alpha[c]);
    std::string cur = sym[0];
    for (std::size_t k = 1; k < sym.size(); ++k) {
      const std::string next = cur + sym[k];
      if (have.insert(next).second) {
        merges.emplace_back(cur, sym[k]);
        tokens.push_back(next);
      }
      cur = next;
    }
    return cur;
  };
  for (const char* w : {"return", "for", "if", "int", "def", "func", "function", "public", "static", "const",
                        "let", "var", "auto", "range", "in", "result", "total", "sum", "count", "value", "values",
                        "index", "length", "item", "input", "data", "number", "numbers", "compute", "calculate",
                        "process", "find", "maximum", "matches", "accumulate", "accumulator", "running", "size",
                        "limit", "the", "of", "every", "element", "over", "above", "threshold", "Iterate",
                        "Compute", "aggregate", "quick", "hack"}) {
    // " w" is one rule on top of the finished word, so the word forms first.
    const std::string word = chain(w);
    if (have.insert(alpha[' '] + word).second) {
      merges.emplace_back(alpha[' '], word);
      tokens.push_back(alpha[' '] + word);
    }
  }
  for (const char* w : {"    ", "        ", "            ", "\t\t", "\t\t\t", "++", "<=", "==", "//", "0;", "++)",
                        "++ {", ") {", "):", "\n\n"}) {
    chain(w);
  }
  return Vocab::byte_bpe(std::move(tokens), std::move(merges));
}

// WordPiece vocabulary for the code corpus: keywords and frequent words whole,
// every ASCII letter and digit as a word start and as a "##" continuation.
inline Vocab code_wordpiece_vocab() {
  std::vector<std::string> t{"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  std::set<std::string> have(t.begin(), t.end());
  auto add = [&](const std::string& s) {
    if (have.insert(s).second) t.push_back(s);
  };
  for (char c = 33; c < 127; ++c) add(std::string(1, c));
  for (char c = 33; c < 127; ++c) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') add("##" + std::string(1, c));
  }
  for (const char* w : {"return", "for", "if", "int", "def", "func", "function", "public", "static", "const", "let",
                        "var", "auto", "range", "in", "result", "total", "sum", "count", "value", "values", "index",
                        "length", "item", "input", "data", "numbers", "compute", "calculate", "process", "find",
                        "the", "of", "every", "element", "over", "above", "threshold", "Iterate", "Compute",
                        "aggregate", "quick", "hack", "##_", "##s", "##Sum", "##Total", "##Values", "##Count"}) {
    add(w);
  }
  return Vocab::wordpiece(std::move(t));
}

}  // namespace duolens::synthetic
