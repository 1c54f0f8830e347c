#include <filesystem>
#include <random>
#include <set>

#include "catch_amalgamated.hpp"
#include "duolens/synthetic.hpp"
#include "duolens/tokenizer.hpp"
#include "oracles.hpp"

using namespace duolens;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> toks(const Vocab& v, const Encoding& e) {
  std::vector<std::string> out;
  for (auto id : e.ids) out.push_back(v.id_to_token[id]);
  return out;
}

Vocab toy_bpe() {
  return Vocab::byte_bpe({"<s>", "</s>", "<pad>", "<unk>", "a", "b", "ab"}, {{"a", "b"}});
}

// Random UTF-8 drawn from ASCII, Cyrillic, CJK and emoji ranges plus whitespace.
std::string random_utf8(std::mt19937_64& rng, std::size_t chars) {
  static const std::vector<std::pair<std::uint32_t, std::uint32_t>> ranges{
      {0x20, 0x7E}, {0x410, 0x44F}, {0x4E00, 0x4FFF}, {0x1F600, 0x1F64F}, {0x09, 0x0A}};
  std::string s;
  for (std::size_t i = 0; i < chars; ++i) {
    const auto& r = ranges[std::uniform_int_distribution<std::size_t>(0, ranges.size() - 1)(rng)];
    s += detail::encode_utf8(std::uniform_int_distribution<std::uint32_t>(r.first, r.second)(rng));
  }
  return s;
}

fs::path temp_dir() {
  const fs::path d = fs::temp_directory_path() / "duolens_test_tok";
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("byte bpe merges in rank order") {
  const Vocab v = toy_bpe();
  CHECK(bpe_encode(v, "").ids.empty());
  const Encoding e = bpe_encode(v, "abab");
  CHECK(toks(v, e) == std::vector<std::string>{"ab", "ab"});
  CHECK(e.offsets == std::vector<std::size_t>{0, 2});
  CHECK(toks(v, bpe_encode(v, "c")) == std::vector<std::string>{"<unk>"});

  // Lower rank wins even when a later rule could match first in the string.
  const Vocab r = Vocab::byte_bpe({"<s>", "</s>", "<pad>", "<unk>", "a", "b", "c", "bc", "ab"}, {{"b", "c"}, {"a", "b"}});
  CHECK(toks(r, bpe_encode(r, "abc")) == std::vector<std::string>{"a", "bc"});
}

TEST_CASE("byte bpe vocab validation") {
  CHECK_THROWS_AS(Vocab::byte_bpe({"<s>", "</s>", "<pad>", "<unk>"}, {{"ab", "c"}}), TokenizerError);
  CHECK_THROWS_AS(Vocab::byte_bpe({"<s>", "</s>", "<pad>"}, {}), TokenizerError);
  CHECK_THROWS_AS(Vocab::byte_bpe({"<s>", "</s>", "<pad>", "<unk>", "<s>"}, {}), TokenizerError);
}

TEST_CASE("byte bpe round trips arbitrary utf-8") {
  const Vocab v = synthetic::code_bpe_vocab();
  CHECK(v.size() <= synthetic::kVocabSize);
  CHECK(bpe_decode(v, std::vector<std::uint32_t>{}).empty());
  for (std::string s : {"fn main() {}", "  x\t=\r\n  y  ", "return  value;\n\n", " ", "\xF0\x9F\x98\x80 ok"}) {
    CHECK(bpe_decode(v, bpe_encode(v, s).ids) == s);
  }
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const std::string s = random_utf8(rng, 1 + i % 40);
    const Encoding e = bpe_encode(v, s);
    REQUIRE(bpe_decode(v, e.ids) == s);
    for (auto id : e.ids) REQUIRE(id < v.size());
  }
  // Invalid UTF-8 bytes still round-trip: the tokenizer sees bytes.
  const std::string raw("\xFF\xFE\x80 a", 5);
  CHECK(bpe_decode(v, bpe_encode(v, raw).ids) == raw);
  CHECK_THROWS_AS(bpe_decode(v, std::vector<std::uint32_t>{static_cast<std::uint32_t>(v.size())}), TokenizerError);
}

TEST_CASE("byte bpe uses merges for keywords") {
  const Vocab v = synthetic::code_bpe_vocab();
  const Encoding e = bpe_encode(v, "return result");
  CHECK(toks(v, e) == std::vector<std::string>{"return", "\xC4\xA0result"});
}

TEST_CASE("wordpiece greedy longest match") {
  const Vocab v = Vocab::wordpiece({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "un", "##aff", "##able", "play", "##ing", "!"});
  CHECK(toks(v, wordpiece_encode(v, "unaffable")) == std::vector<std::string>{"un", "##aff", "##able"});
  CHECK(toks(v, wordpiece_encode(v, "play")) == std::vector<std::string>{"play"});
  CHECK(toks(v, wordpiece_encode(v, "xyz")) == std::vector<std::string>{"[UNK]"});
  CHECK(toks(v, wordpiece_encode(v, "unplay")) == std::vector<std::string>{"[UNK]"});
  CHECK(toks(v, wordpiece_encode(v, "playing! un")) == std::vector<std::string>{"play", "##ing", "!", "un"});
  CHECK(wordpiece_encode(v, "playing! un").offsets == std::vector<std::size_t>{0, 4, 7, 9});

  const Vocab lower = Vocab::wordpiece({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "play"}, true);
  CHECK(toks(lower, wordpiece_encode(lower, "PLAY")) == std::vector<std::string>{"play"});
  CHECK(toks(v, wordpiece_encode(v, "PLAY")) == std::vector<std::string>{"[UNK]"});
}

TEST_CASE("wordpiece never starts a word with a continuation piece") {
  const Vocab v = synthetic::code_wordpiece_vocab();
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const std::string s = random_utf8(rng, 30);
    const Encoding e = wordpiece_encode(v, s);
    for (std::size_t k = 0; k < e.size(); ++k) {
      REQUIRE(e.ids[k] < v.size());
      const bool cont = v.id_to_token[e.ids[k]].rfind("##", 0) == 0;
      if (cont) {
        // The previous token must belong to the same word: no separator between them.
        REQUIRE(k > 0);
        const std::size_t prev = e.offsets[k - 1];
        const std::string_view between(s.data() + prev, e.offsets[k] - prev);
        for (char c : between) REQUIRE(!detail::is_space(static_cast<unsigned char>(c)));
      }
    }
  }
}

TEST_CASE("unigram viterbi and tie rules") {
  const Vocab v = Vocab::unigram({{"<s>", 0}, {"</s>", 0}, {"<pad>", 0}, {"<unk>", 0},
                                  {"abc", -1.0}, {"a", -1.5}, {"bc", -1.5}, {"b", -2.0}, {"c", -2.0}});
  CHECK(toks(v, unigram_encode(v, "abc")) == std::vector<std::string>{"abc"});

  // "ab"+"c" and "a"+"bc" tie on score and count; the smaller first piece wins.
  const Vocab t = Vocab::unigram({{"<s>", 0}, {"</s>", 0}, {"<pad>", 0}, {"<unk>", 0},
                                  {"ab", -1.0}, {"c", -1.0}, {"a", -1.0}, {"bc", -1.0}, {"b", -0.5}});
  CHECK(toks(t, unigram_encode(t, "abc")) == std::vector<std::string>{"a", "bc"});

  // Same score, fewer pieces: "xy" (-2) beats "x"+"y" (-1 + -1).
  const Vocab f = Vocab::unigram({{"<s>", 0}, {"</s>", 0}, {"<pad>", 0}, {"<unk>", 0},
                                  {"xy", -2.0}, {"x", -1.0}, {"y", -1.0}});
  CHECK(toks(f, unigram_encode(f, "xy")) == std::vector<std::string>{"xy"});

  CHECK(toks(v, unigram_encode(v, "aqc")) == std::vector<std::string>{"a", "<unk>", "c"});

  const Vocab sp = Vocab::unigram({{"<s>", 0}, {"</s>", 0}, {"<pad>", 0}, {"<unk>", 0},
                                   {"hi", -1.0}, {"\xE2\x96\x81there", -1.0}});
  const Encoding e = unigram_encode(sp, "hi there");
  CHECK(toks(sp, e) == std::vector<std::string>{"hi", "\xE2\x96\x81there"});
  CHECK(unigram_decode(sp, e.ids) == "hi there");
}

TEST_CASE("unigram matches exhaustive segmentation") {
  std::mt19937_64 rng(17);
  const std::vector<std::string> alphabet{"a", "b", "c"};
  for (int trial = 0; trial < 60; ++trial) {
    // 12-piece toy vocab: all single characters plus 9 random multi-character pieces.
    std::vector<std::pair<std::string, double>> pieces{{"<s>", 0}, {"</s>", 0}, {"<pad>", 0}, {"<unk>", 0}};
    std::set<std::string> used;
    // Multiples of 1/8 sum exactly, so ties are real ties on both sides.
    std::uniform_int_distribution<int> eighths(1, 48);
    auto lp = [&](std::mt19937_64& r) { return -eighths(r) / 8.0; };
    for (const auto& c : alphabet) {
      pieces.emplace_back(c, lp(rng));
      used.insert(c);
    }
    while (pieces.size() < 4 + 12) {
      std::string p;
      const int len = std::uniform_int_distribution<int>(2, 4)(rng);
      for (int k = 0; k < len; ++k) p += alphabet[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
      if (used.insert(p).second) pieces.emplace_back(p, lp(rng));
    }
    const Vocab v = Vocab::unigram(pieces);
    const std::size_t n = trial < 30 ? 10 : std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    std::vector<std::string> chars;
    std::string text;
    for (std::size_t k = 0; k < n; ++k) {
      chars.push_back(alphabet[std::uniform_int_distribution<std::size_t>(0, 2)(rng)]);
      text += chars.back();
    }
    const auto best = oracle::exhaustive_unigram(chars, {pieces.begin() + 4, pieces.end()});
    REQUIRE(best.found);
    const Encoding e = unigram_encode(v, text);
    double score = 0;
    for (auto id : e.ids) score += v.piece_logprob[id];
    CHECK(score >= best.score - 1e-9);
    CHECK(toks(v, e) == best.pieces);
    CHECK(unigram_decode(v, e.ids) == text);
  }
}

TEST_CASE("vocabulary files round trip") {
  const fs::path d = temp_dir();
  const Vocab bpe = synthetic::code_bpe_vocab();
  save_bpe_vocab(bpe, d / "bpe.json", d / "bpe.merges");
  const Tokenizer tb = load_tokenizer(VocabKind::ByteBpe, d / "bpe.json", d / "bpe.merges");
  CHECK(tb.vocab().id_to_token == bpe.id_to_token);
  CHECK(tb.vocab().merges == bpe.merges);
  CHECK(tb.encode("return total;").ids == bpe_encode(bpe, "return total;").ids);

  const Vocab wp = synthetic::word_wordpiece_vocab();
  save_wordpiece_vocab(wp, d / "wp.txt");
  const Tokenizer tw = load_tokenizer(VocabKind::WordPiece, d / "wp.txt");
  CHECK(tw.vocab().id_to_token == wp.id_to_token);
  CHECK(tw.encode("w4 w999").ids == std::vector<std::uint32_t>{4, 999});

  const Vocab ug = Vocab::unigram({{"<s>", 0}, {"</s>", 0}, {"<pad>", 0}, {"<unk>", 0}, {"ab", -1.25}, {"a", -0.1}});
  save_unigram_vocab(ug, d / "ug.tsv");
  const Tokenizer tu = load_tokenizer(VocabKind::Unigram, d / "ug.tsv");
  CHECK(tu.vocab().piece_logprob == ug.piece_logprob);

  CHECK_THROWS_AS(load_tokenizer(VocabKind::ByteBpe, d / "bpe.json"), TokenizerError);
  CHECK_THROWS_AS(load_tokenizer(VocabKind::WordPiece, d / "nope.txt"), TokenizerError);
  CHECK(parse_vocab_kind("byte-bpe") == VocabKind::ByteBpe);
  CHECK_THROWS_AS(parse_vocab_kind("sentencepiece"), TokenizerError);
}

TEST_CASE("specials are present and distinct") {
  for (const Vocab& v : {synthetic::code_bpe_vocab(), synthetic::code_wordpiece_vocab(),
                         synthetic::word_wordpiece_vocab()}) {
    const auto& s = v.specials;
    std::set<std::uint32_t> ids{s.cls, s.sep, s.pad, s.unk};
    CHECK(ids.size() == 4);
  }
}
