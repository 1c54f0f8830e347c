#pragma once

// Table-driven tokenizers for the three encoder families:
//   byte-bpe   vocab.json (token -> id) + merges.txt (one "left right" rule per line, ranked by line)
//   wordpiece  one piece per line, id = line index
//   unigram    TSV "piece<TAB>logprob", id = line index
// Vocabularies are inputs; nothing here learns one.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "duolens/errors.hpp"

namespace duolens {

enum class VocabKind { ByteBpe, WordPiece, Unigram };

inline std::string to_string(VocabKind k) {
  switch (k) {
    case VocabKind::ByteBpe: return "byte-bpe";
    case VocabKind::WordPiece: return "wordpiece";
    case VocabKind::Unigram: return "unigram";
  }
  return "?";
}

inline VocabKind parse_vocab_kind(std::string_view s) {
  if (s == "byte-bpe") return VocabKind::ByteBpe;
  if (s == "wordpiece") return VocabKind::WordPiece;
  if (s == "unigram") return VocabKind::Unigram;
  throw TokenizerError("unknown tokenizer kind '" + std::string(s) + "'");
}

struct SpecialIds {
  std::uint32_t cls = 0;
  std::uint32_t sep = 0;
  std::uint32_t pad = 0;
  std::uint32_t unk = 0;

  bool contains(std::uint32_t id) const noexcept { return id == cls || id == sep || id == pad || id == unk; }
};

struct Encoding {
  std::vector<std::uint32_t> ids;
  std::vector<std::uint8_t> attention_mask;
  // Byte offset in the source text where each token starts. Specials and
  // padding added by callers carry the offset of the following content.
  std::vector<std::size_t> offsets;

  std::size_t size() const noexcept { return ids.size(); }

  void push(std::uint32_t id, std::size_t offset, std::uint8_t mask = 1) {
    ids.push_back(id);
    attention_mask.push_back(mask);
    offsets.push_back(offset);
  }
};

namespace detail {

inline std::size_t utf8_len(unsigned char lead) noexcept {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // stray continuation byte: treat as a single unit
}

// Splits into UTF-8 character units (invalid bytes become single units).
inline std::vector<std::string_view> utf8_chars(std::string_view s) {
  std::vector<std::string_view> out;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t n = std::min(utf8_len(static_cast<unsigned char>(s[i])), s.size() - i);
    out.push_back(s.substr(i, n));
    i += n;
  }
  return out;
}

inline std::string encode_utf8(std::uint32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

// The reversible byte -> printable-codepoint table used by byte-level BPE:
// printable latin-1 bytes map to themselves, the rest to U+0100 upward.
inline const std::vector<std::string>& byte_alphabet() {
  static const std::vector<std::string> table = [] {
    std::vector<std::string> t(256);
    std::uint32_t next = 256;
    for (std::uint32_t b = 0; b < 256; ++b) {
      const bool printable = (b >= 0x21 && b <= 0x7E) || (b >= 0xA1 && b <= 0xAC) || (b >= 0xAE);
      t[b] = encode_utf8(printable ? b : next++);
    }
    return t;
  }();
  return table;
}

inline const std::unordered_map<std::string, std::uint8_t>& byte_alphabet_inverse() {
  static const std::unordered_map<std::string, std::uint8_t> inv = [] {
    std::unordered_map<std::string, std::uint8_t> m;
    const auto& t = byte_alphabet();
    for (std::size_t b = 0; b < 256; ++b) m.emplace(t[b], static_cast<std::uint8_t>(b));
    return m;
  }();
  return inv;
}

inline bool is_space(unsigned char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

inline bool is_word_byte(unsigned char c) noexcept { return std::isalnum(c) || c == '_' || c >= 0x80; }

}  // namespace detail

struct Vocab {
  VocabKind kind = VocabKind::WordPiece;
  std::unordered_map<std::string, std::uint32_t> token_to_id;
  std::vector<std::string> id_to_token;
  std::vector<std::pair<std::string, std::string>> merges;  // byte-bpe, ascending rank
  std::unordered_map<std::string, std::size_t> merge_rank;  // "left right" -> rank
  std::vector<double> piece_logprob;                        // unigram, indexed by id
  std::size_t max_piece_chars = 0;                          // unigram
  SpecialIds specials;
  bool lowercase = false;  // wordpiece only

  std::size_t size() const noexcept { return id_to_token.size(); }

  std::uint32_t id_of(const std::string& tok) const {
    auto it = token_to_id.find(tok);
    if (it == token_to_id.end()) throw TokenizerError("token '" + tok + "' is not in the vocabulary");
    return it->second;
  }

  // Builds a vocabulary from tokens listed in id order.
  static Vocab from_tokens(VocabKind kind, std::vector<std::string> tokens) {
    Vocab v;
    v.kind = kind;
    v.id_to_token = std::move(tokens);
    for (std::size_t i = 0; i < v.id_to_token.size(); ++i) {
      if (!v.token_to_id.emplace(v.id_to_token[i], static_cast<std::uint32_t>(i)).second) {
        throw TokenizerError("duplicate vocabulary token '" + v.id_to_token[i] + "'");
      }
    }
    const bool bert = kind == VocabKind::WordPiece;
    v.specials.cls = v.special(bert ? "[CLS]" : "<s>");
    v.specials.sep = v.special(bert ? "[SEP]" : "</s>");
    v.specials.pad = v.special(bert ? "[PAD]" : "<pad>");
    v.specials.unk = v.special(bert ? "[UNK]" : "<unk>");
    return v;
  }

  static Vocab byte_bpe(std::vector<std::string> tokens, std::vector<std::pair<std::string, std::string>> merges) {
    Vocab v = from_tokens(VocabKind::ByteBpe, std::move(tokens));
    std::unordered_set<std::string> derivable(detail::byte_alphabet().begin(), detail::byte_alphabet().end());
    for (std::size_t r = 0; r < merges.size(); ++r) {
      const auto& [a, b] = merges[r];
      if (!derivable.count(a) || !derivable.count(b)) {
        throw TokenizerError("merge rule " + std::to_string(r) + " '" + a + " " + b +
                             "' references a symbol no earlier rule derives");
      }
      derivable.insert(a + b);
      v.merge_rank.emplace(a + " " + b, r);
    }
    v.merges = std::move(merges);
    return v;
  }

  static Vocab wordpiece(std::vector<std::string> tokens, bool lowercase = false) {
    Vocab v = from_tokens(VocabKind::WordPiece, std::move(tokens));
    v.lowercase = lowercase;
    return v;
  }

  static Vocab unigram(std::vector<std::pair<std::string, double>> pieces) {
    std::vector<std::string> toks;
    toks.reserve(pieces.size());
    for (auto& p : pieces) toks.push_back(p.first);
    Vocab v = from_tokens(VocabKind::Unigram, std::move(toks));
    v.piece_logprob.resize(pieces.size());
    bool any = false;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      v.piece_logprob[i] = pieces[i].second;
      if (!v.specials.contains(static_cast<std::uint32_t>(i))) {
        any = true;
        v.max_piece_chars = std::max(v.max_piece_chars, detail::utf8_chars(pieces[i].first).size());
      }
    }
    if (!any) throw TokenizerError("unigram vocabulary has no scored pieces");
    return v;
  }

 private:
  std::uint32_t special(const std::string& name) const {
    auto it = token_to_id.find(name);
    if (it == token_to_id.end()) throw TokenizerError("vocabulary is missing special token " + name);
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// byte-level BPE
//
// Pre-split into pieces, each pieces merged independently:
//   * a run of whitespace, except that a single ' ' directly before a
//     non-space byte is attached to the following piece;
//   * a run of word bytes (ASCII alnum, '_', any byte >= 0x80);
//   * a run of other bytes (ASCII punctuation and controls).
// The pieces partition the input, so decode(encode(s)) == s.

namespace detail {

struct Span {
  std::size_t begin, end;
};

inline std::vector<Span> bpe_presplit(std::string_view text) {
  std::vector<Span> out;
  const std::size_t n = text.size();
  std::size_t i = 0;
  auto cls = [&](std::size_t k) {
    const auto c = static_cast<unsigned char>(text[k]);
    return is_space(c) ? 0 : (is_word_byte(c) ? 1 : 2);
  };
  while (i < n) {
    std::size_t start = i;
    if (cls(i) == 0) {
      std::size_t j = i;
      while (j < n && cls(j) == 0) ++j;
      if (j < n && text[j - 1] == ' ') {
        if (j - 1 > i) out.push_back({i, j - 1});
        start = j - 1;
        i = j;
      } else {
        out.push_back({i, j});
        i = j;
        continue;
      }
    }
    const int c = cls(i);
    std::size_t j = i;
    while (j < n && cls(j) == c) ++j;
    out.push_back({start, j});
    i = j;
  }
  return out;
}

}  // namespace detail

inline Encoding bpe_encode(const Vocab& v, std::string_view text) {
  if (v.kind != VocabKind::ByteBpe) throw TokenizerError("bpe_encode needs a byte-bpe vocabulary");
  Encoding enc;
  const auto& alphabet = detail::byte_alphabet();
  struct Sym {
    std::string s;
    std::size_t offset;
  };
  std::vector<Sym> syms;
  for (const auto& piece : detail::bpe_presplit(text)) {
    syms.clear();
    for (std::size_t k = piece.begin; k < piece.end; ++k) {
      syms.push_back({alphabet[static_cast<unsigned char>(text[k])], k});
    }
    // Apply the lowest-ranked applicable rule everywhere, left to right, until none apply.
    while (syms.size() > 1) {
      std::size_t best = std::numeric_limits<std::size_t>::max();
      for (std::size_t k = 0; k + 1 < syms.size(); ++k) {
        auto it = v.merge_rank.find(syms[k].s + " " + syms[k + 1].s);
        if (it != v.merge_rank.end()) best = std::min(best, it->second);
      }
      if (best == std::numeric_limits<std::size_t>::max()) break;
      const auto& [a, b] = v.merges[best];
      std::vector<Sym> next;
      next.reserve(syms.size());
      for (std::size_t k = 0; k < syms.size(); ++k) {
        if (k + 1 < syms.size() && syms[k].s == a && syms[k + 1].s == b) {
          next.push_back({a + b, syms[k].offset});
          ++k;
        } else {
          next.push_back(std::move(syms[k]));
        }
      }
      syms = std::move(next);
    }
    for (const auto& s : syms) {
      auto it = v.token_to_id.find(s.s);
      enc.push(it == v.token_to_id.end() ? v.specials.unk : it->second, s.offset);
    }
  }
  return enc;
}

// Specials are skipped; everything else is mapped back through the byte alphabet.
inline std::string bpe_decode(const Vocab& v, std::span<const std::uint32_t> ids) {
  const auto& inv = detail::byte_alphabet_inverse();
  std::string out;
  for (std::uint32_t id : ids) {
    if (id >= v.size()) {
      throw TokenizerError("token id " + std::to_string(id) + " out of range for vocabulary of size " +
                           std::to_string(v.size()));
    }
    if (v.specials.contains(id)) continue;
    for (auto ch : detail::utf8_chars(v.id_to_token[id])) {
      auto it = inv.find(std::string(ch));
      if (it == inv.end()) throw TokenizerError("token '" + v.id_to_token[id] + "' is outside the byte alphabet");
      out.push_back(static_cast<char>(it->second));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// WordPiece
//
// Pre-split: ASCII whitespace separates words; every ASCII punctuation byte
// (std::ispunct) is a word of its own. Each word is then matched greedily,
// longest prefix first, with "##" marking continuation pieces. A word with any
// unmatched remainder becomes a single [UNK].

inline Encoding wordpiece_encode(const Vocab& v, std::string_view text) {
  if (v.kind != VocabKind::WordPiece) throw TokenizerError("wordpiece_encode needs a wordpiece vocabulary");
  constexpr std::size_t kMaxWordChars = 100;
  Encoding enc;
  auto emit_word = [&](std::size_t begin, std::size_t end) {
    std::string word(text.substr(begin, end - begin));
    if (v.lowercase) {
      for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    const auto chars = detail::utf8_chars(word);
    if (chars.size() > kMaxWordChars) {
      enc.push(v.specials.unk, begin);
      return;
    }
    // Byte boundaries of each character.
    std::vector<std::size_t> bounds{0};
    for (auto ch : chars) bounds.push_back(bounds.back() + ch.size());
    Encoding pieces;
    std::size_t start = 0;  // index into chars
    while (start < chars.size()) {
      std::size_t end = chars.size();
      bool found = false;
      std::uint32_t id = 0;
      while (end > start) {
        std::string sub = word.substr(bounds[start], bounds[end] - bounds[start]);
        if (start > 0) sub = "##" + sub;
        if (auto it = v.token_to_id.find(sub); it != v.token_to_id.end()) {
          id = it->second;
          found = true;
          break;
        }
        --end;
      }
      if (!found) {
        enc.push(v.specials.unk, begin);
        return;
      }
      pieces.push(id, begin + bounds[start]);
      start = end;
    }
    for (std::size_t k = 0; k < pieces.size(); ++k) enc.push(pieces.ids[k], pieces.offsets[k]);
  };

  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (detail::is_space(c)) {
      ++i;
    } else if (c < 0x80 && std::ispunct(c)) {
      emit_word(i, i + 1);
      ++i;
    } else {
      std::size_t j = i;
      while (j < n) {
        const auto d = static_cast<unsigned char>(text[j]);
        if (detail::is_space(d) || (d < 0x80 && std::ispunct(d))) break;
        ++j;
      }
      emit_word(i, j);
      i = j;
    }
  }
  return enc;
}

inline std::string wordpiece_decode(const Vocab& v, std::span<const std::uint32_t> ids) {
  std::string out;
  for (std::uint32_t id : ids) {
    if (id >= v.size()) throw TokenizerError("token id " + std::to_string(id) + " out of range");
    if (v.specials.contains(id) && id != v.specials.unk) continue;
    const std::string& t = v.id_to_token[id];
    if (t.rfind("##", 0) == 0) {
      out += t.substr(2);
    } else {
      if (!out.empty()) out.push_back(' ');
      out += t;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Unigram
//
// Spaces are matched as U+2581 ("▁"); no other normalization and no dummy
// prefix. The segmentation maximizes the summed piece log-probability; ties go
// to fewer pieces, then to the lexicographically smallest piece sequence. A
// character that starts no piece becomes a one-character <unk> scored below
// every real piece.

inline constexpr std::string_view kUnigramSpace = "\xE2\x96\x81";

inline Encoding unigram_encode(const Vocab& v, std::string_view text) {
  if (v.kind != VocabKind::Unigram) throw TokenizerError("unigram_encode needs a unigram vocabulary");
  std::vector<std::string> chars;
  std::vector<std::size_t> char_offset;
  {
    std::size_t off = 0;
    for (auto ch : detail::utf8_chars(text)) {
      chars.emplace_back(ch == " " ? std::string(kUnigramSpace) : std::string(ch));
      char_offset.push_back(off);
      off += ch.size();
    }
  }
  const std::size_t n = chars.size();
  double min_lp = 0.0;
  for (std::size_t i = 0; i < v.piece_logprob.size(); ++i) {
    if (!v.specials.contains(static_cast<std::uint32_t>(i))) min_lp = std::min(min_lp, v.piece_logprob[i]);
  }
  const double unk_score = min_lp - 10.0;

  struct Cell {
    double score = 0.0;
    std::size_t count = 0;
    std::size_t next = 0;
    std::uint32_t id = 0;
  };
  // best[i] describes the optimal segmentation of chars[i..n).
  std::vector<Cell> best(n + 1);
  for (std::size_t i = n; i-- > 0;) {
    bool have = false;
    Cell cur;
    std::string piece;
    for (std::size_t len = 1; len <= v.max_piece_chars && i + len <= n; ++len) {
      piece += chars[i + len - 1];
      auto it = v.token_to_id.find(piece);
      if (it == v.token_to_id.end() || v.specials.contains(it->second)) continue;
      const Cell& rest = best[i + len];
      Cell cand{v.piece_logprob[it->second] + rest.score, rest.count + 1, i + len, it->second};
      bool better = !have || cand.score > cur.score ||
                    (cand.score == cur.score &&
                     (cand.count < cur.count ||
                      (cand.count == cur.count && v.id_to_token[cand.id] < v.id_to_token[cur.id])));
      if (better) {
        cur = cand;
        have = true;
      }
    }
    if (!have) cur = Cell{unk_score + best[i + 1].score, best[i + 1].count + 1, i + 1, v.specials.unk};
    best[i] = cur;
  }
  Encoding enc;
  for (std::size_t i = 0; i < n; i = best[i].next) enc.push(best[i].id, char_offset[i]);
  return enc;
}

inline std::string unigram_decode(const Vocab& v, std::span<const std::uint32_t> ids) {
  std::string out;
  for (std::uint32_t id : ids) {
    if (id >= v.size()) throw TokenizerError("token id " + std::to_string(id) + " out of range");
    if (v.specials.contains(id)) continue;
    out += v.id_to_token[id];
  }
  std::string res;
  for (std::size_t i = 0; i < out.size();) {
    if (out.compare(i, kUnigramSpace.size(), kUnigramSpace) == 0) {
      res.push_back(' ');
      i += kUnigramSpace.size();
    } else {
      res.push_back(out[i++]);
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// File formats

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TokenizerError("cannot open vocabulary file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

inline Vocab load_wordpiece_vocab(const std::filesystem::path& path, bool lowercase = false) {
  auto lines = read_lines(path);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return Vocab::wordpiece(std::move(lines), lowercase);
}

inline Vocab load_unigram_vocab(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, double>> pieces;
  std::size_t lineno = 0;
  for (auto& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw TokenizerError(path.string() + ":" + std::to_string(lineno) + ": expected piece<TAB>logprob");
    }
    try {
      pieces.emplace_back(line.substr(0, tab), std::stod(line.substr(tab + 1)));
    } catch (const std::exception&) {
      throw TokenizerError(path.string() + ":" + std::to_string(lineno) + ": bad logprob");
    }
  }
  return Vocab::unigram(std::move(pieces));
}

inline Vocab load_bpe_vocab(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt) {
  std::ifstream in(vocab_json);
  if (!in) throw TokenizerError("cannot open vocabulary file: " + vocab_json.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw TokenizerError(vocab_json.string() + ": " + e.what());
  }
  if (!j.is_object()) throw TokenizerError(vocab_json.string() + ": expected a token -> id object");
  std::vector<std::string> tokens(j.size());
  std::vector<bool> seen(j.size(), false);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number_unsigned()) throw TokenizerError(vocab_json.string() + ": ids must be unsigned integers");
    const auto id = it.value().get<std::size_t>();
    if (id >= tokens.size() || seen[id]) throw TokenizerError(vocab_json.string() + ": ids must be dense and unique");
    tokens[id] = it.key();
    seen[id] = true;
  }
  std::vector<std::pair<std::string, std::string>> merges;
  std::size_t lineno = 0;
  for (auto& line : read_lines(merges_txt)) {
    ++lineno;
    if (line.empty() || line.rfind("#version", 0) == 0) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos || line.find(' ', sp + 1) != std::string::npos) {
      throw TokenizerError(merges_txt.string() + ":" + std::to_string(lineno) + ": expected 'left right'");
    }
    merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return Vocab::byte_bpe(std::move(tokens), std::move(merges));
}

inline void save_wordpiece_vocab(const Vocab& v, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  for (const auto& t : v.id_to_token) out << t << '\n';
  if (!out) throw TokenizerError("failed writing " + path.string());
}

inline void save_unigram_vocab(const Vocab& v, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  char buf[64];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v.piece_logprob[i]);
    out << v.id_to_token[i] << '\t' << buf << '\n';
  }
  if (!out) throw TokenizerError("failed writing " + path.string());
}

inline void save_bpe_vocab(const Vocab& v, const std::filesystem::path& vocab_json,
                           const std::filesystem::path& merges_txt) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < v.size(); ++i) j[v.id_to_token[i]] = i;
  std::ofstream out(vocab_json, std::ios::binary);
  out << j.dump() << '\n';
  std::ofstream m(merges_txt, std::ios::binary);
  m << "#version: 0.2\n";
  for (const auto& [a, b] : v.merges) m << a << ' ' << b << '\n';
  if (!out || !m) throw TokenizerError("failed writing " + vocab_json.string());
}

// ---------------------------------------------------------------------------

class Tokenizer {
 public:
  Tokenizer() = default;
  explicit Tokenizer(Vocab v) : vocab_(std::move(v)) {}

  // Content tokens only; [CLS]/[SEP] framing is added by the pipeline.
  Encoding encode(std::string_view text) const {
    switch (vocab_.kind) {
      case VocabKind::ByteBpe: return bpe_encode(vocab_, text);
      case VocabKind::WordPiece: return wordpiece_encode(vocab_, text);
      case VocabKind::Unigram: return unigram_encode(vocab_, text);
    }
    throw InternalError("unreachable tokenizer kind");
  }

  std::string decode(std::span<const std::uint32_t> ids) const {
    switch (vocab_.kind) {
      case VocabKind::ByteBpe: return bpe_decode(vocab_, ids);
      case VocabKind::WordPiece: return wordpiece_decode(vocab_, ids);
      case VocabKind::Unigram: return unigram_decode(vocab_, ids);
    }
    throw InternalError("unreachable tokenizer kind");
  }

  const Vocab& vocab() const noexcept { return vocab_; }
  const SpecialIds& specials() const noexcept { return vocab_.specials; }
  VocabKind kind() const noexcept { return vocab_.kind; }

 private:
  Vocab vocab_;
};

// Loads from files: `vocab` is the vocabulary file, `merges` is required for byte-bpe only.
inline Tokenizer load_tokenizer(VocabKind kind, const std::filesystem::path& vocab,
                                const std::filesystem::path& merges = {}, bool lowercase = false) {
  switch (kind) {
    case VocabKind::ByteBpe:
      if (merges.empty()) throw TokenizerError("byte-bpe tokenizer needs a merges file");
      return Tokenizer(load_bpe_vocab(vocab, merges));
    case VocabKind::WordPiece: return Tokenizer(load_wordpiece_vocab(vocab, lowercase));
    case VocabKind::Unigram: return Tokenizer(load_unigram_vocab(vocab));
  }
  throw InternalError("unreachable tokenizer kind");
}

}  // namespace duolens
