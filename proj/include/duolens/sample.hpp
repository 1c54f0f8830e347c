#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "duolens/errors.hpp"

namespace duolens {

// Label convention: 0 = human-written, 1 = machine-generated.
struct Sample {
  std::string id;
  std::string text;
  std::string language;
  int label = 0;
  std::string source;
  std::optional<std::string> generator;

  bool operator==(const Sample&) const = default;
};

inline nlohmann::ordered_json to_json(const Sample& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["text"] = s.text;
  j["language"] = s.language;
  j["label"] = s.label;
  j["source"] = s.source;
  if (s.generator) j["generator"] = *s.generator;
  return j;
}

// Throws CorpusError describing the first schema violation. Unknown fields are ignored.
inline Sample sample_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw CorpusError("sample must be a JSON object");
  auto str = [&](const char* key, bool required) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) throw CorpusError(std::string("missing field '") + key + "'");
      return {};
    }
    if (!it->is_string()) throw CorpusError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
  };
  Sample s;
  s.id = str("id", true);
  s.text = str("text", true);
  s.language = str("language", true);
  s.source = str("source", false);
  if (s.id.empty()) throw CorpusError("field 'id' must be non-empty");
  if (s.text.empty()) throw CorpusError("field 'text' must be non-empty");
  auto lab = j.find("label");
  if (lab == j.end() || !lab->is_number_integer()) throw CorpusError("field 'label' must be the integer 0 or 1");
  const auto v = lab->get<long long>();
  if (v != 0 && v != 1) throw CorpusError("field 'label' must be 0 or 1");
  s.label = static_cast<int>(v);
  if (auto g = j.find("generator"); g != j.end() && !g->is_null()) {
    if (!g->is_string()) throw CorpusError("field 'generator' must be a string or null");
    s.generator = g->get<std::string>();
  }
  return s;
}

}  // namespace duolens
