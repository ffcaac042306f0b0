#pragma once

// JSON encoding of grammar values.
//
//   color:        "COLOR1" .. "COLOR8"
//   output:       ["COLOR1", "COLOR1", "COLOR1"]
//   instruction:  "dax fep"
//   lexicon:      {"schema": "fewshot.lexicon/1",
//                  "word_pool": [...], "color_pool": ["COLOR3", ...],
//                  "entries": [{"word": "dax", "meaning": "COLOR1"},
//                              {"word": "fep", "meaning": "RepeatThree"}, ...]}

#include <json.hpp>

#include "fewshot/grammar/lexicon.hpp"
#include "fewshot/grammar/types.hpp"

namespace fewshot {

inline constexpr const char* kLexiconSchema = "fewshot.lexicon/1";

inline void to_json(nlohmann::json& j, const ColorSymbol& c) { j = c.name(); }
inline void from_json(const nlohmann::json& j, ColorSymbol& c) {
  c = ColorSymbol::parse(j.get<std::string>());
}

inline void to_json(nlohmann::json& j, const Instruction& i) { j = i.str(); }
inline void from_json(const nlohmann::json& j, Instruction& i) {
  i = Instruction::parse(j.get<std::string>());
}

inline nlohmann::json meaning_to_json(const Meaning& m) {
  if (m.is_primitive()) return m.color.name();
  return std::string(to_string(m.kind));
}

inline Meaning meaning_from_json(const nlohmann::json& j) {
  const auto s = j.get<std::string>();
  if (s == "RepeatThree") return Meaning::function(MeaningKind::RepeatThree);
  if (s == "Alternate") return Meaning::function(MeaningKind::Alternate);
  if (s == "ReverseConcat") return Meaning::function(MeaningKind::ReverseConcat);
  return Meaning::primitive(ColorSymbol::parse(s));
}

inline void to_json(nlohmann::json& j, const Lexicon& lex) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : lex.entries())
    entries.push_back({{"word", e.word}, {"meaning", meaning_to_json(e.meaning)}});
  j = {{"schema", kLexiconSchema},
       {"word_pool", lex.word_pool()},
       {"color_pool", lex.color_pool()},
       {"entries", std::move(entries)}};
}

inline void from_json(const nlohmann::json& j, Lexicon& lex) {
  if (j.contains("schema") && j.at("schema") != kLexiconSchema)
    throw Error(Errc::Format, "unsupported lexicon schema " + j.at("schema").dump());
  std::vector<Lexicon::Entry> entries;
  for (const auto& e : j.at("entries"))
    entries.push_back({e.at("word").get<std::string>(), meaning_from_json(e.at("meaning"))});
  lex = Lexicon(j.at("word_pool").get<std::vector<std::string>>(),
                j.at("color_pool").get<std::vector<ColorSymbol>>(), std::move(entries));
}

}  // namespace fewshot
