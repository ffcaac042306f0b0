#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fewshot/error.hpp"
#include "fewshot/grammar.hpp"

namespace fewshot {

enum class ExperimentKind { Exp1, Exp2, Exp3 };

constexpr std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Exp1: return "exp1";
    case ExperimentKind::Exp2: return "exp2";
    case ExperimentKind::Exp3: return "exp3";
  }
  return "?";
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
  if (s == "exp1" || s == "1") return ExperimentKind::Exp1;
  if (s == "exp2" || s == "2") return ExperimentKind::Exp2;
  if (s == "exp3" || s == "3") return ExperimentKind::Exp3;
  throw Error(Errc::BadRequest, "unknown experiment kind: " + std::string(s));
}

/// F1..Composition are curriculum stages; the rest are single bias trials
/// (MutualExclusivity, Iconic, Conflict, Catch) or the free-form page.
enum class StageKind { F1, F2, F3, Composition, MutualExclusivity, Iconic, Conflict, Catch, FreeForm };

constexpr std::string_view to_string(StageKind k) {
  switch (k) {
    case StageKind::F1: return "F1";
    case StageKind::F2: return "F2";
    case StageKind::F3: return "F3";
    case StageKind::Composition: return "Composition";
    case StageKind::MutualExclusivity: return "ME";
    case StageKind::Iconic: return "Iconic";
    case StageKind::Conflict: return "Conflict";
    case StageKind::Catch: return "Catch";
    case StageKind::FreeForm: return "FreeForm";
  }
  return "?";
}

inline StageKind parse_stage_kind(std::string_view s) {
  for (auto k : {StageKind::F1, StageKind::F2, StageKind::F3, StageKind::Composition,
                 StageKind::MutualExclusivity, StageKind::Iconic, StageKind::Conflict,
                 StageKind::Catch, StageKind::FreeForm})
    if (to_string(k) == s) return k;
  throw Error(Errc::Format, "unknown stage kind: " + std::string(s));
}

/// A study line or a test query. `target` is empty when the grammar defines
/// no answer (novel words in bias trials, free-form items).
struct Item {
  std::string id;
  Instruction instruction;
  std::optional<OutputSeq> target;
  bool is_catch = false;
  std::vector<ColorSymbol> pool;

  friend bool operator==(const Item&, const Item&) = default;
};

struct Stage {
  std::string id;
  StageKind kind = StageKind::F1;
  Lexicon lexicon;
  std::vector<Item> study;
  std::vector<Item> test;
  bool has_quiz = false;
  /// Bias trials: study lines that give a second word the familiar color.
  int n_contradictory = 0;
  /// Bias trials: single-symbol meanings already claimed by demonstrated
  /// words. A response equal to one of these violates mutual exclusivity.
  std::vector<ColorSymbol> familiar;

  bool is_function_stage() const {
    return kind == StageKind::F1 || kind == StageKind::F2 || kind == StageKind::F3;
  }

  friend bool operator==(const Stage&, const Stage&) = default;
};

struct ExperimentSpec {
  static constexpr int kVersion = 1;

  ExperimentKind kind = ExperimentKind::Exp1;
  std::uint64_t seed = 0;
  /// Interface practice shown before the first stage; must be reproduced
  /// exactly before the experiment starts.
  Item practice;
  std::vector<Stage> stages;

  struct Located {
    const Stage* stage;
    const Item* item;
  };

  std::optional<Located> find_item(std::string_view id) const {
    if (practice.id == id) return Located{nullptr, &practice};
    for (const auto& s : stages) {
      for (const auto& i : s.study)
        if (i.id == id) return Located{&s, &i};
      for (const auto& i : s.test)
        if (i.id == id) return Located{&s, &i};
    }
    return std::nullopt;
  }

  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

/// Exact match: same length, same symbol at every position.
inline bool score_response(const Item& item, const OutputSeq& response) {
  if (!item.target) throw Error(Errc::NoTarget, "item " + item.id + " has no defined answer");
  return *item.target == response;
}

// ---- JSON -----------------------------------------------------------------

inline constexpr const char* kExperimentSchema = "fewshot.experiment/1";

inline void to_json(nlohmann::json& j, const Item& i) {
  j = {{"id", i.id},
       {"instruction", i.instruction},
       {"target", i.target ? nlohmann::json(*i.target) : nlohmann::json(nullptr)},
       {"is_catch", i.is_catch},
       {"pool", i.pool}};
}

inline void from_json(const nlohmann::json& j, Item& i) {
  i.id = j.at("id").get<std::string>();
  i.instruction = j.at("instruction").get<Instruction>();
  i.target.reset();
  if (!j.at("target").is_null()) i.target = j.at("target").get<OutputSeq>();
  i.is_catch = j.at("is_catch").get<bool>();
  i.pool = j.at("pool").get<std::vector<ColorSymbol>>();
}

inline void to_json(nlohmann::json& j, const Stage& s) {
  j = {{"id", s.id},
       {"kind", to_string(s.kind)},
       {"lexicon", s.lexicon},
       {"study", s.study},
       {"test", s.test},
       {"has_quiz", s.has_quiz},
       {"n_contradictory", s.n_contradictory},
       {"familiar", s.familiar}};
}

inline void from_json(const nlohmann::json& j, Stage& s) {
  s.id = j.at("id").get<std::string>();
  s.kind = parse_stage_kind(j.at("kind").get<std::string>());
  s.lexicon = j.at("lexicon").get<Lexicon>();
  s.study = j.at("study").get<std::vector<Item>>();
  s.test = j.at("test").get<std::vector<Item>>();
  s.has_quiz = j.at("has_quiz").get<bool>();
  s.n_contradictory = j.at("n_contradictory").get<int>();
  s.familiar = j.at("familiar").get<std::vector<ColorSymbol>>();
}

inline void to_json(nlohmann::json& j, const ExperimentSpec& e) {
  j = {{"schema", kExperimentSchema},
       {"version", ExperimentSpec::kVersion},
       {"kind", to_string(e.kind)},
       {"seed", e.seed},
       {"practice", e.practice},
       {"stages", e.stages}};
}

inline void from_json(const nlohmann::json& j, ExperimentSpec& e) {
  if (j.at("schema") != kExperimentSchema)
    throw Error(Errc::Format, "unsupported experiment schema " + j.at("schema").dump());
  e.kind = parse_experiment_kind(j.at("kind").get<std::string>());
  e.seed = j.at("seed").get<std::uint64_t>();
  e.practice = j.at("practice").get<Item>();
  e.stages = j.at("stages").get<std::vector<Stage>>();
}

}  // namespace fewshot
