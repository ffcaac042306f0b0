#pragma once

#include <algorithm>
#include <optional>

#include "fewshot/grammar.hpp"
#include "fewshot/protocol/spec.hpp"

namespace fewshot {

/// Per-response consistency flags. The optional flags are empty (NA) when the
/// bias cannot be probed by the item.
struct BiasVerdict {
  bool one_to_one = false;
  bool iconic_concat = false;
  std::optional<bool> me_consistent;
  std::optional<bool> kiki_no_reverse;
};

/// Word-by-word translation: same length as the instruction, every known
/// primitive replaced by its own color. Function words and words with no
/// demonstrated meaning may map to any symbol, independently per position.
inline bool classify_one_to_one(const Item& item, const OutputSeq& response, const Lexicon& lex) {
  const auto& words = item.instruction.words();
  if (response.size() != words.size()) return false;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const Meaning* m = lex.find(words[i]);
    if (m && m->is_primitive() && response[i] != m->color) return false;
  }
  return true;
}

inline bool contains_reverse_concat(const Item& item, const Lexicon& lex) {
  const auto& w = item.instruction.words();
  return std::any_of(w.begin(), w.end(), [&](const std::string& word) {
    const Meaning* m = lex.find(word);
    return m && m->kind == MeaningKind::ReverseConcat;
  });
}

/// NA without a ReverseConcat word; otherwise whether the response is the
/// denotation with kiki concatenating in input order.
inline std::optional<bool> classify_kiki_no_reverse(const Item& item, const OutputSeq& response,
                                                    const Lexicon& lex) {
  if (!contains_reverse_concat(item, lex)) return std::nullopt;
  auto forward = try_interpret(item.instruction, lex, {}, KikiOrder::Forward);
  return forward && *forward == response;
}

/// Output order follows input order: equals the denotation with every
/// concatenation (including kiki) taken left to right.
inline bool classify_iconic(const Item& item, const OutputSeq& response, const Lexicon& lex) {
  auto forward = try_interpret(item.instruction, lex, {}, KikiOrder::Forward);
  return forward && *forward == response;
}

/// Consistent with mutual exclusivity iff the response is not exactly one of
/// the already-claimed single-symbol meanings. NA when nothing is claimed.
inline std::optional<bool> classify_me(std::span<const ColorSymbol> familiar, const OutputSeq& response) {
  if (familiar.empty()) return std::nullopt;
  for (auto d : familiar)
    if (response == OutputSeq{d}) return false;
  return true;
}

inline std::optional<bool> classify_me(const Stage& trial, const OutputSeq& response) {
  return classify_me(trial.familiar, response);
}

inline BiasVerdict classify(const Stage& stage, const Item& item, const OutputSeq& response) {
  BiasVerdict v;
  v.one_to_one = classify_one_to_one(item, response, stage.lexicon);
  v.iconic_concat = classify_iconic(item, response, stage.lexicon);
  v.me_consistent = classify_me(stage, response);
  v.kiki_no_reverse = classify_kiki_no_reverse(item, response, stage.lexicon);
  return v;
}

}  // namespace fewshot
