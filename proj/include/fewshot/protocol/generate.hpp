#pragma once

// Trial generators for the three experiments.
//
// Curriculum item sets are reconstructions: the original stimulus strings
// are not published, so the templates below are built to satisfy the stated
// constraints (14 final study items, held-out primitive only in isolation
// during study, longest study item 5 words / 2 compositions / 4 outputs,
// test items up to 6 words / 3 compositions / 6 outputs).

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fewshot/grammar.hpp"
#include "fewshot/protocol/spec.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

namespace templates {

// P1..P4 are the primitives in lexicon order (P4 is held out during study);
// F1, F2, F3 are RepeatThree, Alternate and ReverseConcat.
struct StageTemplate {
  StageKind kind;
  std::vector<std::string_view> study;  // primitives are prepended automatically
  std::vector<std::string_view> test;
  std::vector<std::size_t> catches;  // indices into the full study list
};

inline const std::array<StageTemplate, 4>& curriculum() {
  static const std::array<StageTemplate, 4> t = {{
      {StageKind::F1, {"P3 F1", "P1 F1"}, {"P4 F1"}, {5}},
      {StageKind::F2, {"P3 F2 P2", "P2 F2 P1"}, {"P4 F2 P3", "P1 F2 P4"}, {5}},
      {StageKind::F3, {"P3 F3 P2", "P1 F3 P3"}, {"P4 F3 P1", "P2 F3 P4"}, {5}},
      {StageKind::Composition,
       {"P3 F1", "P1 F1", "P3 F2 P2", "P2 F2 P1", "P3 F3 P2", "P1 F3 P3", "P3 F1 F3 P2",
        "P2 F3 P1 F2 P3", "P3 F3 P2 F1", "P2 F2 P1 F3 P3"},
       {"P4 F1 F3 P3", "P2 F3 P4 F1", "P3 F3 P2 F2 P4", "P3 F2 P4 F3 P1", "P4 F2 P2 F3 P1 F1",
        "P1 F1 F3 P4 F2 P2"},
       {10, 13}},
  }};
  return t;
}

/// Free-form instruction forms over five words.
inline const std::vector<std::vector<int>>& free_form() {
  static const std::vector<std::vector<int>> t = {{0}, {0, 0}, {0, 1}, {1}, {2, 1}, {2, 3}, {4, 0}};
  return t;
}

inline Instruction instantiate(std::string_view pattern, const Lexicon& lex) {
  const auto prims = lex.primitives();
  const auto tokens = Instruction::parse(pattern);
  std::vector<std::string> words;
  for (const auto& tok : tokens.words()) {
    const int k = tok[1] - '1';
    if (tok[0] == 'P') {
      words.push_back(prims.at(k).word);
    } else {
      static constexpr std::array<MeaningKind, 3> fns = {
          MeaningKind::RepeatThree, MeaningKind::Alternate, MeaningKind::ReverseConcat};
      words.push_back(*lex.word_for(fns.at(k)));
    }
  }
  return Instruction(std::move(words));
}

}  // namespace templates

namespace detail {

inline Item make_item(std::string id, Instruction instr, const Lexicon& lex,
                      const std::vector<ColorSymbol>& pool, bool is_catch = false) {
  auto target = interpret(instr, lex);
  return Item{std::move(id), std::move(instr), std::move(target), is_catch, pool};
}

inline Item practice_item(const std::vector<ColorSymbol>& pool) {
  return Item{"practice", Instruction({"practice"}), OutputSeq{pool.at(0), pool.at(1)}, false, pool};
}

/// Draws words for a run of trials without reuse until the pool runs out,
/// then starts a fresh shuffled deck.
class WordDeck {
 public:
  WordDeck(std::vector<std::string> pool, Rng& rng) : pool_(std::move(pool)), rng_(rng) { refill(); }

  std::vector<std::string> draw(std::size_t k) {
    if (k > pool_.size()) throw Error(Errc::PoolTooSmall, "trial needs more words than the pool");
    if (deck_.size() < k) refill();
    std::vector<std::string> out(deck_.end() - static_cast<std::ptrdiff_t>(k), deck_.end());
    deck_.resize(deck_.size() - k);
    return out;
  }

 private:
  void refill() {
    deck_ = pool_;
    shuffle(std::span(deck_), rng_);
  }

  std::vector<std::string> pool_;
  std::vector<std::string> deck_;
  Rng& rng_;
};

inline std::vector<ColorSymbol> draw_colors(Rng& rng, std::size_t k) {
  auto colors = all_colors();
  shuffle(std::span(colors), rng);
  colors.resize(k);
  return colors;
}

inline std::vector<ColorSymbol> shuffled(std::vector<ColorSymbol> xs, Rng& rng) {
  shuffle(std::span(xs), rng);
  return xs;
}

inline Stage build_curriculum_stage(const templates::StageTemplate& t, const Lexicon& lex,
                                    const std::vector<ColorSymbol>& pool) {
  Stage s;
  s.kind = t.kind;
  s.id = std::string(to_string(t.kind));
  s.lexicon = lex;
  s.has_quiz = true;
  std::vector<Instruction> study;
  for (const auto& p : lex.primitives()) study.push_back(Instruction({p.word}));
  for (auto pattern : t.study) study.push_back(templates::instantiate(pattern, lex));
  for (std::size_t i = 0; i < study.size(); ++i)
    s.study.push_back(make_item(s.id + ".study." + std::to_string(i), study[i], lex, pool));
  std::size_t n = 0;
  for (auto pattern : t.test)
    s.test.push_back(make_item(s.id + ".test." + std::to_string(n++),
                               templates::instantiate(pattern, lex), lex, pool));
  for (auto idx : t.catches)
    s.test.push_back(make_item(s.id + ".test." + std::to_string(n++), study.at(idx), lex, pool, true));
  return s;
}

}  // namespace detail

/// Curriculum from an explicit lexicon, pool and stage order (used for the
/// canonical assignment and by generate_exp1).
inline ExperimentSpec build_exp1(const Lexicon& lex, const std::vector<ColorSymbol>& pool,
                                 const std::array<std::size_t, 3>& function_order,
                                 std::uint64_t seed) {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::Exp1;
  spec.seed = seed;
  spec.practice = detail::practice_item(pool);
  const auto& t = templates::curriculum();
  for (auto k : function_order) spec.stages.push_back(detail::build_curriculum_stage(t.at(k), lex, pool));
  spec.stages.push_back(detail::build_curriculum_stage(t[3], lex, pool));
  return spec;
}

/// The curriculum under Lexicon::canonical(), stages in F1, F2, F3 order.
inline ExperimentSpec canonical_exp1() {
  const auto lex = Lexicon::canonical();
  return build_exp1(lex, lex.color_pool(), {0, 1, 2}, 0);
}

/// Four-stage curriculum: 9 words, 6 colors, 4 primitives, randomized
/// assignment, pool order and order of the three function stages.
inline ExperimentSpec generate_exp1(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 1));
  const auto lex = sample_lexicon(curriculum_word_pool(), all_colors(6), 4, mix_seed(seed, 0));
  auto pool = detail::shuffled(lex.color_pool(), rng);
  std::array<std::size_t, 3> order = {0, 1, 2};
  shuffle(std::span(order), rng);
  return build_exp1(lex, pool, order, seed);
}

/// Fourteen independent bias trials in random order: 6 mutual-exclusivity
/// (contradictory 0/1/2 x pool 2/6), 3 iconic concatenation, 3 ME-vs-one-to-one
/// conflicts and 2 catch trials. Words and colors are redrawn per trial.
inline ExperimentSpec generate_exp2(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 2));
  detail::WordDeck deck(bias_word_pool(), rng);
  std::vector<Stage> trials;

  auto prim_lexicon = [](const std::vector<std::string>& words, const std::vector<ColorSymbol>& colors,
                         std::size_t n_prims) {
    std::vector<Lexicon::Entry> entries;
    for (std::size_t i = 0; i < n_prims; ++i) entries.push_back({words[i], Meaning::primitive(colors[i])});
    return entries;
  };
  auto study_line = [](const Stage& s, std::string word, OutputSeq out, const std::vector<ColorSymbol>& pool) {
    return Item{s.id + ".study." + std::to_string(s.study.size()), Instruction({std::move(word)}),
                std::move(out), false, pool};
  };

  // Mutual exclusivity: familiar word f -> d, n contradictory words -> d, test a novel word.
  for (int n_contra = 0; n_contra <= 2; ++n_contra) {
    for (std::size_t pool_size : {std::size_t{2}, std::size_t{6}}) {
      Stage s;
      s.kind = StageKind::MutualExclusivity;
      s.n_contradictory = n_contra;
      auto words = deck.draw(2 + static_cast<std::size_t>(n_contra));
      auto colors = detail::draw_colors(rng, pool_size);
      auto pool = detail::shuffled(colors, rng);
      s.lexicon = Lexicon(words, colors, prim_lexicon(words, colors, 1));
      s.familiar = {colors[0]};
      s.study.push_back(study_line(s, words[0], {colors[0]}, pool));
      for (int c = 0; c < n_contra; ++c)
        s.study.push_back(study_line(s, words[2 + static_cast<std::size_t>(c)], {colors[0]}, pool));
      s.test.push_back(Item{"", Instruction({words[1]}), std::nullopt, false, pool});
      trials.push_back(std::move(s));
    }
  }

  auto grammar_trial = [&](StageKind kind, std::size_t n_prims, bool with_fep,
                           std::size_t pool_size, std::vector<std::string_view> test_pattern,
                           std::size_t n_novel) {
    Stage s;
    s.kind = kind;
    const std::size_t n_words = n_prims + (with_fep ? 1 : 0) + n_novel;
    auto words = deck.draw(n_words);
    auto colors = detail::draw_colors(rng, pool_size);
    auto pool = detail::shuffled(colors, rng);
    auto entries = prim_lexicon(words, colors, n_prims);
    if (with_fep) entries.push_back({words[n_prims], Meaning::function(MeaningKind::RepeatThree)});
    s.lexicon = Lexicon(words, colors, std::move(entries));
    for (std::size_t i = 0; i < n_prims; ++i)
      s.study.push_back(study_line(s, words[i], {colors[i]}, pool));
    if (with_fep) {
      Instruction demo({words[0], words[n_prims]});
      s.study.push_back(Item{s.id + ".study." + std::to_string(s.study.size()), demo,
                             interpret(demo, s.lexicon), false, pool});
    }
    // pattern tokens: "a".."f" primitives by index, "F" the fep word, "Z" the novel word
    std::vector<std::string> test_words;
    for (auto tok : test_pattern) {
      if (tok == "F") test_words.push_back(words[n_prims]);
      else if (tok == "Z") test_words.push_back(words[n_words - 1]);
      else test_words.push_back(words[static_cast<std::size_t>(tok[0] - 'a')]);
    }
    Instruction test(std::move(test_words));
    std::optional<OutputSeq> target;
    if (n_novel == 0) target = interpret(test, s.lexicon);
    s.test.push_back(Item{"", std::move(test), std::move(target), kind == StageKind::Catch, pool});
    if (kind == StageKind::Conflict)
      for (std::size_t i = 0; i < n_prims; ++i) s.familiar.push_back(colors[i]);
    trials.push_back(std::move(s));
  };

  grammar_trial(StageKind::Iconic, 2, false, 6, {"a", "b"}, 0);
  grammar_trial(StageKind::Iconic, 3, false, 6, {"b", "a", "c"}, 0);
  grammar_trial(StageKind::Iconic, 2, true, 6, {"b", "F", "a"}, 0);
  grammar_trial(StageKind::Conflict, 2, false, 2, {"Z"}, 1);
  grammar_trial(StageKind::Conflict, 6, false, 6, {"Z"}, 1);
  grammar_trial(StageKind::Conflict, 2, true, 2, {"Z"}, 1);
  grammar_trial(StageKind::Catch, 2, false, 2, {"a"}, 0);
  grammar_trial(StageKind::Catch, 3, false, 6, {"b"}, 0);

  shuffle(std::span(trials), rng);
  for (std::size_t t = 0; t < trials.size(); ++t) {
    auto& s = trials[t];
    s.id = (t < 9 ? "T0" : "T") + std::to_string(t + 1);
    for (std::size_t i = 0; i < s.study.size(); ++i) s.study[i].id = s.id + ".study." + std::to_string(i);
    s.test[0].id = s.id + ".test.0";
  }

  ExperimentSpec spec;
  spec.kind = ExperimentKind::Exp2;
  spec.seed = seed;
  spec.practice = detail::practice_item(trials.front().test.front().pool);
  spec.stages = std::move(trials);
  return spec;
}

/// Free-form page: seven instructions over five random words, six pool
/// colors, random item order, no study items and no answers.
inline ExperimentSpec generate_exp3(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 3));
  auto words = bias_word_pool();
  shuffle(std::span(words), rng);
  words.resize(5);
  auto pool = detail::draw_colors(rng, 6);

  Stage s;
  s.kind = StageKind::FreeForm;
  s.id = "free";
  s.lexicon = Lexicon(words, pool, {});
  for (const auto& form : templates::free_form()) {
    std::vector<std::string> ws;
    for (int k : form) ws.push_back(words[static_cast<std::size_t>(k)]);
    s.test.push_back(Item{"", Instruction(std::move(ws)), std::nullopt, false, pool});
  }
  shuffle(std::span(s.test), rng);
  for (std::size_t i = 0; i < s.test.size(); ++i) s.test[i].id = "free.test." + std::to_string(i);

  ExperimentSpec spec;
  spec.kind = ExperimentKind::Exp3;
  spec.seed = seed;
  spec.practice = detail::practice_item(pool);
  spec.stages.push_back(std::move(s));
  return spec;
}

inline ExperimentSpec generate_experiment(ExperimentKind kind, std::uint64_t seed) {
  switch (kind) {
    case ExperimentKind::Exp1: return generate_exp1(seed);
    case ExperimentKind::Exp2: return generate_exp2(seed);
    case ExperimentKind::Exp3: return generate_exp3(seed);
  }
  throw Error(Errc::BadRequest, "unknown experiment kind");
}

}  // namespace fewshot
