#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fewshot/error.hpp"
#include "fewshot/grammar/types.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

/// Nine nonsense words used in the few-shot curriculum.
inline const std::vector<std::string>& curriculum_word_pool() {
  static const std::vector<std::string> pool = {"dax", "wif",  "lug",   "zup",   "fep",
                                                "blicket", "kiki", "tufa", "gazzer"};
  return pool;
}

/// Twenty nonsense words used by the bias trials and the free-form task.
inline const std::vector<std::string>& bias_word_pool() {
  static const std::vector<std::string> pool = {
      "dax",  "wif",   "lug",  "zup",   "fep",  "blicket", "kiki",  "tufa", "gazzer", "mip",
      "niz",  "rosk",  "tiv",  "glorp", "kwep", "bimmo",   "zoog",  "plim", "sprock", "fendle"};
  return pool;
}

/// Assignment of pseudowords to meanings. Entries keep their insertion order,
/// so "the i-th primitive" is well defined; for sampled lexicons the last
/// primitive plays the held-out role.
class Lexicon {
 public:
  struct Entry {
    std::string word;
    Meaning meaning;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  Lexicon() = default;

  Lexicon(std::vector<std::string> word_pool, std::vector<ColorSymbol> color_pool,
          std::vector<Entry> entries)
      : word_pool_(std::move(word_pool)),
        color_pool_(std::move(color_pool)),
        entries_(std::move(entries)) {
    validate();
  }

  const std::vector<std::string>& word_pool() const { return word_pool_; }
  const std::vector<ColorSymbol>& color_pool() const { return color_pool_; }
  const std::vector<Entry>& entries() const { return entries_; }

  const Meaning* find(std::string_view word) const {
    for (const auto& e : entries_)
      if (e.word == word) return &e.meaning;
    return nullptr;
  }

  const Meaning& at(std::string_view word) const {
    if (const auto* m = find(word)) return *m;
    throw Error(Errc::UnknownWord, std::string(word));
  }

  bool contains(std::string_view word) const { return find(word) != nullptr; }

  std::optional<std::string> word_for(MeaningKind kind) const {
    for (const auto& e : entries_)
      if (e.meaning.kind == kind && kind != MeaningKind::Primitive) return e.word;
    return std::nullopt;
  }

  std::vector<Entry> primitives() const {
    std::vector<Entry> out;
    for (const auto& e : entries_)
      if (e.meaning.is_primitive()) out.push_back(e);
    return out;
  }

  std::vector<std::string> words() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.word);
    return out;
  }

  /// dax=RED wif=GREEN lug=BLUE zup=COLOR4, fep/blicket/kiki as functions 1-3.
  static Lexicon canonical() {
    return Lexicon(curriculum_word_pool(), all_colors(6),
                   {{"dax", Meaning::primitive(ColorSymbol(1))},
                    {"wif", Meaning::primitive(ColorSymbol(2))},
                    {"lug", Meaning::primitive(ColorSymbol(3))},
                    {"zup", Meaning::primitive(ColorSymbol(4))},
                    {"fep", Meaning::function(MeaningKind::RepeatThree)},
                    {"blicket", Meaning::function(MeaningKind::Alternate)},
                    {"kiki", Meaning::function(MeaningKind::ReverseConcat)}});
  }

  friend bool operator==(const Lexicon&, const Lexicon&) = default;

 private:
  void validate() const {
    if (color_pool_.size() > static_cast<std::size_t>(ColorSymbol::kMaxColors))
      throw Error(Errc::InvalidLexicon, "more than 8 colors");
    if (std::set<ColorSymbol>(color_pool_.begin(), color_pool_.end()).size() != color_pool_.size())
      throw Error(Errc::InvalidLexicon, "duplicate color in pool");
    if (std::set<std::string>(word_pool_.begin(), word_pool_.end()).size() != word_pool_.size())
      throw Error(Errc::InvalidLexicon, "duplicate word in pool");
    std::set<std::string> seen_words;
    std::set<ColorSymbol> seen_colors;
    std::set<MeaningKind> seen_functions;
    for (const auto& e : entries_) {
      if (e.word.empty()) throw Error(Errc::InvalidLexicon, "empty word");
      if (std::find(word_pool_.begin(), word_pool_.end(), e.word) == word_pool_.end())
        throw Error(Errc::InvalidLexicon, "word not in pool: " + e.word);
      if (!seen_words.insert(e.word).second)
        throw Error(Errc::InvalidLexicon, "word assigned twice: " + e.word);
      if (e.meaning.is_primitive()) {
        if (!seen_colors.insert(e.meaning.color).second)
          throw Error(Errc::InvalidLexicon, "two primitives share " + e.meaning.color.name());
      } else if (!seen_functions.insert(e.meaning.kind).second) {
        throw Error(Errc::InvalidLexicon,
                    "function assigned twice: " + std::string(to_string(e.meaning.kind)));
      }
    }
  }

  std::vector<std::string> word_pool_;
  std::vector<ColorSymbol> color_pool_;
  std::vector<Entry> entries_;
};

/// Randomized lexicon: `n_primitives` words get distinct colors, three more
/// words get RepeatThree/Alternate/ReverseConcat. The returned color pool is
/// the shuffled input pool, with the assigned colors first.
inline Lexicon sample_lexicon(const std::vector<std::string>& word_pool,
                              const std::vector<ColorSymbol>& color_pool, std::size_t n_primitives,
                              std::uint64_t seed) {
  if (word_pool.size() < n_primitives + 3)
    throw Error(Errc::PoolTooSmall, "word pool needs n_primitives + 3 words");
  if (color_pool.size() < n_primitives)
    throw Error(Errc::PoolTooSmall, "color pool needs n_primitives colors");
  Rng rng(seed);
  std::vector<std::string> words = word_pool;
  std::vector<ColorSymbol> colors = color_pool;
  shuffle(std::span(words), rng);
  shuffle(std::span(colors), rng);
  std::vector<Lexicon::Entry> entries;
  for (std::size_t i = 0; i < n_primitives; ++i)
    entries.push_back({words[i], Meaning::primitive(colors[i])});
  entries.push_back({words[n_primitives], Meaning::function(MeaningKind::RepeatThree)});
  entries.push_back({words[n_primitives + 1], Meaning::function(MeaningKind::Alternate)});
  entries.push_back({words[n_primitives + 2], Meaning::function(MeaningKind::ReverseConcat)});
  return Lexicon(word_pool, colors, std::move(entries));
}

}  // namespace fewshot
