#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fewshot/error.hpp"
#include "fewshot/grammar/interpreter.hpp"

namespace fewshot {

struct EnumeratedInstruction {
  Instruction instruction;
  OutputSeq output;
};

/// Every well-formed instruction of 1..max_words words over the lexicon's
/// entry words, with its denotation. Ordered by length, then by the
/// lexicon's entry order position by position.
inline std::vector<EnumeratedInstruction> enumerate_instructions(const Lexicon& lex,
                                                                 const GrammarConfig& cfg,
                                                                 std::size_t max_words) {
  if (max_words > 8) throw Error(Errc::InvalidConfig, "max_words must be <= 8");
  const auto vocab = lex.words();
  std::vector<EnumeratedInstruction> out;
  if (vocab.empty()) return out;

  std::vector<std::string> words;
  std::vector<std::size_t> digits;
  for (std::size_t len = 1; len <= max_words; ++len) {
    digits.assign(len, 0);
    words.assign(len, vocab[0]);
    while (true) {
      auto r = detail::try_interpret(words, lex, cfg);
      if (!detail::failed(r)) out.push_back({Instruction(words), std::get<OutputSeq>(std::move(r))});
      // odometer, last position fastest
      std::size_t pos = len;
      while (pos > 0) {
        --pos;
        if (++digits[pos] < vocab.size()) {
          words[pos] = vocab[digits[pos]];
          break;
        }
        digits[pos] = 0;
        words[pos] = vocab[0];
        if (pos == 0) {
          pos = len + 1;
          break;
        }
      }
      if (pos == len + 1) break;
    }
  }
  return out;
}

}  // namespace fewshot
