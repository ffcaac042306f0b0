#pragma once

// Parsing and evaluation of pseudoword instructions.
//
// Precedence, loosest to tightest:
//   1. the leftmost ReverseConcat word ("kiki") splits the whole string;
//      the right side is parsed recursively, so "a kiki b kiki c" is
//      (kiki a (kiki b c)) and denotes c ++ b ++ a;
//   2. juxtaposed phrases concatenate left to right;
//   3. Alternate ("blicket") takes its left and right neighbours;
//   4. RepeatThree ("fep") takes the single preceding primitive.
// The two-kiki reading is a convention; no attested stimulus contains one.

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fewshot/error.hpp"
#include "fewshot/grammar/lexicon.hpp"
#include "fewshot/grammar/types.hpp"

namespace fewshot {

/// Argument order produced by ReverseConcat. Forward is the "concatenate
/// without reversing" variant used to classify errors.
enum class KikiOrder { Reverse, Forward };

namespace detail {

struct Failure {
  Errc code;
  std::string message;
};

template <typename T>
using Result = std::variant<T, Failure>;

template <typename T>
bool failed(const Result<T>& r) {
  return std::holds_alternative<Failure>(r);
}

template <typename T>
T unwrap(Result<T>&& r) {
  if (auto* f = std::get_if<Failure>(&r)) throw Error(f->code, f->message);
  return std::get<T>(std::move(r));
}

class Parser {
 public:
  Parser(const Lexicon& lex, const GrammarConfig& cfg) : lex_(lex), cfg_(cfg) {}

  Result<ParseTree> parse(std::span<const std::string> words) const {
    if (words.empty()) return Failure{Errc::MalformedInstruction, "empty instruction"};
    for (const auto& w : words)
      if (!lex_.contains(w)) return Failure{Errc::UnknownWord, w};
    return segment(words);
  }

 private:
  MeaningKind kind_of(const std::string& w) const { return lex_.at(w).kind; }

  Result<ParseTree> segment(std::span<const std::string> words) const {
    for (std::size_t k = 0; k < words.size(); ++k) {
      if (kind_of(words[k]) != MeaningKind::ReverseConcat) continue;
      if (k == 0 || k + 1 == words.size())
        return Failure{Errc::MalformedInstruction, "'" + words[k] + "' needs arguments on both sides"};
      auto left = kiki_free(words.first(k));
      if (failed(left)) return left;
      auto right = segment(words.subspan(k + 1));
      if (failed(right)) return right;
      return ParseTree{NodeKind::Kiki,
                       words[k],
                       {std::get<ParseTree>(std::move(left)), std::get<ParseTree>(std::move(right))}};
    }
    return kiki_free(words);
  }

  // Atoms are argument trees; a disengaged optional marks an Alternate word.
  struct Item {
    std::optional<ParseTree> atom;
    std::string word;
  };

  Result<ParseTree> kiki_free(std::span<const std::string> words) const {
    std::vector<Item> items;
    for (const auto& w : words) {
      switch (kind_of(w)) {
        case MeaningKind::Primitive:
          items.push_back({ParseTree::prim(w), w});
          break;
        case MeaningKind::RepeatThree: {
          if (items.empty() || !items.back().atom)
            return Failure{Errc::MalformedInstruction, "'" + w + "' has no preceding argument"};
          auto& arg = *items.back().atom;
          if (cfg_.strict_blicket_args && arg.kind != NodeKind::Prim)
            return Failure{Errc::MalformedInstruction, "'" + w + "' needs a primitive argument"};
          arg = ParseTree{NodeKind::Fep, w, {std::move(arg)}};
          break;
        }
        case MeaningKind::Alternate:
          items.push_back({std::nullopt, w});
          break;
        case MeaningKind::ReverseConcat:
          return Failure{Errc::MalformedInstruction, "unexpected '" + w + "'"};
      }
    }

    std::vector<ParseTree> phrases;
    for (std::size_t i = 0; i < items.size();) {
      if (!items[i].atom)
        return Failure{Errc::MalformedInstruction, "'" + items[i].word + "' has no left argument"};
      ParseTree acc = std::move(*items[i].atom);
      ++i;
      while (i < items.size() && !items[i].atom) {
        const std::string& fw = items[i].word;
        if (i + 1 >= items.size() || !items[i + 1].atom)
          return Failure{Errc::MalformedInstruction, "'" + fw + "' has no right argument"};
        ParseTree rhs = std::move(*items[i + 1].atom);
        if (cfg_.strict_blicket_args && (acc.kind != NodeKind::Prim || rhs.kind != NodeKind::Prim))
          return Failure{Errc::MalformedInstruction, "'" + fw + "' needs primitive arguments"};
        acc = ParseTree{NodeKind::Blicket, fw, {std::move(acc), std::move(rhs)}};
        i += 2;
      }
      phrases.push_back(std::move(acc));
    }

    if (phrases.size() == 1) return std::move(phrases.front());
    if (!cfg_.allow_concat)
      return Failure{Errc::MalformedInstruction, "juxtaposed phrases without a connective"};
    return ParseTree{NodeKind::Concat, {}, std::move(phrases)};
  }

  const Lexicon& lex_;
  const GrammarConfig& cfg_;
};

inline Result<OutputSeq> evaluate_node(const ParseTree& t, const Lexicon& lex, std::size_t cap,
                                       KikiOrder order) {
  auto check = [cap](OutputSeq&& s) -> Result<OutputSeq> {
    if (s.size() > cap)
      return Failure{Errc::OutputTooLong,
                     "denotation of length " + std::to_string(s.size()) + " exceeds " +
                         std::to_string(cap)};
    return std::move(s);
  };
  auto append = [](OutputSeq& dst, const OutputSeq& src) {
    dst.insert(dst.end(), src.begin(), src.end());
  };

  switch (t.kind) {
    case NodeKind::Prim: {
      const Meaning* m = lex.find(t.word);
      if (!m) return Failure{Errc::UnknownWord, t.word};
      if (!m->is_primitive()) return Failure{Errc::MalformedInstruction, t.word + " is not a primitive"};
      return OutputSeq{m->color};
    }
    case NodeKind::Fep: {
      auto x = evaluate_node(t.children.at(0), lex, cap, order);
      if (failed(x)) return x;
      const auto& xs = std::get<OutputSeq>(x);
      OutputSeq out;
      for (int k = 0; k < 3; ++k) append(out, xs);
      return check(std::move(out));
    }
    case NodeKind::Blicket: {
      auto x = evaluate_node(t.children.at(0), lex, cap, order);
      if (failed(x)) return x;
      auto y = evaluate_node(t.children.at(1), lex, cap, order);
      if (failed(y)) return y;
      OutputSeq out = std::get<OutputSeq>(x);
      append(out, std::get<OutputSeq>(y));
      append(out, std::get<OutputSeq>(x));
      return check(std::move(out));
    }
    case NodeKind::Kiki: {
      auto x = evaluate_node(t.children.at(0), lex, cap, order);
      if (failed(x)) return x;
      auto y = evaluate_node(t.children.at(1), lex, cap, order);
      if (failed(y)) return y;
      const bool reverse = order == KikiOrder::Reverse;
      OutputSeq out = std::get<OutputSeq>(reverse ? y : x);
      append(out, std::get<OutputSeq>(reverse ? x : y));
      return check(std::move(out));
    }
    case NodeKind::Concat: {
      OutputSeq out;
      for (const auto& c : t.children) {
        auto x = evaluate_node(c, lex, cap, order);
        if (failed(x)) return x;
        append(out, std::get<OutputSeq>(x));
      }
      return check(std::move(out));
    }
  }
  return Failure{Errc::MalformedInstruction, "bad node"};
}

inline Result<OutputSeq> try_interpret(std::span<const std::string> words, const Lexicon& lex,
                                       const GrammarConfig& cfg,
                                       KikiOrder order = KikiOrder::Reverse) {
  auto tree = Parser(lex, cfg).parse(words);
  if (auto* f = std::get_if<Failure>(&tree)) return *f;
  return evaluate_node(std::get<ParseTree>(tree), lex, cfg.max_output_len, order);
}

}  // namespace detail

/// Throws Error{UnknownWord} or Error{MalformedInstruction}.
inline ParseTree parse(const Instruction& instr, const Lexicon& lex, const GrammarConfig& cfg = {}) {
  return detail::unwrap(detail::Parser(lex, cfg).parse(instr.words()));
}

/// Throws Error{OutputTooLong} when the denotation exceeds cfg.max_output_len.
inline OutputSeq evaluate(const ParseTree& tree, const Lexicon& lex, const GrammarConfig& cfg = {},
                          KikiOrder order = KikiOrder::Reverse) {
  return detail::unwrap(detail::evaluate_node(tree, lex, cfg.max_output_len, order));
}

inline OutputSeq interpret(const Instruction& instr, const Lexicon& lex,
                           const GrammarConfig& cfg = {}, KikiOrder order = KikiOrder::Reverse) {
  return evaluate(parse(instr, lex, cfg), lex, cfg, order);
}

inline std::optional<OutputSeq> try_interpret(const Instruction& instr, const Lexicon& lex,
                                              const GrammarConfig& cfg = {},
                                              KikiOrder order = KikiOrder::Reverse) {
  auto r = detail::try_interpret(instr.words(), lex, cfg, order);
  if (detail::failed(r)) return std::nullopt;
  return std::get<OutputSeq>(std::move(r));
}

/// Number of function applications (Fep, Blicket and Kiki nodes).
inline std::size_t count_compositions(const ParseTree& t) {
  std::size_t n = (t.kind == NodeKind::Fep || t.kind == NodeKind::Blicket ||
                   t.kind == NodeKind::Kiki)
                      ? 1
                      : 0;
  for (const auto& c : t.children) n += count_compositions(c);
  return n;
}

}  // namespace fewshot
