#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fewshot/error.hpp"

namespace fewshot {

/// Abstract output symbol COLOR1..COLOR8. Display names exist only for
/// rendering; identity is the numeric id.
class ColorSymbol {
 public:
  static constexpr int kMaxColors = 8;

  constexpr ColorSymbol() = default;
  constexpr explicit ColorSymbol(int id) : id_(static_cast<std::uint8_t>(id)) {
    if (id < 1 || id > kMaxColors) throw Error(Errc::Format, "color id out of range");
  }

  constexpr int id() const { return id_; }

  std::string name() const { return "COLOR" + std::to_string(id_); }

  std::string_view display_name() const {
    static constexpr std::array<std::string_view, kMaxColors> names = {
        "RED", "GREEN", "BLUE", "YELLOW", "PURPLE", "PINK", "ORANGE", "BLACK"};
    return names[id_ - 1];
  }

  /// Accepts either "COLORk" or a display name.
  static ColorSymbol parse(std::string_view s) {
    if (s.starts_with("COLOR") && s.size() == 6 && s[5] >= '1' && s[5] <= '8')
      return ColorSymbol(s[5] - '0');
    for (int k = 1; k <= kMaxColors; ++k)
      if (ColorSymbol(k).display_name() == s) return ColorSymbol(k);
    throw Error(Errc::Format, "not a color symbol: " + std::string(s));
  }

  friend constexpr auto operator<=>(ColorSymbol, ColorSymbol) = default;

 private:
  std::uint8_t id_ = 1;
};

/// All eight symbols in id order.
inline std::vector<ColorSymbol> all_colors(int n = ColorSymbol::kMaxColors) {
  std::vector<ColorSymbol> out;
  for (int k = 1; k <= n; ++k) out.emplace_back(k);
  return out;
}

using OutputSeq = std::vector<ColorSymbol>;

inline std::string to_string(const OutputSeq& seq, bool display = true) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += display ? std::string(seq[i].display_name()) : seq[i].name();
  }
  return out;
}

inline OutputSeq parse_output(std::string_view text) {
  OutputSeq out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) out.push_back(ColorSymbol::parse(tok));
  return out;
}

enum class MeaningKind { Primitive, RepeatThree, Alternate, ReverseConcat };

constexpr std::string_view to_string(MeaningKind k) {
  switch (k) {
    case MeaningKind::Primitive: return "Primitive";
    case MeaningKind::RepeatThree: return "RepeatThree";
    case MeaningKind::Alternate: return "Alternate";
    case MeaningKind::ReverseConcat: return "ReverseConcat";
  }
  return "?";
}

/// What a pseudoword denotes: a single color, or one of the three functions.
struct Meaning {
  MeaningKind kind = MeaningKind::Primitive;
  ColorSymbol color{};  // meaningful only for Primitive

  static constexpr Meaning primitive(ColorSymbol c) { return {MeaningKind::Primitive, c}; }
  static constexpr Meaning function(MeaningKind k) { return {k, ColorSymbol{}}; }

  constexpr bool is_primitive() const { return kind == MeaningKind::Primitive; }

  friend constexpr bool operator==(const Meaning& a, const Meaning& b) {
    return a.kind == b.kind && (a.kind != MeaningKind::Primitive || a.color == b.color);
  }
};

/// A nonempty sequence of pseudowords.
class Instruction {
 public:
  Instruction() = default;
  explicit Instruction(std::vector<std::string> words) : words_(std::move(words)) {
    if (words_.empty()) throw Error(Errc::MalformedInstruction, "empty instruction");
    for (const auto& w : words_)
      if (w.empty()) throw Error(Errc::MalformedInstruction, "empty word");
  }

  /// Whitespace-separated words.
  static Instruction parse(std::string_view text) {
    std::vector<std::string> words;
    std::istringstream in{std::string(text)};
    std::string w;
    while (in >> w) words.push_back(w);
    return Instruction(std::move(words));
  }

  const std::vector<std::string>& words() const { return words_; }
  std::size_t size() const { return words_.size(); }
  const std::string& operator[](std::size_t i) const { return words_[i]; }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (i) out += ' ';
      out += words_[i];
    }
    return out;
  }

  friend auto operator<=>(const Instruction&, const Instruction&) = default;

 private:
  std::vector<std::string> words_;
};

enum class NodeKind { Prim, Fep, Blicket, Kiki, Concat };

/// Structured meaning of an instruction. `word` holds the pseudoword for Prim
/// nodes and the function word for Fep/Blicket/Kiki; Concat has no word.
struct ParseTree {
  NodeKind kind = NodeKind::Prim;
  std::string word;
  std::vector<ParseTree> children;

  static ParseTree prim(std::string w) { return {NodeKind::Prim, std::move(w), {}}; }

  friend bool operator==(const ParseTree&, const ParseTree&) = default;
};

/// S-expression rendering, e.g. (kiki (blicket zup wif) (fep dax)).
inline std::string to_string(const ParseTree& t) {
  if (t.kind == NodeKind::Prim) return t.word;
  std::string out = "(";
  out += t.kind == NodeKind::Concat ? std::string("concat") : t.word;
  for (const auto& c : t.children) out += " " + to_string(c);
  return out + ")";
}

struct GrammarConfig {
  bool strict_blicket_args = true;
  bool allow_concat = true;
  std::size_t max_output_len = 20;

  void validate() const {
    if (max_output_len < 6) throw Error(Errc::InvalidConfig, "max_output_len must be >= 6");
  }
};

}  // namespace fewshot
