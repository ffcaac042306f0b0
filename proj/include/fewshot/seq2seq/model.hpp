#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fewshot/error.hpp"
#include "fewshot/grammar/lexicon.hpp"
#include "fewshot/grammar/types.hpp"
#include "fewshot/protocol/spec.hpp"
#include "fewshot/rng.hpp"

namespace fewshot::seq2seq {

inline constexpr std::string_view kEos = "<EOS>";
inline constexpr std::string_view kSos = "<SOS>";

/// Token maps for both sides of the network.
///
/// Decoder outputs are classes: 0 is EOS and 1..n are colors. The decoder
/// input vocabulary is the classes plus SOS, which is never predicted.
class Vocab {
 public:
  Vocab() = default;
  Vocab(std::vector<std::string> words, std::vector<ColorSymbol> colors)
      : words_(std::move(words)), colors_(std::move(colors)) {
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (words_[i] == kEos || !word_index_.emplace(words_[i], static_cast<int>(i)).second)
        throw Error(Errc::InvalidConfig, "duplicate input token: " + words_[i]);
    }
    for (std::size_t i = 0; i < colors_.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (colors_[i] == colors_[j]) throw Error(Errc::InvalidConfig, "duplicate output token");
  }

  static Vocab from_lexicon(const Lexicon& lex, std::span<const ColorSymbol> pool) {
    return Vocab(lex.words(), std::vector<ColorSymbol>(pool.begin(), pool.end()));
  }

  /// Words and pool of the last stage, which for the curriculum contains everything.
  static Vocab from_spec(const ExperimentSpec& spec) {
    const auto& st = spec.stages.back();
    return from_lexicon(st.lexicon, st.study.front().pool);
  }

  const std::vector<std::string>& words() const { return words_; }
  const std::vector<ColorSymbol>& colors() const { return colors_; }

  int n_input() const { return static_cast<int>(words_.size()) + 1; }
  int eos_input() const { return static_cast<int>(words_.size()); }
  int n_classes() const { return static_cast<int>(colors_.size()) + 1; }
  int n_decoder_input() const { return n_classes() + 1; }
  int sos() const { return n_classes(); }

  int word_index(std::string_view w) const {
    auto it = word_index_.find(std::string(w));
    if (it == word_index_.end()) throw Error(Errc::UnknownToken, "unknown input token: " + std::string(w));
    return it->second;
  }

  int class_of(ColorSymbol c) const {
    for (std::size_t i = 0; i < colors_.size(); ++i)
      if (colors_[i] == c) return static_cast<int>(i) + 1;
    throw Error(Errc::UnknownToken, "unknown output token: " + c.name());
  }

  ColorSymbol color_of(int cls) const { return colors_.at(static_cast<std::size_t>(cls - 1)); }

  /// Instruction tokens followed by the end marker.
  std::vector<int> encode_input(const Instruction& instr) const {
    std::vector<int> out;
    for (const auto& w : instr.words()) out.push_back(word_index(w));
    out.push_back(eos_input());
    return out;
  }

  /// Output classes followed by EOS.
  std::vector<int> encode_target(const OutputSeq& seq) const {
    std::vector<int> out;
    for (auto c : seq) out.push_back(class_of(c));
    out.push_back(0);
    return out;
  }

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.words_ == b.words_ && a.colors_ == b.colors_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<ColorSymbol> colors_;
  std::unordered_map<std::string, int> word_index_;
};

struct ModelConfig {
  int layers = 2;
  int hidden = 200;
  double dropout = 0.5;
  bool attention = false;
  int embedding_dim = 0;  // 0: same as hidden

  int embedding() const { return embedding_dim > 0 ? embedding_dim : hidden; }

  void validate() const {
    if (layers < 1 || layers > 2) throw Error(Errc::InvalidConfig, "layers must be 1 or 2");
    if (hidden < 3) throw Error(Errc::InvalidConfig, "hidden must be at least 3");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::InvalidConfig, "dropout must be in [0, 1)");
    if (embedding_dim < 0) throw Error(Errc::InvalidConfig, "embedding_dim must be nonnegative");
  }

  static ModelConfig large() { return {2, 200, 0.5, false, 0}; }
  static ModelConfig with_attention() { return {1, 100, 0.1, true, 0}; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"layers", c.layers},
       {"hidden", c.hidden},
       {"dropout", c.dropout},
       {"attention", c.attention},
       {"embedding_dim", c.embedding_dim}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  c.layers = j.value("layers", c.layers);
  c.hidden = j.value("hidden", c.hidden);
  c.dropout = j.value("dropout", c.dropout);
  c.attention = j.value("attention", c.attention);
  c.embedding_dim = j.value("embedding_dim", 0);
  c.validate();
}

/// A named column-major matrix inside the flat parameter vector.
struct Block {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Parameter layout:
///   enc_emb (E x n_input), dec_emb (E x n_decoder_input),
///   per layer and side: W (4H x (in + H)) with gate rows i, f, g, o, and b (4H),
///   attn (H x H) when attention is on,
///   out_w (n_classes x H, or x 2H with attention), out_b (n_classes).
struct Layout {
  Block enc_emb, dec_emb;
  std::vector<Block> enc_w, enc_b, dec_w, dec_b;
  Block attn, out_w, out_b;
  std::size_t total = 0;

  static Layout make(const ModelConfig& cfg, const Vocab& v) {
    cfg.validate();
    Layout l;
    const int e = cfg.embedding(), h = cfg.hidden;
    auto add = [&](std::string name, int rows, int cols) {
      Block b{std::move(name), l.total, rows, cols};
      l.total += b.size();
      return b;
    };
    l.enc_emb = add("enc_emb", e, v.n_input());
    l.dec_emb = add("dec_emb", e, v.n_decoder_input());
    for (const char* side : {"enc", "dec"}) {
      for (int k = 0; k < cfg.layers; ++k) {
        const int in = k == 0 ? e : h;
        auto w = add(std::string(side) + "_w" + std::to_string(k), 4 * h, in + h);
        auto b = add(std::string(side) + "_b" + std::to_string(k), 4 * h, 1);
        (side[0] == 'e' ? l.enc_w : l.dec_w).push_back(w);
        (side[0] == 'e' ? l.enc_b : l.dec_b).push_back(b);
      }
    }
    if (cfg.attention) l.attn = add("attn", h, h);
    l.out_w = add("out_w", v.n_classes(), cfg.attention ? 2 * h : h);
    l.out_b = add("out_b", v.n_classes(), 1);
    return l;
  }

  std::vector<Block> blocks() const {
    std::vector<Block> out{enc_emb, dec_emb};
    for (std::size_t k = 0; k < enc_w.size(); ++k) out.insert(out.end(), {enc_w[k], enc_b[k]});
    for (std::size_t k = 0; k < dec_w.size(); ++k) out.insert(out.end(), {dec_w[k], dec_b[k]});
    if (attn.size() > 0) out.push_back(attn);
    out.insert(out.end(), {out_w, out_b});
    return out;
  }
};

struct ModelParams {
  ModelConfig config;
  Vocab vocab;
  std::vector<double> theta;

  Layout layout() const { return Layout::make(config, vocab); }
  std::size_t size() const { return theta.size(); }
};

inline constexpr double kInitScale = 0.08;

inline ModelParams init_model(const ModelConfig& cfg, const Vocab& vocab, std::uint64_t seed) {
  cfg.validate();
  ModelParams p{cfg, vocab, {}};
  p.theta.resize(Layout::make(cfg, vocab).total);
  Rng rng(seed);
  for (auto& x : p.theta) x = uniform_real(rng, -kInitScale, kInitScale);
  return p;
}

// Binary format: u64 little-endian header length, UTF-8 JSON header, then
// the flat parameter vector as little-endian IEEE-754 float64.

inline constexpr std::string_view kParamsSchema = "fewshot.params/1";

namespace detail {

inline void put_u64_le(std::ostream& os, std::uint64_t x) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((x >> (8 * i)) & 0xFF);
  os.write(buf, 8);
}

inline std::uint64_t get_u64_le(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw Error(Errc::Format, "truncated params file");
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return x;
}

}  // namespace detail

inline nlohmann::json params_header(const ModelParams& p) {
  nlohmann::json colors = nlohmann::json::array();
  for (auto c : p.vocab.colors()) colors.push_back(c.name());
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : p.layout().blocks())
    blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"rows", b.rows}, {"cols", b.cols}});
  return {{"schema", kParamsSchema},
          {"dtype", "float64"},
          {"byte_order", "little"},
          {"storage", "column-major"},
          {"count", p.theta.size()},
          {"config", p.config},
          {"vocab", {{"input", p.vocab.words()}, {"output", colors}}},
          {"blocks", blocks}};
}

inline void save_params(std::ostream& os, const ModelParams& p) {
  const std::string header = params_header(p).dump();
  detail::put_u64_le(os, header.size());
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (double x : p.theta) detail::put_u64_le(os, std::bit_cast<std::uint64_t>(x));
  if (!os) throw Error(Errc::Io, "failed to write params");
}

inline ModelParams load_params(std::istream& is) {
  const auto n = detail::get_u64_le(is);
  if (n > (1u << 24)) throw Error(Errc::Format, "params header too large");
  std::string header(n, '\0');
  if (!is.read(header.data(), static_cast<std::streamsize>(n))) throw Error(Errc::Format, "truncated params header");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Format, std::string("bad params header: ") + e.what());
  }
  if (j.value("schema", "") != kParamsSchema) throw Error(Errc::Format, "unexpected params schema");
  ModelParams p;
  p.config = j.at("config").get<ModelConfig>();
  std::vector<ColorSymbol> colors;
  for (const auto& c : j.at("vocab").at("output")) colors.push_back(ColorSymbol::parse(c.get<std::string>()));
  p.vocab = Vocab(j.at("vocab").at("input").get<std::vector<std::string>>(), colors);
  const auto count = j.at("count").get<std::size_t>();
  if (count != p.layout().total) throw Error(Errc::Format, "params count does not match config");
  p.theta.resize(count);
  for (auto& x : p.theta) x = std::bit_cast<double>(detail::get_u64_le(is));
  return p;
}

}  // namespace fewshot::seq2seq
