#include <gtest/gtest.h>

#include <map>
#include <set>

#include "fewshot/grammar.hpp"
#include "grammar_oracle.hpp"

namespace fewshot {
namespace {

const Lexicon kLex = Lexicon::canonical();

OutputSeq run(std::string_view text, const GrammarConfig& cfg = {}) {
  return interpret(Instruction::parse(text), kLex, cfg);
}

Errc error_of(std::string_view text, const GrammarConfig& cfg = {}) {
  try {
    run(text, cfg);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for " << text;
  return Errc::Io;
}

TEST(Interpret, WorkedExamples) {
  EXPECT_EQ(to_string(run("dax fep")), "RED RED RED");
  EXPECT_EQ(to_string(run("wif blicket dax")), "GREEN RED GREEN");
  EXPECT_EQ(to_string(run("dax kiki lug")), "BLUE RED");
  EXPECT_EQ(to_string(run("wif blicket dax kiki lug")), "BLUE GREEN RED GREEN");
  EXPECT_EQ(to_string(run("lug blicket wif")), "BLUE GREEN BLUE");
}

TEST(Interpret, HeldOutPrimitive) {
  EXPECT_EQ(run("zup"), parse_output("COLOR4"));
  EXPECT_EQ(run("zup blicket lug kiki wif fep"),
            parse_output("GREEN GREEN GREEN COLOR4 BLUE COLOR4"));
}

TEST(Parse, Trees) {
  EXPECT_EQ(to_string(parse(Instruction::parse("dax kiki lug"), kLex)), "(kiki dax lug)");
  EXPECT_EQ(parse(Instruction::parse("dax"), kLex), ParseTree::prim("dax"));
  EXPECT_EQ(to_string(parse(Instruction::parse("zup blicket wif kiki dax fep"), kLex)),
            "(kiki (blicket zup wif) (fep dax))");
  EXPECT_EQ(to_string(parse(Instruction::parse("dax kiki wif kiki lug"), kLex)),
            "(kiki dax (kiki wif lug))");
  EXPECT_EQ(to_string(parse(Instruction::parse("dax fep wif"), kLex)), "(concat (fep dax) wif)");
}

TEST(Parse, TwoKikiReadsRightNested) {
  EXPECT_EQ(to_string(run("dax kiki wif kiki lug")), "BLUE GREEN RED");
}

TEST(Parse, Errors) {
  EXPECT_EQ(error_of("fep"), Errc::MalformedInstruction);
  EXPECT_EQ(error_of("blicket dax"), Errc::MalformedInstruction);
  EXPECT_EQ(error_of("dax blicket"), Errc::MalformedInstruction);
  EXPECT_EQ(error_of("kiki dax"), Errc::MalformedInstruction);
  EXPECT_EQ(error_of("dax kiki"), Errc::MalformedInstruction);
  EXPECT_EQ(error_of("dax fep fep"), Errc::MalformedInstruction);
  EXPECT_EQ(error_of("wif blicket dax fep"), Errc::MalformedInstruction);
  EXPECT_EQ(error_of("dax blicket wif blicket lug"), Errc::MalformedInstruction);
  EXPECT_EQ(error_of("dax toma"), Errc::UnknownWord);
  EXPECT_THROW(Instruction::parse("   "), Error);
}

TEST(Parse, RelaxedBlicketArguments) {
  GrammarConfig loose;
  loose.strict_blicket_args = false;
  EXPECT_EQ(to_string(parse(Instruction::parse("wif blicket dax fep"), kLex, loose)),
            "(blicket wif (fep dax))");
  EXPECT_EQ(to_string(run("wif blicket dax fep", loose)), "GREEN RED RED RED GREEN");
}

TEST(Parse, ConcatCanBeDisabled) {
  GrammarConfig no_concat;
  no_concat.allow_concat = false;
  EXPECT_EQ(error_of("dax wif", no_concat), Errc::MalformedInstruction);
  EXPECT_EQ(to_string(run("dax wif")), "RED GREEN");
}

TEST(Evaluate, OutputCap) {
  GrammarConfig tight;
  tight.max_output_len = 6;
  EXPECT_EQ(run("dax fep kiki wif fep", tight).size(), 6u);
  EXPECT_EQ(error_of("dax fep kiki wif fep kiki lug", tight), Errc::OutputTooLong);
  tight.max_output_len = 5;
  EXPECT_THROW(tight.validate(), Error);
}

TEST(Evaluate, ForwardKikiVariant) {
  auto tree = parse(Instruction::parse("wif blicket dax kiki lug"), kLex);
  EXPECT_EQ(to_string(evaluate(tree, kLex, {}, KikiOrder::Forward)), "GREEN RED GREEN BLUE");
}

TEST(CountCompositions, Examples) {
  EXPECT_EQ(count_compositions(ParseTree::prim("dax")), 0u);
  EXPECT_EQ(count_compositions(parse(Instruction::parse("wif blicket dax kiki lug"), kLex)), 2u);
  EXPECT_EQ(count_compositions(parse(Instruction::parse("zup blicket wif kiki dax fep"), kLex)), 3u);
}

TEST(SampleLexicon, Deterministic) {
  const auto a = sample_lexicon(curriculum_word_pool(), all_colors(6), 4, 1234);
  const auto b = sample_lexicon(curriculum_word_pool(), all_colors(6), 4, 1234);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.primitives().size(), 4u);
  EXPECT_TRUE(a.word_for(MeaningKind::RepeatThree));
  EXPECT_TRUE(a.word_for(MeaningKind::Alternate));
  EXPECT_TRUE(a.word_for(MeaningKind::ReverseConcat));
  EXPECT_NE(a, sample_lexicon(curriculum_word_pool(), all_colors(6), 4, 1235));
}

TEST(SampleLexicon, PoolTooSmall) {
  try {
    sample_lexicon({"a", "b", "c"}, all_colors(6), 4, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PoolTooSmall);
  }
  EXPECT_THROW(sample_lexicon(curriculum_word_pool(), all_colors(3), 4, 0), Error);
}

TEST(SampleLexicon, UniformPrimitiveRate) {
  std::map<std::string, int> counts;
  constexpr int kSeeds = 10000;
  for (int s = 0; s < kSeeds; ++s)
    for (const auto& e : sample_lexicon(curriculum_word_pool(), all_colors(6), 4, s).primitives())
      ++counts[e.word];
  for (const auto& w : curriculum_word_pool())
    EXPECT_NEAR(counts[w] / double(kSeeds), 4.0 / 9.0, 0.02) << w;
}

TEST(Lexicon, RejectsSharedColor) {
  EXPECT_THROW(Lexicon({"a", "b"}, all_colors(2),
                       {{"a", Meaning::primitive(ColorSymbol(1))},
                        {"b", Meaning::primitive(ColorSymbol(1))}}),
               Error);
}

TEST(Enumerate, SmallCounts) {
  EXPECT_EQ(enumerate_instructions(kLex, {}, 1).size(), 4u);
  EXPECT_EQ(enumerate_instructions(kLex, {}, 2).size(), 4u + 4u + 16u);
  GrammarConfig no_concat;
  no_concat.allow_concat = false;
  EXPECT_EQ(enumerate_instructions(kLex, no_concat, 2).size(), 8u);
  EXPECT_THROW(enumerate_instructions(kLex, {}, 9), Error);
}

TEST(Enumerate, RoundTrip) {
  for (const auto& [instr, out] : enumerate_instructions(kLex, {}, 5))
    EXPECT_EQ(evaluate(parse(instr, kLex), kLex), out) << instr.str();
}

TEST(Enumerate, MatchesDerivationOracle) {
  for (bool concat : {true, false}) {
    GrammarConfig cfg;
    cfg.allow_concat = concat;
    const auto lang = oracle::language(kLex, 5);
    std::set<std::string> produced;
    for (const auto& [instr, out] : enumerate_instructions(kLex, cfg, 5)) {
      produced.insert(instr.str());
      auto it = lang.find(instr.str());
      ASSERT_NE(it, lang.end()) << instr.str();
      ASSERT_EQ(it->second.size(), 1u) << "ambiguous: " << instr.str();
      oracle::Seq ids;
      for (auto c : out) ids.push_back(c.id());
      EXPECT_EQ(*it->second.begin(), ids) << instr.str();
    }
    if (concat) EXPECT_EQ(produced.size(), lang.size());
  }
}

// Length and reversal laws over all enumerable arguments.
TEST(Laws, LengthAndReversal) {
  const auto items = enumerate_instructions(kLex, {}, 3);
  const auto prims = kLex.primitives();
  for (const auto& p : prims) {
    const auto x = run(p.word);
    EXPECT_EQ(run(p.word + " fep").size(), 3 * x.size());
    for (const auto& q : prims)
      EXPECT_EQ(run(p.word + " blicket " + q.word).size(), 2 * x.size() + run(q.word).size());
  }
  for (const auto& [xi, xo] : items) {
    if (xi.str().find("kiki") != std::string::npos) continue;  // left side is kiki-free
    for (const auto& [yi, yo] : items) {
      const auto both = run(xi.str() + " kiki " + yi.str());
      OutputSeq expect = yo;
      expect.insert(expect.end(), xo.begin(), xo.end());
      EXPECT_EQ(both, expect);
      EXPECT_EQ(both.size(), xo.size() + yo.size());
    }
  }
}

TEST(Json, LexiconRoundTrip) {
  const auto lex = sample_lexicon(bias_word_pool(), all_colors(8), 5, 77);
  nlohmann::json j = lex;
  EXPECT_EQ(j.get<Lexicon>(), lex);
  EXPECT_EQ(nlohmann::json(ColorSymbol(3)), "COLOR3");
}

}  // namespace
}  // namespace fewshot
