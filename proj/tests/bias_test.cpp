#include <gtest/gtest.h>

#include <functional>
#include <set>

#include "fewshot/bias.hpp"
#include "fewshot/protocol.hpp"

namespace fewshot {
namespace {

const Lexicon kLex = Lexicon::canonical();

Item item(std::string_view text) {
  const auto instr = Instruction::parse(text);
  return Item{"x", instr, try_interpret(instr, kLex), false, all_colors(6)};
}

OutputSeq seq(std::string_view s) { return parse_output(s); }

TEST(OneToOne, Examples) {
  EXPECT_TRUE(classify_one_to_one(item("wif blicket dax"), seq("GREEN PURPLE RED"), kLex));
  EXPECT_FALSE(classify_one_to_one(item("wif blicket dax"), seq("GREEN RED GREEN"), kLex));
  EXPECT_FALSE(classify_one_to_one(item("dax fep"), seq("RED RED RED"), kLex));
  // repeated function words may take different symbols
  EXPECT_TRUE(classify_one_to_one(item("dax fep kiki wif fep"), seq("RED BLUE PINK GREEN RED"), kLex));
}

TEST(KikiNoReverse, Examples) {
  EXPECT_EQ(classify_kiki_no_reverse(item("dax kiki lug"), seq("RED BLUE"), kLex), true);
  EXPECT_EQ(classify_kiki_no_reverse(item("dax kiki lug"), seq("BLUE RED"), kLex), false);
  EXPECT_EQ(classify_kiki_no_reverse(item("dax fep"), seq("RED"), kLex), std::nullopt);
  EXPECT_EQ(classify_kiki_no_reverse(item("wif blicket dax kiki lug"), seq("GREEN RED GREEN BLUE"), kLex),
            true);
}

TEST(KikiNoReverse, NeverAlsoCorrectWhenOrderMatters) {
  for (const auto& [instr, target] : enumerate_instructions(kLex, {}, 5)) {
    const Item it{"x", instr, target, false, all_colors(6)};
    const auto forward = interpret(instr, kLex, {}, KikiOrder::Forward);
    if (forward == target) continue;  // argument order does not show in the output
    for (const auto& resp : {target, forward}) {
      auto kiki = classify_kiki_no_reverse(it, resp, kLex);
      EXPECT_FALSE(kiki.value_or(false) && score_response(it, resp)) << instr.str();
    }
  }
}

TEST(Me, Examples) {
  const std::vector<ColorSymbol> demo = {ColorSymbol::parse("RED")};
  EXPECT_EQ(classify_me(demo, seq("BLUE")), true);
  EXPECT_EQ(classify_me(demo, seq("RED")), false);
  EXPECT_EQ(classify_me(demo, seq("RED BLUE")), true);
  EXPECT_EQ(classify_me(std::vector<ColorSymbol>{}, seq("RED")), std::nullopt);
}

TEST(Me, InvariantUnderRecoloring) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    auto perm = all_colors();
    shuffle(std::span(perm), rng);
    auto recolor = [&](ColorSymbol c) { return perm[static_cast<std::size_t>(c.id() - 1)]; };
    std::vector<ColorSymbol> demo = {ColorSymbol(static_cast<int>(uniform_index(rng, 8)) + 1)};
    OutputSeq resp;
    const auto len = 1 + uniform_index(rng, 3);
    for (std::size_t k = 0; k < len; ++k)
      resp.push_back(uniform_index(rng, 3) == 0 ? demo[0] : ColorSymbol(static_cast<int>(uniform_index(rng, 8)) + 1));
    std::vector<ColorSymbol> demo2 = {recolor(demo[0])};
    OutputSeq resp2;
    for (auto c : resp) resp2.push_back(recolor(c));
    EXPECT_EQ(classify_me(demo, resp), classify_me(demo2, resp2));
  }
}

std::map<Instruction, OutputSeq> responses(
    std::initializer_list<std::pair<std::string_view, std::string_view>> xs) {
  std::map<Instruction, OutputSeq> m;
  for (auto [i, o] : xs) m[Instruction::parse(i)] = seq(o);
  return m;
}

TEST(Segmentation, Examples) {
  auto m = infer_segmentation(responses({{"fep", "YELLOW"}, {"wif", "GREEN"}, {"fep wif", "YELLOW GREEN"}}));
  ASSERT_TRUE(m);
  EXPECT_EQ(m->assignment.at("fep"), seq("YELLOW"));
  EXPECT_EQ(m->assignment.at("wif"), seq("GREEN"));

  EXPECT_FALSE(infer_segmentation(responses({{"fep", "YELLOW"}, {"fep fep", "YELLOW YELLOW YELLOW"}})));

  m = infer_segmentation(
      responses({{"fep", "YELLOW YELLOW"}, {"wif", "GREEN"}, {"fep wif", "YELLOW YELLOW GREEN"}}));
  ASSERT_TRUE(m);
  EXPECT_EQ(m->assignment.at("fep"), seq("YELLOW YELLOW"));
  EXPECT_EQ(m->assignment.at("wif"), seq("GREEN"));
}

TEST(Segmentation, PrefersShortestModel) {
  // "a b" -> R G B admits {a:R, b:GB} and {a:RG, b:B}; equal totals, so the
  // alphabetically first word gets the smaller sequence.
  auto m = infer_segmentation(responses({{"a b", "RED GREEN BLUE"}}));
  ASSERT_TRUE(m);
  EXPECT_EQ(m->assignment.at("a"), seq("RED"));
  EXPECT_EQ(m->assignment.at("b"), seq("GREEN BLUE"));
}

TEST(Segmentation, MeOnModel) {
  EXPECT_TRUE(check_me_on_model({{{"fep", seq("YELLOW")}, {"wif", seq("GREEN")}}}));
  EXPECT_FALSE(check_me_on_model({{{"fep", seq("YELLOW")}, {"wif", seq("YELLOW")}}}));
  EXPECT_TRUE(check_me_on_model({{{"fep", seq("YELLOW GREEN")}, {"wif", seq("GREEN")}}}));
}

// Brute force: every word ranges over all substrings of all responses.
std::optional<SegmentationModel> brute_force(const std::map<Instruction, OutputSeq>& rs) {
  std::set<std::string> words;
  std::set<OutputSeq> subs;
  for (const auto& [i, r] : rs) {
    for (const auto& w : i.words()) words.insert(w);
    for (std::size_t a = 0; a < r.size(); ++a)
      for (std::size_t b = a + 1; b <= r.size(); ++b) subs.insert(OutputSeq(r.begin() + a, r.begin() + b));
  }
  const std::vector<std::string> ws(words.begin(), words.end());
  const std::vector<OutputSeq> cand(subs.begin(), subs.end());
  std::optional<SegmentationModel> best;
  SegmentationModel cur;
  std::function<void(std::size_t)> go = [&](std::size_t k) {
    if (k == ws.size()) {
      if (!cur.explains(rs)) return;
      if (!best || cur.total_length() < best->total_length() ||
          (cur.total_length() == best->total_length() && cur.assignment < best->assignment))
        best = cur;
      return;
    }
    for (const auto& c : cand) {
      cur.assignment[ws[k]] = c;
      go(k + 1);
    }
  };
  if (!cand.empty()) go(0);
  return best;
}

TEST(Segmentation, SoundAndCompleteOnSmallInstances) {
  Rng rng(2024);
  const std::vector<std::string> vocab = {"a", "b", "c"};
  int found = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::map<std::string, OutputSeq> truth;
    for (const auto& w : vocab) {
      OutputSeq s;
      const auto len = 1 + uniform_index(rng, 2);
      for (std::size_t k = 0; k < len; ++k) s.push_back(ColorSymbol(1 + static_cast<int>(uniform_index(rng, 3))));
      truth[w] = s;
    }
    std::map<Instruction, OutputSeq> rs;
    std::size_t total = 0;
    const auto n_instr = 2 + uniform_index(rng, 2);
    for (std::size_t k = 0; k < n_instr; ++k) {
      std::vector<std::string> ws;
      const auto len = 1 + uniform_index(rng, 2);
      for (std::size_t t = 0; t < len; ++t) ws.push_back(vocab[uniform_index(rng, vocab.size())]);
      OutputSeq out;
      for (const auto& w : ws) out.insert(out.end(), truth[w].begin(), truth[w].end());
      if (uniform_index(rng, 3) == 0) out.back() = ColorSymbol(1 + static_cast<int>(uniform_index(rng, 3)));
      total += out.size();
      rs[Instruction(ws)] = out;
    }
    if (total > 12) continue;
    const auto fast = infer_segmentation(rs);
    const auto slow = brute_force(rs);
    ASSERT_EQ(fast.has_value(), slow.has_value());
    if (fast) {
      ++found;
      EXPECT_TRUE(fast->explains(rs));
      EXPECT_EQ(fast->total_length(), slow->total_length());
      // words absent from every instruction are not assigned
      EXPECT_EQ(*fast, *slow);
    }
  }
  EXPECT_GT(found, 50);
}

TEST(Logistic, MatchesReferenceFit) {
  // Reference values from an independent maximum-likelihood fit
  // (statsmodels Logit, tol 1e-12) of the same 16 rows.
  Eigen::MatrixXd x(16, 2);
  x << 0, 0, 0, 0, 0, 1, 0, 1, 1, 0, 1, 0, 1, 1, 1, 1, 2, 0, 2, 0, 2, 1, 2, 1, 0, 0, 1, 1, 2, 1, 2, 0;
  Eigen::VectorXd y(16);
  y << 0, 0, 0, 1, 0, 1, 1, 0, 1, 0, 1, 1, 1, 1, 1, 0;
  const auto fit = fit_logistic(x, y, {"n_contradictory", "large_pool"});
  ASSERT_TRUE(fit.converged);
  const double beta[] = {-1.087974034686, 0.548810774746, 1.614309861523};
  const double se[] = {1.059149492111, 0.678239050964, 1.122941981506};
  const double z[] = {-1.027214800922, 0.80917012072, 1.437571920998};
  const double p[] = {0.30431933017, 0.418417299019, 0.150555552676};
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(fit.beta[k], beta[k], 1e-8);
    EXPECT_NEAR(fit.se[k], se[k], 1e-8);
    EXPECT_NEAR(fit.z[k], z[k], 1e-8);
    EXPECT_NEAR(fit.p[k], p[k], 1e-8);
    EXPECT_DOUBLE_EQ(fit.z[k], fit.beta[k] / fit.se[k]);
  }
  EXPECT_NEAR(fit.log_likelihood, -9.4518990956823, 1e-9);
}

TEST(Logistic, DegenerateInputs) {
  std::vector<MeRow> all_true;
  for (int i = 0; i < 30; ++i) all_true.push_back({i % 3, i % 2 ? 6 : 2, true});
  try {
    fit_me_logistic(all_true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == Errc::DegenerateDesign || e.code() == Errc::Separation);
  }
  // one predictor row only: rank deficient
  std::vector<MeRow> one_row;
  for (int i = 0; i < 30; ++i) one_row.push_back({1, 6, i % 2 == 0});
  EXPECT_THROW(fit_me_logistic(one_row), Error);
  // perfect separation on n_contradictory
  std::vector<MeRow> separated;
  for (int i = 0; i < 60; ++i) separated.push_back({i % 3, i % 2 ? 6 : 2, i % 3 == 2});
  try {
    fit_me_logistic(separated);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Separation);
  }
}

std::vector<MeRow> synthetic(const Eigen::Vector3d& beta, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<MeRow> rows;
  for (int i = 0; i < n; ++i) {
    MeRow r{static_cast<int>(uniform_index(rng, 3)), uniform_index(rng, 2) ? 6 : 2, false};
    const double eta = beta[0] + beta[1] * r.n_contradictory + beta[2] * (r.pool_size > 2);
    r.me_violated = bernoulli(rng, 1.0 / (1.0 + std::exp(-eta)));
    rows.push_back(r);
  }
  return rows;
}

TEST(Logistic, ParametricBootstrapFixedPoint) {
  const auto fit = fit_me_logistic(synthetic({-1.0, 0.8, 1.1}, 3000, 9));
  const auto refit = fit_me_logistic(synthetic(fit.beta, 3000, 10));
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(refit.beta[k], fit.beta[k], 3 * fit.se[k]);
}

TEST(Report, DesignCsv) {
  EXPECT_EQ(design_csv({{2, 6, true}}), "n_contradictory,pool_size,large_pool,me_violated\n2,6,1,1\n");
}

}  // namespace
}  // namespace fewshot
