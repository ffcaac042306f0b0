#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "fewshot/bias/classify.hpp"
#include "fewshot/grammar.hpp"
#include "fewshot/protocol.hpp"
#include "fewshot/rng.hpp"

namespace fewshot::sim {

/// Response tendencies of one simulated participant type.
///
/// Items with a defined answer: with p_correct the grammar's answer, else an
/// error mode drawn with weights p_one_to_one, p_forward_concat (only on items
/// containing the ReverseConcat word) and p_lapse, renormalized over the modes
/// that apply (a lapse when none applies). On an item where no mode can hit
/// the answer by chance, the expected one-to-one share among errors is
/// (p_one_to_one + p_lapse * P(lapse is word-by-word)) / (sum of applicable weights).
///
/// Mutual-exclusivity trials: the participant follows ME with probability
/// p_me_follow(n_contradictory, pool_size), where the violation log-odds are
/// logit(1 - p_me) + me_counter_logit * n_contradictory + me_pool_logit * [pool > 2].
struct BiasProfile {
  double p_correct = 1.0;
  double p_one_to_one = 1.0;
  double p_forward_concat = 0.0;
  double p_lapse = 0.0;
  int lapse_max_len = 6;  // lapse: length uniform in 1..lapse_max_len, symbols uniform over the pool

  double p_me = 1.0;
  double me_counter_logit = 0.0;
  double me_pool_logit = 0.0;
  double p_conflict_me = 0.5;  // ME over one-to-one when every pool symbol is claimed

  double p_catch_miss = 0.0;
  double p_study_correct = 1.0;  // per quiz attempt

  // Free-form page: participant-level strategy.
  double p_free_bias = 1.0;    // distinct one-symbol meaning per word, concatenated in order
  double p_free_iconic = 0.0;  // in-order concatenation but two words share a meaning
  // remaining mass answers every item at random
  double p_external_aid = 0.0;

  double p_me_follow(int n_contradictory, int pool_size) const {
    if (p_me >= 1.0 && me_counter_logit == 0.0 && me_pool_logit == 0.0) return 1.0;
    if (p_me <= 0.0 && me_counter_logit == 0.0 && me_pool_logit == 0.0) return 0.0;
    const double base = std::log((1.0 - p_me) / p_me);
    const double eta = base + me_counter_logit * n_contradictory + me_pool_logit * (pool_size > 2 ? 1.0 : 0.0);
    return 1.0 - 1.0 / (1.0 + std::exp(-eta));
  }

  void validate() const {
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::InvalidConfig, std::string(name) + " must be in [0, 1]");
    };
    prob(p_correct, "p_correct");
    prob(p_one_to_one, "p_one_to_one");
    prob(p_forward_concat, "p_forward_concat");
    prob(p_lapse, "p_lapse");
    prob(p_me, "p_me");
    prob(p_conflict_me, "p_conflict_me");
    prob(p_catch_miss, "p_catch_miss");
    prob(p_study_correct, "p_study_correct");
    prob(p_free_bias, "p_free_bias");
    prob(p_free_iconic, "p_free_iconic");
    prob(p_external_aid, "p_external_aid");
    if (p_free_bias + p_free_iconic > 1.0 + 1e-12)
      throw Error(Errc::InvalidConfig, "p_free_bias + p_free_iconic must not exceed 1");
    if (p_correct < 1.0 && p_one_to_one + p_forward_concat + p_lapse <= 0.0)
      throw Error(Errc::InvalidConfig, "error weights must not all be zero");
    if (lapse_max_len < 1) throw Error(Errc::InvalidConfig, "lapse_max_len must be positive");
    if (!std::isfinite(me_counter_logit) || !std::isfinite(me_pool_logit))
      throw Error(Errc::InvalidConfig, "ME effects must be finite");
  }

  friend bool operator==(const BiasProfile&, const BiasProfile&) = default;
};

#define FEWSHOT_PROFILE_FIELDS(X)                                                                   \
  X(p_correct) X(p_one_to_one) X(p_forward_concat) X(p_lapse) X(lapse_max_len) X(p_me)             \
  X(me_counter_logit) X(me_pool_logit) X(p_conflict_me) X(p_catch_miss) X(p_study_correct)         \
  X(p_free_bias) X(p_free_iconic) X(p_external_aid)

inline void to_json(nlohmann::json& j, const BiasProfile& p) {
  j = nlohmann::json::object();
#define X(f) j[#f] = p.f;
  FEWSHOT_PROFILE_FIELDS(X)
#undef X
}

inline void from_json(const nlohmann::json& j, BiasProfile& p) {
  p = BiasProfile{};
  for (const auto& [k, v] : j.items()) {
    bool known = false;
#define X(f) if (k == #f) { v.get_to(p.f); known = true; }
    FEWSHOT_PROFILE_FIELDS(X)
#undef X
    if (!known) throw Error(Errc::InvalidConfig, "unknown profile field: " + k);
  }
  p.validate();
}

#undef FEWSHOT_PROFILE_FIELDS

struct PopulationGroup {
  std::string name;
  BiasProfile profile;
  int count = 1;
};

struct SimulatedPopulation {
  std::vector<PopulationGroup> groups;
  std::uint64_t seed = 0;

  int size() const {
    int n = 0;
    for (const auto& g : groups) n += g.count;
    return n;
  }

  void validate() const {
    if (groups.empty()) throw Error(Errc::InvalidConfig, "population has no groups");
    for (const auto& g : groups) {
      if (g.count < 1) throw Error(Errc::InvalidConfig, "group counts must be at least 1");
      g.profile.validate();
    }
  }
};

inline void to_json(nlohmann::json& j, const PopulationGroup& g) {
  j = {{"name", g.name}, {"profile", g.profile}, {"count", g.count}};
}

inline void from_json(const nlohmann::json& j, PopulationGroup& g) {
  g.name = j.value("name", "");
  g.profile = j.at("profile").get<BiasProfile>();
  g.count = j.at("count").get<int>();
}

/// A profile file is either a single profile object or
/// {"groups": [{"name", "profile", "count"}...]} with relative counts.
inline SimulatedPopulation population_from_json(const nlohmann::json& j, int n, std::uint64_t seed) {
  SimulatedPopulation pop;
  pop.seed = seed;
  if (!j.contains("groups")) {
    pop.groups.push_back({"default", j.get<BiasProfile>(), n});
  } else {
    auto groups = j.at("groups").get<std::vector<PopulationGroup>>();
    int total = 0;
    for (const auto& g : groups) total += g.count;
    if (total <= 0) throw Error(Errc::InvalidConfig, "group counts must be positive");
    // largest-remainder apportionment of n over the relative counts
    int assigned = 0;
    std::vector<std::pair<double, std::size_t>> rema;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const double exact = static_cast<double>(n) * groups[i].count / total;
      groups[i].count = static_cast<int>(std::floor(exact));
      assigned += groups[i].count;
      rema.emplace_back(-(exact - std::floor(exact)), i);
    }
    std::sort(rema.begin(), rema.end());
    for (int k = 0; k < n - assigned; ++k) ++groups[rema[static_cast<std::size_t>(k)].second].count;
    for (auto& g : groups)
      if (g.count > 0) pop.groups.push_back(std::move(g));
  }
  pop.validate();
  return pop;
}

namespace detail {

inline OutputSeq random_sequence(const std::vector<ColorSymbol>& pool, std::size_t len, Rng& rng) {
  OutputSeq out;
  for (std::size_t i = 0; i < len; ++i) out.push_back(pool[uniform_index(rng, pool.size())]);
  return out;
}

/// A pool response that differs from target in exactly one position.
inline OutputSeq perturb(const OutputSeq& target, const std::vector<ColorSymbol>& pool, Rng& rng) {
  if (target.empty() || pool.size() < 2) return random_sequence(pool, 1, rng);
  OutputSeq out = target;
  const auto pos = uniform_index(rng, out.size());
  std::vector<ColorSymbol> others;
  for (auto c : pool)
    if (c != out[pos]) others.push_back(c);
  out[pos] = others[uniform_index(rng, others.size())];
  return out;
}

}  // namespace detail

/// Word-by-word translation: primitives keep their color, every other word
/// gets an independent uniformly drawn pool symbol.
inline OutputSeq one_to_one_response(const Item& item, const Lexicon& lex, Rng& rng) {
  OutputSeq out;
  for (const auto& w : item.instruction.words()) {
    const Meaning* m = lex.find(w);
    if (m && m->is_primitive()) out.push_back(m->color);
    else out.push_back(item.pool[uniform_index(rng, item.pool.size())]);
  }
  return out;
}

inline OutputSeq lapse_response(const Item& item, const BiasProfile& p, Rng& rng) {
  const auto len = 1 + uniform_index(rng, static_cast<std::uint64_t>(p.lapse_max_len));
  return detail::random_sequence(item.pool, len, rng);
}

/// Response to an item with a defined answer (curriculum, iconic and catch-free items).
inline OutputSeq simulate_response(const Item& item, const BiasProfile& p, const Lexicon& lex, Rng& rng) {
  const auto target = try_interpret(item.instruction, lex);
  if (!target) return lapse_response(item, p, rng);
  if (bernoulli(rng, p.p_correct)) return *target;
  const bool kiki = contains_reverse_concat(item, lex);
  const double w[] = {p.p_one_to_one, kiki ? p.p_forward_concat : 0.0, p.p_lapse};
  if (w[0] + w[1] + w[2] <= 0.0) return lapse_response(item, p, rng);
  switch (weighted_index(rng, w)) {
    case 0: return one_to_one_response(item, lex, rng);
    case 1: return interpret(item.instruction, lex, {}, KikiOrder::Forward);
    default: return lapse_response(item, p, rng);
  }
}

/// Response to any test-phase item of a stage.
inline OutputSeq simulate_test_response(const Stage& stage, const Item& item, const BiasProfile& p, Rng& rng) {
  if (item.is_catch) {
    if (bernoulli(rng, p.p_catch_miss)) return detail::perturb(*item.target, item.pool, rng);
    return *item.target;
  }
  switch (stage.kind) {
    case StageKind::MutualExclusivity: {
      const bool follow = bernoulli(rng, p.p_me_follow(stage.n_contradictory, static_cast<int>(item.pool.size())));
      if (!follow) return {stage.familiar[uniform_index(rng, stage.familiar.size())]};
      std::vector<ColorSymbol> free;
      for (auto c : item.pool)
        if (std::find(stage.familiar.begin(), stage.familiar.end(), c) == stage.familiar.end()) free.push_back(c);
      return {free[uniform_index(rng, free.size())]};
    }
    case StageKind::Conflict: {
      if (!bernoulli(rng, p.p_conflict_me)) return {stage.familiar[uniform_index(rng, stage.familiar.size())]};
      return detail::random_sequence(item.pool, 2, rng);
    }
    default:
      return simulate_response(item, p, stage.lexicon, rng);
  }
}

/// Free-form answers for the whole page under one participant-level strategy.
inline std::map<std::string, OutputSeq> simulate_free_form(const Stage& stage, const BiasProfile& p, Rng& rng) {
  const auto& pool = stage.test.front().pool;
  std::vector<std::string> words;
  for (const auto& item : stage.test)
    for (const auto& w : item.instruction.words())
      if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
  std::sort(words.begin(), words.end());
  const double u = uniform01(rng);
  std::map<std::string, OutputSeq> out;
  if (u < p.p_free_bias + p.p_free_iconic && words.size() <= pool.size()) {
    auto colors = pool;
    shuffle(std::span(colors), rng);
    std::map<std::string, ColorSymbol> meaning;
    for (std::size_t i = 0; i < words.size(); ++i) meaning[words[i]] = colors[i];
    if (u >= p.p_free_bias && words.size() >= 2) meaning[words[1]] = meaning[words[0]];
    for (const auto& item : stage.test) {
      OutputSeq r;
      for (const auto& w : item.instruction.words()) r.push_back(meaning.at(w));
      out[item.id] = r;
    }
    return out;
  }
  for (const auto& item : stage.test) {
    const auto len = 1 + uniform_index(rng, 3);
    out[item.id] = detail::random_sequence(pool, len, rng);
  }
  return out;
}

/// Answers pending steps the way one simulated participant would. The
/// returned responder shares rng with the caller and must be asked about the
/// steps of one session in order.
inline StepResponder make_responder(const ExperimentSpec& spec, const BiasProfile& p, Rng& rng) {
  struct FreePage {
    std::optional<std::size_t> stage;
    std::map<std::string, OutputSeq> answers;
  };
  auto page = std::make_shared<FreePage>();
  return [&spec, p, &rng, page](const PendingStep& step) -> OutputSeq {
    const Item& item = *step.item;
    switch (step.phase) {
      case Phase::Instructions:
        return *item.target;
      case Phase::Quiz:
        if (bernoulli(rng, p.p_study_correct)) return *item.target;
        return detail::perturb(*item.target, item.pool, rng);
      case Phase::Test:
        break;
    }
    const Stage& stage = spec.stages[*step.stage_index];
    if (stage.kind == StageKind::FreeForm) {
      if (page->stage != step.stage_index) {
        page->answers = simulate_free_form(stage, p, rng);
        page->stage = step.stage_index;
      }
      return page->answers.at(item.id);
    }
    return simulate_test_response(stage, item, p, rng);
  };
}

/// Post-test survey answer, drawn after the last step.
inline bool simulate_external_aid(const ExperimentSpec& spec, const BiasProfile& p, Rng& rng) {
  return spec.kind == ExperimentKind::Exp3 && bernoulli(rng, p.p_external_aid);
}

/// A complete session for one simulated participant.
inline Session simulate_session(const ExperimentSpec& spec, const BiasProfile& p, std::string participant_id,
                                Rng& rng) {
  Session s = run_session(spec, std::move(participant_id), make_responder(spec, p, rng));
  s.external_aid = simulate_external_aid(spec, p, rng);
  return s;
}

inline std::string participant_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sim-%06zu", index + 1);
  return buf;
}

/// One session per simulated participant, in group order. Participant i draws
/// from its own stream derived from (population seed, i). The spec must be
/// the one its (kind, seed) regenerates, since sessions store only those.
inline std::vector<Session> simulate_population(const ExperimentSpec& spec, const SimulatedPopulation& pop) {
  pop.validate();
  if (generate_experiment(spec.kind, spec.seed) != spec)
    throw Error(Errc::InvalidConfig, "spec is not reproducible from its kind and seed");
  std::vector<Session> out;
  std::size_t index = 0;
  for (const auto& g : pop.groups) {
    for (int k = 0; k < g.count; ++k, ++index) {
      Rng rng(mix_seed(pop.seed, index));
      out.push_back(simulate_session(spec, g.profile, participant_name(index), rng));
    }
  }
  return out;
}

}  // namespace fewshot::sim
