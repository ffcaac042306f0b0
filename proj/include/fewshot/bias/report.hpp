#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "fewshot/bias/classify.hpp"
#include "fewshot/bias/logistic.hpp"
#include "fewshot/bias/segmentation.hpp"
#include "fewshot/protocol.hpp"

namespace fewshot {

struct CurriculumErrorStats {
  std::size_t n_responses = 0;
  std::size_t n_correct = 0;
  std::size_t n_errors = 0;
  std::size_t n_one_to_one = 0;  // errors that are word-by-word translations
  std::size_t n_kiki_errors = 0;  // errors on items containing the ReverseConcat word
  std::size_t n_kiki_no_reverse = 0;

  std::optional<double> one_to_one_share() const { return ratio(n_one_to_one, n_errors); }
  std::optional<double> kiki_no_reverse_share() const { return ratio(n_kiki_no_reverse, n_kiki_errors); }
  std::optional<double> accuracy() const { return ratio(n_correct, n_responses); }

  static std::optional<double> ratio(std::size_t a, std::size_t b) {
    if (b == 0) return std::nullopt;
    return static_cast<double>(a) / static_cast<double>(b);
  }
};

struct MeCellStats {
  int n_contradictory = 0;
  int pool_size = 0;
  std::size_t n = 0;
  std::size_t n_consistent = 0;
  double rate() const { return n ? static_cast<double>(n_consistent) / static_cast<double>(n) : 0.0; }
};

struct BiasTrialStats {
  std::vector<MeCellStats> me_cells;  // ordered by (n_contradictory, pool_size)
  std::size_t n_iconic = 0;
  std::size_t n_iconic_consistent = 0;
  std::size_t n_conflict = 0;
  std::size_t n_conflict_me = 0;          // kept ME (multi-element or unclaimed symbol)
  std::size_t n_conflict_one_to_one = 0;  // reused a claimed single symbol
  std::vector<MeRow> design;
  std::optional<LogisticFit> fit;
  std::string fit_error;
};

struct FreeFormStats {
  std::size_t n_participants = 0;
  std::size_t n_iconic = 0;     // a segmentation model exists
  std::size_t n_iconic_me = 0;  // ... with pairwise-distinct word meanings
  std::size_t n_full_bias = 0;  // ... and every word maps to a single symbol
  std::size_t n_no_model = 0;
};

struct BiasReport {
  std::size_t n_sessions = 0;
  std::size_t n_excluded = 0;
  CurriculumErrorStats curriculum;
  BiasTrialStats trials;
  FreeFormStats free_form;
};

/// Bias statistics over included (non-excluded) sessions. Curriculum stages
/// whose study phase failed are skipped, as in grading.
inline BiasReport bias_report(std::span<const Session> sessions) {
  BiasReport rep;
  std::map<std::pair<ExperimentKind, std::uint64_t>, ExperimentSpec> specs;
  std::map<std::pair<int, int>, MeCellStats> cells;

  for (const auto& session : sessions) {
    ++rep.n_sessions;
    auto key = std::pair{session.kind, session.seed};
    auto it = specs.find(key);
    if (it == specs.end()) it = specs.emplace(key, session.spec()).first;
    const ExperimentSpec& spec = it->second;

    const auto graded = grade_session(session, spec);
    if (graded.excluded) {
      ++rep.n_excluded;
      continue;
    }
    const Replay r = replay(spec, session.records);

    for (std::size_t si = 0; si < spec.stages.size(); ++si) {
      const Stage& stage = spec.stages[si];
      if (graded.stages[si].excluded) continue;
      const auto& answered = r.stages[si].test_responses;

      if (stage.kind == StageKind::FreeForm) {
        std::map<Instruction, OutputSeq> responses;
        for (const auto& item : stage.test)
          if (auto a = answered.find(item.id); a != answered.end())
            responses[item.instruction] = a->second;
        if (responses.empty()) continue;
        ++rep.free_form.n_participants;
        auto model = infer_segmentation(responses);
        if (!model) {
          ++rep.free_form.n_no_model;
          continue;
        }
        ++rep.free_form.n_iconic;
        if (check_me_on_model(*model)) {
          ++rep.free_form.n_iconic_me;
          bool singles = true;
          for (const auto& [w, s] : model->assignment) singles = singles && s.size() == 1;
          if (singles) ++rep.free_form.n_full_bias;
        }
        continue;
      }

      for (const auto& item : stage.test) {
        auto a = answered.find(item.id);
        if (a == answered.end() || item.is_catch) continue;
        const OutputSeq& resp = a->second;
        const BiasVerdict v = classify(stage, item, resp);
        switch (stage.kind) {
          case StageKind::F1:
          case StageKind::F2:
          case StageKind::F3:
          case StageKind::Composition: {
            auto& c = rep.curriculum;
            ++c.n_responses;
            if (score_response(item, resp)) {
              ++c.n_correct;
              break;
            }
            ++c.n_errors;
            if (v.one_to_one) ++c.n_one_to_one;
            if (v.kiki_no_reverse) {
              ++c.n_kiki_errors;
              if (*v.kiki_no_reverse) ++c.n_kiki_no_reverse;
            }
            break;
          }
          case StageKind::MutualExclusivity: {
            auto& cell = cells[{stage.n_contradictory, static_cast<int>(item.pool.size())}];
            cell.n_contradictory = stage.n_contradictory;
            cell.pool_size = static_cast<int>(item.pool.size());
            ++cell.n;
            if (*v.me_consistent) ++cell.n_consistent;
            rep.trials.design.push_back(
                {stage.n_contradictory, static_cast<int>(item.pool.size()), !*v.me_consistent});
            break;
          }
          case StageKind::Iconic:
            ++rep.trials.n_iconic;
            if (v.iconic_concat) ++rep.trials.n_iconic_consistent;
            break;
          case StageKind::Conflict:
            ++rep.trials.n_conflict;
            if (*v.me_consistent) ++rep.trials.n_conflict_me;
            else ++rep.trials.n_conflict_one_to_one;
            break;
          default:
            break;
        }
      }
    }
  }

  for (const auto& [k, c] : cells) rep.trials.me_cells.push_back(c);
  if (!rep.trials.design.empty()) {
    try {
      rep.trials.fit = fit_me_logistic(rep.trials.design);
    } catch (const Error& e) {
      rep.trials.fit_error = e.what();
    }
  }
  return rep;
}

inline std::string design_csv(const std::vector<MeRow>& rows) {
  std::string out = "n_contradictory,pool_size,large_pool,me_violated\n";
  for (const auto& r : rows)
    out += std::to_string(r.n_contradictory) + ',' + std::to_string(r.pool_size) + ',' +
           (r.pool_size > 2 ? "1" : "0") + ',' + (r.me_violated ? "1" : "0") + '\n';
  return out;
}

inline nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline void to_json(nlohmann::json& j, const BiasReport& r) {
  const auto& c = r.curriculum;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : r.trials.me_cells)
    cells.push_back({{"n_contradictory", cell.n_contradictory},
                     {"pool_size", cell.pool_size},
                     {"n", cell.n},
                     {"n_consistent", cell.n_consistent},
                     {"rate", cell.rate()}});
  j = {{"schema", "fewshot.bias-report/1"},
       {"n_sessions", r.n_sessions},
       {"n_excluded", r.n_excluded},
       {"curriculum",
        {{"n_responses", c.n_responses},
         {"accuracy", opt_json(c.accuracy())},
         {"n_errors", c.n_errors},
         {"n_one_to_one", c.n_one_to_one},
         {"one_to_one_share", opt_json(c.one_to_one_share())},
         {"n_kiki_errors", c.n_kiki_errors},
         {"n_kiki_no_reverse", c.n_kiki_no_reverse},
         {"kiki_no_reverse_share", opt_json(c.kiki_no_reverse_share())}}},
       {"bias_trials",
        {{"me_cells", cells},
         {"n_iconic", r.trials.n_iconic},
         {"n_iconic_consistent", r.trials.n_iconic_consistent},
         {"n_conflict", r.trials.n_conflict},
         {"n_conflict_me", r.trials.n_conflict_me},
         {"n_conflict_one_to_one", r.trials.n_conflict_one_to_one},
         {"me_violation_fit", r.trials.fit ? nlohmann::json(*r.trials.fit) : nlohmann::json(nullptr)},
         {"fit_error", r.trials.fit_error}}},
       {"free_form",
        {{"n_participants", r.free_form.n_participants},
         {"n_iconic", r.free_form.n_iconic},
         {"n_iconic_me", r.free_form.n_iconic_me},
         {"n_full_bias", r.free_form.n_full_bias},
         {"n_no_model", r.free_form.n_no_model}}}};
}

}  // namespace fewshot
