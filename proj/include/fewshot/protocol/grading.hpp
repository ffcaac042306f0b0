#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fewshot/protocol/session.hpp"

namespace fewshot {

struct StageResult {
  std::string stage_id;
  StageKind kind = StageKind::F1;
  bool reached = false;
  std::optional<bool> quiz_passed;
  std::size_t n_scored = 0;  // answered non-catch items with a defined answer
  std::size_t n_correct = 0;
  bool excluded = false;  // study phase not passed

  std::optional<double> accuracy() const {
    if (n_scored == 0) return std::nullopt;
    return static_cast<double>(n_correct) / static_cast<double>(n_scored);
  }
};

struct ParticipantResult {
  std::string participant_id;
  ExperimentKind kind = ExperimentKind::Exp1;
  std::vector<StageResult> stages;
  int catch_missed = 0;
  bool complete = false;
  bool excluded = false;
  std::string exclusion_reason;
};

/// Whole-session catch threshold: two misses in the curriculum, any miss in
/// the bias trials.
constexpr int catch_exclusion_threshold(ExperimentKind kind) {
  return kind == ExperimentKind::Exp1 ? 2 : 1;
}

inline ParticipantResult grade_session(const Session& session, const ExperimentSpec& spec) {
  const Replay r = replay(spec, session.records);
  ParticipantResult res;
  res.participant_id = session.participant_id;
  res.kind = session.kind;
  res.complete = r.done();
  for (std::size_t si = 0; si < spec.stages.size(); ++si) {
    const Stage& stage = spec.stages[si];
    const StageTrace& trace = r.stages[si];
    StageResult sr;
    sr.stage_id = stage.id;
    sr.kind = stage.kind;
    sr.reached = trace.reached;
    sr.quiz_passed = trace.quiz_passed;
    sr.excluded = trace.quiz_passed.has_value() && !*trace.quiz_passed;
    for (const auto& item : stage.test) {
      auto it = trace.test_responses.find(item.id);
      if (it == trace.test_responses.end() || !item.target) continue;
      const bool ok = score_response(item, it->second);
      if (item.is_catch) {
        if (!ok) ++res.catch_missed;
      } else {
        ++sr.n_scored;
        if (ok) ++sr.n_correct;
      }
    }
    res.stages.push_back(sr);
  }
  if (res.catch_missed >= catch_exclusion_threshold(session.kind)) {
    res.excluded = true;
    res.exclusion_reason = "missed " + std::to_string(res.catch_missed) + " catch trials";
  } else if (session.external_aid) {
    res.excluded = true;
    res.exclusion_reason = "reported using an external aid";
  }
  return res;
}

inline ParticipantResult grade_session(const Session& session) {
  return grade_session(session, session.spec());
}

struct MeanCell {
  double mean = 0.0;
  std::size_t n = 0;
};

struct AggregateSummary {
  std::size_t n_participants = 0;
  std::size_t n_excluded = 0;
  /// Keyed by stage kind name; mean over included participants of their
  /// stage accuracy.
  std::map<std::string, MeanCell> per_stage;
  /// F1-F3 pooled per participant, then averaged.
  MeanCell functions;
  /// Every scored item of every stage, ignoring all exclusions.
  MeanCell overall_no_exclusions;
};

inline AggregateSummary aggregate(std::span<const ParticipantResult> results) {
  if (results.empty()) throw Error(Errc::EmptyInput, "no participant results");
  AggregateSummary s;
  s.n_participants = results.size();
  std::map<std::string, double> sums;
  double fn_sum = 0, all_sum = 0;
  for (const auto& r : results) {
    std::size_t all_n = 0, all_c = 0, fn_n = 0, fn_c = 0;
    for (const auto& st : r.stages) {
      all_n += st.n_scored;
      all_c += st.n_correct;
      if (r.excluded || st.excluded || st.n_scored == 0) continue;
      const auto key = std::string(to_string(st.kind));
      sums[key] += *st.accuracy();
      ++s.per_stage[key].n;
      if (st.kind == StageKind::F1 || st.kind == StageKind::F2 || st.kind == StageKind::F3) {
        fn_n += st.n_scored;
        fn_c += st.n_correct;
      }
    }
    if (r.excluded) ++s.n_excluded;
    if (all_n > 0) {
      all_sum += static_cast<double>(all_c) / static_cast<double>(all_n);
      ++s.overall_no_exclusions.n;
    }
    if (fn_n > 0) {
      fn_sum += static_cast<double>(fn_c) / static_cast<double>(fn_n);
      ++s.functions.n;
    }
  }
  for (auto& [k, cell] : s.per_stage) cell.mean = sums[k] / static_cast<double>(cell.n);
  if (s.functions.n) s.functions.mean = fn_sum / static_cast<double>(s.functions.n);
  if (s.overall_no_exclusions.n)
    s.overall_no_exclusions.mean = all_sum / static_cast<double>(s.overall_no_exclusions.n);
  return s;
}

inline void to_json(nlohmann::json& j, const StageResult& s) {
  auto acc = s.accuracy();
  j = {{"stage", s.stage_id},
       {"kind", to_string(s.kind)},
       {"reached", s.reached},
       {"quiz_passed", s.quiz_passed ? nlohmann::json(*s.quiz_passed) : nlohmann::json(nullptr)},
       {"n_scored", s.n_scored},
       {"n_correct", s.n_correct},
       {"accuracy", acc ? nlohmann::json(*acc) : nlohmann::json(nullptr)},
       {"excluded", s.excluded}};
}

inline void to_json(nlohmann::json& j, const ParticipantResult& r) {
  j = {{"participant_id", r.participant_id},
       {"kind", to_string(r.kind)},
       {"stages", r.stages},
       {"catch_missed", r.catch_missed},
       {"complete", r.complete},
       {"excluded", r.excluded},
       {"exclusion_reason", r.exclusion_reason}};
}

inline void to_json(nlohmann::json& j, const MeanCell& c) { j = {{"mean", c.mean}, {"n", c.n}}; }

inline void to_json(nlohmann::json& j, const AggregateSummary& s) {
  j = {{"n_participants", s.n_participants},
       {"n_excluded", s.n_excluded},
       {"per_stage", s.per_stage},
       {"functions", s.functions},
       {"overall_no_exclusions", s.overall_no_exclusions}};
}

}  // namespace fewshot
