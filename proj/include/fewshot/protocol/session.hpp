#pragma once

// Sessions are event-sourced: the ordered response log plus the experiment
// spec (regenerated from kind and seed) determines everything else,
// including quiz cycling and the currently pending item.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fewshot/protocol/generate.hpp"
#include "fewshot/protocol/quiz.hpp"
#include "fewshot/protocol/spec.hpp"

namespace fewshot {

enum class Phase { Instructions, Quiz, Test };

constexpr std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Instructions: return "instructions";
    case Phase::Quiz: return "study-quiz";
    case Phase::Test: return "test";
  }
  return "?";
}

inline Phase parse_phase(std::string_view s) {
  if (s == "instructions") return Phase::Instructions;
  if (s == "study-quiz") return Phase::Quiz;
  if (s == "test") return Phase::Test;
  throw Error(Errc::Format, "unknown phase: " + std::string(s));
}

struct ResponseRecord {
  std::string item_id;
  OutputSeq response;
  Phase phase = Phase::Test;
  int cycle = 1;
  std::int64_t timestamp = 0;  // ms; logical clock for simulated sessions

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

struct Session {
  std::string participant_id;
  ExperimentKind kind = ExperimentKind::Exp1;
  std::uint64_t seed = 0;
  std::vector<ResponseRecord> records;
  /// Post-test survey answer (free-form experiment exclusion).
  bool external_aid = false;

  ExperimentSpec spec() const { return generate_experiment(kind, seed); }

  friend bool operator==(const Session&, const Session&) = default;
};

struct PendingStep {
  Phase phase = Phase::Test;
  std::optional<std::size_t> stage_index;  // empty for the practice gate
  const Item* item = nullptr;
  int cycle = 1;
};

struct StageTrace {
  bool reached = false;
  bool completed = false;
  std::optional<bool> quiz_passed;  // empty when the stage has no quiz
  int quiz_cycles = 0;
  std::map<std::string, OutputSeq> test_responses;
};

struct Replay {
  std::optional<PendingStep> pending;  // empty once the session is complete
  bool practice_passed = false;
  std::vector<StageTrace> stages;

  bool done() const { return !pending.has_value(); }
};

/// Walks the curriculum against the log. Throws Error{OutOfOrder} when a
/// record does not answer the item that was pending at that point.
inline Replay replay(const ExperimentSpec& spec, std::span<const ResponseRecord> records) {
  Replay r;
  r.stages.resize(spec.stages.size());
  std::size_t pos = 0;

  auto expect = [&](const Item& item, Phase phase, int cycle,
                    std::optional<std::size_t> stage) -> const ResponseRecord* {
    if (pos == records.size()) {
      r.pending = PendingStep{phase, stage, &item, cycle};
      return nullptr;
    }
    const auto& rec = records[pos];
    if (rec.item_id != item.id || rec.phase != phase)
      throw Error(Errc::OutOfOrder, "record " + std::to_string(pos) + " answers '" + rec.item_id +
                                        "' but '" + item.id + "' was pending");
    ++pos;
    return &rec;
  };

  for (int attempt = 1;; ++attempt) {
    const auto* rec = expect(spec.practice, Phase::Instructions, attempt, std::nullopt);
    if (!rec) return r;
    if (rec->response == *spec.practice.target) break;
  }
  r.practice_passed = true;

  for (std::size_t si = 0; si < spec.stages.size(); ++si) {
    const Stage& stage = spec.stages[si];
    StageTrace& trace = r.stages[si];
    trace.reached = true;
    if (stage.has_quiz) {
      QuizState quiz(stage);
      while (!quiz.done()) {
        const auto* rec = expect(quiz.current(), Phase::Quiz, quiz.cycle(), si);
        if (!rec) return r;
        quiz.record(rec->response);
      }
      trace.quiz_passed = quiz.passed();
      trace.quiz_cycles = quiz.cycle();
    }
    for (const auto& item : stage.test) {
      const auto* rec = expect(item, Phase::Test, 1, si);
      if (!rec) return r;
      trace.test_responses[item.id] = rec->response;
    }
    trace.completed = true;
  }
  if (pos != records.size())
    throw Error(Errc::OutOfOrder, "records after the end of the experiment");
  return r;
}

using StepResponder = std::function<OutputSeq(const PendingStep&)>;

/// Drives a complete session through the curriculum, asking the responder
/// for every pending item. Timestamps are a logical clock (record index).
inline Session run_session(const ExperimentSpec& spec, std::string participant_id,
                           const StepResponder& responder) {
  Session s;
  s.participant_id = std::move(participant_id);
  s.kind = spec.kind;
  s.seed = spec.seed;
  while (true) {
    const Replay r = replay(spec, s.records);
    if (r.done()) break;
    const PendingStep& step = *r.pending;
    s.records.push_back({step.item->id, responder(step), step.phase, step.cycle,
                         static_cast<std::int64_t>(s.records.size())});
  }
  return s;
}

// ---- JSON -----------------------------------------------------------------

inline constexpr const char* kSessionSchema = "fewshot.session/1";

inline void to_json(nlohmann::json& j, const ResponseRecord& r) {
  j = {{"item_id", r.item_id},
       {"response", r.response},
       {"phase", to_string(r.phase)},
       {"cycle", r.cycle},
       {"t", r.timestamp}};
}

inline void from_json(const nlohmann::json& j, ResponseRecord& r) {
  r.item_id = j.at("item_id").get<std::string>();
  r.response = j.at("response").get<OutputSeq>();
  r.phase = parse_phase(j.at("phase").get<std::string>());
  r.cycle = j.at("cycle").get<int>();
  r.timestamp = j.at("t").get<std::int64_t>();
}

inline void to_json(nlohmann::json& j, const Session& s) {
  j = {{"schema", kSessionSchema},
       {"participant_id", s.participant_id},
       {"kind", to_string(s.kind)},
       {"seed", s.seed},
       {"external_aid", s.external_aid},
       {"records", s.records}};
}

inline void from_json(const nlohmann::json& j, Session& s) {
  if (j.at("schema") != kSessionSchema)
    throw Error(Errc::Format, "unsupported session schema " + j.at("schema").dump());
  s.participant_id = j.at("participant_id").get<std::string>();
  s.kind = parse_experiment_kind(j.at("kind").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
  s.external_aid = j.value("external_aid", false);
  s.records = j.at("records").get<std::vector<ResponseRecord>>();
  for (std::size_t i = 1; i < s.records.size(); ++i)
    if (s.records[i].timestamp < s.records[i - 1].timestamp)
      throw Error(Errc::Format, "timestamps decrease in session " + s.participant_id);
}

/// Sessions file: one session JSON document per line.
inline std::string write_sessions_jsonl(std::span<const Session> sessions) {
  std::string out;
  for (const auto& s : sessions) out += nlohmann::json(s).dump() + "\n";
  return out;
}

inline std::vector<Session> read_sessions_jsonl(std::string_view text) {
  std::vector<Session> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos)
      out.push_back(nlohmann::json::parse(line).get<Session>());
    start = end + 1;
  }
  return out;
}

}  // namespace fewshot
