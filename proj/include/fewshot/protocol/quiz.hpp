#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fewshot/protocol/spec.hpp"

namespace fewshot {

/// Study-phase memory quiz. Non-primitive study items are covered one at a
/// time; a cycle visits each once. Passes after a cycle with every item
/// correct, fails after kMaxCycles cycles.
class QuizState {
 public:
  static constexpr int kMaxCycles = 3;

  explicit QuizState(const Stage& stage) {
    for (const auto& item : stage.study)
      if (item.instruction.size() > 1) items_.push_back(&item);
    if (items_.empty()) done_ = passed_ = true;
  }

  bool done() const { return done_; }
  bool passed() const { return passed_; }
  /// 1-based; after completion, the number of cycles used.
  int cycle() const { return cycle_; }
  const Item& current() const { return *items_.at(index_); }

  /// Returns whether the attempt was correct.
  bool record(const OutputSeq& response) {
    const bool correct = score_response(current(), response);
    cycle_ok_ = cycle_ok_ && correct;
    if (++index_ == items_.size()) {
      if (cycle_ok_) {
        done_ = passed_ = true;
      } else if (cycle_ == kMaxCycles) {
        done_ = true;
      } else {
        ++cycle_;
        index_ = 0;
        cycle_ok_ = true;
      }
    }
    return correct;
  }

 private:
  std::vector<const Item*> items_;
  std::size_t index_ = 0;
  int cycle_ = 1;
  bool cycle_ok_ = true;
  bool done_ = false;
  bool passed_ = false;
};

struct QuizAttempt {
  std::string item_id;
  OutputSeq response;
  OutputSeq feedback;  // the covered item's answer, always shown after the attempt
  bool correct = false;
  int cycle = 1;
};

struct QuizTranscript {
  std::vector<QuizAttempt> attempts;
  bool passed = false;
  int cycles = 0;
};

using QuizResponder = std::function<OutputSeq(const Item& covered, int cycle)>;

inline QuizTranscript run_quiz(const Stage& stage, const QuizResponder& responder) {
  QuizState quiz(stage);
  QuizTranscript t;
  while (!quiz.done()) {
    const Item& item = quiz.current();
    const int cycle = quiz.cycle();
    auto response = responder(item, cycle);
    const bool correct = quiz.record(response);
    t.attempts.push_back({item.id, std::move(response), *item.target, correct, cycle});
  }
  t.passed = quiz.passed();
  t.cycles = t.attempts.empty() ? 0 : t.attempts.back().cycle;
  return t;
}

}  // namespace fewshot
