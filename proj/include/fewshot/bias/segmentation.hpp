#pragma once

// Search for a word-level explanation of free-form responses: each word gets
// one nonempty output subsequence and every response must be the in-order
// concatenation of its words' subsequences.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "fewshot/grammar/types.hpp"

namespace fewshot {

struct SegmentationModel {
  std::map<std::string, OutputSeq> assignment;

  /// Re-concatenates and compares.
  bool explains(const std::map<Instruction, OutputSeq>& responses) const {
    for (const auto& [instr, resp] : responses) {
      OutputSeq out;
      for (const auto& w : instr.words()) {
        auto it = assignment.find(w);
        if (it == assignment.end()) return false;
        out.insert(out.end(), it->second.begin(), it->second.end());
      }
      if (out != resp) return false;
    }
    return true;
  }

  std::size_t total_length() const {
    std::size_t n = 0;
    for (const auto& [w, s] : assignment) n += s.size();
    return n;
  }

  friend bool operator==(const SegmentationModel&, const SegmentationModel&) = default;
};

namespace detail {

class SegmentationSearch {
 public:
  explicit SegmentationSearch(const std::map<Instruction, OutputSeq>& responses) {
    for (const auto& [i, r] : responses) items_.push_back({&i.words(), &r});
    // short instructions first: single words pin assignments early
    std::stable_sort(items_.begin(), items_.end(),
                     [](const auto& a, const auto& b) { return a.words->size() < b.words->size(); });
  }

  std::optional<SegmentationModel> run() {
    solve(0, 0, 0);
    return best_;
  }

 private:
  struct Entry {
    const std::vector<std::string>* words;
    const OutputSeq* response;
  };

  // Returns whether any complete model extends the current state.
  bool solve(std::size_t item, std::size_t word, std::size_t pos) {
    if (item == items_.size()) {
      offer();
      return true;
    }
    const auto& words = *items_[item].words;
    const auto& resp = *items_[item].response;
    if (word == words.size()) return pos == resp.size() && solve(item + 1, 0, 0);

    const std::string key = state_key(item, word, pos);
    if (dead_.count(key)) return false;

    bool any = false;
    const std::string& w = words[word];
    if (auto it = current_.find(w); it != current_.end()) {
      const OutputSeq& seg = it->second;
      if (pos + seg.size() <= resp.size() &&
          std::equal(seg.begin(), seg.end(), resp.begin() + static_cast<std::ptrdiff_t>(pos)))
        any = solve(item, word + 1, pos + seg.size());
    } else {
      // every later word still needs at least one symbol
      const std::size_t later = words.size() - word - 1;
      for (std::size_t len = 1; pos + len + later <= resp.size(); ++len) {
        current_[w] = OutputSeq(resp.begin() + static_cast<std::ptrdiff_t>(pos),
                                resp.begin() + static_cast<std::ptrdiff_t>(pos + len));
        any = solve(item, word + 1, pos + len) || any;
        current_.erase(w);
      }
    }
    if (!any) dead_.insert(key);
    return any;
  }

  std::string state_key(std::size_t item, std::size_t word, std::size_t pos) const {
    std::string k = std::to_string(item) + ':' + std::to_string(word) + ':' + std::to_string(pos);
    for (const auto& [w, s] : current_) {
      k += '|' + w + '=';
      for (auto c : s) k += static_cast<char>('0' + c.id());
    }
    return k;
  }

  // Minimal total length; ties go to the lexicographically smallest
  // assignment in alphabetical word order.
  void offer() {
    SegmentationModel m{current_};
    if (!best_) {
      best_ = std::move(m);
      return;
    }
    const auto a = m.total_length(), b = best_->total_length();
    if (a < b || (a == b && m.assignment < best_->assignment)) best_ = std::move(m);
  }

  std::vector<Entry> items_;
  std::map<std::string, OutputSeq> current_;
  std::unordered_set<std::string> dead_;
  std::optional<SegmentationModel> best_;
};

}  // namespace detail

/// Empty result means no consistent segmentation exists.
inline std::optional<SegmentationModel> infer_segmentation(
    const std::map<Instruction, OutputSeq>& responses) {
  if (responses.empty()) return std::nullopt;
  for (const auto& [i, r] : responses)
    if (r.size() < i.size()) return std::nullopt;
  return detail::SegmentationSearch(responses).run();
}

/// Mutual exclusivity on a word model: all assigned subsequences distinct.
inline bool check_me_on_model(const SegmentationModel& model) {
  std::set<OutputSeq> seen;
  for (const auto& [w, s] : model.assignment)
    if (!seen.insert(s).second) return false;
  return true;
}

}  // namespace fewshot
