#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fewshot/protocol/generate.hpp"
#include "fewshot/protocol/spec.hpp"
#include "fewshot/seq2seq/model.hpp"
#include "fewshot/seq2seq/network.hpp"

namespace fewshot::seq2seq {

struct TrainConfig {
  int presentations = 10000;
  int batch_size = 1;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  double teacher_forcing = 0.5;
  std::uint64_t seed = 0;
  bool single_precision = true;  // train in float, store in double
  int loss_every = 100;          // one loss-trace entry per this many presentations

  void validate() const {
    if (presentations < 0) throw Error(Errc::InvalidConfig, "presentations must be nonnegative");
    if (batch_size < 1) throw Error(Errc::InvalidConfig, "batch_size must be positive");
    if (!(learning_rate > 0)) throw Error(Errc::InvalidConfig, "learning_rate must be positive");
    if (!(clip_norm > 0)) throw Error(Errc::InvalidConfig, "clip_norm must be positive");
    if (!(teacher_forcing >= 0 && teacher_forcing <= 1))
      throw Error(Errc::InvalidConfig, "teacher_forcing must be in [0, 1]");
    if (loss_every < 1) throw Error(Errc::InvalidConfig, "loss_every must be positive");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"presentations", c.presentations}, {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate}, {"clip_norm", c.clip_norm},
       {"teacher_forcing", c.teacher_forcing}, {"seed", c.seed},
       {"single_precision", c.single_precision}, {"loss_every", c.loss_every}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  c.presentations = j.value("presentations", c.presentations);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.teacher_forcing = j.value("teacher_forcing", c.teacher_forcing);
  c.seed = j.value("seed", c.seed);
  c.single_precision = j.value("single_precision", c.single_precision);
  c.loss_every = j.value("loss_every", c.loss_every);
  c.validate();
}

struct Example {
  std::vector<int> input;
  std::vector<int> target;
};

inline std::vector<Example> make_examples(const Vocab& v, std::span<const Item> items) {
  std::vector<Example> out;
  for (const auto& it : items) {
    if (!it.target) throw Error(Errc::NoTarget, "training item " + it.id + " has no target");
    out.push_back({v.encode_input(it.instruction), v.encode_target(*it.target)});
  }
  return out;
}

/// Rescales g[0..n) in place so its L2 norm is at most max_norm; returns the
/// norm before clipping. The sum runs in index order in double, so the result
/// does not depend on how the buffer happens to be aligned.
template <typename T>
double clip_global_norm(T* g, std::size_t n, double max_norm) {
  double sq = 0;
  for (std::size_t i = 0; i < n; ++i) sq += static_cast<double>(g[i]) * static_cast<double>(g[i]);
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (std::size_t i = 0; i < n; ++i) g[i] *= scale;
  }
  return norm;
}

template <typename T>
double clip_global_norm(std::vector<T>& g, double max_norm) {
  return clip_global_norm(g.data(), g.size(), max_norm);
}

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_trace;  // mean training loss per window of loss_every presentations
};

namespace detail {

template <typename T>
TrainResult train_impl(const ModelParams& init, std::span<const Example> data, const TrainConfig& tc) {
  using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  const auto n = static_cast<Eigen::Index>(init.theta.size());
  VecT theta = Eigen::Map<const Eigen::VectorXd>(init.theta.data(), n).cast<T>();
  // Eigen storage keeps every buffer's alignment fixed; vectorized kernels
  // would otherwise round differently from run to run
  VecT g = VecT::Zero(n), m = VecT::Zero(n), v = VecT::Zero(n);
  Network<T> net(init.config, init.vocab);
  Rng rng(tc.seed);
  const ForwardOptions opt{true, tc.teacher_forcing};
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double b1t = 1, b2t = 1;

  TrainResult res;
  double window = 0;
  int in_window = 0;
  int done = 0;
  while (done < tc.presentations) {
    g.setZero();
    const int batch = std::min(tc.batch_size, tc.presentations - done);
    double batch_loss = 0;
    for (int b = 0; b < batch; ++b) {
      const auto& ex = data[uniform_index(rng, data.size())];
      const double l = static_cast<double>(net.loss(theta.data(), ex.input, ex.target, opt, &rng, g.data()));
      if (!std::isfinite(l)) throw Error(Errc::Divergence, "non-finite training loss");
      batch_loss += l;
    }
    if (batch > 1) g /= static_cast<T>(batch);
    clip_global_norm(g.data(), g.size(), tc.clip_norm);

    b1t *= b1;
    b2t *= b2;
    m = T(b1) * m + T(1 - b1) * g;
    v = T(b2) * v + T(1 - b2) * g.cwiseAbs2();
    const T step = static_cast<T>(tc.learning_rate * std::sqrt(1 - b2t) / (1 - b1t));
    theta.array() -= step * m.array() / (v.array().sqrt() + T(eps * std::sqrt(1 - b2t)));

    for (int b = 0; b < batch; ++b) {
      window += batch_loss / batch;
      if (++in_window == tc.loss_every) {
        res.loss_trace.push_back(window / in_window);
        window = 0;
        in_window = 0;
      }
    }
    done += batch;
  }
  res.params = init;
  for (Eigen::Index i = 0; i < n; ++i) res.params.theta[static_cast<std::size_t>(i)] = static_cast<double>(theta[i]);
  return res;
}

}  // namespace detail

/// Single-example (or mini-batch) Adam updates with global-norm clipping.
/// Items are sampled uniformly with replacement; deterministic per tc.seed.
inline TrainResult train(const ModelParams& init, std::span<const Item> items, const TrainConfig& tc) {
  tc.validate();
  if (items.empty()) throw Error(Errc::EmptyInput, "no training items");
  const auto data = make_examples(init.vocab, items);
  if (tc.presentations == 0) return {init, {}};
  return tc.single_precision ? detail::train_impl<float>(init, data, tc)
                             : detail::train_impl<double>(init, data, tc);
}

namespace detail {

inline OutputSeq decode_with(Network<double>& net, const Eigen::VectorXd& theta, const Vocab& vocab,
                             const Instruction& instr, int max_len) {
  OutputSeq out;
  for (int cls : net.decode(theta.data(), vocab.encode_input(instr), max_len)) out.push_back(vocab.color_of(cls));
  return out;
}

inline Eigen::VectorXd aligned_copy(const std::vector<double>& theta) {
  return Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
}

}  // namespace detail

inline OutputSeq decode_greedy(const ModelParams& p, const Instruction& instr, int max_len = 20) {
  Network<double> net(p.config, p.vocab);
  return detail::decode_with(net, detail::aligned_copy(p.theta), p.vocab, instr, max_len);
}

/// Exact-match accuracy with the same scoring rule applied to people.
inline double exact_match(const ModelParams& p, std::span<const Item> items) {
  if (items.empty()) throw Error(Errc::EmptyInput, "no evaluation items");
  Network<double> net(p.config, p.vocab);
  const auto theta = detail::aligned_copy(p.theta);
  int correct = 0;
  for (const auto& it : items)
    correct += score_response(it, detail::decode_with(net, theta, p.vocab, it.instruction, 20)) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

/// Training and generalization items of the curriculum: the final stage's study
/// items and every non-catch test item.
struct GeneralizationSplit {
  Vocab vocab;
  std::vector<Item> train, test;
};

inline GeneralizationSplit generalization_split(const ExperimentSpec& spec) {
  GeneralizationSplit s{Vocab::from_spec(spec), spec.stages.back().study, {}};
  for (const auto& st : spec.stages)
    for (const auto& it : st.test)
      if (!it.is_catch) s.test.push_back(it);
  return s;
}

struct Architecture {
  std::string name;
  ModelConfig config;
};

/// The two reported configurations, each halved down to three units per layer.
inline std::vector<Architecture> default_architectures() {
  std::vector<Architecture> out;
  for (auto [name, base] : {std::pair{"lstm2", ModelConfig::large()}, std::pair{"lstm1_attn", ModelConfig::with_attention()}}) {
    for (int h = base.hidden;; h = std::max(3, h / 2)) {
      auto c = base;
      c.hidden = h;
      out.push_back({name, c});
      if (h == 3) break;
    }
  }
  return out;
}

struct RunResult {
  std::string architecture;
  int hidden = 0;
  std::uint64_t seed = 0;
  double train_acc = 0;
  double test_acc = 0;
  double final_loss = 0;
};

inline RunResult run_one(const GeneralizationSplit& split, const Architecture& arch, std::uint64_t seed,
                         TrainConfig tc) {
  tc.seed = mix_seed(seed, 1);
  const auto init = init_model(arch.config, split.vocab, mix_seed(seed, 0));
  const auto res = train(init, split.train, tc);
  return {arch.name,
          arch.config.hidden,
          seed,
          exact_match(res.params, split.train),
          exact_match(res.params, split.test),
          res.loss_trace.empty() ? 0.0 : res.loss_trace.back()};
}

/// One row per (architecture, seed), ordered by architecture then seed.
inline std::vector<RunResult> run_generalization_experiment(const ExperimentSpec& spec,
                                                            std::span<const Architecture> archs,
                                                            int n_seeds = 5, const TrainConfig& tc = {}) {
  const auto split = generalization_split(spec);
  std::vector<RunResult> out;
  for (const auto& a : archs)
    for (int s = 0; s < n_seeds; ++s) out.push_back(run_one(split, a, static_cast<std::uint64_t>(s), tc));
  return out;
}

struct ArchitectureSummary {
  std::string architecture;
  int hidden = 0;
  int n_seeds = 0;
  double mean_train_acc = 0;
  double mean_test_acc = 0;
};

inline std::vector<ArchitectureSummary> summarize(std::span<const RunResult> rows) {
  std::vector<ArchitectureSummary> out;
  for (const auto& r : rows) {
    if (out.empty() || out.back().architecture != r.architecture || out.back().hidden != r.hidden)
      out.push_back({r.architecture, r.hidden, 0, 0, 0});
    auto& s = out.back();
    s.mean_train_acc = (s.mean_train_acc * s.n_seeds + r.train_acc) / (s.n_seeds + 1);
    s.mean_test_acc = (s.mean_test_acc * s.n_seeds + r.test_acc) / (s.n_seeds + 1);
    ++s.n_seeds;
  }
  return out;
}

inline std::string sweep_csv(std::span<const RunResult> rows) {
  std::ostringstream os;
  os.precision(6);
  os << "architecture,hidden,seed,train_acc,test_acc\n";
  for (const auto& r : rows)
    os << r.architecture << ',' << r.hidden << ',' << r.seed << ',' << r.train_acc << ',' << r.test_acc << '\n';
  return os.str();
}

}  // namespace fewshot::seq2seq
