#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fewshot/seq2seq/model.hpp"

namespace fewshot::seq2seq {

/// Per-call options for a forward pass.
struct ForwardOptions {
  bool train = false;            // enables dropout
  double teacher_forcing = 1.0;  // probability of feeding the gold previous token
};

/// Probabilities and attention weights of one decoder run, one column per step.
template <typename T>
struct DecodeTrace {
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> probs;      // n_classes x steps
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> attention;  // encoder positions x steps
  std::vector<int> tokens;                                     // argmax classes
};

/// Encoder-decoder LSTM evaluated on a flat parameter vector of scalar type T.
template <typename T>
class Network {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  using MapM = Eigen::Map<Mat>;
  using CMapM = Eigen::Map<const Mat>;

  Network(const ModelConfig& cfg, const Vocab& vocab)
      : cfg_(cfg), vocab_(vocab), layout_(Layout::make(cfg, vocab)) {}

  const Layout& layout() const { return layout_; }
  const ModelConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }

  /// Mean per-position cross-entropy of target (with EOS appended). When grad
  /// is non-null the gradient is accumulated into it. rng drives dropout masks
  /// and the teacher-forcing draw; it may be null when neither is active.
  T loss(const T* theta, const std::vector<int>& input, const std::vector<int>& target,
         const ForwardOptions& opt, Rng* rng, T* grad = nullptr, DecodeTrace<T>* trace = nullptr) {
    check_tokens(input, target);
    forward(theta, input, &target, opt, rng, static_cast<int>(target.size()));
    if (trace) fill_trace(*trace);
    T total = 0;
    for (int t = 0; t < n_dec_; ++t) total -= std::log(probs_(target[t], t));
    const T loss = total / static_cast<T>(n_dec_);
    if (grad) backward(theta, target, grad);
    return loss;
  }

  /// Greedy decoding until EOS or max_len symbols.
  std::vector<int> decode(const T* theta, const std::vector<int>& input, int max_len,
                          DecodeTrace<T>* trace = nullptr) {
    check_tokens(input, {});
    forward(theta, input, nullptr, {}, nullptr, max_len + 1);
    if (trace) fill_trace(*trace);
    std::vector<int> out;
    for (int t = 0; t < std::min(n_dec_, max_len); ++t) {
      if (argmax_[t] == 0) break;
      out.push_back(argmax_[t]);
    }
    return out;
  }

 private:
  struct LayerTrace {
    Mat xh;     // (in + H) x T: dropped input stacked on previous hidden state
    Mat gates;  // 4H x T, post-activation i, f, g, o
    Mat c;      // H x (T + 1), column 0 is the initial state
    Mat h;      // H x (T + 1)
    Mat tc;     // tanh(c), H x T
    Mat mask;   // in x T dropout multipliers on the input
    Mat dz;     // 4H x T
  };

  CMapM block(const T* theta, const Block& b) const { return CMapM(theta + b.offset, b.rows, b.cols); }
  MapM block(T* theta, const Block& b) const { return MapM(theta + b.offset, b.rows, b.cols); }

  void check_tokens(const std::vector<int>& input, const std::vector<int>& target) const {
    if (input.empty() || input.back() != vocab_.eos_input())
      throw Error(Errc::UnknownToken, "input must end with the end marker");
    for (int x : input)
      if (x < 0 || x >= vocab_.n_input()) throw Error(Errc::UnknownToken, "input token out of range");
    for (int y : target)
      if (y < 0 || y >= vocab_.n_classes()) throw Error(Errc::UnknownToken, "target token out of range");
  }

  void fill_mask(Mat& mask, int rows, int cols, bool active, Rng* rng) const {
    mask.setOnes(rows, cols);
    if (!active || cfg_.dropout <= 0.0) return;
    const T keep = static_cast<T>(1.0 / (1.0 - cfg_.dropout));
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) mask(i, j) = bernoulli(*rng, cfg_.dropout) ? T(0) : keep;
  }

  static T sigmoid(T x) { return T(1) / (T(1) + std::exp(-x)); }

  void step(const T* theta, const Block& wb, const Block& bb, LayerTrace& L, int t,
            const Eigen::Ref<const Vec>& x) {
    const int h = cfg_.hidden;
    const int in = static_cast<int>(x.size());
    L.xh.col(t).head(in) = x.cwiseProduct(L.mask.col(t));
    L.xh.col(t).tail(h) = L.h.col(t);
    Vec z = block(theta, wb) * L.xh.col(t) + block(theta, bb);
    auto g = L.gates.col(t);
    for (int i = 0; i < h; ++i) {
      g(i) = sigmoid(z(i));
      g(h + i) = sigmoid(z(h + i));
      g(2 * h + i) = std::tanh(z(2 * h + i));
      g(3 * h + i) = sigmoid(z(3 * h + i));
    }
    L.c.col(t + 1) = g.segment(h, h).cwiseProduct(L.c.col(t)) + g.head(h).cwiseProduct(g.segment(2 * h, h));
    L.tc.col(t) = L.c.col(t + 1).array().tanh().matrix();
    L.h.col(t + 1) = g.segment(3 * h, h).cwiseProduct(L.tc.col(t));
  }

  void reset(LayerTrace& L, int in, int steps) const {
    const int h = cfg_.hidden;
    L.xh.resize(in + h, steps);
    L.gates.resize(4 * h, steps);
    L.c.resize(h, steps + 1);
    L.h.resize(h, steps + 1);
    L.tc.resize(h, steps);
  }

  int layer_input(int k) const { return k == 0 ? cfg_.embedding() : cfg_.hidden; }

  static void softmax(Eigen::Ref<Vec> v) {
    const T m = v.maxCoeff();
    v = (v.array() - m).exp().matrix();
    v /= v.sum();
  }

  void forward(const T* theta, const std::vector<int>& input, const std::vector<int>* target,
               const ForwardOptions& opt, Rng* rng, int max_steps) {
    const int L = cfg_.layers, h = cfg_.hidden;
    const bool drop = opt.train && cfg_.dropout > 0.0;
    forced_ = target != nullptr;
    if (target && opt.teacher_forcing < 1.0) forced_ = bernoulli(*rng, opt.teacher_forcing);
    n_enc_ = static_cast<int>(input.size());
    enc_input_ = input;
    enc_.resize(static_cast<std::size_t>(L));
    dec_.resize(static_cast<std::size_t>(L));

    for (int k = 0; k < L; ++k) {
      auto& E = enc_[static_cast<std::size_t>(k)];
      reset(E, layer_input(k), n_enc_);
      fill_mask(E.mask, layer_input(k), n_enc_, drop, rng);
      E.c.col(0).setZero();
      E.h.col(0).setZero();
    }
    const auto enc_emb = block(theta, layout_.enc_emb);
    for (int t = 0; t < n_enc_; ++t) {
      for (int k = 0; k < L; ++k) {
        auto& E = enc_[static_cast<std::size_t>(k)];
        if (k == 0)
          step(theta, layout_.enc_w[0], layout_.enc_b[0], E, t, enc_emb.col(input[static_cast<std::size_t>(t)]));
        else
          step(theta, layout_.enc_w[k], layout_.enc_b[k], E, t, enc_[k - 1].h.col(t + 1));
      }
    }

    if (cfg_.attention) {
      memory_ = enc_[L - 1].h.middleCols(1, n_enc_);
      keys_ = block(theta, layout_.attn) * memory_;
      alpha_.resize(n_enc_, max_steps);
      ctx_.resize(h, max_steps);
    }
    for (int k = 0; k < L; ++k) {
      auto& D = dec_[static_cast<std::size_t>(k)];
      reset(D, layer_input(k), max_steps);
      fill_mask(D.mask, layer_input(k), max_steps, drop, rng);
      D.c.col(0) = enc_[k].c.col(n_enc_);
      D.h.col(0) = enc_[k].h.col(n_enc_);
    }
    dec_in_.assign(static_cast<std::size_t>(max_steps), vocab_.sos());
    argmax_.assign(static_cast<std::size_t>(max_steps), 0);
    probs_.resize(vocab_.n_classes(), max_steps);

    const auto dec_emb = block(theta, layout_.dec_emb);
    const auto out_w = block(theta, layout_.out_w);
    const auto out_b = block(theta, layout_.out_b);
    n_dec_ = max_steps;
    for (int t = 0; t < max_steps; ++t) {
      if (t > 0) dec_in_[t] = forced_ ? (*target)[t - 1] : argmax_[t - 1];
      for (int k = 0; k < L; ++k) {
        auto& D = dec_[static_cast<std::size_t>(k)];
        if (k == 0)
          step(theta, layout_.dec_w[0], layout_.dec_b[0], D, t, dec_emb.col(dec_in_[t]));
        else
          step(theta, layout_.dec_w[k], layout_.dec_b[k], D, t, dec_[k - 1].h.col(t + 1));
      }
      auto top = dec_[L - 1].h.col(t + 1);
      Vec logits = out_w.leftCols(h) * top + out_b;
      if (cfg_.attention) {
        Vec a = keys_.transpose() * top;
        softmax(a);
        alpha_.col(t) = a;
        ctx_.col(t) = memory_ * a;
        logits += out_w.rightCols(h) * ctx_.col(t);
      }
      softmax(logits);
      probs_.col(t) = logits;
      probs_.col(t).maxCoeff(&argmax_[t]);
      if (!target && argmax_[t] == 0) {
        n_dec_ = t + 1;
        break;
      }
    }
  }

  void fill_trace(DecodeTrace<T>& tr) const {
    tr.probs = probs_.leftCols(n_dec_);
    tr.attention = cfg_.attention ? Mat(alpha_.leftCols(n_dec_)) : Mat();
    tr.tokens.assign(argmax_.begin(), argmax_.begin() + n_dec_);
  }

  /// Backpropagation through one layer over all steps. dh holds the gradient
  /// arriving at each output h from above; dh0/dc0 carry the gradient of the
  /// final state in and the initial state out.
  void backward_layer(const T* theta, T* grad, const Block& wb, const Block& bb, LayerTrace& L, int steps,
                      const Mat& dh, Vec& dh_carry, Vec& dc_carry) {
    const int h = cfg_.hidden;
    const auto W = block(theta, wb);
    const int in = W.cols() - h;
    L.dz.resize(4 * h, steps);
    for (int t = steps - 1; t >= 0; --t) {
      const auto g = L.gates.col(t);
      const auto i = g.head(h).array(), f = g.segment(h, h).array(), gg = g.segment(2 * h, h).array(),
                 o = g.segment(3 * h, h).array();
      const auto tc = L.tc.col(t).array();
      const Vec dht = dh.col(t) + dh_carry;
      const Vec dc = (dc_carry.array() + dht.array() * o * (T(1) - tc * tc)).matrix();
      auto dz = L.dz.col(t);
      dz.head(h) = (dc.array() * gg * i * (T(1) - i)).matrix();
      dz.segment(h, h) = (dc.array() * L.c.col(t).array() * f * (T(1) - f)).matrix();
      dz.segment(2 * h, h) = (dc.array() * i * (T(1) - gg * gg)).matrix();
      dz.tail(h) = (dht.array() * tc * o * (T(1) - o)).matrix();
      dc_carry = (dc.array() * f).matrix();
      dh_carry.noalias() = W.rightCols(h).transpose() * dz;
    }
    auto dW = block(grad, wb);
    dW.noalias() += L.dz.leftCols(steps) * L.xh.leftCols(steps).transpose();
    block(grad, bb) += L.dz.leftCols(steps).rowwise().sum();
    dx_.noalias() = W.leftCols(in).transpose() * L.dz.leftCols(steps);
    dx_.array() *= L.mask.leftCols(steps).array();
  }

  void backward(const T* theta, const std::vector<int>& target, T* grad) {
    const int L = cfg_.layers, h = cfg_.hidden, steps = n_dec_;
    const T scale = T(1) / static_cast<T>(steps);
    Mat dlogits = probs_.leftCols(steps);
    for (int t = 0; t < steps; ++t) dlogits(target[t], t) -= T(1);
    dlogits *= scale;

    const auto out_w = block(theta, layout_.out_w);
    auto g_out_w = block(grad, layout_.out_w);
    const auto top = dec_[L - 1].h.middleCols(1, steps);
    g_out_w.leftCols(h).noalias() += dlogits * top.transpose();
    block(grad, layout_.out_b) += dlogits.rowwise().sum();
    Mat dh = out_w.leftCols(h).transpose() * dlogits;

    Mat dmemory;
    if (cfg_.attention) {
      const auto ctx = ctx_.leftCols(steps);
      const auto alpha = alpha_.leftCols(steps);
      g_out_w.rightCols(h).noalias() += dlogits * ctx.transpose();
      const Mat dctx = out_w.rightCols(h).transpose() * dlogits;
      dmemory = dctx * alpha.transpose();
      Mat dalpha = memory_.transpose() * dctx;  // positions x steps
      for (int t = 0; t < steps; ++t) {
        const T dot = alpha.col(t).dot(dalpha.col(t));
        dalpha.col(t) = (alpha.col(t).array() * (dalpha.col(t).array() - dot)).matrix();
      }
      // scores = keys^T h with keys = A * memory
      dh.noalias() += keys_ * dalpha;
      const Mat dkeys = top * dalpha.transpose();
      block(grad, layout_.attn).noalias() += dkeys * memory_.transpose();
      dmemory.noalias() += block(theta, layout_.attn).transpose() * dkeys;
    } else {
      dmemory.setZero(h, n_enc_);
    }

    std::vector<Vec> dh_init(static_cast<std::size_t>(L)), dc_init(static_cast<std::size_t>(L));
    for (int k = L - 1; k >= 0; --k) {
      Vec dhc = Vec::Zero(h), dcc = Vec::Zero(h);
      backward_layer(theta, grad, layout_.dec_w[k], layout_.dec_b[k], dec_[k], steps, dh, dhc, dcc);
      dh_init[k] = dhc;
      dc_init[k] = dcc;
      if (k > 0) {
        dh = dx_;
      } else {
        auto g_emb = block(grad, layout_.dec_emb);
        for (int t = 0; t < steps; ++t) g_emb.col(dec_in_[t]) += dx_.col(t);
      }
    }

    dh = dmemory;
    for (int k = L - 1; k >= 0; --k) {
      Vec dhc = dh_init[k], dcc = dc_init[k];
      backward_layer(theta, grad, layout_.enc_w[k], layout_.enc_b[k], enc_[k], n_enc_, dh, dhc, dcc);
      if (k > 0) {
        dh = dx_;
      } else {
        auto g_emb = block(grad, layout_.enc_emb);
        for (int t = 0; t < n_enc_; ++t) g_emb.col(enc_input_[static_cast<std::size_t>(t)]) += dx_.col(t);
      }
    }
  }

 private:
  ModelConfig cfg_;
  Vocab vocab_;
  Layout layout_;
  std::vector<LayerTrace> enc_, dec_;
  std::vector<int> enc_input_, dec_in_;
  std::vector<Eigen::Index> argmax_;
  Mat memory_, keys_, alpha_, ctx_, probs_, dx_;
  int n_enc_ = 0, n_dec_ = 0;
  bool forced_ = true;
};

}  // namespace fewshot::seq2seq
