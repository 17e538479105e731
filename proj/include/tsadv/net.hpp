#pragma once

// Differentiable 1D residual convolutional classifier.
//
// Architecture: num_blocks residual blocks (three same-padded stride-1 conv
// layers each, ReLU between them; an optional shortcut is added before the
// block's final ReLU), global average pooling over time, dense layer,
// softmax. With num_blocks == 0 the model degenerates to GAP over the raw
// input followed by the dense softmax layer.
//
// Gradients are exact reverse-mode, with respect to the input (attacks) and
// with respect to the parameters (training). Everything is double precision
// and allocation order is fixed, so results are reproducible bit-for-bit on
// a given platform.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsadv/dataset.hpp"
#include "tsadv/parallel.hpp"
#include "tsadv/rng.hpp"

namespace tsadv {

struct ClassifierConfig {
  int num_blocks = 3;
  std::vector<int> channels_per_block = {16, 32, 32};
  std::array<int, 3> kernel_sizes = {8, 5, 3};  // the three conv layers of every block
  bool residual = true;
  int num_classes = 3;
  int series_length = 64;
  std::uint64_t init_seed = 0;
};

inline void validate_config(const ClassifierConfig& cfg) {
  if (cfg.num_blocks < 0) throw std::invalid_argument("ClassifierConfig: num_blocks must be >= 0");
  if (static_cast<int>(cfg.channels_per_block.size()) != cfg.num_blocks)
    throw std::invalid_argument("ClassifierConfig: channels_per_block must have num_blocks entries");
  for (int c : cfg.channels_per_block)
    if (c < 1) throw std::invalid_argument("ClassifierConfig: channel counts must be positive");
  for (int k : cfg.kernel_sizes)
    if (k < 1) throw std::invalid_argument("ClassifierConfig: kernel sizes must be positive");
  if (cfg.num_classes < 2) throw std::invalid_argument("ClassifierConfig: num_classes must be >= 2");
  if (cfg.series_length < 1) throw std::invalid_argument("ClassifierConfig: series_length must be positive");
}

namespace detail {

struct ConvRef {
  int in_ch = 0, out_ch = 0, kernel = 0;
  std::size_t w_off = 0, b_off = 0;
  std::size_t w_size() const {
    return static_cast<std::size_t>(out_ch) * static_cast<std::size_t>(in_ch) * static_cast<std::size_t>(kernel);
  }
};

struct BlockRef {
  std::array<ConvRef, 3> conv;
  bool has_shortcut = false;  // 1x1 conv when channel counts differ, identity otherwise
  ConvRef shortcut;
  int in_ch = 0, out_ch = 0;
};

struct DenseRef {
  int in_dim = 0, out_dim = 0;
  std::size_t w_off = 0, b_off = 0;
};

// --- convolution kernels (same padding, stride 1, channel-major rows) ---

inline void conv1d_forward(const double* w, const double* b, int in_ch, int out_ch, int k, int T,
                           const double* in, double* out) {
  const int pad_left = (k - 1) / 2;
  for (int oc = 0; oc < out_ch; ++oc) {
    double* orow = out + static_cast<std::size_t>(oc) * T;
    for (int t = 0; t < T; ++t) orow[t] = b[oc];
    for (int ic = 0; ic < in_ch; ++ic) {
      const double* irow = in + static_cast<std::size_t>(ic) * T;
      const double* wk = w + (static_cast<std::size_t>(oc) * in_ch + ic) * k;
      for (int kk = 0; kk < k; ++kk) {
        const double wv = wk[kk];
        const int shift = kk - pad_left;
        const int t0 = shift < 0 ? -shift : 0;
        const int t1 = shift > 0 ? T - shift : T;
        const double* ip = irow + shift;
        for (int t = t0; t < t1; ++t) orow[t] += wv * ip[t];
      }
    }
  }
}

// Accumulates into din (caller zeroes).
inline void conv1d_backward_input(const double* w, int in_ch, int out_ch, int k, int T,
                                  const double* dout, double* din) {
  const int pad_left = (k - 1) / 2;
  for (int oc = 0; oc < out_ch; ++oc) {
    const double* dorow = dout + static_cast<std::size_t>(oc) * T;
    for (int ic = 0; ic < in_ch; ++ic) {
      double* dirow = din + static_cast<std::size_t>(ic) * T;
      const double* wk = w + (static_cast<std::size_t>(oc) * in_ch + ic) * k;
      for (int kk = 0; kk < k; ++kk) {
        const double wv = wk[kk];
        const int shift = kk - pad_left;
        const int t0 = shift < 0 ? -shift : 0;
        const int t1 = shift > 0 ? T - shift : T;
        double* dp = dirow + shift;
        for (int t = t0; t < t1; ++t) dp[t] += wv * dorow[t];
      }
    }
  }
}

// Accumulates into dw/db (caller zeroes once per batch member).
inline void conv1d_backward_params(const double* in, int in_ch, int out_ch, int k, int T,
                                   const double* dout, double* dw, double* db) {
  const int pad_left = (k - 1) / 2;
  for (int oc = 0; oc < out_ch; ++oc) {
    const double* dorow = dout + static_cast<std::size_t>(oc) * T;
    double bsum = 0.0;
    for (int t = 0; t < T; ++t) bsum += dorow[t];
    db[oc] += bsum;
    for (int ic = 0; ic < in_ch; ++ic) {
      const double* irow = in + static_cast<std::size_t>(ic) * T;
      double* dwk = dw + (static_cast<std::size_t>(oc) * in_ch + ic) * k;
      for (int kk = 0; kk < k; ++kk) {
        const int shift = kk - pad_left;
        const int t0 = shift < 0 ? -shift : 0;
        const int t1 = shift > 0 ? T - shift : T;
        const double* ip = irow + shift;
        double s = 0.0;
        for (int t = t0; t < t1; ++t) s += dorow[t] * ip[t];
        dwk[kk] += s;
      }
    }
  }
}

}  // namespace detail

struct TensorInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

class Classifier {
 public:
  Classifier() = default;

  explicit Classifier(ClassifierConfig cfg) : cfg_(std::move(cfg)) {
    validate_config(cfg_);
    build_layout();
    params_.assign(total_params_, 0.0);
  }

  const ClassifierConfig& config() const { return cfg_; }
  const std::vector<double>& parameters() const { return params_; }
  std::vector<double>& mutable_parameters() { return params_; }
  std::size_t parameter_count() const { return total_params_; }
  const std::vector<TensorInfo>& tensors() const { return tensor_index_; }

  const std::vector<detail::BlockRef>& blocks() const { return blocks_; }
  const detail::DenseRef& dense() const { return dense_; }

  int gap_channels() const { return cfg_.num_blocks > 0 ? cfg_.channels_per_block.back() : 1; }

 private:
  void add_tensor(const std::string& name, std::vector<int> shape, std::size_t& cursor, std::size_t* off) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    tensor_index_.push_back({name, std::move(shape), cursor, n});
    *off = cursor;
    cursor += n;
  }

  void build_layout() {
    std::size_t cursor = 0;
    blocks_.resize(cfg_.num_blocks);
    int in_ch = 1;
    for (int b = 0; b < cfg_.num_blocks; ++b) {
      auto& blk = blocks_[b];
      blk.in_ch = in_ch;
      blk.out_ch = cfg_.channels_per_block[b];
      const std::string prefix = "block" + std::to_string(b) + ".";
      for (int j = 0; j < 3; ++j) {
        auto& cv = blk.conv[j];
        cv.in_ch = (j == 0) ? in_ch : blk.out_ch;
        cv.out_ch = blk.out_ch;
        cv.kernel = cfg_.kernel_sizes[j];
        add_tensor(prefix + "conv" + std::to_string(j) + ".weight", {cv.out_ch, cv.in_ch, cv.kernel}, cursor,
                   &cv.w_off);
        add_tensor(prefix + "conv" + std::to_string(j) + ".bias", {cv.out_ch}, cursor, &cv.b_off);
      }
      blk.has_shortcut = cfg_.residual && (blk.in_ch != blk.out_ch);
      if (blk.has_shortcut) {
        auto& sc = blk.shortcut;
        sc.in_ch = blk.in_ch;
        sc.out_ch = blk.out_ch;
        sc.kernel = 1;
        add_tensor(prefix + "shortcut.weight", {sc.out_ch, sc.in_ch, 1}, cursor, &sc.w_off);
        add_tensor(prefix + "shortcut.bias", {sc.out_ch}, cursor, &sc.b_off);
      }
      in_ch = blk.out_ch;
    }
    dense_.in_dim = gap_channels();
    dense_.out_dim = cfg_.num_classes;
    add_tensor("dense.weight", {dense_.out_dim, dense_.in_dim}, cursor, &dense_.w_off);
    add_tensor("dense.bias", {dense_.out_dim}, cursor, &dense_.b_off);
    total_params_ = cursor;
  }

  ClassifierConfig cfg_;
  std::vector<double> params_;
  std::vector<detail::BlockRef> blocks_;
  detail::DenseRef dense_;
  std::vector<TensorInfo> tensor_index_;
  std::size_t total_params_ = 0;
};

// He fan-in initialization for weights, zero biases, deterministic in
// config.init_seed.
inline Classifier init_classifier(const ClassifierConfig& cfg) {
  Classifier clf(cfg);
  Rng rng(derive_seed(cfg.init_seed, 0x696e6974ull /* "init" */));
  auto& p = clf.mutable_parameters();
  for (const auto& t : clf.tensors()) {
    const bool is_weight = t.shape.size() > 1;
    if (!is_weight) continue;  // biases stay zero
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < t.shape.size(); ++d) fan_in *= static_cast<std::size_t>(t.shape[d]);
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size; ++i) p[t.offset + i] = scale * rng.normal();
  }
  return clf;
}

namespace detail {

struct BlockTape {
  std::vector<double> z1, a1, z2, a2, pre, out;
};

struct Tape {
  std::vector<double> x;  // input as a 1 x T row
  std::vector<BlockTape> blocks;
  std::vector<double> gap, logits, probs;

  const std::vector<double>& block_input(std::size_t b) const { return b == 0 ? x : blocks[b - 1].out; }
};

inline void relu_forward(const std::vector<double>& z, std::vector<double>& a) {
  a.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
}

inline void forward_tape(const Classifier& clf, const double* x, Tape& tape) {
  const auto& cfg = clf.config();
  const int T = cfg.series_length;
  const double* p = clf.parameters().data();

  tape.x.assign(x, x + T);
  tape.blocks.resize(clf.blocks().size());

  for (std::size_t b = 0; b < clf.blocks().size(); ++b) {
    const auto& blk = clf.blocks()[b];
    auto& bt = tape.blocks[b];
    const auto& in = tape.block_input(b);
    const std::size_t out_n = static_cast<std::size_t>(blk.out_ch) * T;

    bt.z1.resize(out_n);
    conv1d_forward(p + blk.conv[0].w_off, p + blk.conv[0].b_off, blk.conv[0].in_ch, blk.conv[0].out_ch,
                   blk.conv[0].kernel, T, in.data(), bt.z1.data());
    relu_forward(bt.z1, bt.a1);

    bt.z2.resize(out_n);
    conv1d_forward(p + blk.conv[1].w_off, p + blk.conv[1].b_off, blk.conv[1].in_ch, blk.conv[1].out_ch,
                   blk.conv[1].kernel, T, bt.a1.data(), bt.z2.data());
    relu_forward(bt.z2, bt.a2);

    bt.pre.resize(out_n);
    conv1d_forward(p + blk.conv[2].w_off, p + blk.conv[2].b_off, blk.conv[2].in_ch, blk.conv[2].out_ch,
                   blk.conv[2].kernel, T, bt.a2.data(), bt.pre.data());

    if (cfg.residual) {
      if (blk.has_shortcut) {
        std::vector<double> sc(out_n);
        conv1d_forward(p + blk.shortcut.w_off, p + blk.shortcut.b_off, blk.shortcut.in_ch, blk.shortcut.out_ch, 1,
                       T, in.data(), sc.data());
        for (std::size_t i = 0; i < out_n; ++i) bt.pre[i] += sc[i];
      } else {
        for (std::size_t i = 0; i < out_n; ++i) bt.pre[i] += in[i];
      }
    }
    relu_forward(bt.pre, bt.out);
  }

  // GAP over the time axis, then dense + softmax.
  const int C = clf.gap_channels();
  const auto& last = clf.blocks().empty() ? tape.x : tape.blocks.back().out;
  tape.gap.resize(C);
  for (int c = 0; c < C; ++c) {
    const double* row = last.data() + static_cast<std::size_t>(c) * T;
    double s = 0.0;
    for (int t = 0; t < T; ++t) s += row[t];
    tape.gap[c] = s / static_cast<double>(T);
  }

  const auto& d = clf.dense();
  tape.logits.resize(d.out_dim);
  for (int j = 0; j < d.out_dim; ++j) {
    const double* wrow = p + d.w_off + static_cast<std::size_t>(j) * d.in_dim;
    double s = p[d.b_off + j];
    for (int c = 0; c < d.in_dim; ++c) s += wrow[c] * tape.gap[c];
    tape.logits[j] = s;
  }

  tape.probs.resize(d.out_dim);
  double mx = tape.logits[0];
  for (double v : tape.logits) mx = std::max(mx, v);
  double z = 0.0;
  for (int j = 0; j < d.out_dim; ++j) {
    tape.probs[j] = std::exp(tape.logits[j] - mx);
    z += tape.probs[j];
  }
  for (int j = 0; j < d.out_dim; ++j) tape.probs[j] /= z;
}

// Reverse pass from a logit gradient. Writes the input gradient to dx (length
// T) if non-null; accumulates parameter gradients into dparams if non-null.
inline void backward_tape(const Classifier& clf, const Tape& tape, const std::vector<double>& dlogits, double* dx,
                          double* dparams) {
  const auto& cfg = clf.config();
  const int T = cfg.series_length;
  const double* p = clf.parameters().data();
  const auto& d = clf.dense();
  const int C = d.in_dim;

  std::vector<double> dgap(C, 0.0);
  for (int j = 0; j < d.out_dim; ++j) {
    const double g = dlogits[j];
    const double* wrow = p + d.w_off + static_cast<std::size_t>(j) * d.in_dim;
    if (dparams) {
      double* dwrow = dparams + d.w_off + static_cast<std::size_t>(j) * d.in_dim;
      for (int c = 0; c < C; ++c) dwrow[c] += g * tape.gap[c];
      dparams[d.b_off + j] += g;
    }
    for (int c = 0; c < C; ++c) dgap[c] += g * wrow[c];
  }

  std::vector<double> dout(static_cast<std::size_t>(C) * T);
  const double inv_t = 1.0 / static_cast<double>(T);
  for (int c = 0; c < C; ++c) {
    const double g = dgap[c] * inv_t;
    double* row = dout.data() + static_cast<std::size_t>(c) * T;
    for (int t = 0; t < T; ++t) row[t] = g;
  }

  for (std::size_t bi = clf.blocks().size(); bi-- > 0;) {
    const auto& blk = clf.blocks()[bi];
    const auto& bt = tape.blocks[bi];
    const auto& in = tape.block_input(bi);
    const std::size_t out_n = static_cast<std::size_t>(blk.out_ch) * T;
    const std::size_t in_n = static_cast<std::size_t>(blk.in_ch) * T;

    // through the block's final ReLU
    std::vector<double> dpre(out_n);
    for (std::size_t i = 0; i < out_n; ++i) dpre[i] = bt.pre[i] > 0.0 ? dout[i] : 0.0;

    std::vector<double> din(in_n, 0.0);
    if (cfg.residual) {
      if (blk.has_shortcut) {
        if (dparams)
          conv1d_backward_params(in.data(), blk.shortcut.in_ch, blk.shortcut.out_ch, 1, T, dpre.data(),
                                 dparams + blk.shortcut.w_off, dparams + blk.shortcut.b_off);
        conv1d_backward_input(p + blk.shortcut.w_off, blk.shortcut.in_ch, blk.shortcut.out_ch, 1, T, dpre.data(),
                              din.data());
      } else {
        for (std::size_t i = 0; i < out_n; ++i) din[i] += dpre[i];
      }
    }

    // conv2 (input a2)
    std::vector<double> da2(out_n, 0.0);
    if (dparams)
      conv1d_backward_params(bt.a2.data(), blk.conv[2].in_ch, blk.conv[2].out_ch, blk.conv[2].kernel, T,
                             dpre.data(), dparams + blk.conv[2].w_off, dparams + blk.conv[2].b_off);
    conv1d_backward_input(p + blk.conv[2].w_off, blk.conv[2].in_ch, blk.conv[2].out_ch, blk.conv[2].kernel, T,
                          dpre.data(), da2.data());

    std::vector<double> dz2(out_n);
    for (std::size_t i = 0; i < out_n; ++i) dz2[i] = bt.z2[i] > 0.0 ? da2[i] : 0.0;

    // conv1 (input a1)
    std::vector<double> da1(out_n, 0.0);
    if (dparams)
      conv1d_backward_params(bt.a1.data(), blk.conv[1].in_ch, blk.conv[1].out_ch, blk.conv[1].kernel, T,
                             dz2.data(), dparams + blk.conv[1].w_off, dparams + blk.conv[1].b_off);
    conv1d_backward_input(p + blk.conv[1].w_off, blk.conv[1].in_ch, blk.conv[1].out_ch, blk.conv[1].kernel, T,
                          dz2.data(), da1.data());

    std::vector<double> dz1(out_n);
    for (std::size_t i = 0; i < out_n; ++i) dz1[i] = bt.z1[i] > 0.0 ? da1[i] : 0.0;

    // conv0 (input = block input)
    if (dparams)
      conv1d_backward_params(in.data(), blk.conv[0].in_ch, blk.conv[0].out_ch, blk.conv[0].kernel, T, dz1.data(),
                             dparams + blk.conv[0].w_off, dparams + blk.conv[0].b_off);
    conv1d_backward_input(p + blk.conv[0].w_off, blk.conv[0].in_ch, blk.conv[0].out_ch, blk.conv[0].kernel, T,
                          dz1.data(), din.data());

    dout = std::move(din);
  }

  if (dx)
    for (int t = 0; t < T; ++t) dx[t] = dout[t];
}

constexpr double kProbClamp = 1e-12;

// d(cross-entropy)/d(logits) with the probability clamp: zero when the true
// probability sits on the clamp floor.
inline std::vector<double> ce_logit_grad(const std::vector<double>& probs, int y) {
  std::vector<double> d(probs.size(), 0.0);
  if (probs[y] > kProbClamp) {
    for (std::size_t j = 0; j < probs.size(); ++j) d[j] = probs[j];
    d[y] -= 1.0;
  }
  return d;
}

}  // namespace detail

inline void check_input(const Classifier& clf, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != clf.config().series_length)
    throw std::invalid_argument("input length " + std::to_string(x.size()) + " does not match series_length " +
                                std::to_string(clf.config().series_length));
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("input contains non-finite value");
}

inline void check_label(const Classifier& clf, int y) {
  if (y < 0 || y >= clf.config().num_classes)
    throw std::invalid_argument("class index " + std::to_string(y) + " out of range [0, " +
                                std::to_string(clf.config().num_classes) + ")");
}

// Probability distribution over the K classes.
inline std::vector<double> forward(const Classifier& clf, const std::vector<double>& x) {
  check_input(clf, x);
  detail::Tape tape;
  detail::forward_tape(clf, x.data(), tape);
  return tape.probs;
}

inline int argmax(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

inline int predict(const Classifier& clf, const std::vector<double>& x) { return argmax(forward(clf, x)); }

// Categorical cross-entropy -log p_y, probabilities clamped below at 1e-12.
inline double loss(const Classifier& clf, const std::vector<double>& x, int y) {
  check_label(clf, y);
  const auto probs = forward(clf, x);
  return -std::log(std::max(probs[y], detail::kProbClamp));
}

inline double targeted_loss(const Classifier& clf, const std::vector<double>& x, int y_target) {
  return -loss(clf, x, y_target);
}

enum class AttackMode { untargeted, targeted };

// Gradient of loss (untargeted) or targeted_loss (targeted, y = target
// class) with respect to the input. No parameter gradients are computed.
inline std::vector<double> grad_input(const Classifier& clf, const std::vector<double>& x, int y,
                                      AttackMode mode = AttackMode::untargeted) {
  check_input(clf, x);
  check_label(clf, y);
  detail::Tape tape;
  detail::forward_tape(clf, x.data(), tape);
  auto dlogits = detail::ce_logit_grad(tape.probs, y);
  if (mode == AttackMode::targeted)
    for (auto& v : dlogits) v = -v;
  std::vector<double> dx(x.size());
  detail::backward_tape(clf, tape, dlogits, dx.data(), nullptr);
  return dx;
}

struct SampleRef {
  const std::vector<double>* x = nullptr;
  int y = 0;
};

// Mean cross-entropy gradient over a batch, shaped like the flat parameter
// vector. Per-sample gradients go into their own slot and are summed in
// sample order, so the result is identical for any thread count.
inline std::vector<double> grad_params(const Classifier& clf, std::span<const SampleRef> batch, int threads = 1,
                                       double* mean_loss = nullptr) {
  if (batch.empty()) throw std::invalid_argument("grad_params: empty batch");
  const std::size_t n = batch.size();
  const std::size_t np = clf.parameter_count();

  std::vector<std::vector<double>> slots(n);
  std::vector<double> losses(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto& s = batch[i];
    check_input(clf, *s.x);
    check_label(clf, s.y);
    detail::Tape tape;
    detail::forward_tape(clf, s.x->data(), tape);
    losses[i] = -std::log(std::max(tape.probs[s.y], detail::kProbClamp));
    const auto dlogits = detail::ce_logit_grad(tape.probs, s.y);
    slots[i].assign(np, 0.0);
    detail::backward_tape(clf, tape, dlogits, nullptr, slots[i].data());
  });

  std::vector<double> grad(np, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* g = slots[i].data();
    for (std::size_t j = 0; j < np; ++j) grad[j] += g[j];
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& g : grad) g *= inv;

  if (mean_loss) {
    double s = 0.0;
    for (double l : losses) s += l;
    *mean_loss = s * inv;
  }
  return grad;
}

}  // namespace tsadv
