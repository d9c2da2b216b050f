#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "statecnn/tensor.hpp"

namespace statecnn {

enum class Phase { training, inference };

// A named parameter tensor with its gradient buffer. Frozen slots
// (trainable == false) are never touched by optimizer steps; batchnorm
// moving statistics live in frozen slots and are updated by the layer
// itself during training forwards.
template <typename T>
struct ParamSlot {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;
  bool has_grad = false;

  ParamSlot(std::string n, Tensor<T> v, bool train)
      : name(std::move(n)), value(std::move(v)), grad(value.shape), trainable(train) {}

  void set_grad(Tensor<T> g) {
    if (g.shape != value.shape)
      fail(ErrorKind::shape, "gradient shape " + g.shape.str() +
                                 " does not match parameter " + value.shape.str());
    grad = std::move(g);
    has_grad = true;
  }
};

template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  virtual std::string_view kind() const = 0;
  const std::string& name() const { return name_; }

  virtual Shape output_shape(const Shape& input) const = 0;

  // Training forwards cache the intermediates backward needs; inference
  // forwards write no state at all, so a built network can serve
  // concurrent inference calls.
  virtual Tensor<T> forward(const Tensor<T>& x, Phase phase) = 0;

  // Returns dL/dX and fills grads on trainable slots. Requires a prior
  // training-mode forward.
  virtual Tensor<T> backward(const Tensor<T>& d_out) = 0;

  virtual std::vector<ParamSlot<T>*> params() { return {}; }

  // Rewinds any internal random stream (dropout) to its initial state.
  virtual void reset_stream() {}

 protected:
  void require_cache() const {
    if (!has_cache_)
      fail(ErrorKind::state,
           "backward on '" + name_ + "' without a prior training forward");
  }

  std::string name_;
  bool has_cache_ = false;
};

struct ParamCount {
  int64_t total = 0;
  int64_t trainable = 0;
  int64_t frozen = 0;
};

template <typename T>
ParamCount param_count(Layer<T>& layer) {
  ParamCount c;
  for (ParamSlot<T>* slot : layer.params()) {
    int64_t n = slot->value.size();
    c.total += n;
    if (slot->trainable)
      c.trainable += n;
    else
      c.frozen += n;
  }
  return c;
}

// Glorot-uniform limit for a layer with the given fan extents.
inline double glorot_limit(int64_t fan_in, int64_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// --- conv2d -------------------------------------------------------------
//
// NHWC convolution with weights [kh,kw,cin,cout]. Forward lowers every
// input patch into a row (im2col) and runs one matmul per batch; backward
// recomputes the patch matrix instead of caching it.
template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(std::string name, int64_t kh, int64_t kw, int64_t cin, int64_t cout,
         int64_t stride, Padding padding, uint64_t seed)
      : Layer<T>(std::move(name)),
        kh_(kh),
        kw_(kw),
        cin_(cin),
        cout_(cout),
        stride_(stride),
        padding_(padding),
        weights_("weights",
                 Tensor<T>::uniform({kh, kw, cin, cout},
                                    static_cast<T>(-glorot_limit(kh * kw * cin, kh * kw * cout)),
                                    static_cast<T>(glorot_limit(kh * kw * cin, kh * kw * cout)),
                                    seed),
                 true),
        bias_("bias", Tensor<T>::zeros({cout}), true) {}

  std::string_view kind() const override { return "conv2d"; }

  std::vector<ParamSlot<T>*> params() override { return {&weights_, &bias_}; }

  Shape output_shape(const Shape& input) const override {
    check_input(input);
    auto g = make_window_grid(input[1], input[2], kh_, kw_, stride_, stride_, padding_);
    return Shape({input[0], g.out_h, g.out_w, cout_});
  }

  Tensor<T> forward(const Tensor<T>& x, Phase phase) override {
    check_input(x.shape);
    auto g = make_window_grid(x.shape[1], x.shape[2], kh_, kw_, stride_, stride_, padding_);
    Tensor<T> patches = im2col(x, g);
    // Weights are already the [kh*kw*cin, cout] matrix in row-major order.
    Tensor<T> w_mat = weights_.value.reshaped({kh_ * kw_ * cin_, cout_});
    Tensor<T> out_mat = matmul(patches, w_mat);
    const int64_t rows = out_mat.shape[0];
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cout_; ++c) out_mat.data[r * cout_ + c] += bias_.value.data[c];
    if (phase == Phase::training) {
      x_ = x;
      grid_ = g;
      this->has_cache_ = true;
    }
    return out_mat.reshaped({x.shape[0], g.out_h, g.out_w, cout_});
  }

  Tensor<T> backward(const Tensor<T>& d_out) override {
    this->require_cache();
    const int64_t n = x_.shape[0];
    Tensor<T> d_mat = d_out.reshaped({n * grid_.out_h * grid_.out_w, cout_});
    if (weights_.trainable || bias_.trainable) {
      Tensor<T> patches = im2col(x_, grid_);
      if (weights_.trainable)
        weights_.set_grad(matmul_tn(patches, d_mat).reshaped(weights_.value.shape));
      if (bias_.trainable) {
        Tensor<T> db({cout_});
        for (int64_t r = 0; r < d_mat.shape[0]; ++r)
          for (int64_t c = 0; c < cout_; ++c) db.data[c] += d_mat.data[r * cout_ + c];
        bias_.set_grad(std::move(db));
      }
    }
    Tensor<T> w_mat = weights_.value.reshaped({kh_ * kw_ * cin_, cout_});
    Tensor<T> d_patches = matmul_nt(d_mat, w_mat);
    return col2im(d_patches, grid_, x_.shape);
  }

 private:
  void check_input(const Shape& s) const {
    if (s.rank() != 4)
      fail(ErrorKind::shape, "conv2d expects [N,H,W,C] input, got " + s.str());
    if (s[3] != cin_)
      fail(ErrorKind::shape, "conv2d '" + this->name_ + "' expects " +
                                 std::to_string(cin_) + " input channels, got " +
                                 std::to_string(s[3]));
  }

  Tensor<T> im2col(const Tensor<T>& x, const WindowGrid& g) const {
    const int64_t n = x.shape[0], h = x.shape[1], w = x.shape[2];
    const int64_t patch = kh_ * kw_ * cin_;
    Tensor<T> m({n * g.out_h * g.out_w, patch});
    int64_t row = 0;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t oy = 0; oy < g.out_h; ++oy)
        for (int64_t ox = 0; ox < g.out_w; ++ox, ++row) {
          T* dst = &m.data[row * patch];
          for (int64_t ky = 0; ky < kh_; ++ky) {
            int64_t iy = g.origin_y(oy) + ky;
            for (int64_t kx = 0; kx < kw_; ++kx) {
              int64_t ix = g.origin_x(ox) + kx;
              T* cell = dst + (ky * kw_ + kx) * cin_;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;  // zero pad
              const T* src = &x.data[x.offset(i, iy, ix, 0)];
              std::copy(src, src + cin_, cell);
            }
          }
        }
    return m;
  }

  Tensor<T> col2im(const Tensor<T>& d_patches, const WindowGrid& g,
                   const Shape& x_shape) const {
    const int64_t n = x_shape[0], h = x_shape[1], w = x_shape[2];
    const int64_t patch = kh_ * kw_ * cin_;
    Tensor<T> dx(x_shape);
    int64_t row = 0;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t oy = 0; oy < g.out_h; ++oy)
        for (int64_t ox = 0; ox < g.out_w; ++ox, ++row) {
          const T* src = &d_patches.data[row * patch];
          for (int64_t ky = 0; ky < kh_; ++ky) {
            int64_t iy = g.origin_y(oy) + ky;
            if (iy < 0 || iy >= h) continue;
            for (int64_t kx = 0; kx < kw_; ++kx) {
              int64_t ix = g.origin_x(ox) + kx;
              if (ix < 0 || ix >= w) continue;
              T* dst = &dx.data[dx.offset(i, iy, ix, 0)];
              const T* cell = src + (ky * kw_ + kx) * cin_;
              for (int64_t c = 0; c < cin_; ++c) dst[c] += cell[c];
            }
          }
        }
    return dx;
  }

  int64_t kh_, kw_, cin_, cout_, stride_;
  Padding padding_;
  ParamSlot<T> weights_, bias_;
  Tensor<T> x_;
  WindowGrid grid_;
};

// --- batchnorm ----------------------------------------------------------
//
// Per-channel normalization of [N,H,W,C] or [N,C] input. Training mode
// normalizes by the minibatch's own mean/population variance and updates
// the moving statistics; inference mode normalizes by the moving
// statistics. gamma/beta are trainable, moving stats are frozen.
template <typename T>
class BatchNorm : public Layer<T> {
 public:
  BatchNorm(std::string name, int64_t channels, T epsilon = static_cast<T>(1e-3),
            T momentum = static_cast<T>(0.99))
      : Layer<T>(std::move(name)),
        channels_(channels),
        epsilon_(epsilon),
        momentum_(momentum),
        gamma_("gamma", Tensor<T>::full({channels}, T(1)), true),
        beta_("beta", Tensor<T>::zeros({channels}), true),
        moving_mean_("moving_mean", Tensor<T>::zeros({channels}), false),
        moving_var_("moving_var", Tensor<T>::full({channels}, T(1)), false) {
    if (!(epsilon > T(0)))
      fail(ErrorKind::config, "batchnorm epsilon must be positive");
  }

  std::string_view kind() const override { return "batchnorm"; }

  std::vector<ParamSlot<T>*> params() override {
    return {&gamma_, &beta_, &moving_mean_, &moving_var_};
  }

  Shape output_shape(const Shape& input) const override {
    check_input(input);
    return input;
  }

  Tensor<T> forward(const Tensor<T>& x, Phase phase) override {
    check_input(x.shape);
    const int64_t c = channels_;
    const int64_t m = x.size() / c;
    Tensor<T> out(x.shape);

    if (phase == Phase::inference) {
      for (int64_t i = 0; i < x.size(); ++i) {
        int64_t ch = i % c;
        T inv = T(1) / std::sqrt(moving_var_.value.data[ch] + epsilon_);
        out.data[i] = gamma_.value.data[ch] * (x.data[i] - moving_mean_.value.data[ch]) * inv +
                      beta_.value.data[ch];
      }
      return out;
    }

    std::vector<T> mean(c, T(0)), var(c, T(0));
    for (int64_t i = 0; i < x.size(); ++i) mean[i % c] += x.data[i];
    for (auto& v : mean) v /= static_cast<T>(m);
    for (int64_t i = 0; i < x.size(); ++i) {
      T d = x.data[i] - mean[i % c];
      var[i % c] += d * d;
    }
    for (auto& v : var) v /= static_cast<T>(m);

    xhat_ = Tensor<T>(x.shape);
    inv_std_.assign(c, T(0));
    for (int64_t ch = 0; ch < c; ++ch)
      inv_std_[ch] = T(1) / std::sqrt(var[ch] + epsilon_);
    for (int64_t i = 0; i < x.size(); ++i) {
      int64_t ch = i % c;
      xhat_.data[i] = (x.data[i] - mean[ch]) * inv_std_[ch];
      out.data[i] = gamma_.value.data[ch] * xhat_.data[i] + beta_.value.data[ch];
    }

    for (int64_t ch = 0; ch < c; ++ch) {
      moving_mean_.value.data[ch] =
          momentum_ * moving_mean_.value.data[ch] + (T(1) - momentum_) * mean[ch];
      moving_var_.value.data[ch] =
          momentum_ * moving_var_.value.data[ch] + (T(1) - momentum_) * var[ch];
    }
    this->has_cache_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& d_out) override {
    this->require_cache();
    const int64_t c = channels_;
    const int64_t m = d_out.size() / c;
    std::vector<T> sum_dy(c, T(0)), sum_dy_xhat(c, T(0));
    for (int64_t i = 0; i < d_out.size(); ++i) {
      int64_t ch = i % c;
      T dxhat = d_out.data[i] * gamma_.value.data[ch];
      sum_dy[ch] += dxhat;
      sum_dy_xhat[ch] += dxhat * xhat_.data[i];
    }
    if (gamma_.trainable || beta_.trainable) {
      Tensor<T> dg({c}), db({c});
      for (int64_t i = 0; i < d_out.size(); ++i) {
        int64_t ch = i % c;
        dg.data[ch] += d_out.data[i] * xhat_.data[i];
        db.data[ch] += d_out.data[i];
      }
      if (gamma_.trainable) gamma_.set_grad(std::move(dg));
      if (beta_.trainable) beta_.set_grad(std::move(db));
    }
    Tensor<T> dx(d_out.shape);
    const T inv_m = T(1) / static_cast<T>(m);
    for (int64_t i = 0; i < d_out.size(); ++i) {
      int64_t ch = i % c;
      T dxhat = d_out.data[i] * gamma_.value.data[ch];
      dx.data[i] = inv_std_[ch] * inv_m *
                   (static_cast<T>(m) * dxhat - sum_dy[ch] - xhat_.data[i] * sum_dy_xhat[ch]);
    }
    return dx;
  }

 private:
  void check_input(const Shape& s) const {
    if (s.rank() != 2 && s.rank() != 4)
      fail(ErrorKind::shape, "batchnorm expects rank-2 or rank-4 input, got " + s.str());
    if (s[s.rank() - 1] != channels_)
      fail(ErrorKind::shape, "batchnorm '" + this->name_ + "' expects " +
                                 std::to_string(channels_) + " channels, got " +
                                 std::to_string(s[s.rank() - 1]));
  }

  int64_t channels_;
  T epsilon_, momentum_;
  ParamSlot<T> gamma_, beta_, moving_mean_, moving_var_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

// --- relu ---------------------------------------------------------------
template <typename T>
class Relu : public Layer<T> {
 public:
  explicit Relu(std::string name) : Layer<T>(std::move(name)) {}

  std::string_view kind() const override { return "relu"; }

  Shape output_shape(const Shape& input) const override { return input; }

  Tensor<T> forward(const Tensor<T>& x, Phase phase) override {
    Tensor<T> out(x.shape);
    for (int64_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    if (phase == Phase::training) {
      mask_.assign(x.data.size(), 0);
      for (int64_t i = 0; i < x.size(); ++i) mask_[i] = x.data[i] > T(0);
      this->has_cache_ = true;
    }
    return out;
  }

  // Subgradient at exactly 0 is 0.
  Tensor<T> backward(const Tensor<T>& d_out) override {
    this->require_cache();
    Tensor<T> dx(d_out.shape);
    for (int64_t i = 0; i < d_out.size(); ++i)
      dx.data[i] = mask_[i] ? d_out.data[i] : T(0);
    return dx;
  }

 private:
  std::vector<char> mask_;
};

// --- maxpool2d ----------------------------------------------------------
template <typename T>
class MaxPool2d : public Layer<T> {
 public:
  MaxPool2d(std::string name, int64_t ph, int64_t pw, int64_t stride)
      : Layer<T>(std::move(name)), ph_(ph), pw_(pw), stride_(stride) {}

  std::string_view kind() const override { return "maxpool2d"; }

  Shape output_shape(const Shape& input) const override {
    if (input.rank() != 4)
      fail(ErrorKind::shape, "maxpool2d expects [N,H,W,C] input, got " + input.str());
    auto g = make_window_grid(input[1], input[2], ph_, pw_, stride_, stride_, Padding::valid);
    return Shape({input[0], g.out_h, g.out_w, input[3]});
  }

  Tensor<T> forward(const Tensor<T>& x, Phase phase) override {
    Shape out_shape = output_shape(x.shape);
    auto g = make_window_grid(x.shape[1], x.shape[2], ph_, pw_, stride_, stride_, Padding::valid);
    Tensor<T> out(out_shape);
    std::vector<int64_t> arg(out_shape.count());
    const int64_t n = x.shape[0], c = x.shape[3];
    int64_t o = 0;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t oy = 0; oy < g.out_h; ++oy)
        for (int64_t ox = 0; ox < g.out_w; ++ox)
          for (int64_t ch = 0; ch < c; ++ch, ++o) {
            // Strict > keeps the first maximum in row-major order on ties.
            int64_t best_flat = x.offset(i, oy * stride_, ox * stride_, ch);
            T best = x.data[best_flat];
            for (int64_t ky = 0; ky < ph_; ++ky)
              for (int64_t kx = 0; kx < pw_; ++kx) {
                int64_t flat = x.offset(i, oy * stride_ + ky, ox * stride_ + kx, ch);
                if (x.data[flat] > best) {
                  best = x.data[flat];
                  best_flat = flat;
                }
              }
            out.data[o] = best;
            arg[o] = best_flat;
          }
    if (phase == Phase::training) {
      argmax_ = std::move(arg);
      in_shape_ = x.shape;
      this->has_cache_ = true;
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& d_out) override {
    this->require_cache();
    Tensor<T> dx(in_shape_);
    for (int64_t o = 0; o < d_out.size(); ++o) dx.data[argmax_[o]] += d_out.data[o];
    return dx;
  }

 private:
  int64_t ph_, pw_, stride_;
  std::vector<int64_t> argmax_;
  Shape in_shape_;
};

// --- flatten ------------------------------------------------------------
template <typename T>
class Flatten : public Layer<T> {
 public:
  explicit Flatten(std::string name) : Layer<T>(std::move(name)) {}

  std::string_view kind() const override { return "flatten"; }

  Shape output_shape(const Shape& input) const override {
    if (input.rank() != 4)
      fail(ErrorKind::shape, "flatten expects [N,H,W,C] input, got " + input.str());
    return Shape({input[0], input[1] * input[2] * input[3]});
  }

  Tensor<T> forward(const Tensor<T>& x, Phase phase) override {
    Shape out = output_shape(x.shape);
    if (phase == Phase::training) {
      in_shape_ = x.shape;
      this->has_cache_ = true;
    }
    return x.reshaped(out);
  }

  Tensor<T> backward(const Tensor<T>& d_out) override {
    this->require_cache();
    return d_out.reshaped(in_shape_);
  }

 private:
  Shape in_shape_;
};

// --- dense --------------------------------------------------------------
template <typename T>
class Dense : public Layer<T> {
 public:
  Dense(std::string name, int64_t din, int64_t dout, uint64_t seed)
      : Layer<T>(std::move(name)),
        din_(din),
        dout_(dout),
        weights_("weights",
                 Tensor<T>::uniform({din, dout}, static_cast<T>(-glorot_limit(din, dout)),
                                    static_cast<T>(glorot_limit(din, dout)), seed),
                 true),
        bias_("bias", Tensor<T>::zeros({dout}), true) {}

  std::string_view kind() const override { return "dense"; }

  std::vector<ParamSlot<T>*> params() override { return {&weights_, &bias_}; }

  Shape output_shape(const Shape& input) const override {
    check_input(input);
    return Shape({input[0], dout_});
  }

  Tensor<T> forward(const Tensor<T>& x, Phase phase) override {
    check_input(x.shape);
    Tensor<T> out = matmul(x, weights_.value);
    for (int64_t i = 0; i < x.shape[0]; ++i)
      for (int64_t j = 0; j < dout_; ++j) out.data[i * dout_ + j] += bias_.value.data[j];
    if (phase == Phase::training) {
      x_ = x;
      this->has_cache_ = true;
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& d_out) override {
    this->require_cache();
    if (weights_.trainable) weights_.set_grad(matmul_tn(x_, d_out));
    if (bias_.trainable) {
      Tensor<T> db({dout_});
      for (int64_t i = 0; i < d_out.shape[0]; ++i)
        for (int64_t j = 0; j < dout_; ++j) db.data[j] += d_out.data[i * dout_ + j];
      bias_.set_grad(std::move(db));
    }
    return matmul_nt(d_out, weights_.value);
  }

 private:
  void check_input(const Shape& s) const {
    if (s.rank() != 2 || s[1] != din_)
      fail(ErrorKind::shape, "dense '" + this->name_ + "' expects [N," +
                                 std::to_string(din_) + "] input, got " + s.str());
  }

  int64_t din_, dout_;
  ParamSlot<T> weights_, bias_;
  Tensor<T> x_;
};

// --- dropout ------------------------------------------------------------
//
// Inverted dropout: training zeroes each element with probability `rate`
// and scales survivors by 1/(1-rate); inference is the identity. The mask
// for step s is a pure function of (seed, s).
template <typename T>
class Dropout : public Layer<T> {
 public:
  Dropout(std::string name, double rate, uint64_t seed)
      : Layer<T>(std::move(name)), rate_(rate), seed_(seed) {
    if (rate < 0.0 || rate >= 1.0)
      fail(ErrorKind::config, "dropout rate must lie in [0,1), got " + std::to_string(rate));
  }

  std::string_view kind() const override { return "dropout"; }

  Shape output_shape(const Shape& input) const override { return input; }

  Tensor<T> forward(const Tensor<T>& x, Phase phase) override {
    if (phase == Phase::inference) return x;
    mask_.assign(x.data.size(), T(1));
    if (rate_ > 0.0) {
      Rng rng(mix_seed(seed_, step_));
      const T scale = static_cast<T>(1.0 / (1.0 - rate_));
      for (auto& m : mask_) m = unit_draw(rng) < rate_ ? T(0) : scale;
    }
    ++step_;
    this->has_cache_ = true;
    Tensor<T> out(x.shape);
    for (int64_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] * mask_[i];
    return out;
  }

  Tensor<T> backward(const Tensor<T>& d_out) override {
    this->require_cache();
    Tensor<T> dx(d_out.shape);
    for (int64_t i = 0; i < d_out.size(); ++i) dx.data[i] = d_out.data[i] * mask_[i];
    return dx;
  }

  void reset_stream() override { step_ = 0; }

  double rate() const { return rate_; }

 private:
  double rate_;
  uint64_t seed_;
  uint64_t step_ = 0;
  std::vector<T> mask_;
};

// --- softmax ------------------------------------------------------------
template <typename T>
class Softmax : public Layer<T> {
 public:
  explicit Softmax(std::string name) : Layer<T>(std::move(name)) {}

  std::string_view kind() const override { return "softmax"; }

  Shape output_shape(const Shape& input) const override {
    check_input(input);
    return input;
  }

  Tensor<T> forward(const Tensor<T>& x, Phase phase) override {
    check_input(x.shape);
    const int64_t n = x.shape[0], k = x.shape[1];
    Tensor<T> out(x.shape);
    for (int64_t i = 0; i < n; ++i) {
      const T* row = &x.data[i * k];
      T* dst = &out.data[i * k];
      T mx = row[0];
      for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
      T total = 0;
      for (int64_t j = 0; j < k; ++j) {
        dst[j] = std::exp(row[j] - mx);
        total += dst[j];
      }
      for (int64_t j = 0; j < k; ++j) dst[j] /= total;
    }
    if (phase == Phase::training) {
      y_ = out;
      this->has_cache_ = true;
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& d_out) override {
    this->require_cache();
    const int64_t n = d_out.shape[0], k = d_out.shape[1];
    Tensor<T> dx(d_out.shape);
    for (int64_t i = 0; i < n; ++i) {
      const T* dy = &d_out.data[i * k];
      const T* y = &y_.data[i * k];
      T dot = 0;
      for (int64_t j = 0; j < k; ++j) dot += dy[j] * y[j];
      for (int64_t j = 0; j < k; ++j) dx.data[i * k + j] = y[j] * (dy[j] - dot);
    }
    return dx;
  }

 private:
  void check_input(const Shape& s) const {
    if (s.rank() != 2)
      fail(ErrorKind::shape, "softmax expects [N,K] input, got " + s.str());
  }

  Tensor<T> y_;
};

}  // namespace statecnn
