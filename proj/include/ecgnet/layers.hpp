#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ecgnet/tensor.hpp"

namespace ecgnet {

enum class Mode { Train, Eval };

/// One named trainable array with its gradient accumulator.
struct Param {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;

    Param() = default;
    Param(std::string name_, std::vector<std::size_t> shape_) : name(std::move(name_)), shape(std::move(shape_)) {
        std::size_t count = 1;
        for (std::size_t d : shape) count *= d;
        value.assign(count, 0.0);
        grad.assign(count, 0.0);
    }
    std::size_t count() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

/// Deterministic cross-platform uniform/xavier init over mt19937_64.
class InitRng {
  public:
    explicit InitRng(std::uint64_t seed) : rng_(seed) {}
    double uniform(double lo, double hi) {
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }
    void xavier(Param& p, std::size_t fan_in, std::size_t fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& w : p.value) w = uniform(-bound, bound);
    }

  private:
    std::mt19937_64 rng_;
};

inline double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// Numerically stable softmax: positive outputs summing to 1.
inline std::vector<double> softmax_stable(const std::vector<double>& v) {
    if (v.empty()) throw UsageError("softmax_stable: empty vector");
    const double mx = *std::max_element(v.begin(), v.end());
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

inline void softmax_stable_inplace(double* v, std::size_t n) {
    double mx = v[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, v[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = std::exp(v[i] - mx);
        sum += v[i];
    }
    for (std::size_t i = 0; i < n; ++i) v[i] /= sum;
}

enum class PoolKind { GlobalAvg, GlobalMax, AdaptiveAvg };

/// Pooling along the time axis. Global variants reduce to length 1; adaptive
/// averaging splits the axis into out_len contiguous bins that cover it.
inline Tensor3 pool(const Tensor3& x, PoolKind kind, std::size_t out_len = 1) {
    if (out_len < 1) throw UsageError("pool: out_len must be >= 1");
    if (kind != PoolKind::AdaptiveAvg) out_len = 1;
    if (kind == PoolKind::AdaptiveAvg && out_len > x.l)
        throw UsageError("pool: adaptive out_len exceeds time axis");
    Tensor3 y(x.n, x.h, out_len);
    for (std::size_t i = 0; i < x.n; ++i)
        for (std::size_t c = 0; c < x.h; ++c) {
            const double* r = x.row(i, c);
            if (kind == PoolKind::GlobalAvg) {
                double acc = 0.0;
                for (std::size_t t = 0; t < x.l; ++t) acc += r[t];
                y.at(i, c, 0) = acc / static_cast<double>(x.l);
            } else if (kind == PoolKind::GlobalMax) {
                double mx = r[0];
                for (std::size_t t = 1; t < x.l; ++t) mx = std::max(mx, r[t]);
                y.at(i, c, 0) = mx;
            } else {
                for (std::size_t o = 0; o < out_len; ++o) {
                    const std::size_t t0 = o * x.l / out_len;
                    const std::size_t t1 = (o + 1) * x.l / out_len;
                    double acc = 0.0;
                    for (std::size_t t = t0; t < t1; ++t) acc += r[t];
                    y.at(i, c, o) = acc / static_cast<double>(t1 - t0);
                }
            }
        }
    return y;
}

/// Same-padding 1D convolution with odd kernel width.
class Conv1d {
  public:
    Conv1d(std::string name, std::size_t c_in, std::size_t c_out, std::size_t k)
        : c_in_(c_in), c_out_(c_out), k_(k),
          w_(name + ".w", {c_out, c_in, k}), b_(name + ".b", {c_out}) {
        if (k % 2 == 0) throw UsageError("conv1d: kernel width must be odd");
    }

    void init(InitRng& rng) { rng.xavier(w_, c_in_ * k_, c_out_ * k_); }

    Tensor3 forward(const Tensor3& x) {
        if (x.h != c_in_) throw UsageError("conv1d: channel mismatch");
        x_ = x;
        const long half = static_cast<long>(k_ / 2);
        Tensor3 y(x.n, c_out_, x.l);
        for (std::size_t i = 0; i < x.n; ++i)
            for (std::size_t o = 0; o < c_out_; ++o) {
                double* yo = y.row(i, o);
                for (std::size_t t = 0; t < x.l; ++t) yo[t] = b_.value[o];
                for (std::size_t c = 0; c < c_in_; ++c) {
                    const double* xc = x.row(i, c);
                    const double* wk = &w_.value[(o * c_in_ + c) * k_];
                    for (std::size_t j = 0; j < k_; ++j) {
                        const double wj = wk[j];
                        const long off = static_cast<long>(j) - half;
                        const long t0 = std::max<long>(0, -off);
                        const long t1 = std::min<long>(static_cast<long>(x.l), static_cast<long>(x.l) - off);
                        for (long t = t0; t < t1; ++t) yo[t] += wj * xc[t + off];
                    }
                }
            }
        return y;
    }

    Tensor3 backward(const Tensor3& dy) {
        const long half = static_cast<long>(k_ / 2);
        Tensor3 dx(x_.n, c_in_, x_.l);
        for (std::size_t i = 0; i < x_.n; ++i)
            for (std::size_t o = 0; o < c_out_; ++o) {
                const double* dyo = dy.row(i, o);
                for (std::size_t t = 0; t < x_.l; ++t) b_.grad[o] += dyo[t];
                for (std::size_t c = 0; c < c_in_; ++c) {
                    const double* xc = x_.row(i, c);
                    double* dxc = dx.row(i, c);
                    const double* wk = &w_.value[(o * c_in_ + c) * k_];
                    double* dwk = &w_.grad[(o * c_in_ + c) * k_];
                    for (std::size_t j = 0; j < k_; ++j) {
                        const long off = static_cast<long>(j) - half;
                        const long t0 = std::max<long>(0, -off);
                        const long t1 = std::min<long>(static_cast<long>(x_.l), static_cast<long>(x_.l) - off);
                        double acc = 0.0;
                        for (long t = t0; t < t1; ++t) {
                            acc += dyo[t] * xc[t + off];
                            dxc[t + off] += wk[j] * dyo[t];
                        }
                        dwk[j] += acc;
                    }
                }
            }
        return dx;
    }

    void collect(std::vector<Param*>& out) { out.push_back(&w_); out.push_back(&b_); }
    std::size_t kernel_width() const { return k_; }
    std::size_t c_out() const { return c_out_; }

  private:
    std::size_t c_in_, c_out_, k_;
    Param w_, b_;
    Tensor3 x_;
};

/// Batch normalization per channel over (batch, time).
class BatchNorm1d {
  public:
    BatchNorm1d(std::string name, std::size_t channels, double eps = 1e-5, double momentum = 0.1)
        : c_(channels), eps_(eps), momentum_(momentum),
          gamma_(name + ".gamma", {channels}), beta_(name + ".beta", {channels}),
          running_mean_(channels, 0.0), running_var_(channels, 1.0) {
        std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0);
    }

    Tensor3 forward(const Tensor3& x, Mode mode) {
        if (x.h != c_) throw UsageError("batchnorm: channel mismatch");
        mode_ = mode;
        const double m = static_cast<double>(x.n * x.l);
        Tensor3 y(x.n, x.h, x.l);
        xhat_ = Tensor3(x.n, x.h, x.l);
        if (mode == Mode::Train) {
            mu_.assign(c_, 0.0);
            var_.assign(c_, 0.0);
            inv_.assign(c_, 0.0);
            for (std::size_t c = 0; c < c_; ++c) {
                double acc = 0.0;
                for (std::size_t i = 0; i < x.n; ++i) {
                    const double* r = x.row(i, c);
                    for (std::size_t t = 0; t < x.l; ++t) acc += r[t];
                }
                mu_[c] = acc / m;
                double sq = 0.0;
                for (std::size_t i = 0; i < x.n; ++i) {
                    const double* r = x.row(i, c);
                    for (std::size_t t = 0; t < x.l; ++t) {
                        const double d = r[t] - mu_[c];
                        sq += d * d;
                    }
                }
                var_[c] = sq / m;
                inv_[c] = 1.0 / std::sqrt(var_[c] + eps_);
                running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mu_[c];
                running_var_[c] = (1.0 - momentum_) * running_var_[c] + momentum_ * var_[c];
            }
        } else {
            mu_ = running_mean_;
            var_ = running_var_;
            inv_.assign(c_, 0.0);
            for (std::size_t c = 0; c < c_; ++c) inv_[c] = 1.0 / std::sqrt(var_[c] + eps_);
        }
        x_ = x;
        for (std::size_t i = 0; i < x.n; ++i)
            for (std::size_t c = 0; c < c_; ++c) {
                const double* r = x.row(i, c);
                double* xh = xhat_.row(i, c);
                double* yr = y.row(i, c);
                for (std::size_t t = 0; t < x.l; ++t) {
                    xh[t] = (r[t] - mu_[c]) * inv_[c];
                    yr[t] = gamma_.value[c] * xh[t] + beta_.value[c];
                }
            }
        return y;
    }

    Tensor3 backward(const Tensor3& dy) {
        const double m = static_cast<double>(dy.n * dy.l);
        Tensor3 dx(dy.n, dy.h, dy.l);
        for (std::size_t c = 0; c < c_; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::size_t i = 0; i < dy.n; ++i) {
                const double* d = dy.row(i, c);
                const double* xh = xhat_.row(i, c);
                for (std::size_t t = 0; t < dy.l; ++t) {
                    sum_dy += d[t];
                    sum_dy_xhat += d[t] * xh[t];
                }
            }
            gamma_.grad[c] += sum_dy_xhat;
            beta_.grad[c] += sum_dy;
            const double g = gamma_.value[c];
            for (std::size_t i = 0; i < dy.n; ++i) {
                const double* d = dy.row(i, c);
                const double* xh = xhat_.row(i, c);
                double* dxr = dx.row(i, c);
                for (std::size_t t = 0; t < dy.l; ++t) {
                    if (mode_ == Mode::Train) {
                        dxr[t] = g * inv_[c] * (d[t] - sum_dy / m - xh[t] * sum_dy_xhat / m);
                    } else {
                        dxr[t] = g * inv_[c] * d[t];
                    }
                }
            }
        }
        return dx;
    }

    void collect(std::vector<Param*>& out) { out.push_back(&gamma_); out.push_back(&beta_); }
    std::vector<double>& running_mean() { return running_mean_; }
    std::vector<double>& running_var() { return running_var_; }
    const std::vector<double>& running_mean() const { return running_mean_; }
    const std::vector<double>& running_var() const { return running_var_; }

  private:
    std::size_t c_;
    double eps_, momentum_;
    Param gamma_, beta_;
    std::vector<double> running_mean_, running_var_;
    std::vector<double> mu_, var_, inv_;
    Tensor3 x_, xhat_;
    Mode mode_ = Mode::Train;
};

/// Convolution -> BatchNorm -> ReLU.
class ConvBnRelu {
  public:
    ConvBnRelu(std::string name, std::size_t c_in, std::size_t c_out, std::size_t k)
        : conv_(name + ".conv", c_in, c_out, k), bn_(name + ".bn", c_out) {}

    void init(InitRng& rng) { conv_.init(rng); }

    Tensor3 forward(const Tensor3& x, Mode mode) {
        pre_ = bn_.forward(conv_.forward(x), mode);
        kink_gap_ = std::numeric_limits<double>::infinity();
        Tensor3 y = pre_;
        for (double& v : y.v) {
            kink_gap_ = std::min(kink_gap_, std::abs(v));
            if (v < 0.0) v = 0.0;
        }
        return y;
    }

    Tensor3 backward(const Tensor3& dy) {
        Tensor3 dpre = dy;
        for (std::size_t i = 0; i < dpre.v.size(); ++i)
            if (pre_.v[i] <= 0.0) dpre.v[i] = 0.0;
        return conv_.backward(bn_.backward(dpre));
    }

    void collect(std::vector<Param*>& out) { conv_.collect(out); bn_.collect(out); }
    const Tensor3& pre_activation() const { return pre_; }
    double kink_gap() const { return kink_gap_; }
    BatchNorm1d& bn() { return bn_; }

  private:
    Conv1d conv_;
    BatchNorm1d bn_;
    Tensor3 pre_;
    double kink_gap_ = std::numeric_limits<double>::infinity();
};

enum class Activation { None, Relu, Sigmoid };

/// Fully connected layer on (n, dim, 1) tensors.
class Dense {
  public:
    Dense(std::string name, std::size_t in_dim, std::size_t out_dim, Activation act)
        : in_(in_dim), out_(out_dim), act_(act),
          w_(name + ".w", {out_dim, in_dim}), b_(name + ".b", {out_dim}) {}

    void init(InitRng& rng) { rng.xavier(w_, in_, out_); }

    Tensor3 forward(const Tensor3& x) {
        if (x.h != in_ || x.l != 1) throw UsageError("dense: dim mismatch");
        x_ = x;
        pre_ = Tensor3(x.n, out_, 1);
        kink_gap_ = std::numeric_limits<double>::infinity();
        Tensor3 y(x.n, out_, 1);
        for (std::size_t i = 0; i < x.n; ++i)
            for (std::size_t o = 0; o < out_; ++o) {
                double acc = b_.value[o];
                const double* wr = &w_.value[o * in_];
                for (std::size_t c = 0; c < in_; ++c) acc += wr[c] * x.at(i, c, 0);
                pre_.at(i, o, 0) = acc;
                if (act_ == Activation::Relu) {
                    kink_gap_ = std::min(kink_gap_, std::abs(acc));
                    y.at(i, o, 0) = acc > 0.0 ? acc : 0.0;
                } else if (act_ == Activation::Sigmoid) {
                    y.at(i, o, 0) = sigmoid(acc);
                } else {
                    y.at(i, o, 0) = acc;
                }
            }
        return y;
    }

    Tensor3 backward(const Tensor3& dy) {
        Tensor3 dx(x_.n, in_, 1);
        for (std::size_t i = 0; i < x_.n; ++i)
            for (std::size_t o = 0; o < out_; ++o) {
                double d = dy.at(i, o, 0);
                const double z = pre_.at(i, o, 0);
                if (act_ == Activation::Relu) {
                    if (z <= 0.0) d = 0.0;
                } else if (act_ == Activation::Sigmoid) {
                    const double s = sigmoid(z);
                    d *= s * (1.0 - s);
                }
                b_.grad[o] += d;
                const double* wr = &w_.value[o * in_];
                double* gw = &w_.grad[o * in_];
                for (std::size_t c = 0; c < in_; ++c) {
                    gw[c] += d * x_.at(i, c, 0);
                    dx.at(i, c, 0) += wr[c] * d;
                }
            }
        return dx;
    }

    void collect(std::vector<Param*>& out) { out.push_back(&w_); out.push_back(&b_); }
    double kink_gap() const { return kink_gap_; }

  private:
    std::size_t in_, out_;
    Activation act_;
    Param w_, b_;
    Tensor3 x_, pre_;
    double kink_gap_ = std::numeric_limits<double>::infinity();
};

/// Free-function dense for vector math outside the trainable graph.
inline std::vector<double> dense_apply(const std::vector<double>& x,
                                       const std::vector<std::vector<double>>& w,
                                       const std::vector<double>& b, Activation act) {
    if (w.size() != b.size()) throw UsageError("dense_apply: bias/weight mismatch");
    std::vector<double> y(w.size());
    for (std::size_t o = 0; o < w.size(); ++o) {
        if (w[o].size() != x.size()) throw UsageError("dense_apply: dim mismatch");
        double acc = b[o];
        for (std::size_t i = 0; i < x.size(); ++i) acc += w[o][i] * x[i];
        if (act == Activation::Relu) acc = acc > 0.0 ? acc : 0.0;
        else if (act == Activation::Sigmoid) acc = sigmoid(acc);
        y[o] = acc;
    }
    return y;
}

} // namespace ecgnet
