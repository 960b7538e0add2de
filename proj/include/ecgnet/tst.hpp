#pragma once

#include <cmath>
#include <vector>

#include "ecgnet/layers.hpp"

namespace ecgnet {

/// Single-block time-series transformer. Features are projected to
/// `model_dim`, sinusoidal position encoding is added along the time axis,
/// multi-head scaled dot-product attention runs over time steps
/// (softmax(QK^T / sqrt(d_k)) V), heads are concatenated, projected, and a
/// residual connection wraps the attention. Output is (n, model_dim, l).
class TstLayer {
  public:
    TstLayer(std::string name, std::size_t in_dim, std::size_t model_dim, std::size_t heads,
             bool position_encoding = true)
        : in_(in_dim), d_(model_dim), heads_(heads), use_pe_(position_encoding),
          win_(name + ".in.w", {model_dim, in_dim}), bin_(name + ".in.b", {model_dim}),
          wq_(name + ".q.w", {model_dim, model_dim}), bq_(name + ".q.b", {model_dim}),
          wk_(name + ".k.w", {model_dim, model_dim}), bk_(name + ".k.b", {model_dim}),
          wv_(name + ".v.w", {model_dim, model_dim}), bv_(name + ".v.b", {model_dim}),
          wo_(name + ".out.w", {model_dim, model_dim}), bo_(name + ".out.b", {model_dim}) {
        if (heads < 1 || model_dim % heads != 0)
            throw UsageError("tst: model_dim must be divisible by heads");
        dh_ = model_dim / heads;
    }

    void init(InitRng& rng) {
        rng.xavier(win_, in_, d_);
        rng.xavier(wq_, d_, d_);
        rng.xavier(wk_, d_, d_);
        rng.xavier(wv_, d_, d_);
        rng.xavier(wo_, d_, d_);
    }

    Tensor3 forward(const Tensor3& x) {
        if (x.h != in_) throw UsageError("tst: input dim mismatch");
        x_ = x;
        const std::size_t n = x.n, L = x.l;
        ensure_pe(L);
        u_ = Tensor3(n, d_, L);
        q_ = Tensor3(n, d_, L);
        k_ = Tensor3(n, d_, L);
        v_ = Tensor3(n, d_, L);
        a_ = Tensor3(n, d_, L);
        for (std::size_t b = 0; b < n; ++b) {
            project(x, b, win_, bin_, u_);
            if (use_pe_)
                for (std::size_t c = 0; c < d_; ++c) {
                    double* ur = u_.row(b, c);
                    const double* pr = &pe_[c * L];
                    for (std::size_t t = 0; t < L; ++t) ur[t] += pr[t];
                }
            project(u_, b, wq_, bq_, q_);
            project(u_, b, wk_, bk_, k_);
            project(u_, b, wv_, bv_, v_);
            for (std::size_t hd = 0; hd < heads_; ++hd) {
                std::vector<double> probs;
                attention_probs(b, hd, probs);
                const std::size_t r0 = hd * dh_;
                for (std::size_t t = 0; t < L; ++t)
                    for (std::size_t c = 0; c < dh_; ++c) {
                        const double* vr = v_.row(b, r0 + c);
                        const double* pr = &probs[t * L];
                        double acc = 0.0;
                        for (std::size_t s = 0; s < L; ++s) acc += pr[s] * vr[s];
                        a_.at(b, r0 + c, t) = acc;
                    }
            }
        }
        Tensor3 y(n, d_, L);
        for (std::size_t b = 0; b < n; ++b) {
            project(a_, b, wo_, bo_, y);
            for (std::size_t c = 0; c < d_; ++c) {
                double* yr = y.row(b, c);
                const double* ur = u_.row(b, c);
                for (std::size_t t = 0; t < L; ++t) yr[t] += ur[t];
            }
        }
        return y;
    }

    Tensor3 backward(const Tensor3& dy) {
        const std::size_t n = x_.n, L = x_.l;
        Tensor3 dx(n, in_, L);
        for (std::size_t b = 0; b < n; ++b) {
            // residual: dU starts as dY, plus the attention path
            Tensor3 du(1, d_, L), da(1, d_, L), dq(1, d_, L), dk(1, d_, L), dv(1, d_, L);
            for (std::size_t c = 0; c < d_; ++c)
                std::copy(dy.row(b, c), dy.row(b, c) + L, du.row(0, c));
            project_backward(a_, b, wo_, bo_, dy, b, da);
            for (std::size_t hd = 0; hd < heads_; ++hd) {
                std::vector<double> probs;
                attention_probs(b, hd, probs); // recomputed, not cached
                const std::size_t r0 = hd * dh_;
                const double scale = 1.0 / std::sqrt(static_cast<double>(dh_));
                std::vector<double> dprob(L);
                for (std::size_t t = 0; t < L; ++t) {
                    for (std::size_t s = 0; s < L; ++s) {
                        double acc = 0.0;
                        for (std::size_t c = 0; c < dh_; ++c)
                            acc += da.at(0, r0 + c, t) * v_.at(b, r0 + c, s);
                        dprob[s] = acc;
                    }
                    const double* pr = &probs[t * L];
                    for (std::size_t s = 0; s < L; ++s)
                        for (std::size_t c = 0; c < dh_; ++c)
                            dv.at(0, r0 + c, s) += pr[s] * da.at(0, r0 + c, t);
                    double dot = 0.0;
                    for (std::size_t s = 0; s < L; ++s) dot += dprob[s] * pr[s];
                    for (std::size_t s = 0; s < L; ++s) {
                        const double dscore = pr[s] * (dprob[s] - dot) * scale;
                        for (std::size_t c = 0; c < dh_; ++c) {
                            dq.at(0, r0 + c, t) += dscore * k_.at(b, r0 + c, s);
                            dk.at(0, r0 + c, s) += dscore * q_.at(b, r0 + c, t);
                        }
                    }
                }
            }
            project_backward(u_, b, wq_, bq_, dq, 0, du);
            project_backward(u_, b, wk_, bk_, dk, 0, du);
            project_backward(u_, b, wv_, bv_, dv, 0, du);
            project_backward(x_, b, win_, bin_, du, 0, dx, b);
        }
        return dx;
    }

    void collect(std::vector<Param*>& out) {
        out.push_back(&win_);
        out.push_back(&bin_);
        out.push_back(&wq_);
        out.push_back(&bq_);
        out.push_back(&wk_);
        out.push_back(&bk_);
        out.push_back(&wv_);
        out.push_back(&bv_);
        out.push_back(&wo_);
        out.push_back(&bo_);
    }

    /// Attention probabilities of the last forward, batch b, head hd (L x L rows).
    std::vector<double> attention_rows(std::size_t b, std::size_t hd) {
        std::vector<double> probs;
        attention_probs(b, hd, probs);
        return probs;
    }

    double kink_gap() const { return std::numeric_limits<double>::infinity(); }
    bool position_encoding_enabled() const { return use_pe_; }

  private:
    void ensure_pe(std::size_t L) {
        if (!use_pe_) return;
        if (pe_len_ == L) return;
        pe_.assign(d_ * L, 0.0);
        for (std::size_t c = 0; c < d_; ++c) {
            const double freq = std::pow(10000.0, -2.0 * static_cast<double>(c / 2) / static_cast<double>(d_));
            for (std::size_t t = 0; t < L; ++t)
                pe_[c * L + t] = (c % 2 == 0) ? std::sin(static_cast<double>(t) * freq)
                                              : std::cos(static_cast<double>(t) * freq);
        }
        pe_len_ = L;
    }

    // out[b2] = W * src[b] + bias, columns are time steps
    void project(const Tensor3& src, std::size_t b, const Param& w, const Param& bias, Tensor3& out) {
        const std::size_t L = src.l, rows = bias.count(), cols = w.shape[1];
        for (std::size_t o = 0; o < rows; ++o) {
            double* orow = out.row(b < out.n ? b : 0, o);
            const double* wr = &w.value[o * cols];
            for (std::size_t t = 0; t < L; ++t) orow[t] = bias.value[o];
            for (std::size_t c = 0; c < cols; ++c) {
                const double wv = wr[c];
                const double* sr = src.row(b, c);
                for (std::size_t t = 0; t < L; ++t) orow[t] += wv * sr[t];
            }
        }
    }

    // accumulate gradients for out = W*src + b given dout; adds W^T dout into dsrc
    void project_backward(const Tensor3& src, std::size_t b, Param& w, Param& bias,
                          const Tensor3& dout, std::size_t db, Tensor3& dsrc,
                          std::size_t dsrc_b = 0) {
        const std::size_t L = src.l, rows = bias.count(), cols = w.shape[1];
        for (std::size_t o = 0; o < rows; ++o) {
            const double* dor = dout.row(db, o);
            double acc_b = 0.0;
            for (std::size_t t = 0; t < L; ++t) acc_b += dor[t];
            bias.grad[o] += acc_b;
            const double* wr = &w.value[o * cols];
            double* gw = &w.grad[o * cols];
            for (std::size_t c = 0; c < cols; ++c) {
                const double* sr = src.row(b, c);
                double* dsr = dsrc.row(dsrc_b, c);
                double acc = 0.0;
                for (std::size_t t = 0; t < L; ++t) {
                    acc += dor[t] * sr[t];
                    dsr[t] += wr[c] * dor[t];
                }
                gw[c] += acc;
            }
        }
    }

    void attention_probs(std::size_t b, std::size_t hd, std::vector<double>& probs) {
        const std::size_t L = u_.l;
        const std::size_t r0 = hd * dh_;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh_));
        probs.assign(L * L, 0.0);
        for (std::size_t t = 0; t < L; ++t) {
            double* row = &probs[t * L];
            for (std::size_t s = 0; s < L; ++s) {
                double acc = 0.0;
                for (std::size_t c = 0; c < dh_; ++c)
                    acc += q_.at(b, r0 + c, t) * k_.at(b, r0 + c, s);
                row[s] = acc * scale;
            }
            softmax_stable_inplace(row, L);
        }
    }

    std::size_t in_, d_, heads_, dh_ = 0;
    bool use_pe_;
    Param win_, bin_, wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
    Tensor3 x_, u_, q_, k_, v_, a_;
    std::vector<double> pe_;
    std::size_t pe_len_ = 0;
};

} // namespace ecgnet
