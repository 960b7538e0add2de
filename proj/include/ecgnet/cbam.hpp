#pragma once

#include <limits>
#include <vector>

#include "ecgnet/layers.hpp"

namespace ecgnet {

/// Channel-then-spatial multiplicative attention:
///   a_c = sigmoid(FC2(ReLU(FC1(AvgPool_t(x) + MaxPool_t(x)))))   shape (n,h,1)
///   a_s = sigmoid(Conv1d([AvgPool_c(x); MaxPool_c(x)]))          shape (n,1,l)
///   y   = x * a_c * a_s
class CbamLayer {
  public:
    CbamLayer(std::string name, std::size_t channels, std::size_t reduction,
              std::size_t spatial_kernel)
        : c_(channels), mid_(std::max<std::size_t>(1, channels / reduction)), k_(spatial_kernel),
          w1_(name + ".fc1.w", {mid_, channels}), b1_(name + ".fc1.b", {mid_}),
          w2_(name + ".fc2.w", {channels, mid_}), b2_(name + ".fc2.b", {channels}),
          ws_(name + ".spatial.w", {1, 2, spatial_kernel}), bs_(name + ".spatial.b", {1}) {
        if (spatial_kernel % 2 == 0) throw UsageError("cbam: spatial kernel must be odd");
    }

    void init(InitRng& rng) {
        rng.xavier(w1_, c_, mid_);
        rng.xavier(w2_, mid_, c_);
        rng.xavier(ws_, 2 * k_, k_);
    }

    Tensor3 forward(const Tensor3& x) {
        if (x.h != c_) throw UsageError("cbam: channel mismatch");
        x_ = x;
        kink_gap_ = std::numeric_limits<double>::infinity();
        const std::size_t n = x.n, L = x.l;

        ac_.assign(n * c_, 0.0);
        preu_.assign(n * mid_, 0.0);
        u_.assign(n * mid_, 0.0);
        v_.assign(n * c_, 0.0);
        tmax_idx_.assign(n * c_, 0);
        for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t c = 0; c < c_; ++c) {
                const double* r = x.row(b, c);
                double acc = 0.0, mx = r[0], second = -std::numeric_limits<double>::infinity();
                std::size_t arg = 0;
                for (std::size_t t = 0; t < L; ++t) {
                    acc += r[t];
                    if (r[t] > mx) { second = mx; mx = r[t]; arg = t; }
                    else if (t > 0 && r[t] > second) second = r[t];
                }
                if (L > 1) kink_gap_ = std::min(kink_gap_, mx - second);
                tmax_idx_[b * c_ + c] = arg;
                v_[b * c_ + c] = acc / static_cast<double>(L) + mx;
            }
            for (std::size_t m = 0; m < mid_; ++m) {
                double acc = b1_.value[m];
                for (std::size_t c = 0; c < c_; ++c) acc += w1_.value[m * c_ + c] * v_[b * c_ + c];
                preu_[b * mid_ + m] = acc;
                kink_gap_ = std::min(kink_gap_, std::abs(acc));
                u_[b * mid_ + m] = acc > 0.0 ? acc : 0.0;
            }
            for (std::size_t c = 0; c < c_; ++c) {
                double acc = b2_.value[c];
                for (std::size_t m = 0; m < mid_; ++m) acc += w2_.value[c * mid_ + m] * u_[b * mid_ + m];
                ac_[b * c_ + c] = sigmoid(acc);
            }
        }

        stack_ = Tensor3(n, 2, L);
        cmax_idx_.assign(n * L, 0);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t t = 0; t < L; ++t) {
                double acc = 0.0, mx = x.at(b, 0, t), second = -std::numeric_limits<double>::infinity();
                std::size_t arg = 0;
                for (std::size_t c = 0; c < c_; ++c) {
                    const double val = x.at(b, c, t);
                    acc += val;
                    if (c == 0) continue;
                    if (val > mx) { second = mx; mx = val; arg = c; }
                    else if (val > second) second = val;
                }
                if (c_ > 1) kink_gap_ = std::min(kink_gap_, mx - second);
                cmax_idx_[b * L + t] = arg;
                stack_.at(b, 0, t) = acc / static_cast<double>(c_);
                stack_.at(b, 1, t) = mx;
            }
        as_.assign(n * L, 0.0);
        const long half = static_cast<long>(k_ / 2);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t t = 0; t < L; ++t) {
                double acc = bs_.value[0];
                for (std::size_t c = 0; c < 2; ++c)
                    for (std::size_t j = 0; j < k_; ++j) {
                        const long tt = static_cast<long>(t) + static_cast<long>(j) - half;
                        if (tt >= 0 && tt < static_cast<long>(L))
                            acc += ws_.value[c * k_ + j] * stack_.at(b, c, static_cast<std::size_t>(tt));
                    }
                as_[b * L + t] = sigmoid(acc);
            }

        Tensor3 y(n, c_, L);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < c_; ++c) {
                const double g = ac_[b * c_ + c];
                const double* r = x.row(b, c);
                double* yo = y.row(b, c);
                for (std::size_t t = 0; t < L; ++t) yo[t] = r[t] * g * as_[b * L + t];
            }
        return y;
    }

    Tensor3 backward(const Tensor3& dy) {
        const std::size_t n = x_.n, L = x_.l;
        Tensor3 dx(n, c_, L);
        const long half = static_cast<long>(k_ / 2);
        for (std::size_t b = 0; b < n; ++b) {
            // direct path plus the gathered gradients for both attention maps
            std::vector<double> dac(c_, 0.0), das(L, 0.0);
            for (std::size_t c = 0; c < c_; ++c) {
                const double g = ac_[b * c_ + c];
                const double* r = x_.row(b, c);
                const double* d = dy.row(b, c);
                double* dxr = dx.row(b, c);
                for (std::size_t t = 0; t < L; ++t) {
                    const double s = as_[b * L + t];
                    dxr[t] += d[t] * g * s;
                    dac[c] += d[t] * r[t] * s;
                    das[t] += d[t] * r[t] * g;
                }
            }
            // channel attention path
            std::vector<double> du(mid_, 0.0);
            for (std::size_t c = 0; c < c_; ++c) {
                const double a = ac_[b * c_ + c];
                const double dpre = dac[c] * a * (1.0 - a);
                b2_.grad[c] += dpre;
                for (std::size_t m = 0; m < mid_; ++m) {
                    w2_.grad[c * mid_ + m] += dpre * u_[b * mid_ + m];
                    du[m] += w2_.value[c * mid_ + m] * dpre;
                }
            }
            std::vector<double> dv(c_, 0.0);
            for (std::size_t m = 0; m < mid_; ++m) {
                if (preu_[b * mid_ + m] <= 0.0) continue;
                b1_.grad[m] += du[m];
                for (std::size_t c = 0; c < c_; ++c) {
                    w1_.grad[m * c_ + c] += du[m] * v_[b * c_ + c];
                    dv[c] += w1_.value[m * c_ + c] * du[m];
                }
            }
            for (std::size_t c = 0; c < c_; ++c) {
                double* dxr = dx.row(b, c);
                const double spread = dv[c] / static_cast<double>(L);
                for (std::size_t t = 0; t < L; ++t) dxr[t] += spread;
                dxr[tmax_idx_[b * c_ + c]] += dv[c];
            }
            // spatial attention path
            Tensor3 dstack(1, 2, L);
            for (std::size_t t = 0; t < L; ++t) {
                const double a = as_[b * L + t];
                const double dq = das[t] * a * (1.0 - a);
                bs_.grad[0] += dq;
                for (std::size_t c = 0; c < 2; ++c)
                    for (std::size_t j = 0; j < k_; ++j) {
                        const long tt = static_cast<long>(t) + static_cast<long>(j) - half;
                        if (tt >= 0 && tt < static_cast<long>(L)) {
                            ws_.grad[c * k_ + j] += dq * stack_.at(b, c, static_cast<std::size_t>(tt));
                            dstack.at(0, c, static_cast<std::size_t>(tt)) += dq * ws_.value[c * k_ + j];
                        }
                    }
            }
            for (std::size_t t = 0; t < L; ++t) {
                const double davg = dstack.at(0, 0, t) / static_cast<double>(c_);
                for (std::size_t c = 0; c < c_; ++c) dx.at(b, c, t) += davg;
                dx.at(b, cmax_idx_[b * L + t], t) += dstack.at(0, 1, t);
            }
        }
        return dx;
    }

    void collect(std::vector<Param*>& out) {
        out.push_back(&w1_);
        out.push_back(&b1_);
        out.push_back(&w2_);
        out.push_back(&b2_);
        out.push_back(&ws_);
        out.push_back(&bs_);
    }

    const std::vector<double>& channel_attention() const { return ac_; }
    const std::vector<double>& spatial_attention() const { return as_; }
    double kink_gap() const { return kink_gap_; }

  private:
    std::size_t c_, mid_, k_;
    Param w1_, b1_, w2_, b2_, ws_, bs_;
    Tensor3 x_, stack_;
    std::vector<double> ac_, as_, u_, preu_, v_;
    std::vector<std::size_t> tmax_idx_, cmax_idx_;
    double kink_gap_ = std::numeric_limits<double>::infinity();
};

} // namespace ecgnet
