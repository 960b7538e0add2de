#pragma once

#include <limits>
#include <vector>

#include "ecgnet/layers.hpp"

namespace ecgnet {

/// Graph attention over the feature axis: each feature row is a node with its
/// time profile as the node vector, the graph is fully connected including
/// self-loops. Attention per pair (i,j) follows
///   e_ij = LeakyReLU(a^T [W h_i || W h_j]),  alpha = softmax_j(e_ij),
/// node output = P * sum_j alpha_ij W h_j, projected back to the input width.
/// Multiple heads are averaged.
class GatLayer {
  public:
    GatLayer(std::string name, std::size_t node_dim, std::size_t feat_dim, std::size_t heads,
             double slope = 0.2)
        : node_dim_(node_dim), feat_dim_(feat_dim), heads_(heads), slope_(slope) {
        if (heads < 1) throw UsageError("gat: heads must be >= 1");
        for (std::size_t k = 0; k < heads; ++k) {
            const std::string h = name + ".h" + std::to_string(k);
            w_.emplace_back(h + ".w", std::vector<std::size_t>{feat_dim, node_dim});
            a_.emplace_back(h + ".a", std::vector<std::size_t>{2 * feat_dim});
            p_.emplace_back(h + ".p", std::vector<std::size_t>{node_dim, feat_dim});
        }
    }

    void init(InitRng& rng) {
        for (std::size_t k = 0; k < heads_; ++k) {
            rng.xavier(w_[k], node_dim_, feat_dim_);
            rng.xavier(a_[k], 2 * feat_dim_, 1);
            rng.xavier(p_[k], feat_dim_, node_dim_);
        }
    }

    Tensor3 forward(const Tensor3& x) {
        if (x.l != node_dim_) throw UsageError("gat: node dimension mismatch");
        if (x.h < 1) throw UsageError("gat: need at least one node");
        x_ = x;
        const std::size_t nn = x.h;
        kink_gap_ = std::numeric_limits<double>::infinity();
        z_.assign(x.n * heads_, {});
        alpha_.assign(x.n * heads_, {});
        agg_.assign(x.n * heads_, {});
        pre_.assign(x.n * heads_, {});
        Tensor3 y(x.n, x.h, x.l);
        const double head_scale = 1.0 / static_cast<double>(heads_);
        for (std::size_t b = 0; b < x.n; ++b)
            for (std::size_t k = 0; k < heads_; ++k) {
                auto& z = z_[b * heads_ + k];
                z.assign(nn * feat_dim_, 0.0);
                for (std::size_t i = 0; i < nn; ++i) {
                    const double* hi = x.row(b, i);
                    for (std::size_t fidx = 0; fidx < feat_dim_; ++fidx) {
                        const double* wr = &w_[k].value[fidx * node_dim_];
                        double acc = 0.0;
                        for (std::size_t t = 0; t < node_dim_; ++t) acc += wr[t] * hi[t];
                        z[i * feat_dim_ + fidx] = acc;
                    }
                }
                // split a = [a1; a2] so e_ij = leaky(a1.z_i + a2.z_j)
                std::vector<double> s(nn, 0.0), r(nn, 0.0);
                const double* a1 = a_[k].value.data();
                const double* a2 = a1 + feat_dim_;
                for (std::size_t i = 0; i < nn; ++i)
                    for (std::size_t fidx = 0; fidx < feat_dim_; ++fidx) {
                        s[i] += a1[fidx] * z[i * feat_dim_ + fidx];
                        r[i] += a2[fidx] * z[i * feat_dim_ + fidx];
                    }
                auto& pre = pre_[b * heads_ + k];
                auto& alpha = alpha_[b * heads_ + k];
                pre.assign(nn * nn, 0.0);
                alpha.assign(nn * nn, 0.0);
                for (std::size_t i = 0; i < nn; ++i) {
                    for (std::size_t j = 0; j < nn; ++j) {
                        const double e = s[i] + r[j];
                        kink_gap_ = std::min(kink_gap_, std::abs(e));
                        pre[i * nn + j] = e;
                        alpha[i * nn + j] = e > 0.0 ? e : slope_ * e;
                    }
                    softmax_stable_inplace(&alpha[i * nn], nn);
                }
                auto& agg = agg_[b * heads_ + k];
                agg.assign(nn * feat_dim_, 0.0);
                for (std::size_t i = 0; i < nn; ++i)
                    for (std::size_t j = 0; j < nn; ++j) {
                        const double aij = alpha[i * nn + j];
                        for (std::size_t fidx = 0; fidx < feat_dim_; ++fidx)
                            agg[i * feat_dim_ + fidx] += aij * z[j * feat_dim_ + fidx];
                    }
                for (std::size_t i = 0; i < nn; ++i) {
                    double* yo = y.row(b, i);
                    for (std::size_t t = 0; t < node_dim_; ++t) {
                        const double* pr = &p_[k].value[t * feat_dim_];
                        double acc = 0.0;
                        for (std::size_t fidx = 0; fidx < feat_dim_; ++fidx)
                            acc += pr[fidx] * agg[i * feat_dim_ + fidx];
                        yo[t] += head_scale * acc;
                    }
                }
            }
        return y;
    }

    Tensor3 backward(const Tensor3& dy) {
        const std::size_t nn = x_.h;
        const double head_scale = 1.0 / static_cast<double>(heads_);
        Tensor3 dx(x_.n, x_.h, x_.l);
        for (std::size_t b = 0; b < x_.n; ++b)
            for (std::size_t k = 0; k < heads_; ++k) {
                const auto& z = z_[b * heads_ + k];
                const auto& alpha = alpha_[b * heads_ + k];
                const auto& agg = agg_[b * heads_ + k];
                const auto& pre = pre_[b * heads_ + k];
                std::vector<double> dagg(nn * feat_dim_, 0.0);
                for (std::size_t i = 0; i < nn; ++i) {
                    const double* dyi = dy.row(b, i);
                    for (std::size_t t = 0; t < node_dim_; ++t) {
                        const double d = head_scale * dyi[t];
                        const double* pr = &p_[k].value[t * feat_dim_];
                        double* gp = &p_[k].grad[t * feat_dim_];
                        for (std::size_t fidx = 0; fidx < feat_dim_; ++fidx) {
                            gp[fidx] += d * agg[i * feat_dim_ + fidx];
                            dagg[i * feat_dim_ + fidx] += d * pr[fidx];
                        }
                    }
                }
                std::vector<double> dz(nn * feat_dim_, 0.0);
                std::vector<double> ds(nn, 0.0), dr(nn, 0.0);
                for (std::size_t i = 0; i < nn; ++i) {
                    std::vector<double> dalpha(nn, 0.0);
                    double dot = 0.0;
                    for (std::size_t j = 0; j < nn; ++j) {
                        double acc = 0.0;
                        for (std::size_t fidx = 0; fidx < feat_dim_; ++fidx)
                            acc += dagg[i * feat_dim_ + fidx] * z[j * feat_dim_ + fidx];
                        dalpha[j] = acc;
                        dot += acc * alpha[i * nn + j];
                        const double aij = alpha[i * nn + j];
                        for (std::size_t fidx = 0; fidx < feat_dim_; ++fidx)
                            dz[j * feat_dim_ + fidx] += aij * dagg[i * feat_dim_ + fidx];
                    }
                    for (std::size_t j = 0; j < nn; ++j) {
                        const double de = alpha[i * nn + j] * (dalpha[j] - dot);
                        const double dpre = de * (pre[i * nn + j] > 0.0 ? 1.0 : slope_);
                        ds[i] += dpre;
                        dr[j] += dpre;
                    }
                }
                double* da1 = a_[k].grad.data();
                double* da2 = da1 + feat_dim_;
                const double* a1 = a_[k].value.data();
                const double* a2 = a1 + feat_dim_;
                for (std::size_t i = 0; i < nn; ++i)
                    for (std::size_t fidx = 0; fidx < feat_dim_; ++fidx) {
                        da1[fidx] += ds[i] * z[i * feat_dim_ + fidx];
                        da2[fidx] += dr[i] * z[i * feat_dim_ + fidx];
                        dz[i * feat_dim_ + fidx] += ds[i] * a1[fidx] + dr[i] * a2[fidx];
                    }
                for (std::size_t i = 0; i < nn; ++i) {
                    const double* hi = x_.row(b, i);
                    double* dxi = dx.row(b, i);
                    for (std::size_t fidx = 0; fidx < feat_dim_; ++fidx) {
                        const double dzf = dz[i * feat_dim_ + fidx];
                        const double* wr = &w_[k].value[fidx * node_dim_];
                        double* gw = &w_[k].grad[fidx * node_dim_];
                        for (std::size_t t = 0; t < node_dim_; ++t) {
                            gw[t] += dzf * hi[t];
                            dxi[t] += dzf * wr[t];
                        }
                    }
                }
            }
        return dx;
    }

    void collect(std::vector<Param*>& out) {
        for (std::size_t k = 0; k < heads_; ++k) {
            out.push_back(&w_[k]);
            out.push_back(&a_[k]);
            out.push_back(&p_[k]);
        }
    }

    /// Attention rows of the last forward pass, head `k`, batch `b`.
    const std::vector<double>& attention(std::size_t b, std::size_t k) const {
        return alpha_[b * heads_ + k];
    }
    double kink_gap() const { return kink_gap_; }

  private:
    std::size_t node_dim_, feat_dim_, heads_;
    double slope_;
    std::vector<Param> w_, a_, p_;
    Tensor3 x_;
    std::vector<std::vector<double>> z_, alpha_, agg_, pre_;
    double kink_gap_ = std::numeric_limits<double>::infinity();
};

} // namespace ecgnet
