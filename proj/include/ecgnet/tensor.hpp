#pragma once

#include <cstddef>
#include <vector>

#include "ecgnet/common.hpp"

namespace ecgnet {

/// Rank-3 feature tensor, row-major (batch n, channel/feature h, time l).
struct Tensor3 {
    std::size_t n = 0, h = 0, l = 0;
    std::vector<double> v;

    Tensor3() = default;
    Tensor3(std::size_t n_, std::size_t h_, std::size_t l_)
        : n(n_), h(h_), l(l_), v(n_ * h_ * l_, 0.0) {
        if (n_ == 0 || h_ == 0 || l_ == 0) throw UsageError("tensor dims must be >= 1");
    }

    double& at(std::size_t i, std::size_t c, std::size_t t) { return v[(i * h + c) * l + t]; }
    double at(std::size_t i, std::size_t c, std::size_t t) const { return v[(i * h + c) * l + t]; }

    double* row(std::size_t i, std::size_t c) { return v.data() + (i * h + c) * l; }
    const double* row(std::size_t i, std::size_t c) const { return v.data() + (i * h + c) * l; }

    std::size_t size() const { return v.size(); }

    bool same_shape(const Tensor3& o) const { return n == o.n && h == o.h && l == o.l; }

    void require_finite(const char* what) const {
        if (!all_finite(v)) throw NumericError(std::string(what) + ": non-finite values");
    }
};

/// Concatenate along the feature axis; all parts share (n, ., l).
inline Tensor3 concat_features(const std::vector<const Tensor3*>& parts) {
    if (parts.empty()) throw UsageError("concat_features: no inputs");
    std::size_t total_h = 0;
    for (const Tensor3* p : parts) {
        if (p->n != parts[0]->n || p->l != parts[0]->l)
            throw UsageError("concat_features: mismatched batch or time dims");
        total_h += p->h;
    }
    Tensor3 out(parts[0]->n, total_h, parts[0]->l);
    for (std::size_t i = 0; i < out.n; ++i) {
        std::size_t c_off = 0;
        for (const Tensor3* p : parts) {
            for (std::size_t c = 0; c < p->h; ++c)
                std::copy(p->row(i, c), p->row(i, c) + p->l, out.row(i, c_off + c));
            c_off += p->h;
        }
    }
    return out;
}

} // namespace ecgnet
