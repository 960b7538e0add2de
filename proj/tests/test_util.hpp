#pragma once

#include <functional>
#include <random>
#include <vector>

#include "ecgnet/gradcheck.hpp"
#include "ecgnet/layers.hpp"
#include "ecgnet/tensor.hpp"

namespace testutil {

inline double urand(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    return lo + (static_cast<double>(rng() >> 11) * 0x1.0p-53) * (hi - lo);
}

inline ecgnet::Tensor3 random_tensor(std::mt19937_64& rng, std::size_t n, std::size_t h,
                                     std::size_t l, double lo = -1.0, double hi = 1.0) {
    ecgnet::Tensor3 t(n, h, l);
    for (double& v : t.v) v = urand(rng, lo, hi);
    return t;
}

inline std::vector<double> pack_params(const std::vector<ecgnet::Param*>& params) {
    std::vector<double> out;
    for (const ecgnet::Param* p : params) out.insert(out.end(), p->value.begin(), p->value.end());
    return out;
}

inline void unpack_params(const std::vector<ecgnet::Param*>& params,
                          const std::vector<double>& flat) {
    std::size_t off = 0;
    for (ecgnet::Param* p : params) {
        std::copy(flat.begin() + static_cast<long>(off),
                  flat.begin() + static_cast<long>(off + p->count()), p->value.begin());
        off += p->count();
    }
}

inline std::vector<double> pack_grads(const std::vector<ecgnet::Param*>& params) {
    std::vector<double> out;
    for (const ecgnet::Param* p : params) out.insert(out.end(), p->grad.begin(), p->grad.end());
    return out;
}

inline double dot_readout(const ecgnet::Tensor3& y, const std::vector<double>& w) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * w[i];
    return acc;
}

/// Finite-difference check of a block against its hand-written backward pass.
/// `forward` runs the block on its captured input and returns the output;
/// `backward` propagates a cotangent and fills parameter gradients.
/// Seeds are retried until the forward pass sits at least `min_gap` away from
/// every ReLU/max kink, so the difference quotient never crosses one.
struct BlockCheck {
    std::vector<ecgnet::Param*> params;
    std::function<ecgnet::Tensor3()> forward;
    std::function<void(const ecgnet::Tensor3&)> backward;
    std::function<void()> zero_grads;
    std::function<double()> kink_gap; // +inf when the block is smooth

    /// max relative error over all parameters at `n_points` seeded settings.
    /// The readout is scaled by 1/|y| to keep the scalar small: difference
    /// quotients of a large scalar drown zero-gradient components in rounding
    /// noise relative to the 1e-8 denominator floor.
    double run(std::uint64_t seed, int n_points, double eps = 1e-4, double min_gap = 1e-3,
               double param_scale = 0.5) {
        double worst = 0.0;
        std::mt19937_64 rng(seed);
        int accepted = 0;
        int attempts = 0;
        while (accepted < n_points && attempts < n_points * 50) {
            ++attempts;
            std::vector<double> point(pack_params(params).size());
            for (double& v : point) v = urand(rng, -param_scale, param_scale);
            unpack_params(params, point);
            ecgnet::Tensor3 y0 = forward();
            if (kink_gap() < min_gap) continue;
            ++accepted;
            const double rscale = 1.0 / static_cast<double>(y0.v.size());
            std::vector<double> readout(y0.v.size());
            for (double& v : readout) v = urand(rng, -rscale, rscale);
            ecgnet::Tensor3 dy = y0;
            dy.v = readout;
            zero_grads();
            backward(dy);
            const std::vector<double> analytic = pack_grads(params);
            auto f = [&](const std::vector<double>& p) {
                unpack_params(params, p);
                const double val = dot_readout(forward(), readout);
                return val;
            };
            const auto res = ecgnet::grad_check(f, analytic, point, eps);
            unpack_params(params, point);
            worst = std::max(worst, res.max_rel_err);
        }
        if (accepted < n_points)
            throw std::runtime_error("BlockCheck: could not find enough kink-free points");
        return worst;
    }
};

} // namespace testutil
