#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ecgnet/common.hpp"

namespace ecgnet {

/// Parallel vectors/labels with the seed that drives any stochastic
/// augmentation. Labels: 0 = Normal/negative, 1..5 = disease classes.
struct LabeledSet {
    std::vector<std::vector<double>> vectors;
    std::vector<int> labels;
    std::uint64_t seed = 0;

    void validate() const {
        if (vectors.size() != labels.size()) throw DataError("labeled set: size mismatch");
        if (vectors.size() < 2) throw DataError("labeled set: need at least 2 samples");
        for (const auto& v : vectors)
            if (v.size() != vectors.front().size())
                throw DataError("labeled set: inconsistent vector dimensions");
    }

    std::size_t dim() const { return vectors.empty() ? 0 : vectors.front().size(); }
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

/// Indices of the k nearest candidates to `center` (self excluded), ties
/// broken by index order.
inline std::vector<std::size_t> k_nearest(const LabeledSet& s, std::size_t center,
                                          const std::vector<std::size_t>& candidates,
                                          std::size_t k) {
    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(candidates.size());
    for (std::size_t idx : candidates) {
        if (idx == center) continue;
        ranked.emplace_back(sq_dist(s.vectors[center], s.vectors[idx]), idx);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].second);
    return out;
}

} // namespace detail

/// ADASYN oversampling: each minority class gains round((m_l - m_s) * beta)
/// synthetic points, allocated by the fraction of majority-class points among
/// the k nearest neighbors, each point placed uniformly on the segment to a
/// random same-class neighbor. Originals are a verbatim prefix of the output;
/// equal seeds give bitwise-equal results.
inline LabeledSet adasyn_augment(const LabeledSet& s, std::size_t k, double beta,
                                 std::vector<std::string>* warnings = nullptr) {
    s.validate();
    if (k < 1) throw UsageError("adasyn: k must be >= 1");
    if (!(beta > 0.0 && beta <= 1.0)) throw UsageError("adasyn: beta must be in (0, 1]");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < s.labels.size(); ++i) by_class[s.labels[i]].push_back(i);
    std::size_t m_l = 0;
    int majority = by_class.begin()->first;
    for (const auto& [label, idx] : by_class)
        if (idx.size() > m_l) { m_l = idx.size(); majority = label; }

    std::vector<std::size_t> all(s.labels.size());
    std::iota(all.begin(), all.end(), 0);

    LabeledSet out = s;
    std::mt19937_64 rng(s.seed);
    auto uniform01 = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

    for (const auto& [label, members] : by_class) {
        const std::size_t m_s = members.size();
        if (m_s >= m_l) continue;
        const long n_syn = std::llround(static_cast<double>(m_l - m_s) * beta);
        if (n_syn <= 0) continue;
        if (m_s < 2)
            throw DataError("adasyn: minority class of size 1 cannot be interpolated");

        std::size_t k_density = std::min<std::size_t>(k, s.labels.size() - 1);
        std::size_t k_same = k;
        if (k_same > m_s - 1) {
            k_same = m_s - 1;
            if (warnings)
                warnings->push_back("adasyn: k clamped to " + std::to_string(k_same) +
                                    " for class " + std::to_string(label));
        }

        // density weight = majority fraction among the k nearest overall
        std::vector<double> r(m_s, 0.0);
        double r_sum = 0.0;
        for (std::size_t i = 0; i < m_s; ++i) {
            const auto nn = detail::k_nearest(s, members[i], all, k_density);
            std::size_t majority_count = 0;
            for (std::size_t idx : nn)
                if (s.labels[idx] == majority) ++majority_count;
            r[i] = static_cast<double>(majority_count) / static_cast<double>(k_density);
            r_sum += r[i];
        }
        std::vector<double> quota(m_s, 0.0);
        for (std::size_t i = 0; i < m_s; ++i)
            quota[i] = r_sum > 0.0 ? static_cast<double>(n_syn) * r[i] / r_sum
                                   : static_cast<double>(n_syn) / static_cast<double>(m_s);

        // largest-remainder apportionment so the class total is exact
        std::vector<std::size_t> g(m_s, 0);
        long assigned = 0;
        std::vector<std::pair<double, std::size_t>> rema;
        for (std::size_t i = 0; i < m_s; ++i) {
            g[i] = static_cast<std::size_t>(quota[i]);
            assigned += static_cast<long>(g[i]);
            rema.emplace_back(-(quota[i] - std::floor(quota[i])), i);
        }
        std::sort(rema.begin(), rema.end());
        for (long extra = n_syn - assigned, i = 0; extra > 0; --extra, ++i) ++g[rema[static_cast<std::size_t>(i)].second];

        for (std::size_t i = 0; i < m_s; ++i) {
            if (g[i] == 0) continue;
            const auto same_nn = detail::k_nearest(s, members[i], members, k_same);
            for (std::size_t t = 0; t < g[i]; ++t) {
                const std::size_t pick =
                    std::min(same_nn.size() - 1,
                             static_cast<std::size_t>(uniform01() * static_cast<double>(same_nn.size())));
                const double lambda = uniform01();
                const auto& xi = s.vectors[members[i]];
                const auto& xz = s.vectors[same_nn[pick]];
                std::vector<double> x_new(xi.size());
                for (std::size_t d = 0; d < xi.size(); ++d)
                    x_new[d] = xi[d] + lambda * (xz[d] - xi[d]);
                out.vectors.push_back(std::move(x_new));
                out.labels.push_back(label);
            }
        }
    }
    return out;
}

} // namespace ecgnet
