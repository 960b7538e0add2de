#include <catch_amalgamated.hpp>

#include "ecgnet/cbam.hpp"
#include "ecgnet/gat.hpp"
#include "ecgnet/tst.hpp"
#include "test_util.hpp"

using namespace ecgnet;
using namespace testutil;

TEST_CASE("gat: identical nodes attend uniformly, rows sum to one") {
    std::mt19937_64 rng(61);
    GatLayer gat("gat", 10, 4, 1);
    InitRng init(2);
    gat.init(init);

    Tensor3 x(1, 5, 10);
    std::vector<double> profile(10);
    for (double& v : profile) v = urand(rng);
    for (std::size_t c = 0; c < 5; ++c)
        std::copy(profile.begin(), profile.end(), x.row(0, c));
    gat.forward(x);
    const auto& alpha = gat.attention(0, 0);
    for (std::size_t i = 0; i < 5; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(std::abs(alpha[i * 5 + j] - 0.2) < 1e-12);
            row_sum += alpha[i * 5 + j];
        }
        CHECK(std::abs(row_sum - 1.0) < 1e-12);
    }

    const auto y = random_tensor(rng, 2, 5, 10);
    gat.forward(y);
    const auto& a2 = gat.attention(1, 0);
    for (std::size_t i = 0; i < 5; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < 5; ++j) row_sum += a2[i * 5 + j];
        CHECK(std::abs(row_sum - 1.0) < 1e-12);
    }
}

TEST_CASE("gat: single node gets weight one and the projected transform") {
    GatLayer gat("gat", 6, 3, 1);
    InitRng init(9);
    gat.init(init);
    std::mt19937_64 rng(5);
    const auto x = random_tensor(rng, 1, 1, 6);
    const auto y = gat.forward(x);
    CHECK(gat.attention(0, 0)[0] == 1.0);

    std::vector<Param*> ps;
    gat.collect(ps); // w, a, p
    std::vector<double> z(3, 0.0);
    for (std::size_t f = 0; f < 3; ++f)
        for (std::size_t t = 0; t < 6; ++t) z[f] += ps[0]->value[f * 6 + t] * x.at(0, 0, t);
    for (std::size_t t = 0; t < 6; ++t) {
        double expect = 0.0;
        for (std::size_t f = 0; f < 3; ++f) expect += ps[2]->value[t * 3 + f] * z[f];
        CHECK(std::abs(y.at(0, 0, t) - expect) < 1e-12);
    }
}

TEST_CASE("gat backward matches finite differences") {
    std::mt19937_64 rng(71);
    for (std::size_t heads : {1u, 2u}) {
        GatLayer gat("gat", 7, 3, heads);
        const auto x = random_tensor(rng, 2, 4, 7);
        std::vector<Param*> ps;
        gat.collect(ps);
        BlockCheck chk;
        chk.params = ps;
        chk.forward = [&]() { return gat.forward(x); };
        chk.backward = [&](const Tensor3& dy) { gat.backward(dy); };
        chk.zero_grads = [&]() { for (Param* p : ps) p->zero_grad(); };
        chk.kink_gap = [&]() { return gat.kink_gap(); };
        CHECK(chk.run(300 + heads, 4) < 1e-4);
    }
}

TEST_CASE("cbam: attention in (0,1), zero input passthrough, shape, damping") {
    std::mt19937_64 rng(81);
    CbamLayer cbam("cbam", 6, 2, 3);
    InitRng init(4);
    cbam.init(init);
    const auto x = random_tensor(rng, 2, 6, 11);
    const auto y = cbam.forward(x);
    CHECK(y.n == x.n);
    CHECK(y.h == x.h);
    CHECK(y.l == x.l);
    for (double a : cbam.channel_attention()) {
        CHECK(a > 0.0);
        CHECK(a < 1.0);
    }
    for (double a : cbam.spatial_attention()) {
        CHECK(a > 0.0);
        CHECK(a < 1.0);
    }
    for (std::size_t i = 0; i < y.v.size(); ++i) CHECK(std::abs(y.v[i]) <= std::abs(x.v[i]));

    Tensor3 zero(2, 6, 11);
    for (double v : cbam.forward(zero).v) CHECK(v == 0.0);
}

TEST_CASE("cbam backward matches finite differences") {
    std::mt19937_64 rng(91);
    CbamLayer cbam("cbam", 5, 2, 3);
    const auto x = random_tensor(rng, 2, 5, 9);
    std::vector<Param*> ps;
    cbam.collect(ps);
    BlockCheck chk;
    chk.params = ps;
    chk.forward = [&]() { return cbam.forward(x); };
    chk.backward = [&](const Tensor3& dy) { cbam.backward(dy); };
    chk.zero_grads = [&]() { for (Param* p : ps) p->zero_grad(); };
    chk.kink_gap = [&]() { return cbam.kink_gap(); };
    CHECK(chk.run(400, 4) < 1e-4);
}

TEST_CASE("tst: attention rows sum to one; uniform without position encoding") {
    std::mt19937_64 rng(101);
    TstLayer tst("tst", 3, 4, 2);
    InitRng init(6);
    tst.init(init);
    const auto x = random_tensor(rng, 1, 3, 5);
    tst.forward(x);
    for (std::size_t hd = 0; hd < 2; ++hd) {
        const auto probs = tst.attention_rows(0, hd);
        for (std::size_t t = 0; t < 5; ++t) {
            double sum = 0.0;
            for (std::size_t s = 0; s < 5; ++s) sum += probs[t * 5 + s];
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }

    TstLayer plain("tst", 3, 4, 2, /*position_encoding=*/false);
    plain.init(init);
    Tensor3 same(1, 3, 5);
    for (std::size_t c = 0; c < 3; ++c) {
        const double v = urand(rng);
        for (std::size_t t = 0; t < 5; ++t) same.at(0, c, t) = v;
    }
    plain.forward(same);
    const auto probs = plain.attention_rows(0, 0);
    for (double p : probs) CHECK(std::abs(p - 0.2) < 1e-12);
}

TEST_CASE("tst single head matches a hand-rolled attention oracle") {
    // d_model 2, L 3, one head: verify the exact softmax(QK^T / sqrt(2)) V path
    TstLayer tst("tst", 2, 2, 1, /*position_encoding=*/false);
    std::vector<Param*> ps;
    tst.collect(ps); // win, bin, wq, bq, wk, bk, wv, bv, wo, bo
    ps[0]->value = {1.0, 0.0, 0.0, 1.0}; // identity input projection
    ps[2]->value = {0.7, -0.2, 0.4, 0.9};
    ps[4]->value = {-0.3, 0.8, 0.5, 0.1};
    ps[6]->value = {0.2, 0.6, -0.5, 0.3};
    ps[8]->value = {1.0, 0.0, 0.0, 1.0}; // identity output projection

    Tensor3 x(1, 2, 3);
    const double xv[2][3] = {{0.3, -0.4, 0.9}, {1.1, 0.2, -0.6}};
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 3; ++t) x.at(0, c, t) = xv[c][t];
    const auto y = tst.forward(x);

    // oracle
    double q[2][3], k[2][3], v[2][3];
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t r = 0; r < 2; ++r) {
            q[r][t] = ps[2]->value[r * 2] * xv[0][t] + ps[2]->value[r * 2 + 1] * xv[1][t];
            k[r][t] = ps[4]->value[r * 2] * xv[0][t] + ps[4]->value[r * 2 + 1] * xv[1][t];
            v[r][t] = ps[6]->value[r * 2] * xv[0][t] + ps[6]->value[r * 2 + 1] * xv[1][t];
        }
    for (std::size_t t = 0; t < 3; ++t) {
        double logits[3], probs[3];
        double mx = -1e300;
        for (std::size_t s = 0; s < 3; ++s) {
            logits[s] = (q[0][t] * k[0][s] + q[1][t] * k[1][s]) / std::sqrt(2.0);
            mx = std::max(mx, logits[s]);
        }
        double sum = 0.0;
        for (std::size_t s = 0; s < 3; ++s) {
            probs[s] = std::exp(logits[s] - mx);
            sum += probs[s];
        }
        for (std::size_t s = 0; s < 3; ++s) probs[s] /= sum;
        for (std::size_t r = 0; r < 2; ++r) {
            double attn = 0.0;
            for (std::size_t s = 0; s < 3; ++s) attn += probs[s] * v[r][s];
            const double expect = xv[r][t] + attn; // identity projections + residual
            CHECK(std::abs(y.at(0, r, t) - expect) < 1e-12);
        }
    }
}

TEST_CASE("tst backward matches finite differences") {
    std::mt19937_64 rng(111);
    TstLayer tst("tst", 3, 4, 2);
    const auto x = random_tensor(rng, 2, 3, 6);
    std::vector<Param*> ps;
    tst.collect(ps);
    BlockCheck chk;
    chk.params = ps;
    chk.forward = [&]() { return tst.forward(x); };
    chk.backward = [&](const Tensor3& dy) { tst.backward(dy); };
    chk.zero_grads = [&]() { for (Param* p : ps) p->zero_grad(); };
    chk.kink_gap = [&]() { return tst.kink_gap(); };
    CHECK(chk.run(500, 4) < 1e-4);
}
