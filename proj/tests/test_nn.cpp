#include <catch_amalgamated.hpp>

#include "ecgnet/layers.hpp"
#include "test_util.hpp"

using namespace ecgnet;
using namespace testutil;

TEST_CASE("softmax_stable: uniformity, shift invariance, frozen value, overflow") {
    const auto u = softmax_stable({1.7, 1.7, 1.7, 1.7});
    for (double v : u) CHECK(std::abs(v - 0.25) < 1e-15);

    std::mt19937_64 rng(2);
    std::vector<double> v(9);
    for (double& x : v) x = urand(rng, -3, 3);
    auto a = softmax_stable(v);
    for (double& x : v) x += 12.34;
    auto b = softmax_stable(v);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::abs(a[i] - b[i]) < 1e-12);
        sum += a[i];
        CHECK(a[i] > 0.0);
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);

    const auto two = softmax_stable({0.0, std::log(3.0)});
    CHECK(std::abs(two[0] - 0.25) < 1e-12);
    CHECK(std::abs(two[1] - 0.75) < 1e-12);

    const auto big = softmax_stable({1e4, -1e4, 0.0});
    CHECK(std::isfinite(big[0]));
    CHECK(std::abs(big[0] - 1.0) < 1e-12);

    CHECK_THROWS_AS(softmax_stable({}), UsageError);
}

TEST_CASE("pool: global and adaptive variants") {
    Tensor3 x(1, 1, 6);
    for (int i = 0; i < 6; ++i) x.at(0, 0, static_cast<std::size_t>(i)) = i + 1;
    const auto avg = pool(x, PoolKind::GlobalAvg);
    CHECK(avg.l == 1);
    CHECK(avg.at(0, 0, 0) == 3.5);

    Tensor3 m(1, 1, 3);
    m.at(0, 0, 0) = 1; m.at(0, 0, 1) = 5; m.at(0, 0, 2) = 2;
    CHECK(pool(m, PoolKind::GlobalMax).at(0, 0, 0) == 5.0);

    const auto ad = pool(x, PoolKind::AdaptiveAvg, 3);
    REQUIRE(ad.l == 3);
    CHECK(ad.at(0, 0, 0) == 1.5);
    CHECK(ad.at(0, 0, 1) == 3.5);
    CHECK(ad.at(0, 0, 2) == 5.5);

    Tensor3 c(2, 3, 10);
    std::fill(c.v.begin(), c.v.end(), 4.25);
    for (auto kind : {PoolKind::GlobalAvg, PoolKind::GlobalMax})
        for (double v : pool(c, kind).v) CHECK(v == 4.25);
    for (double v : pool(c, PoolKind::AdaptiveAvg, 7).v) CHECK(v == 4.25);

    CHECK_THROWS_AS(pool(x, PoolKind::AdaptiveAvg, 0), UsageError);
    CHECK_THROWS_AS(pool(x, PoolKind::AdaptiveAvg, 7), UsageError);
}

TEST_CASE("dense layer identity, sigmoid midpoint, relu cutoff") {
    SECTION("identity weights pass through") {
        Dense d("d", 3, 3, Activation::None);
        auto ps = std::vector<Param*>{};
        d.collect(ps);
        for (std::size_t i = 0; i < 3; ++i) ps[0]->value[i * 3 + i] = 1.0;
        Tensor3 x(1, 3, 1);
        x.at(0, 0, 0) = 0.3; x.at(0, 1, 0) = -1.2; x.at(0, 2, 0) = 2.0;
        const auto y = d.forward(x);
        for (std::size_t i = 0; i < 3; ++i) CHECK(y.at(0, i, 0) == x.at(0, i, 0));
    }
    SECTION("sigmoid of zero logits is one half") {
        Dense d("d", 4, 2, Activation::Sigmoid);
        Tensor3 x(1, 4, 1); // weights and biases default to zero
        const auto y = d.forward(x);
        CHECK(y.at(0, 0, 0) == 0.5);
        CHECK(y.at(0, 1, 0) == 0.5);
    }
    SECTION("relu clips the 0.5 - 1 preactivation to zero") {
        Dense d("d", 2, 1, Activation::Relu);
        auto ps = std::vector<Param*>{};
        d.collect(ps);
        ps[0]->value = {1.0, 1.0};
        ps[1]->value = {-1.0};
        Tensor3 x(1, 2, 1);
        x.at(0, 0, 0) = 0.3;
        x.at(0, 1, 0) = 0.2;
        CHECK(d.forward(x).at(0, 0, 0) == 0.0);
    }
}

TEST_CASE("grad_check harness validates itself") {
    SECTION("quadratic gradient is exact") {
        auto f = [](const std::vector<double>& p) {
            double acc = 0.0;
            for (double x : p) acc += 0.5 * x * x;
            return acc;
        };
        const std::vector<double> point{0.3, -1.1, 2.0, 0.05};
        const auto res = grad_check(f, point, point, 1e-5);
        CHECK(res.max_rel_err < 1e-8);
    }
    SECTION("dense + sigmoid + squared loss passes at eps 1e-4") {
        std::mt19937_64 rng(31);
        std::vector<double> w(6), x{0.4, -0.7}, target{0.2, 0.9, 0.1};
        for (double& v : w) v = urand(rng);
        auto f = [&](const std::vector<double>& p) {
            double loss = 0.0;
            for (std::size_t o = 0; o < 3; ++o) {
                const double z = p[o * 2] * x[0] + p[o * 2 + 1] * x[1];
                const double s = sigmoid(z);
                loss += 0.5 * (s - target[o]) * (s - target[o]);
            }
            return loss;
        };
        std::vector<double> grad(6, 0.0);
        for (std::size_t o = 0; o < 3; ++o) {
            const double z = w[o * 2] * x[0] + w[o * 2 + 1] * x[1];
            const double s = sigmoid(z);
            const double d = (s - target[o]) * s * (1.0 - s);
            grad[o * 2] = d * x[0];
            grad[o * 2 + 1] = d * x[1];
        }
        CHECK(grad_check(f, grad, w, 1e-4).max_rel_err < 1e-4);
    }
    SECTION("eps zero is rejected") {
        auto f = [](const std::vector<double>&) { return 0.0; };
        CHECK_THROWS_AS(grad_check(f, {0.0}, {1.0}, 0.0), UsageError);
    }
}

TEST_CASE("conv_bn_relu shape, identity path, relu zeroing, batch stats") {
    std::mt19937_64 rng(12);
    SECTION("default 64-filter block maps (2,1,1500) to (2,64,1500)") {
        ConvBnRelu cbr("cbr", 1, 64, 7);
        InitRng init(0);
        cbr.init(init);
        const auto x = random_tensor(rng, 2, 1, 1500, 0.0, 1.0);
        const auto y = cbr.forward(x, Mode::Train);
        CHECK(y.n == 2);
        CHECK(y.h == 64);
        CHECK(y.l == 1500);
        for (double v : y.v) CHECK(v >= 0.0);
    }
    SECTION("identity kernel with frozen BN reproduces non-negative input") {
        ConvBnRelu cbr("cbr", 1, 1, 3);
        std::vector<Param*> ps;
        cbr.collect(ps); // conv.w, conv.b, bn.gamma, bn.beta
        ps[0]->value = {0.0, 1.0, 0.0};
        const auto x = random_tensor(rng, 1, 1, 32, 0.1, 1.0);
        const auto y = cbr.forward(x, Mode::Eval); // running stats are mean 0 / var 1
        for (std::size_t t = 0; t < 32; ++t)
            CHECK(std::abs(y.at(0, 0, t) - x.at(0, 0, t)) < 1e-5 * 2); // bn eps skews slightly
    }
    SECTION("all-negative preactivations give zero output") {
        ConvBnRelu cbr("cbr", 1, 2, 3);
        std::vector<Param*> ps;
        cbr.collect(ps);
        ps[1]->value = {-5.0, -5.0};        // conv bias
        ps[3]->value = {-5.0, -5.0};        // bn shift keeps values negative
        const auto x = random_tensor(rng, 1, 1, 16, -0.01, 0.01);
        const auto y = cbr.forward(x, Mode::Eval);
        for (double v : y.v) CHECK(v == 0.0);
    }
    SECTION("train mode: pre-relu batch mean is the shift, variance the scale squared") {
        ConvBnRelu cbr("cbr", 2, 3, 5);
        InitRng init(7);
        cbr.init(init);
        std::vector<Param*> ps;
        cbr.collect(ps);
        for (std::size_t c = 0; c < 3; ++c) {
            ps[2]->value[c] = 0.5 + 0.25 * static_cast<double>(c); // gamma
            ps[3]->value[c] = -0.2 + 0.4 * static_cast<double>(c); // beta
        }
        const auto x = random_tensor(rng, 4, 2, 50);
        cbr.forward(x, Mode::Train);
        const Tensor3& pre = cbr.pre_activation();
        for (std::size_t c = 0; c < 3; ++c) {
            double mean = 0.0;
            for (std::size_t b = 0; b < 4; ++b)
                for (std::size_t t = 0; t < 50; ++t) mean += pre.at(b, c, t);
            mean /= 200.0;
            double var = 0.0;
            for (std::size_t b = 0; b < 4; ++b)
                for (std::size_t t = 0; t < 50; ++t) {
                    const double d = pre.at(b, c, t) - mean;
                    var += d * d;
                }
            var /= 200.0;
            CHECK(std::abs(mean - ps[3]->value[c]) < 1e-6);
            CHECK(std::abs(var - ps[2]->value[c] * ps[2]->value[c]) < 1e-4);
        }
    }
}

TEST_CASE("conv, batchnorm, dense backward passes match finite differences") {
    std::mt19937_64 rng(41);
    SECTION("cbr block, train and eval modes") {
        for (Mode mode : {Mode::Train, Mode::Eval}) {
            ConvBnRelu cbr("cbr", 2, 3, 5);
            const auto x = random_tensor(rng, 2, 2, 12);
            std::vector<Param*> ps;
            cbr.collect(ps);
            BlockCheck chk;
            chk.params = ps;
            chk.forward = [&]() { return cbr.forward(x, mode); };
            chk.backward = [&](const Tensor3& dy) { cbr.backward(dy); };
            chk.zero_grads = [&]() { for (Param* p : ps) p->zero_grad(); };
            chk.kink_gap = [&]() { return cbr.kink_gap(); };
            CHECK(chk.run(100 + static_cast<int>(mode), 4) < 1e-4);
        }
    }
    SECTION("dense with every activation") {
        for (Activation act : {Activation::None, Activation::Relu, Activation::Sigmoid}) {
            Dense d("d", 5, 4, act);
            const auto x = random_tensor(rng, 3, 5, 1);
            std::vector<Param*> ps;
            d.collect(ps);
            BlockCheck chk;
            chk.params = ps;
            chk.forward = [&]() { return d.forward(x); };
            chk.backward = [&](const Tensor3& dy) { d.backward(dy); };
            chk.zero_grads = [&]() { for (Param* p : ps) p->zero_grad(); };
            chk.kink_gap = [&]() { return d.kink_gap(); };
            CHECK(chk.run(200 + static_cast<int>(act), 4) < 1e-4);
        }
    }
}
