#include <catch_amalgamated.hpp>

#include "ecgnet/model.hpp"
#include "ecgnet/pipeline.hpp"
#include "test_util.hpp"

using namespace ecgnet;
using namespace testutil;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.n_channels = 2;
    cfg.input_len = 16;
    cfg.hidden = 4;
    cfg.kernel_width = 3;
    cfg.gat_dim = 3;
    cfg.gat_heads = 1;
    cfg.tst_dim = 4;
    cfg.tst_heads = 2;
    cfg.adaptive_out = 4;
    cfg.head_hidden = 6;
    cfg.cbam_reduction = 2;
    cfg.cbam_spatial_kernel = 3;
    cfg.wavelet_sigma_s = 0.004;
    cfg.wavelet_support_s = 0.016;
    return cfg;
}

} // namespace

TEST_CASE("model config validation") {
    ModelConfig cfg = tiny_config();
    CHECK_NOTHROW(cfg.validate());
    SECTION("tst_dim divisible by heads") {
        cfg.tst_dim = 5;
        CHECK_THROWS_AS(cfg.validate(), UsageError);
    }
    SECTION("at least one feature branch") {
        cfg.flags.exblock = cfg.flags.morlet = cfg.flags.db4 = false;
        CHECK_THROWS_AS(cfg.validate(), UsageError);
    }
    SECTION("at least one attention branch") {
        cfg.flags.cbam = cfg.flags.gat = cfg.flags.tst = false;
        CHECK_THROWS_AS(cfg.validate(), UsageError);
    }
    SECTION("adaptive_out bounded by input length") {
        cfg.adaptive_out = 17;
        CHECK_THROWS_AS(cfg.validate(), UsageError);
    }
}

TEST_CASE("latent width follows the enabled branches in fixed order") {
    ModelConfig cfg = tiny_config();
    CHECK(cfg.latent_width() == 4 + 2 + 2);
    cfg.flags.db4 = false;
    CHECK(cfg.latent_width() == 4 + 2);
    cfg.flags.db4 = true;
    cfg.flags.morlet = false;
    CHECK(cfg.latent_width() == 4 + 2);

    // order (exblock, morlet, db4): zero input with zero exblock params keeps
    // the exblock rows at zero while morlet rows reflect the input
    Model model(tiny_config());
    model.init_params(3);
    std::mt19937_64 rng(1);
    auto x = random_tensor(rng, 1, 2, 16, 0.2, 1.0);
    const Tensor3 latent = model.latent_features(x, Mode::Eval);
    CHECK(latent.h == 8);
}

TEST_CASE("exblock output is non-negative with the configured width") {
    ModelConfig cfg = tiny_config();
    Model model(cfg);
    model.init_params(11);
    std::mt19937_64 rng(9);
    const auto x = random_tensor(rng, 2, 2, 16);
    const Tensor3 latent = model.latent_features(x, Mode::Train);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t c = 0; c < cfg.hidden; ++c)
            for (std::size_t t = 0; t < 16; ++t) CHECK(latent.at(b, c, t) >= 0.0);
}

TEST_CASE("parameter counts match hand-derived ledgers") {
    SECTION("dense 10 -> 5 with bias is 55") {
        Dense d("d", 10, 5, Activation::None);
        std::vector<Param*> ps;
        d.collect(ps);
        std::size_t total = 0;
        for (Param* p : ps) total += p->count();
        CHECK(total == 55);
    }
    SECTION("single CBR, C_in=1, H=64, k=7 contributes 640") {
        ConvBnRelu cbr("cbr", 1, 64, 7);
        std::vector<Param*> ps;
        cbr.collect(ps);
        std::size_t total = 0;
        for (Param* p : ps) total += p->count();
        CHECK(total == 64 * 7 + 64 + 2 * 64);
    }
    SECTION("default configuration ledger") {
        ModelConfig cfg; // defaults: C=1, L=1500, hidden 64, k 7, ...
        Model model(cfg);
        const auto counts = model.count_parameters();
        // exblock: (64*1*7 + 64 + 128) + (64*64*7 + 64 + 128)
        CHECK(counts.at("exblock") == 640 + 28864);
        // gat: W 64x1500 + a 128 + P 1500x64
        CHECK(counts.at("gat") == 96000 + 128 + 96000);
        // latent = 64 + 1 + 1 = 66; cbam mid = 66/8 = 8
        CHECK(counts.at("cbam") == (8 * 66 + 8) + (66 * 8 + 66) + (2 * 7 + 1));
        // tst: in 64x66+64, four 64x64+64 projections
        CHECK(counts.at("tst") == (64 * 66 + 64) + 4 * (64 * 64 + 64));
        // fused width 66+66+64 = 196, flattened by 16
        CHECK(counts.at("fusion_hidden") == 128 * (196 * 16) + 128);
        CHECK(counts.at("head_binary") == 128 + 1);
        CHECK(counts.at("head_multi") == 5 * 128 + 5);
        std::size_t total = 0;
        for (const auto& [k, v] : counts)
            if (k != "total") total += v;
        CHECK(counts.at("total") == total);
    }
    SECTION("disabling a block removes its parameters; fusion shrinks with it") {
        ModelConfig cfg = tiny_config();
        Model full(cfg);
        const auto base = full.count_parameters();
        ModelConfig no_gat = cfg;
        no_gat.flags.gat = false;
        Model reduced(no_gat);
        const auto cut = reduced.count_parameters();
        CHECK(cut.find("gat") == cut.end());
        const std::size_t fusion_shrink = base.at("fusion_hidden") - cut.at("fusion_hidden");
        CHECK(base.at("total") - cut.at("total") == base.at("gat") + fusion_shrink);
        for (const char* unchanged : {"exblock", "cbam", "tst", "head_binary", "head_multi"})
            CHECK(base.at(unchanged) == cut.at(unchanged));
    }
}

TEST_CASE("all eight study combinations construct and run forward") {
    ModelConfig cfg = tiny_config();
    std::mt19937_64 rng(5);
    const auto x = random_tensor(rng, 2, 2, 16);
    const auto combos = default_ablation_combos();
    REQUIRE(combos.size() == 8);
    for (const auto& flags : combos) {
        ModelConfig c = cfg;
        c.flags = flags;
        Model model(c);
        model.init_params(1);
        const ModelOutput out = model.forward(x, Mode::Eval);
        CHECK(out.binary.size() == 2);
        CHECK(out.multi.size() == 2);
    }
}

TEST_CASE("forward output heads: one binary logit, five disease logits, deterministic") {
    Model model(tiny_config());
    model.init_params(17);
    std::mt19937_64 rng(3);
    const auto x = random_tensor(rng, 3, 2, 16);
    const auto a = model.forward(x, Mode::Eval);
    const auto b = model.forward(x, Mode::Eval);
    CHECK(a.binary == b.binary);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 5; ++k) CHECK(a.multi[i][k] == b.multi[i][k]);

    // zero latent + zero head params -> all logits zero
    Model zeroed(tiny_config());
    Tensor3 zero_x(1, 2, 16);
    const auto out = zeroed.forward(zero_x, Mode::Eval);
    CHECK(out.binary[0] == 0.0);
    for (double v : out.multi[0]) CHECK(v == 0.0);
}

TEST_CASE("checkpoint round-trips the exact parameter values") {
    Model model(tiny_config());
    model.init_params(23);
    std::mt19937_64 rng(31);
    const auto x = random_tensor(rng, 4, 2, 16);
    model.forward(x, Mode::Train); // move BN running stats off their defaults
    const nlohmann::json ckpt = model.checkpoint();
    const std::string text = ckpt.dump();

    Model restored(tiny_config());
    restored.load_checkpoint(nlohmann::json::parse(text));
    auto pa = model.params();
    auto pb = restored.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);

    const auto ya = model.forward(x, Mode::Eval);
    const auto yb = restored.forward(x, Mode::Eval);
    CHECK(ya.binary == yb.binary);

    SECTION("shape mismatch is rejected") {
        ModelConfig other = tiny_config();
        other.hidden = 6;
        Model wrong(other);
        CHECK_THROWS_AS(wrong.load_checkpoint(ckpt), DataError);
    }
}

TEST_CASE("full composite passes the gradient check") {
    ModelConfig cfg = tiny_config();
    cfg.n_channels = 1;
    cfg.input_len = 12;
    cfg.adaptive_out = 3;
    Model model(cfg);
    std::mt19937_64 rng(7);
    const auto x = random_tensor(rng, 2, 1, 12, 0.05, 1.0);
    auto params = model.params();

    BlockCheck chk;
    chk.params = params;
    chk.forward = [&]() {
        const ModelOutput out = model.forward(x, Mode::Train);
        Tensor3 y(x.n, 6, 1);
        for (std::size_t b = 0; b < x.n; ++b) {
            y.at(b, 0, 0) = out.binary[b];
            for (std::size_t k = 0; k < 5; ++k) y.at(b, k + 1, 0) = out.multi[b][k];
        }
        return y;
    };
    chk.backward = [&](const Tensor3& dy) {
        std::vector<double> dbin(x.n);
        std::vector<std::array<double, 5>> dmulti(x.n);
        for (std::size_t b = 0; b < x.n; ++b) {
            dbin[b] = dy.at(b, 0, 0);
            for (std::size_t k = 0; k < 5; ++k) dmulti[b][k] = dy.at(b, k + 1, 0);
        }
        model.backward(dbin, dmulti);
    };
    chk.zero_grads = [&]() { model.zero_grads(); };
    chk.kink_gap = [&]() { return model.kink_gap(); };
    CHECK(chk.run(900, 3, 1e-4, 2e-3, 0.4) < 1e-4);
}

TEST_CASE("mac counting tracks the enabled blocks") {
    ModelConfig cfg = tiny_config();
    Model model(cfg);
    const auto full = model.count_flops();
    CHECK(full.at("total") > 0);
    ModelConfig cut = cfg;
    cut.flags.tst = false;
    Model reduced(cut);
    const auto less = reduced.count_flops();
    CHECK(less.find("tst") == less.end());
    CHECK(less.at("total") < full.at("total"));
}
