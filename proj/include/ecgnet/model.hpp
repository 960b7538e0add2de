#pragma once

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecgnet/cbam.hpp"
#include "ecgnet/gat.hpp"
#include "ecgnet/layers.hpp"
#include "ecgnet/tst.hpp"
#include "ecgnet/wavelet.hpp"

namespace ecgnet {

constexpr std::size_t kNumDiseaseClasses = 5; // AM, CD, MI, QT, HE

struct AblationFlags {
    bool exblock = true, morlet = true, db4 = true;
    bool cbam = true, gat = true, tst = true;

    bool operator==(const AblationFlags&) const = default;

    std::string describe() const {
        std::string s;
        auto add = [&](bool on, const char* name) {
            if (on) {
                if (!s.empty()) s += ',';
                s += name;
            }
        };
        add(exblock, "exblock");
        add(morlet, "morlet");
        add(db4, "db4");
        add(cbam, "cbam");
        add(gat, "gat");
        add(tst, "tst");
        return s;
    }
};

struct ModelConfig {
    std::size_t n_channels = 1;
    std::size_t input_len = 1500;
    std::size_t hidden = 64;
    std::size_t kernel_width = 7;
    std::size_t gat_dim = 64;
    std::size_t gat_heads = 1;
    std::size_t tst_heads = 4;
    std::size_t tst_dim = 64;
    std::size_t adaptive_out = 16;
    std::size_t head_hidden = 128;
    std::size_t cbam_reduction = 8;
    std::size_t cbam_spatial_kernel = 7;
    double wavelet_sigma_s = 0.05;
    double wavelet_support_s = 0.20;
    AblationFlags flags;

    std::size_t latent_width() const {
        return (flags.exblock ? hidden : 0) + (flags.morlet ? n_channels : 0) +
               (flags.db4 ? n_channels : 0);
    }
    std::size_t fused_width() const {
        const std::size_t lat = latent_width();
        return (flags.gat ? lat : 0) + (flags.cbam ? lat : 0) + (flags.tst ? tst_dim : 0);
    }

    void validate() const {
        if (n_channels < 1 || input_len < 1) throw UsageError("model: empty input shape");
        if (tst_heads < 1 || tst_dim % tst_heads != 0)
            throw UsageError("model: tst_dim must be divisible by tst_heads");
        if (kernel_width % 2 == 0 || cbam_spatial_kernel % 2 == 0)
            throw UsageError("model: kernel widths must be odd");
        if (!flags.exblock && !flags.morlet && !flags.db4)
            throw UsageError("model: at least one feature branch must be enabled");
        if (!flags.cbam && !flags.gat && !flags.tst)
            throw UsageError("model: at least one attention branch must be enabled");
        if (adaptive_out < 1 || adaptive_out > input_len)
            throw UsageError("model: adaptive_out must be in [1, input_len]");
        if (flags.morlet) {
            const std::size_t taps =
                2 * static_cast<std::size_t>(std::lround(wavelet_support_s * 250.0)) + 1;
            if (taps > input_len)
                throw UsageError("model: morlet kernel longer than input; shrink wavelet_sigma_s");
        }
    }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"n_channels", c.n_channels},
                       {"input_len", c.input_len},
                       {"hidden", c.hidden},
                       {"kernel_width", c.kernel_width},
                       {"gat_dim", c.gat_dim},
                       {"gat_heads", c.gat_heads},
                       {"tst_heads", c.tst_heads},
                       {"tst_dim", c.tst_dim},
                       {"adaptive_out", c.adaptive_out},
                       {"head_hidden", c.head_hidden},
                       {"cbam_reduction", c.cbam_reduction},
                       {"cbam_spatial_kernel", c.cbam_spatial_kernel},
                       {"wavelet_sigma_s", c.wavelet_sigma_s},
                       {"wavelet_support_s", c.wavelet_support_s},
                       {"flags",
                        {{"exblock", c.flags.exblock},
                         {"morlet", c.flags.morlet},
                         {"db4", c.flags.db4},
                         {"cbam", c.flags.cbam},
                         {"gat", c.flags.gat},
                         {"tst", c.flags.tst}}}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    j.at("n_channels").get_to(c.n_channels);
    j.at("input_len").get_to(c.input_len);
    j.at("hidden").get_to(c.hidden);
    j.at("kernel_width").get_to(c.kernel_width);
    j.at("gat_dim").get_to(c.gat_dim);
    j.at("gat_heads").get_to(c.gat_heads);
    j.at("tst_heads").get_to(c.tst_heads);
    j.at("tst_dim").get_to(c.tst_dim);
    j.at("adaptive_out").get_to(c.adaptive_out);
    j.at("head_hidden").get_to(c.head_hidden);
    j.at("cbam_reduction").get_to(c.cbam_reduction);
    j.at("cbam_spatial_kernel").get_to(c.cbam_spatial_kernel);
    j.at("wavelet_sigma_s").get_to(c.wavelet_sigma_s);
    j.at("wavelet_support_s").get_to(c.wavelet_support_s);
    const auto& f = j.at("flags");
    f.at("exblock").get_to(c.flags.exblock);
    f.at("morlet").get_to(c.flags.morlet);
    f.at("db4").get_to(c.flags.db4);
    f.at("cbam").get_to(c.flags.cbam);
    f.at("gat").get_to(c.flags.gat);
    f.at("tst").get_to(c.flags.tst);
}

struct ModelOutput {
    std::vector<double> binary;                        // one gate logit per record
    std::vector<std::array<double, 5>> multi;          // five disease logits per record
};

/// The assembled network: ExBlock plus fixed Morlet/DB4 feature branches feed
/// a shared latent, GAT/CBAM/TST attend over it in parallel, and the fused
/// result drives a shared hidden layer with binary and 5-class affine heads.
class Model {
  public:
    explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        if (cfg.flags.exblock) {
            cbr1_ = std::make_unique<ConvBnRelu>("exblock.cbr1", cfg.n_channels, cfg.hidden,
                                                 cfg.kernel_width);
            cbr2_ = std::make_unique<ConvBnRelu>("exblock.cbr2", cfg.hidden, cfg.hidden,
                                                 cfg.kernel_width);
        }
        if (cfg.flags.morlet) {
            WaveletConfig wc;
            wc.sigma = cfg.wavelet_sigma_s;
            wc.support_halfwidth_s = cfg.wavelet_support_s;
            morlet_kernel_ = morlet_kernel(wc, 250.0);
        }
        const std::size_t lat = cfg.latent_width();
        if (cfg.flags.gat)
            gat_ = std::make_unique<GatLayer>("gat", cfg.input_len, cfg.gat_dim, cfg.gat_heads);
        if (cfg.flags.cbam)
            cbam_ = std::make_unique<CbamLayer>("cbam", lat, cfg.cbam_reduction,
                                                cfg.cbam_spatial_kernel);
        if (cfg.flags.tst)
            tst_ = std::make_unique<TstLayer>("tst", lat, cfg.tst_dim, cfg.tst_heads);
        const std::size_t flat = cfg.fused_width() * cfg.adaptive_out;
        hidden_ = std::make_unique<Dense>("fusion.hidden", flat, cfg.head_hidden, Activation::Relu);
        head_bin_ = std::make_unique<Dense>("head_binary", cfg.head_hidden, 1, Activation::None);
        head_multi_ = std::make_unique<Dense>("head_multi", cfg.head_hidden, kNumDiseaseClasses,
                                              Activation::None);
    }

    const ModelConfig& config() const { return cfg_; }

    void init_params(std::uint64_t seed) {
        InitRng rng(seed);
        if (cbr1_) { cbr1_->init(rng); cbr2_->init(rng); }
        if (gat_) gat_->init(rng);
        if (cbam_) cbam_->init(rng);
        if (tst_) tst_->init(rng);
        hidden_->init(rng);
        head_bin_->init(rng);
        head_multi_->init(rng);
    }

    Tensor3 latent_features(const Tensor3& x, Mode mode) {
        if (x.h != cfg_.n_channels || x.l != cfg_.input_len)
            throw UsageError("model: input shape mismatch");
        std::vector<const Tensor3*> parts;
        if (cfg_.flags.exblock) ex_out_ = cbr2_->forward(cbr1_->forward(x, mode), mode);
        if (cfg_.flags.morlet) {
            morlet_out_ = Tensor3(x.n, x.h, x.l);
            for (std::size_t b = 0; b < x.n; ++b)
                for (std::size_t c = 0; c < x.h; ++c) {
                    std::vector<double> row(x.row(b, c), x.row(b, c) + x.l);
                    if (morlet_kernel_.size() > row.size())
                        throw DataError("model: morlet kernel longer than signal");
                    auto feat = detail::correlate_same(row, morlet_kernel_);
                    std::copy(feat.begin(), feat.end(), morlet_out_.row(b, c));
                }
        }
        if (cfg_.flags.db4) {
            db4_out_ = Tensor3(x.n, x.h, x.l);
            for (std::size_t b = 0; b < x.n; ++b)
                for (std::size_t c = 0; c < x.h; ++c) {
                    std::vector<double> row(x.row(b, c), x.row(b, c) + x.l);
                    auto [lo, hi] = db4_analysis(row, db4_);
                    auto feat = db4_feature(lo, hi, x.l);
                    std::copy(feat.begin(), feat.end(), db4_out_.row(b, c));
                }
        }
        if (cfg_.flags.exblock) parts.push_back(&ex_out_);
        if (cfg_.flags.morlet) parts.push_back(&morlet_out_);
        if (cfg_.flags.db4) parts.push_back(&db4_out_);
        return concat_features(parts);
    }

    ModelOutput forward(const Tensor3& x, Mode mode) {
        latent_ = latent_features(x, mode);
        std::vector<const Tensor3*> parts;
        if (cfg_.flags.gat) { gat_out_ = gat_->forward(latent_); parts.push_back(&gat_out_); }
        if (cfg_.flags.cbam) { cbam_out_ = cbam_->forward(latent_); parts.push_back(&cbam_out_); }
        if (cfg_.flags.tst) { tst_out_ = tst_->forward(latent_); parts.push_back(&tst_out_); }
        fused_ = concat_features(parts);
        pooled_ = pool(fused_, PoolKind::AdaptiveAvg, cfg_.adaptive_out);

        Tensor3 flat(x.n, pooled_.h * pooled_.l, 1);
        for (std::size_t b = 0; b < x.n; ++b)
            for (std::size_t c = 0; c < pooled_.h; ++c)
                for (std::size_t o = 0; o < pooled_.l; ++o)
                    flat.at(b, c * pooled_.l + o, 0) = pooled_.at(b, c, o);
        hidden_out_ = hidden_->forward(flat);
        const Tensor3 bin = head_bin_->forward(hidden_out_);
        const Tensor3 multi = head_multi_->forward(hidden_out_);

        ModelOutput out;
        out.binary.resize(x.n);
        out.multi.resize(x.n);
        for (std::size_t b = 0; b < x.n; ++b) {
            out.binary[b] = bin.at(b, 0, 0);
            for (std::size_t k = 0; k < kNumDiseaseClasses; ++k)
                out.multi[b][k] = multi.at(b, k, 0);
        }
        return out;
    }

    /// Accumulates parameter gradients for the last forward pass. The input
    /// gradient is discarded; the fixed wavelet branches carry no parameters.
    void backward(const std::vector<double>& dbinary,
                  const std::vector<std::array<double, 5>>& dmulti) {
        const std::size_t n = latent_.n;
        Tensor3 dbin_t(n, 1, 1), dmulti_t(n, kNumDiseaseClasses, 1);
        for (std::size_t b = 0; b < n; ++b) {
            dbin_t.at(b, 0, 0) = dbinary[b];
            for (std::size_t k = 0; k < kNumDiseaseClasses; ++k)
                dmulti_t.at(b, k, 0) = dmulti[b][k];
        }
        Tensor3 dhidden = head_bin_->backward(dbin_t);
        const Tensor3 dh2 = head_multi_->backward(dmulti_t);
        for (std::size_t i = 0; i < dhidden.v.size(); ++i) dhidden.v[i] += dh2.v[i];
        const Tensor3 dflat = hidden_->backward(dhidden);

        Tensor3 dpooled(n, pooled_.h, pooled_.l);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < pooled_.h; ++c)
                for (std::size_t o = 0; o < pooled_.l; ++o)
                    dpooled.at(b, c, o) = dflat.at(b, c * pooled_.l + o, 0);

        Tensor3 dfused(n, fused_.h, fused_.l);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < fused_.h; ++c)
                for (std::size_t o = 0; o < pooled_.l; ++o) {
                    const std::size_t t0 = o * fused_.l / pooled_.l;
                    const std::size_t t1 = (o + 1) * fused_.l / pooled_.l;
                    const double g = dpooled.at(b, c, o) / static_cast<double>(t1 - t0);
                    for (std::size_t t = t0; t < t1; ++t) dfused.at(b, c, t) = g;
                }

        Tensor3 dlatent(n, latent_.h, latent_.l);
        std::size_t off = 0;
        auto take = [&](std::size_t width) {
            Tensor3 part(n, width, fused_.l);
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t c = 0; c < width; ++c)
                    std::copy(dfused.row(b, off + c), dfused.row(b, off + c) + fused_.l,
                              part.row(b, c));
            off += width;
            return part;
        };
        auto add_into = [&](const Tensor3& src) {
            for (std::size_t i = 0; i < dlatent.v.size(); ++i) dlatent.v[i] += src.v[i];
        };
        if (cfg_.flags.gat) add_into(gat_->backward(take(latent_.h)));
        if (cfg_.flags.cbam) add_into(cbam_->backward(take(latent_.h)));
        if (cfg_.flags.tst) { const Tensor3 d = take(cfg_.tst_dim); add_into(tst_->backward(d)); }

        if (cfg_.flags.exblock) {
            Tensor3 dex(n, cfg_.hidden, latent_.l);
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t c = 0; c < cfg_.hidden; ++c)
                    std::copy(dlatent.row(b, c), dlatent.row(b, c) + latent_.l, dex.row(b, c));
            cbr1_->backward(cbr2_->backward(dex));
        }
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        if (cbr1_) { cbr1_->collect(out); cbr2_->collect(out); }
        if (gat_) gat_->collect(out);
        if (cbam_) cbam_->collect(out);
        if (tst_) tst_->collect(out);
        hidden_->collect(out);
        head_bin_->collect(out);
        head_multi_->collect(out);
        return out;
    }

    void zero_grads() {
        for (Param* p : params()) p->zero_grad();
    }

    /// Trainable scalar counts per block; BN running statistics excluded.
    std::map<std::string, std::size_t> count_parameters() {
        std::map<std::string, std::size_t> counts;
        auto tally = [&](const std::string& block, std::vector<Param*> ps) {
            std::size_t c = 0;
            for (Param* p : ps) c += p->count();
            counts[block] = c;
        };
        std::vector<Param*> tmp;
        if (cbr1_) { cbr1_->collect(tmp); cbr2_->collect(tmp); tally("exblock", tmp); tmp.clear(); }
        if (gat_) { gat_->collect(tmp); tally("gat", tmp); tmp.clear(); }
        if (cbam_) { cbam_->collect(tmp); tally("cbam", tmp); tmp.clear(); }
        if (tst_) { tst_->collect(tmp); tally("tst", tmp); tmp.clear(); }
        hidden_->collect(tmp); tally("fusion_hidden", tmp); tmp.clear();
        head_bin_->collect(tmp); tally("head_binary", tmp); tmp.clear();
        head_multi_->collect(tmp); tally("head_multi", tmp); tmp.clear();
        std::size_t total = 0;
        for (const auto& [k, v] : counts) total += v;
        counts["total"] = total;
        return counts;
    }

    /// Forward multiply-accumulate counts for one record, per block.
    std::map<std::string, std::size_t> count_flops() const {
        std::map<std::string, std::size_t> f;
        const std::size_t L = cfg_.input_len, C = cfg_.n_channels, H = cfg_.hidden;
        const std::size_t lat = cfg_.latent_width(), D = cfg_.tst_dim;
        if (cfg_.flags.exblock)
            f["exblock"] = H * C * cfg_.kernel_width * L + H * H * cfg_.kernel_width * L;
        if (cfg_.flags.morlet) f["morlet"] = C * L * morlet_kernel_.size();
        if (cfg_.flags.db4) f["db4"] = C * (4 * L + L / 2 + L);
        if (cfg_.flags.gat)
            f["gat"] = cfg_.gat_heads *
                       (lat * cfg_.gat_dim * L + 2 * lat * cfg_.gat_dim + lat * lat +
                        lat * lat * cfg_.gat_dim + lat * L * cfg_.gat_dim);
        if (cfg_.flags.cbam)
            f["cbam"] = 2 * lat * L + 2 * (lat / cfg_.cbam_reduction + 1) * lat +
                        2 * cfg_.cbam_spatial_kernel * L + lat * L;
        if (cfg_.flags.tst)
            f["tst"] = D * lat * L + 3 * D * D * L + 2 * L * L * D + D * D * L;
        f["fusion"] = cfg_.fused_width() * L +
                      cfg_.head_hidden * cfg_.fused_width() * cfg_.adaptive_out +
                      cfg_.head_hidden * (1 + kNumDiseaseClasses);
        std::size_t total = 0;
        for (const auto& [k, v] : f) total += v;
        f["total"] = total;
        return f;
    }

    double kink_gap() const {
        double g = std::numeric_limits<double>::infinity();
        if (cbr1_) g = std::min({g, cbr1_->kink_gap(), cbr2_->kink_gap()});
        if (gat_) g = std::min(g, gat_->kink_gap());
        if (cbam_) g = std::min(g, cbam_->kink_gap());
        g = std::min(g, hidden_->kink_gap());
        return g;
    }

    nlohmann::json checkpoint() {
        nlohmann::json j;
        j["format"] = "ecgnet-checkpoint-v1";
        j["config"] = cfg_;
        nlohmann::json params = nlohmann::json::object();
        for (Param* p : params_ordered()) {
            params[p->name] = {{"shape", p->shape}, {"values", p->value}};
        }
        j["params"] = params;
        nlohmann::json buffers = nlohmann::json::object();
        if (cbr1_) {
            buffers["exblock.cbr1.bn.running_mean"] = cbr1_->bn().running_mean();
            buffers["exblock.cbr1.bn.running_var"] = cbr1_->bn().running_var();
            buffers["exblock.cbr2.bn.running_mean"] = cbr2_->bn().running_mean();
            buffers["exblock.cbr2.bn.running_var"] = cbr2_->bn().running_var();
        }
        j["buffers"] = buffers;
        return j;
    }

    void load_checkpoint(const nlohmann::json& j) {
        if (!j.contains("params")) throw DataError("checkpoint: missing params");
        const auto& params = j.at("params");
        for (Param* p : params_ordered()) {
            if (!params.contains(p->name))
                throw DataError("checkpoint: missing parameter '" + p->name + "'");
            const auto& entry = params.at(p->name);
            const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
            if (shape != p->shape)
                throw DataError("checkpoint: shape mismatch for '" + p->name + "'");
            entry.at("values").get_to(p->value);
            if (p->value.size() != p->grad.size())
                throw DataError("checkpoint: value count mismatch for '" + p->name + "'");
        }
        if (j.contains("buffers") && cbr1_) {
            const auto& b = j.at("buffers");
            if (b.contains("exblock.cbr1.bn.running_mean")) {
                b.at("exblock.cbr1.bn.running_mean").get_to(cbr1_->bn().running_mean());
                b.at("exblock.cbr1.bn.running_var").get_to(cbr1_->bn().running_var());
                b.at("exblock.cbr2.bn.running_mean").get_to(cbr2_->bn().running_mean());
                b.at("exblock.cbr2.bn.running_var").get_to(cbr2_->bn().running_var());
            }
        }
    }

    /// Non-trainable state (BN running statistics) that travels with the params.
    std::vector<std::vector<double>*> buffers() {
        std::vector<std::vector<double>*> out;
        if (cbr1_) {
            out.push_back(&cbr1_->bn().running_mean());
            out.push_back(&cbr1_->bn().running_var());
            out.push_back(&cbr2_->bn().running_mean());
            out.push_back(&cbr2_->bn().running_var());
        }
        return out;
    }

    GatLayer* gat() { return gat_.get(); }
    CbamLayer* cbam() { return cbam_.get(); }
    TstLayer* tst() { return tst_.get(); }
    ConvBnRelu* cbr1() { return cbr1_.get(); }
    ConvBnRelu* cbr2() { return cbr2_.get(); }
    Dense* fusion_hidden() { return hidden_.get(); }
    const Tensor3& last_latent() const { return latent_; }

  private:
    std::vector<Param*> params_ordered() { return params(); }

    ModelConfig cfg_;
    Db4Filters db4_;
    std::vector<double> morlet_kernel_;
    std::unique_ptr<ConvBnRelu> cbr1_, cbr2_;
    std::unique_ptr<GatLayer> gat_;
    std::unique_ptr<CbamLayer> cbam_;
    std::unique_ptr<TstLayer> tst_;
    std::unique_ptr<Dense> hidden_, head_bin_, head_multi_;
    Tensor3 ex_out_, morlet_out_, db4_out_, latent_, gat_out_, cbam_out_, tst_out_, fused_,
        pooled_, hidden_out_;
};

} // namespace ecgnet
