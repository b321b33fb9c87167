#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sdac/codec.hpp"
#include "sdac/dataset.hpp"

using namespace sdac;

namespace {

CodecArch tiny_arch() {
    CodecArch a;
    a.image_h = 2;
    a.image_w = 2;
    a.latent = LatentShape{1, 2, 1};
    a.hidden = {3};
    return a;
}

// Full-chain surrogate loss with every stop-gradient capture frozen at the
// base point; finite differences of this function are the oracle for
// train_step's analytic gradients. C1 = shat' - s' (straight-through
// offset), C2 = s', C3 = shat', idx the post-channel selections.
double frozen_chain_loss(const Tensor& x, const CodecParams& codec,
                         const SdacState& st, const Tensor& C1, const Tensor& C2,
                         const Tensor& C3, const std::vector<std::size_t>& idx,
                         const TrainConfig& cfg) {
    const std::size_t B = x.rows();
    const Tensor s = detail::mlp_forward(x, codec.enc_w, codec.enc_b);
    Tensor s_flat({s.numel()}, s.data);
    const Tensor sp = adapter_expand(s_flat, st.adapter, st.latent);
    Tensor shat({sp.rows(), sp.cols()});
    for (std::size_t i = 0; i < sp.rows(); ++i)
        for (std::size_t j = 0; j < sp.cols(); ++j)
            shat.at(i, j) = st.codebook.entries.at(idx[i], j);
    Tensor ste = sp;
    for (std::size_t i = 0; i < ste.numel(); ++i) ste.data[i] += C1.data[i];
    const Tensor combined = adapter_combine(ste, st.adapter, st.latent);
    Tensor s_hat(s.shape, combined.data);
    const Tensor out = detail::mlp_forward(s_hat, codec.dec_w, codec.dec_b);

    double l_ori = 0.0, recon = 0.0, a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double d = out.data[i] - x.data[i];
        l_ori += d * d;
    }
    for (std::size_t i = 0; i < s.numel(); ++i) {
        const double d = s_hat.data[i] - s.data[i];
        recon += d * d;
    }
    for (std::size_t i = 0; i < sp.numel(); ++i) {
        const double da = C2.data[i] - shat.data[i];
        const double db = sp.data[i] - C3.data[i];
        a += da * da;
        b += db * db;
    }
    const double inv_b = 1.0 / double(B);
    return inv_b * (l_ori + cfg.lambda * (recon + cfg.alpha * a + cfg.beta * b));
}

}  // namespace

TEST_CASE("codec init and MLP forward shapes") {
    SeededRng rng(1);
    CodecArch arch = tiny_arch();
    const CodecParams p = codec_init(arch, rng);
    CHECK(p.enc_w.size() == 2);
    CHECK(p.enc_w[0].rows() == 4);
    CHECK(p.enc_w[0].cols() == 3);
    CHECK(p.enc_w[1].cols() == 2);
    Tensor x({2, 4}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8});
    const Tensor s = encode(x, p);
    CHECK(s.rows() == 2);
    CHECK(s.cols() == 2);
    const Tensor y = decode(s, p);
    CHECK(y.rows() == 2);
    CHECK(y.cols() == 4);
    for (double v : y.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK_THROWS_AS(encode(Tensor({2, 3}), p), std::invalid_argument);
    Tensor bad({1, 4}, {0.5, 1.5, 0.5, 0.5});
    CHECK_THROWS_AS(encode(bad, p), std::invalid_argument);
    CHECK_THROWS_AS(decode(Tensor({2, 3}), p), std::invalid_argument);
}

TEST_CASE("encoder final layer is linear (outputs can exceed tanh range)") {
    SeededRng rng(2);
    CodecArch arch = tiny_arch();
    CodecParams p = codec_init(arch, rng);
    // Force a large final-layer weight: a bounded nonlinearity there would
    // cap the output magnitude at 1.
    for (double& v : p.enc_w.back().data) v = 50.0;
    Tensor x({1, 4}, {1.0, 1.0, 1.0, 1.0});
    const Tensor s = encode(x, p);
    bool beyond = false;
    for (double v : s.data) beyond |= std::fabs(v) > 1.0;
    CHECK(beyond);
}

TEST_CASE("forward_link diagnostics are internally consistent") {
    SeededRng rng(3);
    CodecArch arch = tiny_arch();
    const CodecParams codec = codec_init(arch, rng);
    const SdacState st = sdac_init(2, arch.latent, rng);
    Tensor x({2, 4}, {0.1, 0.9, 0.4, 0.6, 0.2, 0.8, 0.3, 0.7});

    SUBCASE("zero flip probability leaves the bits untouched") {
        LinkDiagnostics d;
        forward_link(x, codec, st, 0.0, rng, &d);
        CHECK(d.bits == d.bits_hat);
        CHECK(d.bits.size() == 2 * st.latent.len() * st.q());
        // Received expansion equals the transmitted selection.
        for (std::size_t i = 0; i < d.s_hat_prime.numel(); ++i)
            CHECK(d.s_hat_prime.data[i] == d.selected.data[i]);
    }
    SUBCASE("p = 0.5 flips roughly half the bits") {
        SeededRng big(17);
        Tensor xb({32, 4});
        for (std::size_t i = 0; i < xb.numel(); ++i)
            xb.data[i] = double(i % 10) / 10.0;
        LinkDiagnostics d;
        forward_link(xb, codec, st, 0.5, big, &d);
        std::size_t flips = 0;
        for (std::size_t i = 0; i < d.bits.size(); ++i)
            flips += d.bits[i] != d.bits_hat[i];
        const double n = double(d.bits.size());
        CHECK(std::fabs(double(flips) - 0.5 * n) < 4.0 * std::sqrt(0.25 * n));
    }
}

TEST_CASE("train_step validates inputs and reports the drawn BER") {
    SeededRng rng(4);
    CodecArch arch = tiny_arch();
    const CodecParams codec = codec_init(arch, rng);
    const SdacState st = sdac_init(2, arch.latent, rng);
    TrainConfig cfg;
    cfg.q = 2;
    CHECK_THROWS_AS(train_step(Tensor({2, 3}), codec, st, cfg, rng),
                    std::invalid_argument);
    TrainConfig bad = cfg;
    bad.alpha = 0.5;  // alpha + beta != 1
    Tensor x({1, 4}, {0.1, 0.2, 0.3, 0.4});
    CHECK_THROWS_AS(train_step(x, codec, st, bad, rng), std::invalid_argument);
    cfg.ber_lo = 0.1;
    cfg.ber_hi = 0.1;
    const StepResult r = train_step(x, codec, st, cfg, rng);
    CHECK(r.ber_drawn == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(r.total_loss ==
          doctest::Approx(r.ori_loss + cfg.lambda * r.sdac_loss).epsilon(1e-12));
}

TEST_CASE("train_step gradients match the frozen-surrogate finite differences") {
    SeededRng master(42);
    const double eps = 1e-6;
    int instances = 0;
    for (std::size_t q : {1, 2, 3}) {
        for (int trial = 0; trial < 7; ++trial) {
            CodecArch arch = tiny_arch();
            SeededRng rng = master.split(instances);
            CodecParams codec = codec_init(arch, rng);
            SdacState st = sdac_init(q, arch.latent, rng);
            Tensor x({2, 4});
            for (double& v : x.data) v = rng.next_double();

            TrainConfig cfg;
            cfg.q = q;
            // A fixed positive BER exercises the gradient-transparent flip
            // path; the flips themselves are captured in idx below.
            cfg.ber_lo = cfg.ber_hi = (trial % 2 == 1) ? 0.3 : 0.0;
            SeededRng step_rng(7);
            const StepResult r = train_step(x, codec, st, cfg, step_rng);

            // Recover the post-channel indices by replaying the step's RNG.
            const Tensor s = detail::mlp_forward(x, codec.enc_w, codec.enc_b);
            Tensor s_flat({s.numel()}, s.data);
            const Tensor sp0 = adapter_expand(s_flat, st.adapter, st.latent);
            const QuantizeResult qr = quantize(sp0, st.codebook);
            SeededRng replay(7);
            (void)replay.next_double();  // the BER draw
            const BitSequence bhat = bsc_transmit(qr.bits, r.ber_drawn, replay);
            const auto idx = bits_to_indices(bhat, q);

            Tensor shat0({sp0.rows(), sp0.cols()});
            for (std::size_t i = 0; i < sp0.rows(); ++i)
                for (std::size_t j = 0; j < q; ++j)
                    shat0.at(i, j) = st.codebook.entries.at(idx[i], j);
            Tensor C1 = shat0;
            for (std::size_t i = 0; i < C1.numel(); ++i) C1.data[i] -= sp0.data[i];

            CHECK(r.total_loss ==
                  doctest::Approx(frozen_chain_loss(x, codec, st, C1, sp0, shat0,
                                                    idx, cfg))
                      .epsilon(1e-10));

            auto fd_check = [&](Tensor& param, const std::string& name) {
                const Tensor& g = r.grads.at(name);
                REQUIRE(g.numel() == param.numel());
                for (std::size_t i = 0; i < param.numel(); ++i) {
                    const double save = param.data[i];
                    param.data[i] = save + eps;
                    const double lp =
                        frozen_chain_loss(x, codec, st, C1, sp0, shat0, idx, cfg);
                    param.data[i] = save - eps;
                    const double lm =
                        frozen_chain_loss(x, codec, st, C1, sp0, shat0, idx, cfg);
                    param.data[i] = save;
                    const double num = (lp - lm) / (2.0 * eps);
                    const double rel =
                        std::fabs(num - g.data[i]) /
                        std::max(1e-8, std::max(std::fabs(num), std::fabs(g.data[i])));
                    CHECK(rel < 1e-5);
                }
            };
            for (std::size_t l = 0; l < codec.enc_w.size(); ++l) {
                fd_check(codec.enc_w[l], "enc_w" + std::to_string(l));
                fd_check(codec.enc_b[l], "enc_b" + std::to_string(l));
            }
            for (std::size_t l = 0; l < codec.dec_w.size(); ++l) {
                fd_check(codec.dec_w[l], "dec_w" + std::to_string(l));
                fd_check(codec.dec_b[l], "dec_b" + std::to_string(l));
            }
            fd_check(st.adapter.expand_w, "expand_w");
            fd_check(st.adapter.expand_b, "expand_b");
            fd_check(st.adapter.combine_w, "combine_w");
            fd_check(st.adapter.combine_b, "combine_b");
            fd_check(st.codebook.entries, "codebook");
            ++instances;
        }
    }
    CHECK(instances >= 20);
}

TEST_CASE("train_step is bit-identical under the same seed") {
    SeededRng rng(5);
    CodecArch arch = tiny_arch();
    const CodecParams codec = codec_init(arch, rng);
    const SdacState st = sdac_init(3, arch.latent, rng);
    TrainConfig cfg;
    cfg.q = 3;
    Tensor x({2, 4});
    for (std::size_t i = 0; i < 8; ++i) x.data[i] = double(i) / 8.0;
    SeededRng a(9), b(9);
    const StepResult ra = train_step(x, codec, st, cfg, a);
    const StepResult rb = train_step(x, codec, st, cfg, b);
    CHECK(ra.total_loss == rb.total_loss);
    for (const auto& [name, g] : ra.grads) CHECK(g.data == rb.grads.at(name).data);
}

TEST_CASE("train: epochs = 0 returns the initialized state and empty history") {
    const auto data = gen_synthetic_dataset(8, 4, 4, 1);
    CodecArch arch;
    arch.image_h = 4;
    arch.image_w = 4;
    arch.latent = LatentShape{1, 2, 2};
    arch.hidden = {6};
    TrainConfig cfg;
    cfg.q = 2;
    cfg.epochs = 0;
    cfg.seed = 3;
    const TrainResult r = train(data, arch, cfg);
    CHECK(r.history.empty());
    SeededRng ref(3);
    const CodecParams init = codec_init(arch, ref);
    CHECK(r.codec.enc_w[0].data == init.enc_w[0].data);
    const SdacState st0 = sdac_init(2, arch.latent, ref);
    CHECK(r.sdac.codebook.entries.data == st0.codebook.entries.data);
}

TEST_CASE("train is deterministic: identical runs produce identical history") {
    const auto data = gen_synthetic_dataset(16, 4, 4, 2);
    CodecArch arch;
    arch.image_h = 4;
    arch.image_w = 4;
    arch.latent = LatentShape{1, 2, 2};
    arch.hidden = {8};
    TrainConfig cfg;
    cfg.q = 2;
    cfg.epochs = 5;
    cfg.batch_size = 8;
    cfg.seed = 11;
    const TrainResult a = train(data, arch, cfg);
    const TrainResult b = train(data, arch, cfg);
    REQUIRE(a.history.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(a.history[i].mean_loss == b.history[i].mean_loss);
        CHECK(a.history[i].psnr_p0 == b.history[i].psnr_p0);
    }
    for (std::size_t l = 0; l < a.codec.enc_w.size(); ++l)
        CHECK(a.codec.enc_w[l].data == b.codec.enc_w[l].data);
    CHECK(a.sdac.codebook.entries.data == b.sdac.codebook.entries.data);
}

TEST_CASE("freeze_codec leaves encoder/decoder weights untouched") {
    const auto data = gen_synthetic_dataset(16, 4, 4, 2);
    CodecArch arch;
    arch.image_h = 4;
    arch.image_w = 4;
    arch.latent = LatentShape{1, 2, 2};
    arch.hidden = {8};
    TrainConfig cfg;
    cfg.q = 2;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.seed = 12;
    cfg.freeze_codec = true;
    const TrainResult r = train(data, arch, cfg);
    SeededRng ref(12);
    const CodecParams init = codec_init(arch, ref);
    for (std::size_t l = 0; l < init.enc_w.size(); ++l)
        CHECK(r.codec.enc_w[l].data == init.enc_w[l].data);
    // But the adapter and codebook did move.
    const SdacState st0 = sdac_init(2, arch.latent, ref);
    CHECK(r.sdac.codebook.entries.data != st0.codebook.entries.data);
}

TEST_CASE("gradient clipping caps the global norm and reports the raw norm") {
    Gradient g;
    g["a"] = Tensor({2}, {3.0, 4.0});  // norm 5
    g["b"] = Tensor({1}, {0.0});
    const double pre = detail::clip_gradient(g, 1.0);
    CHECK(pre == doctest::Approx(5.0).epsilon(1e-12));
    double sq = 0.0;
    for (const auto& [k, t] : g)
        for (double v : t.data) sq += v * v;
    CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-12));
    // Disabled clipping leaves gradients alone.
    Gradient h;
    h["a"] = Tensor({2}, {3.0, 4.0});
    CHECK(detail::clip_gradient(h, 0.0) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(h["a"].data == std::vector<double>{3.0, 4.0});
}

TEST_CASE("TrainConfig validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    TrainConfig b1 = cfg;
    b1.ber_lo = 0.4;
    b1.ber_hi = 0.2;
    CHECK_THROWS_AS(b1.validate(), std::invalid_argument);
    TrainConfig b2 = cfg;
    b2.lambda = -1.0;
    CHECK_THROWS_AS(b2.validate(), std::invalid_argument);
    TrainConfig b3 = cfg;
    b3.lr_decay = 0.0;
    CHECK_THROWS_AS(b3.validate(), std::invalid_argument);
    TrainConfig b4 = cfg;
    b4.lr_decay = 1.5;
    CHECK_THROWS_AS(b4.validate(), std::invalid_argument);
}

// Reference run on the default configuration (q=4, seed 1,
// 300 epochs). Slow (~3-5 min); checks the two documented training-quality
// properties on one shared run:
//   1. final p=0 PSNR beats the initialization PSNR by at least 6 dB
//      (measured gain on this fixed-seed run: 9.39 dB);
//   2. the training-loss trend is non-increasing up to sampling noise: the
//      per-batch BER draw p ~ U(0, 0.3) makes epoch losses fluctuate, so
//      the 5-epoch moving average is allowed a 15% step-up (measured worst
//      rise on this run: +8.9%), and the run must end far below its start.
TEST_CASE("default-config reference run: PSNR gain and loss trend") {
    const auto train_set = gen_synthetic_dataset(256, 16, 16, 7);
    const CodecArch arch;
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.seed = 1;

    TrainConfig cfg0 = cfg;
    cfg0.epochs = 0;
    const TrainResult init = train(train_set, arch, cfg0);
    const std::vector<Tensor> probe(train_set.begin(), train_set.begin() + 32);
    SeededRng r0(424242);
    const double init_psnr = eval_link_psnr(probe, init.codec, init.sdac, 0.0, r0);

    const TrainResult tr = train(train_set, arch, cfg);
    REQUIRE(tr.history.size() == 300);
    const double final_psnr = tr.history.back().psnr_p0;
    CHECK(final_psnr - init_psnr >= 6.0);

    std::vector<double> ma;
    for (std::size_t i = 0; i + 4 < tr.history.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = i; j < i + 5; ++j) s += tr.history[j].mean_loss;
        ma.push_back(s / 5.0);
    }
    for (std::size_t i = 0; i + 1 < ma.size(); ++i)
        CHECK(ma[i + 1] <= ma[i] * 1.15);
    // Net trend over the run is strongly decreasing.
    CHECK(ma.back() < 0.15 * ma.front());
}
