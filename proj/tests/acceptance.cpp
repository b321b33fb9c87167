// Acceptance gate: every release-blocking property of the toolkit, one
// PASS/FAIL line per criterion. Exit status is nonzero if any criterion
// fails. Criteria 5-7 share one set of trained models (the dominant cost).

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sdac/baselines.hpp"
#include "sdac/channel.hpp"
#include "sdac/checkpoint.hpp"
#include "sdac/codec.hpp"
#include "sdac/dataset.hpp"
#include "sdac/sweep.hpp"

using namespace sdac;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("CRITERION %d: %s — %s\n", criterion, pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// --- Criterion 1: closed-form BER vs Monte Carlo ---------------------------

void criterion_modem() {
    SeededRng rng(20260824);
    const std::size_t n_bits = 10000000;
    double worst = 0.0;
    int scored = 0;
    bool pass = true;
    for (Modulation m : {Modulation::BPSK, Modulation::QPSK, Modulation::QAM16,
                         Modulation::QAM64}) {
        for (double snr_db = 0.0; snr_db <= 14.0; snr_db += 2.0) {
            const double snr = std::pow(10.0, snr_db / 10.0);
            const double cf = ber_closed_form(m, snr);
            if (cf <= 1e-4) continue;  // below threshold, not scored
            const std::size_t bps = std::size_t(bits_per_symbol(m));
            const std::size_t nb = n_bits - n_bits % bps;  // whole symbols
            const ModemStats st = mc_modem_run(m, snr, nb, rng);
            // The closed forms for QAM count one bit error per symbol error
            // (nearest-neighbor model); compare like with like.
            const double mc = (m == Modulation::QAM16 || m == Modulation::QAM64)
                                  ? st.ber_nearest_neighbor()
                                  : st.ber();
            const double rel = std::fabs(mc - cf) / cf;
            worst = std::max(worst, rel);
            pass &= rel < 0.05;
            ++scored;
        }
    }
    report(1, pass, "closed form vs Monte Carlo (1e7 bits), " +
                        std::to_string(scored) + " points scored, worst rel delta " +
                        fmt(worst) + " (< 0.05 required)");
}

// --- Criterion 2: BSC flip statistics --------------------------------------

void criterion_bsc() {
    SeededRng rng(7);
    const std::size_t n = 1000000;
    BitSequence zeros(n, 0);
    bool pass = true;
    double worst_sigmas = 0.0;
    for (double p : {0.01, 0.1, 0.3, 0.5}) {
        const BitSequence out = bsc_transmit(zeros, p, rng);
        std::size_t flips = 0;
        for (auto b : out) flips += b;
        const double sigma = std::sqrt(p * (1.0 - p) * double(n));
        const double dev = std::fabs(double(flips) - p * double(n)) / sigma;
        worst_sigmas = std::max(worst_sigmas, dev);
        pass &= dev < 4.0;
    }
    report(2, pass, "empirical flip rates on 1e6 bits, worst deviation " +
                        fmt(worst_sigmas) + " sigma (< 4 required)");
}

// --- Criterion 3: gradient correctness -------------------------------------

// Full-chain surrogate loss with the stop-gradient captures frozen at the
// base point (C1 = shat' - s', C2 = s', C3 = shat'); finite differences of
// this function are the oracle for the analytic surrogate gradients.
double frozen_chain_loss(const Tensor& x, const CodecParams& codec,
                         const SdacState& st, const Tensor& C1, const Tensor& C2,
                         const Tensor& C3, const std::vector<std::size_t>& idx,
                         const TrainConfig& cfg) {
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
    return (l_ori + cfg.lambda * (recon + cfg.alpha * a + cfg.beta * b)) /
           double(x.rows());
}

void criterion_gradients() {
    SeededRng master(42);
    const double eps = 1e-6;
    double worst = 0.0;
    bool blocked_ok = true;
    int instances = 0;
    for (std::size_t q : {1, 2, 3}) {
        for (int trial = 0; trial < 7; ++trial) {
            CodecArch arch;
            arch.image_h = 2;
            arch.image_w = 2;
            arch.latent = LatentShape{1, 2, 1};
            arch.hidden = {3};
            SeededRng rng = master.split(instances);
            CodecParams codec = codec_init(arch, rng);
            SdacState st = sdac_init(q, arch.latent, rng);
            Tensor x({2, 4});
            for (double& v : x.data) v = rng.next_double();
            TrainConfig cfg;
            cfg.q = q;
            cfg.ber_lo = cfg.ber_hi = (trial % 2 == 1) ? 0.3 : 0.0;
            SeededRng step_rng(7);
            const StepResult r = train_step(x, codec, st, cfg, step_rng);

            // Replay the step's RNG to recover the post-channel indices.
            const Tensor s = detail::mlp_forward(x, codec.enc_w, codec.enc_b);
            Tensor s_flat({s.numel()}, s.data);
            const Tensor sp0 = adapter_expand(s_flat, st.adapter, st.latent);
            const QuantizeResult qr = quantize(sp0, st.codebook);
            SeededRng replay(7);
            (void)replay.next_double();
            const BitSequence bhat = bsc_transmit(qr.bits, r.ber_drawn, replay);
            const auto idx = bits_to_indices(bhat, q);
            Tensor shat0({sp0.rows(), sp0.cols()});
            for (std::size_t i = 0; i < sp0.rows(); ++i)
                for (std::size_t j = 0; j < q; ++j)
                    shat0.at(i, j) = st.codebook.entries.at(idx[i], j);
            Tensor C1 = shat0;
            for (std::size_t i = 0; i < C1.numel(); ++i) C1.data[i] -= sp0.data[i];

            auto fd = [&](Tensor& param, const std::string& name) {
                const Tensor& g = r.grads.at(name);
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
                    worst = std::max(worst, rel);
                }
            };
            for (std::size_t l = 0; l < codec.enc_w.size(); ++l) {
                fd(codec.enc_w[l], "enc_w" + std::to_string(l));
                fd(codec.enc_b[l], "enc_b" + std::to_string(l));
                fd(codec.dec_w[l], "dec_w" + std::to_string(l));
                fd(codec.dec_b[l], "dec_b" + std::to_string(l));
            }
            fd(st.adapter.expand_w, "expand_w");
            fd(st.adapter.expand_b, "expand_b");
            fd(st.adapter.combine_w, "combine_w");
            fd(st.adapter.combine_b, "combine_b");
            fd(st.codebook.entries, "codebook");

            // Stop-gradient blocks must be exactly zero: the codebook term
            // alone must not touch the expand path and the commitment term
            // alone must not touch the codebook.
            {
                const std::size_t L = st.latent.len(), hw = st.latent.hw();
                Tensor s1({s.numel()}, s.data);
                Tape t;
                const Var vs = t.leaf(s1);
                const Var vew = t.leaf(st.adapter.expand_w);
                const Var veb = t.leaf(st.adapter.expand_b);
                const Var ve = t.leaf(st.codebook.entries);
                const Var vsp = t.group_affine_expand(vs, vew, veb, L, hw);
                const Var vshat = t.gather_rows(ve, idx);
                t.backward(t.sum_sq(t.sub(t.stop_grad(vsp), vshat)));
                for (double g : t.grad(vs).data) blocked_ok &= g == 0.0;
                for (double g : t.grad(vew).data) blocked_ok &= g == 0.0;
                for (double g : t.grad(veb).data) blocked_ok &= g == 0.0;

                Tape t2;
                const Var ws = t2.leaf(s1);
                const Var wew = t2.leaf(st.adapter.expand_w);
                const Var web = t2.leaf(st.adapter.expand_b);
                const Var we = t2.leaf(st.codebook.entries);
                const Var wsp = t2.group_affine_expand(ws, wew, web, L, hw);
                const Var wshat = t2.gather_rows(we, idx);
                t2.backward(t2.sum_sq(t2.sub(wsp, t2.stop_grad(wshat))));
                for (double g : t2.grad(we).data) blocked_ok &= g == 0.0;
            }
            ++instances;
        }
    }
    const bool pass = worst < 1e-5 && blocked_ok && instances >= 20;
    report(3, pass, std::to_string(instances) +
                        " random instances (q in {1,2,3}), worst FD rel error " +
                        fmt(worst) + " (< 1e-5 required), blocked gradients " +
                        (blocked_ok ? "exactly zero" : "NONZERO"));
}

// --- Criterion 4: bijections and quantizer roundtrips ----------------------

void criterion_bijections() {
    bool pass = true;
    for (std::size_t q = 1; q <= 8 && pass; ++q)
        for (std::size_t i = 0; i < (std::size_t(1) << q); ++i) {
            BitSequence b;
            index_to_bits(i, q, b);
            pass &= bits_to_index(b, 0, q) == i;
        }

    SeededRng rng(11);
    const Codebook cb = codebook_init(4, rng);
    Tensor pts = gaussian(rng, 1000 * 4, 1.2);
    pts.shape = {1000, 4};
    const QuantizeResult qr = quantize(pts, cb);
    const Tensor back = dequantize(qr.bits, cb, 1000);
    for (std::size_t i = 0; i < 1000; ++i) {
        // Brute-force argmin oracle.
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < cb.size(); ++e) {
            double d = 0.0;
            for (std::size_t j = 0; j < 4; ++j) {
                const double diff = pts.at(i, j) - cb.entries.at(e, j);
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = e;
            }
        }
        pass &= qr.indices[i] == best;
        for (std::size_t j = 0; j < 4; ++j)
            pass &= back.at(i, j) == cb.entries.at(qr.indices[i], j);
    }
    report(4, pass,
           "index<->bits exact for all q <= 8; zero-noise roundtrip and "
           "brute-force argmin agree on 1000 vectors");
}

// --- Criteria 5-7: trained-link trends -------------------------------------

struct TrainedGrid {
    std::vector<TrainResult> by_q;  // index 0 -> q=1 ... index 4 -> q=5
    std::vector<Tensor> eval_set;
};

// Reference training setup for the trend criteria (fixed seeds; the per-q
// seed is base + q, mirroring the sweep tool). Chosen so every q converges
// under the fixed-step optimizer; documented in the README.
constexpr std::uint64_t kTrendBaseSeed = 4;
constexpr std::size_t kTrendEpochs = 600;
constexpr double kTrendLrDecay = 1.0;

TrainedGrid train_grid() {
    TrainedGrid g;
    const auto train_set = gen_synthetic_dataset(256, 16, 16, 7);
    g.eval_set = gen_synthetic_dataset(64, 16, 16, 8);
    CodecArch arch;
    for (std::size_t q = 1; q <= 5; ++q) {
        TrainConfig cfg;
        cfg.q = q;
        cfg.seed = kTrendBaseSeed + q;
        cfg.epochs = kTrendEpochs;
        cfg.learning_rate = 1e-3;
        cfg.lr_decay = kTrendLrDecay;
        g.by_q.push_back(train(train_set, arch, cfg));
        std::printf("  [trend setup] trained q=%zu\n", q);
        std::fflush(stdout);
    }
    return g;
}

void criterion_q_trend(const TrainedGrid& g) {
    std::vector<double> psnr05(5);
    for (std::size_t q = 1; q <= 5; ++q) {
        SeededRng rng(99);
        psnr05[q - 1] =
            eval_sdac(g.eval_set, g.by_q[q - 1].codec, g.by_q[q - 1].sdac, 0.05, rng)
                .psnr_db;
    }
    const double gap31 = psnr05[2] - psnr05[0];
    const double gain23 = psnr05[2] - psnr05[1];
    const double gain45 = psnr05[4] - psnr05[3];
    const bool pass = gap31 >= 1.0 && gain45 < gain23;
    std::string detail = "PSNR@BER0.05 by q:";
    for (std::size_t i = 0; i < 5; ++i) detail += " " + fmt(psnr05[i]);
    detail += "; q3-q1 = " + fmt(gap31) + " dB (>= 1 required), q2->3 gain " +
              fmt(gain23) + " vs q4->5 gain " + fmt(gain45) + " (must shrink)";
    report(5, pass, detail);
}

void criterion_ase_trend(const TrainedGrid& g) {
    std::vector<double> kl(5), quant(5);
    for (std::size_t q = 1; q <= 5; ++q) {
        SeededRng rng(99);
        const EvalMetrics m =
            eval_sdac(g.eval_set, g.by_q[q - 1].codec, g.by_q[q - 1].sdac, 0.0, rng);
        kl[q - 1] = m.ase.kl;
        quant[q - 1] = m.ase.quant;
    }
    bool monotone = true;
    for (std::size_t i = 1; i < 4; ++i) monotone &= quant[i + 1] < quant[i];
    double kmin = kl[1], kmax = kl[1];
    for (std::size_t i = 1; i < 5; ++i) {
        kmin = std::min(kmin, kl[i]);
        kmax = std::max(kmax, kl[i]);
    }
    const double kl_spread = (kmax - kmin) / kmax;
    const bool pass = monotone && kl_spread < 0.20;
    std::string detail = "BER=0, weights (1,0,1): quant(q2..q5) =";
    for (std::size_t i = 1; i < 5; ++i) detail += " " + fmt(quant[i]);
    detail += std::string(" (monotone ") + (monotone ? "yes" : "NO") +
              "); kl spread " + fmt(kl_spread) + " (< 0.20 required)";
    report(6, pass, detail);
}

void criterion_dq_degradation(const TrainedGrid& g) {
    // sDAC drop BER 0 -> 0.1 at q=4 vs DQ under the same flip rate and the
    // same bit budget (4 bits per latent value).
    const TrainResult& tr = g.by_q[3];
    SeededRng r1(99), r2(99);
    const double sdac_p0 = eval_sdac(g.eval_set, tr.codec, tr.sdac, 0.0, r1).psnr_db;
    const double sdac_p1 = eval_sdac(g.eval_set, tr.codec, tr.sdac, 0.1, r2).psnr_db;
    const double sdac_drop = sdac_p0 - sdac_p1;

    const auto train_set = gen_synthetic_dataset(256, 16, 16, 7);
    CodecArch arch;
    TrainConfig cfg;
    cfg.seed = kTrendBaseSeed;
    cfg.epochs = kTrendEpochs;
    cfg.learning_rate = 1e-3;
    cfg.lr_decay = kTrendLrDecay;
    const CodecParams analog = train_analog(train_set, arch, cfg, 10.0, 30.0);
    DqConfig dq;
    dq.q = 4;
    CmConfig cm;
    ChannelSpec clean;
    clean.kind = ChannelKind::BSC;
    clean.flip_probability = 0.0;
    ChannelSpec noisy = clean;
    noisy.flip_probability = 0.1;
    SeededRng r3(99), r4(99);
    const double dq_p0 =
        eval_baseline(g.eval_set, analog, BaselineScheme::DQ, clean, r3, dq, cm).psnr_db;
    const double dq_p1 =
        eval_baseline(g.eval_set, analog, BaselineScheme::DQ, noisy, r4, dq, cm).psnr_db;
    const double dq_drop = dq_p0 - dq_p1;

    // MSB-flip sensitivity: exactly 2^(q-1) quantizer steps, checked exactly.
    bool msb_ok = true;
    {
        SeededRng rng(5);
        const Tensor s = uniform_range(rng, 64, -1.0, 1.0);
        BitSequence b = dq_quantize(s, dq);
        const double step = (dq.clip_hi - dq.clip_lo) / double(dq.levels());
        const Tensor base = dq_dequantize(b, dq, {std::size_t(64)});
        for (std::size_t i = 0; i < 64; ++i) {
            BitSequence f = b;
            f[i * dq.q] = std::uint8_t(1 - f[i * dq.q]);
            const Tensor moved = dq_dequantize(f, dq, {std::size_t(64)});
            const double delta = std::fabs(moved.data[i] - base.data[i]) / step;
            msb_ok &= std::fabs(delta - 8.0) < 1e-9;  // 2^(4-1) steps
        }
    }
    const bool pass = sdac_drop < dq_drop && msb_ok;
    report(7, pass, "q=4 PSNR drop BER 0->0.1: sdac " + fmt(sdac_drop) + " dB vs dq " +
                        fmt(dq_drop) + " dB (must be smaller); DQ MSB flip = 8 steps " +
                        (msb_ok ? "exact" : "WRONG"));
}

// --- Criterion 8: sweep determinism ----------------------------------------

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_determinism() {
#ifdef SDAC_CLI_PATH
    const std::string cli = SDAC_CLI_PATH;
    const std::string cfg_path = "/tmp/sdac_accept_sweep.cfg";
    {
        std::ofstream out(cfg_path);
        out << "epochs = 3\nq_grid = 1,2\nber_grid = 0.0,0.1\n"
            << "train_images = 32\neval_images = 8\nhidden = 48,32\n";
    }
    const std::string a = "/tmp/sdac_accept_a.csv", b = "/tmp/sdac_accept_b.csv";
    const int rc1 = std::system(
        (cli + " sweep-q --config " + cfg_path + " --seed 3 --out " + a).c_str());
    const int rc2 = std::system(
        (cli + " sweep-q --config " + cfg_path + " --seed 3 --out " + b).c_str());
    const bool pass = rc1 == 0 && rc2 == 0 && !slurp(a).empty() && slurp(a) == slurp(b);
    report(8, pass, "two sweep-q runs, identical config/seed: CSVs " +
                        std::string(pass ? "byte-identical" : "DIFFER"));
    std::remove(cfg_path.c_str());
    std::remove(a.c_str());
    std::remove(b.c_str());
#else
    report(8, false, "tool path not compiled in");
#endif
}

// --- Criterion 9: checkpoint fidelity --------------------------------------

void criterion_checkpoint(const TrainedGrid& g) {
    const TrainResult& tr = g.by_q[2];  // the q=3 model
    TrainConfig cfg;
    cfg.q = 3;
    const std::string path = "/tmp/sdac_accept_ckpt";
    checkpoint_save(path, bundle_to_checkpoint(tr.codec, tr.sdac, cfg));
    const ModelBundle mb = checkpoint_to_bundle(checkpoint_load(path));
    SeededRng r1(1234), r2(1234);
    const double before = eval_sdac(g.eval_set, tr.codec, tr.sdac, 0.05, r1).psnr_db;
    const double after = eval_sdac(g.eval_set, mb.codec, mb.sdac, 0.05, r2).psnr_db;
    const bool pass = before == after;  // bit-exact round trip
    report(9, pass, "save->load->eval PSNR " + fmt(after) + " dB vs " + fmt(before) +
                        " dB (" + (pass ? "bit-exact" : "MISMATCH") + ")");
    std::remove(path.c_str());
}

}  // namespace

int main() {
    std::printf("acceptance: running all criteria\n");
    criterion_modem();
    criterion_bsc();
    criterion_gradients();
    criterion_bijections();
    std::printf("  [trend setup] training the q grid (this is the slow part)\n");
    std::fflush(stdout);
    const TrainedGrid grid = train_grid();
    criterion_q_trend(grid);
    criterion_ase_trend(grid);
    criterion_dq_degradation(grid);
    criterion_determinism();
    criterion_checkpoint(grid);
    std::printf("acceptance: %s\n", g_failures == 0 ? "ALL CRITERIA PASS"
                                                    : "FAILURES PRESENT");
    return g_failures == 0 ? 0 : 1;
}
