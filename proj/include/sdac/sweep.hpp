#pragma once
// Sweep experiments and CSV result emission. One ResultRow per
// (scheme, grid point, seed); rows are written in deterministic grid order.

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdac/baselines.hpp"
#include "sdac/channel.hpp"
#include "sdac/codec.hpp"
#include "sdac/dataset.hpp"
#include "sdac/metrics.hpp"
#include "sdac/sdac.hpp"

namespace sdac {

struct ResultRow {
    std::string scheme;
    std::size_t q = 0;
    std::string modulation;
    double ber = 0.0;
    double snr_db = 0.0;
    double psnr_db = 0.0;
    double ms_ssim = 0.0;
    double ase = 0.0;
    double ase_kl = 0.0;
    double ase_quant = 0.0;
    std::uint64_t seed = 0;
};

inline constexpr const char* kResultHeader =
    "scheme,q,modulation,ber,snr_db,psnr_db,ms_ssim,ase,ase_kl,ase_quant,seed";

// Sentinel written to snr_db when a row has no meaningful SNR (pure-BSC
// rows at BER 0); keeps every numeric field finite.
inline constexpr double kNoSnrSentinel = -999.0;

inline std::string format_csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("csv: cannot write " + path);
    out << kResultHeader << "\n";
    for (const auto& r : rows) {
        out << r.scheme << "," << r.q << "," << r.modulation << ","
            << format_csv_num(r.ber) << "," << format_csv_num(r.snr_db) << ","
            << format_csv_num(r.psnr_db) << "," << format_csv_num(r.ms_ssim) << ","
            << format_csv_num(r.ase) << "," << format_csv_num(r.ase_kl) << ","
            << format_csv_num(r.ase_quant) << "," << r.seed << "\n";
    }
    if (!out) throw std::runtime_error("csv: write failure on " + path);
}

struct EvalMetrics {
    double psnr_db = 0.0;
    double ms_ssim_v = 0.0;
    AseResult ase;
};

// Mean metrics of the sDAC link over an image set at flip probability p.
// ASE uses the reporting weights (alpha=1, beta=0, gamma=1).
inline EvalMetrics eval_sdac(const std::vector<Tensor>& images, const CodecParams& codec,
                             const SdacState& st, double p, SeededRng& rng) {
    EvalMetrics m;
    const AseWeights w{1.0, 0.0, 1.0};
    for (const auto& img : images) {
        Tensor x({1, img.numel()}, img.data);
        LinkDiagnostics d;
        const Tensor out = forward_link(x, codec, st, p, rng, &d);
        Tensor out_img(img.shape, out.data);
        m.psnr_db += psnr(img, out_img);
        m.ms_ssim_v += ms_ssim(img, out_img);
        Tensor s_flat({d.s.numel()}, d.s.data);
        Tensor shat_flat({d.s_hat.numel()}, d.s_hat.data);
        const AseResult a = ase(s_flat, d.s_prime, d.s_hat_prime, shat_flat, d.selected, w);
        m.ase.total += a.total;
        m.ase.kl += a.kl;
        m.ase.channel += a.channel;
        m.ase.quant += a.quant;
    }
    const double inv = 1.0 / double(images.size());
    m.psnr_db *= inv;
    m.ms_ssim_v *= inv;
    m.ase.total *= inv;
    m.ase.kl *= inv;
    m.ase.channel *= inv;
    m.ase.quant *= inv;
    return m;
}

// Mean metrics of a baseline link. The ASE analog reported for baselines:
// ase_kl is the quantizer/projection displacement |Q(s) - s| per latent
// value, ase_quant the end-to-end latent error, ase their sum.
inline EvalMetrics eval_baseline(const std::vector<Tensor>& images,
                                 const CodecParams& codec, BaselineScheme scheme,
                                 const ChannelSpec& channel, SeededRng& rng,
                                 const DqConfig& dq, const CmConfig& cm) {
    channel.validate();
    EvalMetrics m;
    for (const auto& img : images) {
        Tensor x({1, img.numel()}, img.data);
        const Tensor s = encode(x, codec);
        Tensor snapped = s, s_recv = s;
        if (scheme == BaselineScheme::DQ) {
            double p = channel.flip_probability;
            if (channel.kind == ChannelKind::MODULATED)
                p = std::min(0.5, ber_closed_form(channel.modulation,
                                                  std::pow(10.0, channel.snr_db / 10.0)));
            const BitSequence bits = dq_quantize(s, dq);
            snapped = dq_dequantize(bits, dq, s.shape);
            s_recv = dq_dequantize(bsc_transmit(bits, p, rng), dq, s.shape);
        } else {
            snapped = cm_project(s, cm).symbols;
            Tensor rx = snapped;
            if (channel.snr_db != std::numeric_limits<double>::infinity()) {
                const double sigma = std::sqrt(0.5 * std::pow(10.0, -channel.snr_db / 10.0));
                for (double& v : rx.data) v += sigma * rng.next_gaussian();
            }
            s_recv = cm_project(rx, cm).symbols;
        }
        const Tensor out = decode(s_recv, codec);
        Tensor out_img(img.shape, out.data);
        m.psnr_db += psnr(img, out_img);
        m.ms_ssim_v += ms_ssim(img, out_img);
        double dkl = 0.0, dq_err = 0.0;
        for (std::size_t i = 0; i < s.numel(); ++i) {
            dkl += std::fabs(snapped.data[i] - s.data[i]);
            dq_err += std::fabs(s_recv.data[i] - s.data[i]);
        }
        m.ase.kl += dkl / double(s.numel());
        m.ase.quant += dq_err / double(s.numel());
    }
    const double inv = 1.0 / double(images.size());
    m.psnr_db *= inv;
    m.ms_ssim_v *= inv;
    m.ase.kl *= inv;
    m.ase.quant *= inv;
    m.ase.total = m.ase.kl + m.ase.quant;
    return m;
}

struct SweepConfig {
    CodecArch arch;
    TrainConfig train;
    std::size_t train_images = 256;
    std::size_t eval_images = 64;
    std::uint64_t data_seed = 7;
    std::vector<std::size_t> q_grid{1, 2, 3, 4, 5};
    std::vector<double> ber_grid{0.0, 0.01, 0.05, 0.1, 0.2, 0.3};
    std::vector<std::string> modulations{"bpsk", "qpsk", "16qam", "64qam"};
    std::vector<double> snr_grid_db{0, 2, 4, 6, 8, 10, 12, 14};
    double baseline_train_snr_lo_db = 0.0;
    double baseline_train_snr_hi_db = 14.0;
};

// Quantization-order sweep: train one model per q, evaluate the BER grid.
inline std::vector<ResultRow> sweep_q(const SweepConfig& sc) {
    const auto train_set = gen_synthetic_dataset(sc.train_images, sc.arch.image_h,
                                                 sc.arch.image_w, sc.data_seed);
    const auto eval_set = gen_synthetic_dataset(sc.eval_images, sc.arch.image_h,
                                                sc.arch.image_w, sc.data_seed + 1);
    std::vector<ResultRow> rows;
    for (std::size_t q : sc.q_grid) {
        TrainConfig cfg = sc.train;
        cfg.q = q;
        cfg.seed = sc.train.seed + q;  // derived per-grid-point seed
        const TrainResult tr = train(train_set, sc.arch, cfg);
        for (double ber : sc.ber_grid) {
            SeededRng rng = SeededRng(cfg.seed).split(0xEA11 + std::uint64_t(ber * 1e6));
            const EvalMetrics m = eval_sdac(eval_set, tr.codec, tr.sdac, ber, rng);
            ResultRow r;
            r.scheme = "sdac";
            r.q = q;
            r.modulation = "bsc";
            r.ber = ber;
            r.snr_db = ber > 0.0 ? 10.0 * std::log10(snr_for_ber(ber, Modulation::BPSK))
                                 : kNoSnrSentinel;
            r.psnr_db = m.psnr_db;
            r.ms_ssim = m.ms_ssim_v;
            r.ase = m.ase.total;
            r.ase_kl = m.ase.kl;
            r.ase_quant = m.ase.quant;
            r.seed = cfg.seed;
            rows.push_back(r);
        }
    }
    return rows;
}

// Modulation sweep: per modulation and SNR, convert SNR -> BER and
// evaluate sDAC (BSC), DQ (BSC) and CM (modulated AWGN) at matched q.
// Bit budgets: sDAC and DQ both spend q bits per latent value; CM spends
// one constellation symbol per value pair, which is fewer channel uses --
// the mismatch is inherent to the scheme and noted in the README.
inline std::vector<ResultRow> sweep_modulation(const SweepConfig& sc) {
    const auto train_set = gen_synthetic_dataset(sc.train_images, sc.arch.image_h,
                                                 sc.arch.image_w, sc.data_seed);
    const auto eval_set = gen_synthetic_dataset(sc.eval_images, sc.arch.image_h,
                                                sc.arch.image_w, sc.data_seed + 1);
    TrainConfig cfg = sc.train;
    const TrainResult sdac_tr = train(train_set, sc.arch, cfg);
    const CodecParams analog = train_analog(train_set, sc.arch, cfg,
                                            sc.baseline_train_snr_lo_db,
                                            sc.baseline_train_snr_hi_db);
    DqConfig dq;
    dq.q = cfg.q;

    std::vector<ResultRow> rows;
    for (const auto& mod_name : sc.modulations) {
        const Modulation mod = parse_modulation(mod_name);
        CmConfig cm{mod};
        const CodecParams cm_codec = train_cm(train_set, sc.arch, cfg, cm,
                                              sc.baseline_train_snr_lo_db,
                                              sc.baseline_train_snr_hi_db);
        for (double snr_db : sc.snr_grid_db) {
            const double snr = std::pow(10.0, snr_db / 10.0);
            const double ber = std::min(0.5, ber_closed_form(mod, snr));
            auto push = [&](const std::string& scheme, const EvalMetrics& m) {
                ResultRow r;
                r.scheme = scheme;
                r.q = cfg.q;
                r.modulation = mod_name;
                r.ber = ber;
                r.snr_db = snr_db;
                r.psnr_db = m.psnr_db;
                r.ms_ssim = m.ms_ssim_v;
                r.ase = m.ase.total;
                r.ase_kl = m.ase.kl;
                r.ase_quant = m.ase.quant;
                r.seed = cfg.seed;
                rows.push_back(r);
            };
            const std::uint64_t base =
                0x50D0 + std::uint64_t(snr_db * 64.0) + 4096 * std::uint64_t(mod);
            SeededRng r1 = SeededRng(cfg.seed).split(base);
            push("sdac", eval_sdac(eval_set, sdac_tr.codec, sdac_tr.sdac, ber, r1));

            ChannelSpec bsc;
            bsc.kind = ChannelKind::BSC;
            bsc.flip_probability = ber;
            SeededRng r2 = SeededRng(cfg.seed).split(base + 1);
            push("dq", eval_baseline(eval_set, analog, BaselineScheme::DQ, bsc, r2, dq, cm));

            ChannelSpec awgn;
            awgn.kind = ChannelKind::MODULATED;
            awgn.snr_db = snr_db;
            awgn.modulation = mod;
            SeededRng r3 = SeededRng(cfg.seed).split(base + 2);
            push("cm", eval_baseline(eval_set, cm_codec, BaselineScheme::CM, awgn, r3, dq, cm));
        }
    }
    return rows;
}

}  // namespace sdac
