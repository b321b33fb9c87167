#pragma once
// Comparison schemes: direct quantization (DQ, uniform scalar quantizer to
// big-endian bits) and a simplified constellation-mapping scheme (CM-lite,
// latent values snapped to the modulation constellation).

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "sdac/channel.hpp"
#include "sdac/codec.hpp"
#include "sdac/tensor.hpp"

namespace sdac {

struct DqConfig {
    std::size_t q = 4;
    double clip_lo = -1.0, clip_hi = 1.0;

    void validate() const {
        if (q < 1 || q > 8) throw std::invalid_argument("DqConfig: q outside [1, 8]");
        if (!(clip_lo < clip_hi)) throw std::invalid_argument("DqConfig: need lo < hi");
    }
    std::size_t levels() const { return (std::size_t(1) << q) - 1; }
};

// level = round((clamp(v) - lo)/(hi - lo) * (2^q - 1)), round half away
// from zero; bits are the big-endian binary of the level.
inline BitSequence dq_quantize(const Tensor& s, const DqConfig& cfg) {
    cfg.validate();
    BitSequence bits;
    bits.reserve(s.numel() * cfg.q);
    const double span = cfg.clip_hi - cfg.clip_lo;
    for (double v : s.data) {
        const double t = (std::clamp(v, cfg.clip_lo, cfg.clip_hi) - cfg.clip_lo) / span *
                         double(cfg.levels());
        const std::size_t level = std::size_t(std::floor(t + 0.5));  // t >= 0 here
        index_to_bits(level, cfg.q, bits);
    }
    return bits;
}

// Exact inverse map level -> lo + level * (hi - lo)/(2^q - 1).
inline Tensor dq_dequantize(const BitSequence& b, const DqConfig& cfg,
                            std::vector<std::size_t> shape) {
    cfg.validate();
    if (b.size() % cfg.q != 0)
        throw std::invalid_argument("dq_dequantize: bit length not a multiple of q");
    Tensor out(std::move(shape));
    if (out.numel() * cfg.q != b.size())
        throw std::invalid_argument("dq_dequantize: shape/bit length mismatch");
    const double step = (cfg.clip_hi - cfg.clip_lo) / double(cfg.levels());
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data[i] = cfg.clip_lo + double(bits_to_index(b, i * cfg.q, cfg.q)) * step;
    return out;
}

struct CmConfig {
    Modulation modulation = Modulation::QPSK;
};

struct CmProjection {
    Tensor symbols;                    // same shape as input, snapped values
    std::vector<std::size_t> indices;  // one constellation index per symbol
};

namespace detail {

// Unit-average-energy constellation points, Gray-labeled per axis.
inline std::vector<std::complex<double>> constellation(Modulation m) {
    std::vector<std::complex<double>> pts;
    if (m == Modulation::BPSK) {
        pts = {{-1.0, 0.0}, {1.0, 0.0}};
        return pts;
    }
    const int M = modulation_order(m);
    const unsigned L = unsigned(std::lround(std::sqrt(double(M))));
    const double scale = m == Modulation::QPSK ? 1.0 / std::sqrt(2.0) : qam_scale(M);
    for (unsigned ki = 0; ki < L; ++ki)
        for (unsigned kq = 0; kq < L; ++kq)
            pts.emplace_back(scale * pam_level(ki, L), scale * pam_level(kq, L));
    return pts;
}

}  // namespace detail

// Snaps consecutive (I, Q) value pairs to the nearest constellation point.
// BPSK runs in real-only mode (one value per symbol). The projection is
// treated as identity in the backward pass when used inside training.
inline CmProjection cm_project(const Tensor& s, const CmConfig& cfg) {
    const bool real_only = cfg.modulation == Modulation::BPSK;
    if (!real_only && s.numel() % 2 != 0)
        throw std::invalid_argument("cm_project: odd length, cannot form I/Q pairs");
    const auto pts = detail::constellation(cfg.modulation);
    CmProjection out;
    out.symbols = s;
    const std::size_t stride = real_only ? 1 : 2;
    for (std::size_t i = 0; i < s.numel(); i += stride) {
        const std::complex<double> z(s.data[i], real_only ? 0.0 : s.data[i + 1]);
        std::size_t best = 0;
        double best_d = std::norm(z - pts[0]);
        for (std::size_t k = 1; k < pts.size(); ++k) {
            const double d = std::norm(z - pts[k]);
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        out.indices.push_back(best);
        out.symbols.data[i] = pts[best].real();
        if (!real_only) out.symbols.data[i + 1] = pts[best].imag();
    }
    return out;
}

enum class BaselineScheme { DQ, CM };

// Full chain with the scheme substituted for sDAC. DQ rides a BSC at the
// BER implied by the channel spec; CM sends constellation points through
// modulated AWGN and hard-snaps at the receiver.
inline Tensor baseline_link(const Tensor& x, const CodecParams& codec,
                            BaselineScheme scheme, const ChannelSpec& channel,
                            SeededRng& rng, const DqConfig& dq = DqConfig{},
                            const CmConfig& cm = CmConfig{}) {
    channel.validate();
    const Tensor s = encode(x, codec);
    Tensor s_hat = s;
    if (scheme == BaselineScheme::DQ) {
        double p = channel.flip_probability;
        if (channel.kind == ChannelKind::MODULATED)
            p = std::min(0.5, ber_closed_form(channel.modulation,
                                              std::pow(10.0, channel.snr_db / 10.0)));
        const BitSequence bits = dq_quantize(s, dq);
        const BitSequence bhat = bsc_transmit(bits, p, rng);
        s_hat = dq_dequantize(bhat, dq, s.shape);
    } else {
        const CmProjection tx = cm_project(s, cm);
        Tensor rx = tx.symbols;
        if (channel.snr_db != std::numeric_limits<double>::infinity()) {
            // Unit symbol energy; noise sized by the per-sample dimension.
            const double n0 = std::pow(10.0, -channel.snr_db / 10.0);
            const double sigma = std::sqrt(n0 / 2.0);
            for (double& v : rx.data) v += sigma * rng.next_gaussian();
        }
        s_hat = cm_project(rx, cm).symbols;
    }
    return decode(s_hat, codec);
}

// --- Baseline training ----------------------------------------------------

namespace detail {

// Clipped gradient-descent update for a codec whose leaves sit on a tape.
inline void apply_codec_update(CodecParams& codec, Tape& t, const std::vector<Var>& ew,
                               const std::vector<Var>& eb, const std::vector<Var>& dw,
                               const std::vector<Var>& db, const TrainConfig& cfg,
                               double lr) {
    Gradient g;
    for (std::size_t l = 0; l < ew.size(); ++l) {
        g["enc_w" + std::to_string(l)] = t.grad(ew[l]);
        g["enc_b" + std::to_string(l)] = t.grad(eb[l]);
        g["dec_w" + std::to_string(l)] = t.grad(dw[l]);
        g["dec_b" + std::to_string(l)] = t.grad(db[l]);
    }
    clip_gradient(g, cfg.grad_clip);
    for (std::size_t l = 0; l < ew.size(); ++l) {
        apply_gd(codec.enc_w[l], g.at("enc_w" + std::to_string(l)), lr);
        apply_gd(codec.enc_b[l], g.at("enc_b" + std::to_string(l)), lr);
        apply_gd(codec.dec_w[l], g.at("dec_w" + std::to_string(l)), lr);
        apply_gd(codec.dec_b[l], g.at("dec_b" + std::to_string(l)), lr);
    }
}

}  // namespace detail

// Plain analog autoencoder training (the codec DQ rides on): latent gets
// additive AWGN at an SNR drawn uniformly from [snr_lo_db, snr_hi_db] per
// batch; noise is a constant on the tape so gradients pass straight through.
inline CodecParams train_analog(const std::vector<Tensor>& dataset, const CodecArch& arch,
                                const TrainConfig& cfg, double snr_lo_db, double snr_hi_db) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train_analog: dataset empty");
    SeededRng rng(cfg.seed);
    CodecParams codec = codec_init(arch, rng);
    const std::size_t n = dataset.size(), pix = arch.pixels();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[rng.next_index(i + 1)]);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t bsz = std::min(cfg.batch_size, n - start);
            Tensor batch({bsz, pix});
            for (std::size_t i = 0; i < bsz; ++i)
                std::copy(dataset[order[start + i]].data.begin(),
                          dataset[order[start + i]].data.end(),
                          batch.data.begin() + long(i * pix));
            Tape t;
            const Var x = t.leaf(batch);
            std::vector<Var> ew, eb, dw, db;
            for (const auto& w : codec.enc_w) ew.push_back(t.leaf(w));
            for (const auto& b : codec.enc_b) eb.push_back(t.leaf(b));
            for (const auto& w : codec.dec_w) dw.push_back(t.leaf(w));
            for (const auto& b : codec.dec_b) db.push_back(t.leaf(b));
            const Var s = detail::mlp_forward_tape(t, x, ew, eb);
            Var dec_in = s;
            const double snr_db = snr_lo_db + rng.next_double() * (snr_hi_db - snr_lo_db);
            if (snr_db != std::numeric_limits<double>::infinity()) {
                const Tensor& sv = t.value(s);
                const double power = sum_sq(sv) / double(sv.numel());
                const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
                Tensor noise(sv.shape);
                for (double& v : noise.data) v = sigma * rng.next_gaussian();
                dec_in = t.add(s, t.leaf(std::move(noise)));
            }
            const Var out = detail::mlp_forward_tape(t, dec_in, dw, db);
            const Var loss = t.scale(t.sum_sq(t.sub(out, x)), 1.0 / double(bsz));
            t.backward(loss);
            detail::apply_codec_update(codec, t, ew, eb, dw, db, cfg,
                                       cfg.learning_rate * std::pow(cfg.lr_decay, double(epoch)));
        }
    }
    return codec;
}

// CM-lite end-to-end training: latent values snap to the constellation with
// a straight-through projection, AWGN is added at a per-batch SNR draw, the
// receiver snaps again; gradients treat both snaps as identity.
inline CodecParams train_cm(const std::vector<Tensor>& dataset, const CodecArch& arch,
                            const TrainConfig& cfg, const CmConfig& cm,
                            double snr_lo_db, double snr_hi_db) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train_cm: dataset empty");
    SeededRng rng(cfg.seed);
    CodecParams codec = codec_init(arch, rng);
    const std::size_t n = dataset.size(), pix = arch.pixels();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[rng.next_index(i + 1)]);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t bsz = std::min(cfg.batch_size, n - start);
            Tensor batch({bsz, pix});
            for (std::size_t i = 0; i < bsz; ++i)
                std::copy(dataset[order[start + i]].data.begin(),
                          dataset[order[start + i]].data.end(),
                          batch.data.begin() + long(i * pix));
            Tape t;
            const Var x = t.leaf(batch);
            std::vector<Var> ew, eb, dw, db;
            for (const auto& w : codec.enc_w) ew.push_back(t.leaf(w));
            for (const auto& b : codec.enc_b) eb.push_back(t.leaf(b));
            for (const auto& w : codec.dec_w) dw.push_back(t.leaf(w));
            for (const auto& b : codec.dec_b) db.push_back(t.leaf(b));
            const Var s = detail::mlp_forward_tape(t, x, ew, eb);

            Tensor rx = cm_project(t.value(s), cm).symbols;
            const double snr_db = snr_lo_db + rng.next_double() * (snr_hi_db - snr_lo_db);
            const double sigma = std::sqrt(0.5 * std::pow(10.0, -snr_db / 10.0));
            for (double& v : rx.data) v += sigma * rng.next_gaussian();
            Tensor received = cm_project(rx, cm).symbols;

            // Straight-through: value of `received`, gradient of s.
            const Var dec_in =
                t.add(s, t.stop_grad(t.sub(t.leaf(std::move(received)), s)));
            const Var out = detail::mlp_forward_tape(t, dec_in, dw, db);
            const Var loss = t.scale(t.sum_sq(t.sub(out, x)), 1.0 / double(bsz));
            t.backward(loss);
            detail::apply_codec_update(codec, t, ew, eb, dw, db, cfg,
                                       cfg.learning_rate * std::pow(cfg.lr_decay, double(epoch)));
        }
    }
    return codec;
}

}  // namespace sdac
