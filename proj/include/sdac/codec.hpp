#pragma once
// Desk-scale semantic codec (affine + tanh stacks) and the end-to-end
// discrete training loop: encoder -> adapter expand -> nearest-neighbor
// quantize -> BSC -> table lookup -> adapter combine -> decoder, trained
// with the straight-through surrogate so bit flips stay gradient-transparent.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdac/autodiff.hpp"
#include "sdac/channel.hpp"
#include "sdac/metrics.hpp"
#include "sdac/rng.hpp"
#include "sdac/sdac.hpp"
#include "sdac/tensor.hpp"

namespace sdac {

struct CodecArch {
    std::size_t image_h = 16, image_w = 16;
    LatentShape latent{8, 4, 4};
    std::vector<std::size_t> hidden{192, 160};  // per side, between pixels and latent

    std::size_t pixels() const { return image_h * image_w; }

    std::vector<std::size_t> encoder_dims() const {
        std::vector<std::size_t> d{pixels()};
        d.insert(d.end(), hidden.begin(), hidden.end());
        d.push_back(latent.len());
        return d;
    }
    std::vector<std::size_t> decoder_dims() const {
        auto d = encoder_dims();
        return {d.rbegin(), d.rend()};
    }
};

// Affine layer stacks; tanh after every layer except the last of each stack.
struct CodecParams {
    CodecArch arch;
    std::vector<Tensor> enc_w, enc_b;
    std::vector<Tensor> dec_w, dec_b;
};

inline CodecParams codec_init(const CodecArch& arch, SeededRng& rng) {
    CodecParams p;
    p.arch = arch;
    auto build = [&](const std::vector<std::size_t>& dims, std::vector<Tensor>& ws,
                     std::vector<Tensor>& bs) {
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            const std::size_t in = dims[l], out = dims[l + 1];
            Tensor w({in, out});
            const double bound = std::sqrt(6.0 / double(in + out));
            for (double& v : w.data) v = bound * (2.0 * rng.next_double() - 1.0);
            ws.push_back(std::move(w));
            bs.push_back(Tensor({out}));
        }
    };
    build(arch.encoder_dims(), p.enc_w, p.enc_b);
    build(arch.decoder_dims(), p.dec_w, p.dec_b);
    return p;
}

namespace detail {

inline Tensor mlp_forward(const Tensor& x, const std::vector<Tensor>& ws,
                          const std::vector<Tensor>& bs) {
    Tensor h = x;
    for (std::size_t l = 0; l < ws.size(); ++l) {
        h = matmul(h, ws[l]);
        for (std::size_t i = 0; i < h.rows(); ++i)
            for (std::size_t j = 0; j < h.cols(); ++j) h.at(i, j) += bs[l][j];
        if (l + 1 < ws.size())
            for (double& v : h.data) v = std::tanh(v);
    }
    return h;
}

inline Var mlp_forward_tape(Tape& t, Var x, const std::vector<Var>& ws,
                            const std::vector<Var>& bs) {
    Var h = x;
    for (std::size_t l = 0; l < ws.size(); ++l) {
        h = t.add_rowvec(t.matmul(h, ws[l]), bs[l]);
        if (l + 1 < ws.size()) h = t.tanh_(h);
    }
    return h;
}

}  // namespace detail

// x: [B, pixels] with values in [0, 1] -> latent [B, latent_len].
inline Tensor encode(const Tensor& x, const CodecParams& p) {
    if (x.shape.size() != 2 || x.cols() != p.arch.pixels())
        throw std::invalid_argument("encode: batch shape mismatch");
    for (double v : x.data)
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("encode: pixels outside [0, 1]");
    return detail::mlp_forward(x, p.enc_w, p.enc_b);
}

// latent [B, latent_len] -> image batch [B, pixels], clamped to [0, 1].
inline Tensor decode(const Tensor& s_hat, const CodecParams& p) {
    if (s_hat.shape.size() != 2 || s_hat.cols() != p.arch.latent.len())
        throw std::invalid_argument("decode: latent shape mismatch");
    return clamp(detail::mlp_forward(s_hat, p.dec_w, p.dec_b), 0.0, 1.0);
}

struct LinkDiagnostics {
    Tensor s;            // [B, L]
    Tensor s_prime;      // [B*L, q]
    std::vector<std::size_t> indices;
    BitSequence bits;
    BitSequence bits_hat;
    Tensor s_hat_prime;  // [B*L, q]
    Tensor s_hat;        // [B, L]
    Tensor selected;     // argmin codebook entries pre-channel, [B*L, q]
};

// Full digital chain for inference/evaluation (no gradients).
inline Tensor forward_link(const Tensor& x, const CodecParams& codec,
                           const SdacState& st, double p, SeededRng& rng,
                           LinkDiagnostics* diag = nullptr) {
    st.validate();
    const Tensor s = encode(x, codec);
    Tensor s_flat({s.numel()}, s.data);
    const Tensor sp = adapter_expand(s_flat, st.adapter, st.latent);
    const QuantizeResult qr = quantize(sp, st.codebook);
    const BitSequence bhat = bsc_transmit(qr.bits, p, rng);
    const Tensor shp = dequantize(bhat, st.codebook, qr.indices.size());
    Tensor combined = adapter_combine(shp, st.adapter, st.latent);
    Tensor s_hat(s.shape, combined.data);
    Tensor out = decode(s_hat, codec);
    if (diag) {
        diag->s = s;
        diag->s_prime = sp;
        diag->indices = qr.indices;
        diag->bits = qr.bits;
        diag->bits_hat = bhat;
        diag->s_hat_prime = shp;
        diag->s_hat = s_hat;
        diag->selected = dequantize(qr.bits, st.codebook, qr.indices.size());
    }
    return out;
}

struct TrainConfig {
    std::size_t q = 4;
    double lambda = 1.0;
    double alpha = 0.8, beta = 0.2;
    double ber_lo = 0.0, ber_hi = 0.3;
    double learning_rate = 1e-3;
    double lr_decay = 1.0;   // per-epoch multiplier; 1.0 keeps the rate constant
    double grad_clip = 0.0;  // global L2 norm cap; <= 0 disables clipping
    std::size_t batch_size = 32;
    std::size_t epochs = 0;
    std::uint64_t seed = 1;
    bool per_sample_ber = false;  // default: one BER draw per batch
    bool freeze_codec = false;

    void validate() const {
        if (std::fabs(alpha + beta - 1.0) > 1e-12 || alpha < 0 || beta < 0)
            throw std::invalid_argument("TrainConfig: need alpha + beta = 1, both >= 0");
        if (ber_lo < 0 || ber_hi > 0.5 || ber_lo > ber_hi)
            throw std::invalid_argument("TrainConfig: ber range must satisfy 0 <= lo <= hi <= 0.5");
        if (lambda < 0) throw std::invalid_argument("TrainConfig: lambda must be >= 0");
        if (lr_decay <= 0.0 || lr_decay > 1.0)
            throw std::invalid_argument("TrainConfig: lr_decay must be in (0, 1]");
    }
};

struct StepResult {
    double total_loss = 0.0;
    double ori_loss = 0.0;
    double sdac_loss = 0.0;
    double ber_drawn = 0.0;
    Gradient grads;  // enc_w0.., enc_b0.., dec_w0.., dec_b0.., adapter, codebook
};

// One forward/backward pass over a batch. The loss is
//   squared pixel error + lambda * (recon + alpha*codebook + beta*commitment),
// every term a per-sample sum averaged over the batch.
// One BER draw p ~ U(ber_lo, ber_hi) per batch (or per sample).
inline StepResult train_step(const Tensor& batch, const CodecParams& codec,
                             const SdacState& st, const TrainConfig& cfg,
                             SeededRng& rng) {
    cfg.validate();
    st.validate();
    if (batch.shape.size() != 2 || batch.rows() == 0)
        throw std::invalid_argument("train_step: empty batch");
    const std::size_t B = batch.rows();
    const std::size_t L = st.latent.len(), hw = st.latent.hw();

    Tape t;
    const Var x = t.leaf(batch);
    std::vector<Var> ew, eb, dw, db;
    for (const auto& w : codec.enc_w) ew.push_back(t.leaf(w));
    for (const auto& b : codec.enc_b) eb.push_back(t.leaf(b));
    for (const auto& w : codec.dec_w) dw.push_back(t.leaf(w));
    for (const auto& b : codec.dec_b) db.push_back(t.leaf(b));
    const Var vew = t.leaf(st.adapter.expand_w);
    const Var veb = t.leaf(st.adapter.expand_b);
    const Var vcw = t.leaf(st.adapter.combine_w);
    const Var vcb = t.leaf(st.adapter.combine_b);
    const Var ve = t.leaf(st.codebook.entries);

    const Var s = detail::mlp_forward_tape(t, x, ew, eb);  // [B, L]
    const Var sp = t.group_affine_expand(s, vew, veb, L, hw);  // [B*L, q]

    // Digital leg: argmin + BSC, constants on the tape.
    const QuantizeResult qr = quantize(t.value(sp), st.codebook);
    StepResult r;
    BitSequence bhat;
    if (cfg.per_sample_ber) {
        bhat = qr.bits;
        const std::size_t per = L * st.q();
        double mean_p = 0.0;
        for (std::size_t i = 0; i < B; ++i) {
            const double p = cfg.ber_lo + rng.next_double() * (cfg.ber_hi - cfg.ber_lo);
            mean_p += p;
            for (std::size_t k = i * per; k < (i + 1) * per; ++k)
                if (rng.next_double() < p) bhat[k] = std::uint8_t(1 - bhat[k]);
        }
        r.ber_drawn = mean_p / double(B);
    } else {
        r.ber_drawn = cfg.ber_lo + rng.next_double() * (cfg.ber_hi - cfg.ber_lo);
        bhat = bsc_transmit(qr.bits, r.ber_drawn, rng);
    }
    const auto idx_hat = bits_to_indices(bhat, st.q());

    const Var shat_p = t.gather_rows(ve, idx_hat);
    const Var ste = t.add(sp, t.stop_grad(t.sub(shat_p, sp)));
    const Var s_hat = t.group_affine_combine(ste, vcw, vcb, L, hw, t.value(s).shape);
    const Var out = detail::mlp_forward_tape(t, s_hat, dw, db);

    // All terms are per-sample sums averaged over the batch, so their
    // gradients share a scale and one fixed step size drives the whole model.
    const double inv_b = 1.0 / double(B);
    const Var l_ori = t.scale(t.sum_sq(t.sub(out, x)), inv_b);

    const Var recon = t.scale(t.sum_sq(t.sub(s_hat, s)), inv_b);
    const Var term_a = t.scale(t.sum_sq(t.sub(t.stop_grad(sp), shat_p)), inv_b);
    const Var term_b = t.scale(t.sum_sq(t.sub(sp, t.stop_grad(shat_p))), inv_b);
    const Var l_sdac =
        t.add(recon, t.add(t.scale(term_a, cfg.alpha), t.scale(term_b, cfg.beta)));

    const Var total = t.add(l_ori, t.scale(l_sdac, cfg.lambda));
    t.backward(total);

    r.total_loss = t.value(total)[0];
    r.ori_loss = t.value(l_ori)[0];
    r.sdac_loss = t.value(l_sdac)[0];
    if (!std::isfinite(r.total_loss))
        throw std::runtime_error("train_step: non-finite loss (ori=" +
                                 std::to_string(r.ori_loss) +
                                 ", sdac=" + std::to_string(r.sdac_loss) + ")");
    for (std::size_t l = 0; l < ew.size(); ++l) {
        r.grads["enc_w" + std::to_string(l)] = t.grad(ew[l]);
        r.grads["enc_b" + std::to_string(l)] = t.grad(eb[l]);
    }
    for (std::size_t l = 0; l < dw.size(); ++l) {
        r.grads["dec_w" + std::to_string(l)] = t.grad(dw[l]);
        r.grads["dec_b" + std::to_string(l)] = t.grad(db[l]);
    }
    r.grads["expand_w"] = t.grad(vew);
    r.grads["expand_b"] = t.grad(veb);
    r.grads["combine_w"] = t.grad(vcw);
    r.grads["combine_b"] = t.grad(vcb);
    r.grads["codebook"] = t.grad(ve);
    return r;
}

struct EpochRecord {
    double mean_loss = 0.0;
    double psnr_p0 = 0.0, psnr_p005 = 0.0, psnr_p01 = 0.0;
};

struct TrainResult {
    CodecParams codec;
    SdacState sdac;
    std::vector<EpochRecord> history;
};

// Mean PSNR of the digital link over a dataset at flip probability p.
inline double eval_link_psnr(const std::vector<Tensor>& images,
                             const CodecParams& codec, const SdacState& st,
                             double p, SeededRng& rng) {
    double acc = 0.0;
    for (const auto& img : images) {
        Tensor x({1, img.numel()}, img.data);
        const Tensor out = forward_link(x, codec, st, p, rng);
        acc += psnr(x, out);
    }
    return acc / double(images.size());
}

namespace detail {

inline void apply_gd(Tensor& param, const Tensor& grad, double lr) {
    for (std::size_t i = 0; i < param.numel(); ++i)
        param.data[i] -= lr * grad.data[i];
}

// Rescales all gradients in place so their global L2 norm is at most
// max_norm; returns the pre-clip norm. max_norm <= 0 means no clipping.
inline double clip_gradient(Gradient& g, double max_norm) {
    double sq = 0.0;
    for (const auto& [name, t] : g)
        for (double v : t.data) sq += v * v;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double f = max_norm / norm;
        for (auto& [name, t] : g)
            for (double& v : t.data) v *= f;
    }
    return norm;
}

}  // namespace detail

// Shuffled mini-batch gradient descent; deterministic under (seed, config).
inline TrainResult train(const std::vector<Tensor>& dataset, const CodecArch& arch,
                         const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train: dataset empty");
    SeededRng rng(cfg.seed);
    TrainResult res;
    res.codec = codec_init(arch, rng);
    res.sdac = sdac_init(cfg.q, arch.latent, rng);

    const std::size_t n = dataset.size();
    const std::size_t pix = arch.pixels();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    // Probe PSNRs are tracked on a fixed prefix of the dataset.
    const std::vector<Tensor> probe(dataset.begin(),
                                    dataset.begin() + long(std::min<std::size_t>(32, n)));
    SeededRng eval_rng = rng.split(0xE7A1);
    double initial_loss = -1.0;
    int bad_epochs = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the training stream.
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = rng.next_index(i + 1);
            std::swap(order[i], order[j]);
        }
        double loss_acc = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t bsz = std::min(cfg.batch_size, n - start);
            Tensor batch({bsz, pix});
            for (std::size_t i = 0; i < bsz; ++i)
                std::copy(dataset[order[start + i]].data.begin(),
                          dataset[order[start + i]].data.end(),
                          batch.data.begin() + long(i * pix));
            StepResult sr = train_step(batch, res.codec, res.sdac, cfg, rng);
            detail::clip_gradient(sr.grads, cfg.grad_clip);
            const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, double(epoch));
            if (!cfg.freeze_codec) {
                for (std::size_t l = 0; l < res.codec.enc_w.size(); ++l) {
                    detail::apply_gd(res.codec.enc_w[l], sr.grads.at("enc_w" + std::to_string(l)), lr);
                    detail::apply_gd(res.codec.enc_b[l], sr.grads.at("enc_b" + std::to_string(l)), lr);
                }
                for (std::size_t l = 0; l < res.codec.dec_w.size(); ++l) {
                    detail::apply_gd(res.codec.dec_w[l], sr.grads.at("dec_w" + std::to_string(l)), lr);
                    detail::apply_gd(res.codec.dec_b[l], sr.grads.at("dec_b" + std::to_string(l)), lr);
                }
            }
            detail::apply_gd(res.sdac.adapter.expand_w, sr.grads.at("expand_w"), lr);
            detail::apply_gd(res.sdac.adapter.expand_b, sr.grads.at("expand_b"), lr);
            detail::apply_gd(res.sdac.adapter.combine_w, sr.grads.at("combine_w"), lr);
            detail::apply_gd(res.sdac.adapter.combine_b, sr.grads.at("combine_b"), lr);
            detail::apply_gd(res.sdac.codebook.entries, sr.grads.at("codebook"), lr);
            loss_acc += sr.total_loss;
            ++steps;
        }
        EpochRecord rec;
        rec.mean_loss = loss_acc / double(steps);
        SeededRng r0 = eval_rng.split(epoch);
        rec.psnr_p0 = eval_link_psnr(probe, res.codec, res.sdac, 0.0, r0);
        SeededRng r1 = eval_rng.split(epoch + 0x10000);
        rec.psnr_p005 = eval_link_psnr(probe, res.codec, res.sdac, 0.05, r1);
        SeededRng r2 = eval_rng.split(epoch + 0x20000);
        rec.psnr_p01 = eval_link_psnr(probe, res.codec, res.sdac, 0.1, r2);
        res.history.push_back(rec);

        if (initial_loss < 0.0) initial_loss = rec.mean_loss;
        bad_epochs = rec.mean_loss > 10.0 * initial_loss ? bad_epochs + 1 : 0;
        if (bad_epochs >= 3)
            throw std::runtime_error("train: diverged (loss > 10x initial for 3 epochs)");
    }
    return res;
}

}  // namespace sdac
