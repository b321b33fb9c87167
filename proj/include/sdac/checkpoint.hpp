#pragma once
// Text checkpoint format, bit-exact for f64 via 17-significant-digit
// decimals:
//
//   SDAC-CKPT v1
//   rng xoshiro256ss
//   array <name> <ndim> <d0> <d1> ...
//   <numel values, space separated>
//   ...
//   config
//   <key> <value>
//   ...
//   end

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sdac/codec.hpp"
#include "sdac/rng.hpp"
#include "sdac/tensor.hpp"

namespace sdac {

inline constexpr const char* kCheckpointMagic = "SDAC-CKPT v1";

struct Checkpoint {
    std::vector<std::pair<std::string, Tensor>> arrays;
    std::vector<std::pair<std::string, std::string>> config;

    const Tensor& array(const std::string& name) const {
        for (const auto& [n, t] : arrays)
            if (n == name) return t;
        throw std::out_of_range("checkpoint: missing array " + name);
    }
    std::string config_value(const std::string& key) const {
        for (const auto& [k, v] : config)
            if (k == key) return v;
        throw std::out_of_range("checkpoint: missing config key " + key);
    }
    bool has_config(const std::string& key) const {
        for (const auto& [k, v] : config)
            if (k == key) return true;
        return false;
    }
};

inline std::string format_f64(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void checkpoint_save(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out << kCheckpointMagic << "\n";
    out << "rng " << kRngAlgorithm << "\n";
    for (const auto& [name, t] : ck.arrays) {
        out << "array " << name << " " << t.shape.size();
        for (std::size_t d : t.shape) out << " " << d;
        out << "\n";
        for (std::size_t i = 0; i < t.numel(); ++i)
            out << (i ? " " : "") << format_f64(t.data[i]);
        out << "\n";
    }
    out << "config\n";
    for (const auto& [k, v] : ck.config) out << k << " " << v << "\n";
    out << "end\n";
    if (!out) throw std::runtime_error("checkpoint: write failure on " + path);
}

inline Checkpoint checkpoint_load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointMagic)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    if (!std::getline(in, line) || line != std::string("rng ") + kRngAlgorithm)
        throw std::runtime_error("checkpoint: unknown rng algorithm in " + path);

    Checkpoint ck;
    while (std::getline(in, line)) {
        if (line == "config") break;
        std::istringstream hdr(line);
        std::string tag, name;
        std::size_t ndim;
        if (!(hdr >> tag >> name >> ndim) || tag != "array")
            throw std::runtime_error("checkpoint: malformed array header: " + line);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape)
            if (!(hdr >> d)) throw std::runtime_error("checkpoint: malformed shape: " + line);
        Tensor t(shape);
        if (!std::getline(in, line))
            throw std::runtime_error("checkpoint: truncated values for " + name);
        std::istringstream vals(line);
        for (std::size_t i = 0; i < t.numel(); ++i)
            if (!(vals >> t.data[i]))
                throw std::runtime_error("checkpoint: truncated values for " + name);
        ck.arrays.emplace_back(name, std::move(t));
    }
    while (std::getline(in, line)) {
        if (line == "end") return ck;
        const auto sp = line.find(' ');
        if (sp == std::string::npos)
            throw std::runtime_error("checkpoint: malformed config line: " + line);
        ck.config.emplace_back(line.substr(0, sp), line.substr(sp + 1));
    }
    throw std::runtime_error("checkpoint: missing end marker in " + path);
}

// --- Model bundle <-> checkpoint -----------------------------------------

inline Checkpoint bundle_to_checkpoint(const CodecParams& codec, const SdacState& st,
                                       const TrainConfig& cfg) {
    Checkpoint ck;
    for (std::size_t l = 0; l < codec.enc_w.size(); ++l) {
        ck.arrays.emplace_back("enc_w" + std::to_string(l), codec.enc_w[l]);
        ck.arrays.emplace_back("enc_b" + std::to_string(l), codec.enc_b[l]);
    }
    for (std::size_t l = 0; l < codec.dec_w.size(); ++l) {
        ck.arrays.emplace_back("dec_w" + std::to_string(l), codec.dec_w[l]);
        ck.arrays.emplace_back("dec_b" + std::to_string(l), codec.dec_b[l]);
    }
    ck.arrays.emplace_back("codebook", st.codebook.entries);
    ck.arrays.emplace_back("expand_w", st.adapter.expand_w);
    ck.arrays.emplace_back("expand_b", st.adapter.expand_b);
    ck.arrays.emplace_back("combine_w", st.adapter.combine_w);
    ck.arrays.emplace_back("combine_b", st.adapter.combine_b);

    auto put = [&](const std::string& k, const std::string& v) {
        ck.config.emplace_back(k, v);
    };
    put("image_h", std::to_string(codec.arch.image_h));
    put("image_w", std::to_string(codec.arch.image_w));
    put("latent_c", std::to_string(codec.arch.latent.c));
    put("latent_h", std::to_string(codec.arch.latent.h));
    put("latent_w", std::to_string(codec.arch.latent.w));
    {
        std::string hs;
        for (std::size_t h : codec.arch.hidden) hs += (hs.empty() ? "" : ",") + std::to_string(h);
        put("hidden", hs.empty() ? "-" : hs);
    }
    put("enc_layers", std::to_string(codec.enc_w.size()));
    put("q", std::to_string(st.q()));
    put("lambda", format_f64(cfg.lambda));
    put("alpha", format_f64(cfg.alpha));
    put("beta", format_f64(cfg.beta));
    put("ber_lo", format_f64(cfg.ber_lo));
    put("ber_hi", format_f64(cfg.ber_hi));
    put("learning_rate", format_f64(cfg.learning_rate));
    put("lr_decay", format_f64(cfg.lr_decay));
    put("grad_clip", format_f64(cfg.grad_clip));
    put("batch_size", std::to_string(cfg.batch_size));
    put("epochs", std::to_string(cfg.epochs));
    put("seed", std::to_string(cfg.seed));
    return ck;
}

struct ModelBundle {
    CodecParams codec;
    SdacState sdac;
    TrainConfig cfg;
};

inline ModelBundle checkpoint_to_bundle(const Checkpoint& ck) {
    ModelBundle mb;
    CodecArch arch;
    arch.image_h = std::stoul(ck.config_value("image_h"));
    arch.image_w = std::stoul(ck.config_value("image_w"));
    arch.latent = LatentShape{std::stoul(ck.config_value("latent_c")),
                              std::stoul(ck.config_value("latent_h")),
                              std::stoul(ck.config_value("latent_w"))};
    arch.hidden.clear();
    const std::string hs = ck.config_value("hidden");
    if (hs != "-") {
        std::istringstream ss(hs);
        std::string tok;
        while (std::getline(ss, tok, ',')) arch.hidden.push_back(std::stoul(tok));
    }
    mb.codec.arch = arch;
    const std::size_t layers = std::stoul(ck.config_value("enc_layers"));
    for (std::size_t l = 0; l < layers; ++l) {
        mb.codec.enc_w.push_back(ck.array("enc_w" + std::to_string(l)));
        mb.codec.enc_b.push_back(ck.array("enc_b" + std::to_string(l)));
        mb.codec.dec_w.push_back(ck.array("dec_w" + std::to_string(l)));
        mb.codec.dec_b.push_back(ck.array("dec_b" + std::to_string(l)));
    }
    mb.sdac.codebook.q = std::stoul(ck.config_value("q"));
    mb.sdac.codebook.entries = ck.array("codebook");
    mb.sdac.adapter.expand_w = ck.array("expand_w");
    mb.sdac.adapter.expand_b = ck.array("expand_b");
    mb.sdac.adapter.combine_w = ck.array("combine_w");
    mb.sdac.adapter.combine_b = ck.array("combine_b");
    mb.sdac.latent = arch.latent;
    mb.cfg.q = mb.sdac.codebook.q;
    mb.cfg.lambda = std::stod(ck.config_value("lambda"));
    mb.cfg.alpha = std::stod(ck.config_value("alpha"));
    mb.cfg.beta = std::stod(ck.config_value("beta"));
    mb.cfg.ber_lo = std::stod(ck.config_value("ber_lo"));
    mb.cfg.ber_hi = std::stod(ck.config_value("ber_hi"));
    mb.cfg.learning_rate = std::stod(ck.config_value("learning_rate"));
    if (ck.has_config("lr_decay")) mb.cfg.lr_decay = std::stod(ck.config_value("lr_decay"));
    if (ck.has_config("grad_clip")) mb.cfg.grad_clip = std::stod(ck.config_value("grad_clip"));
    mb.cfg.batch_size = std::stoul(ck.config_value("batch_size"));
    mb.cfg.epochs = std::stoul(ck.config_value("epochs"));
    mb.cfg.seed = std::stoull(ck.config_value("seed"));
    mb.sdac.validate();
    return mb;
}

}  // namespace sdac
