#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "zsscl/rng.hpp"
#include "zsscl/tape.hpp"

namespace zsscl {

/// Architecture of the convolutional autoencoder: conv ladder down,
/// channel-wise fully connected bottleneck, mirrored transposed-conv ladder
/// back up. The default configuration has exactly 90,609 parameters.
struct NetConfig {
    std::vector<int> encoder_channels{8, 16, 32, 64};
    int fc_channels = 64;
    int kernel = 4;
    int stride = 2;
    int pad = 1;
    double activation_slope = 0.2;
    std::uint64_t init_seed = 0;

    int depth() const { return static_cast<int>(encoder_channels.size()); }

    /// Spatial extents must be divisible by this for shape-preserving
    /// forward passes.
    int extent_multiple() const {
        int m = 1;
        for (int i = 0; i < depth(); ++i) m *= stride;
        return m;
    }
};

inline void validate(const NetConfig& cfg) {
    if (cfg.encoder_channels.empty()) throw UsageError("encoder_channels must be nonempty");
    int prev = 1;
    for (int c : cfg.encoder_channels) {
        if (c < 2) throw UsageError("encoder channels must be >= 2, got " + std::to_string(c));
        if (c < prev) throw UsageError("encoder channels must be nondecreasing");
        prev = c;
    }
    if (cfg.fc_channels != cfg.encoder_channels.back())
        throw UsageError("fc_channels must equal the last encoder channel count");
    if (cfg.stride < 1 || cfg.pad < 0 || cfg.kernel < 1) throw UsageError("invalid kernel/stride/pad");
    if (cfg.kernel != 2 * cfg.pad + cfg.stride)
        throw UsageError("kernel must equal 2*pad + stride so the ladder halves and doubles exactly");
    if (cfg.activation_slope < 0.0 || cfg.activation_slope > 1.0)
        throw UsageError("activation slope must be in [0,1]");
}

inline std::int64_t parameter_count(const NetConfig& cfg) {
    validate(cfg);
    const std::int64_t kk = static_cast<std::int64_t>(cfg.kernel) * cfg.kernel;
    std::int64_t total = 0;
    int cin = 1;
    for (int cout : cfg.encoder_channels) {
        total += cin * cout * kk + cout;
        cin = cout;
    }
    total += static_cast<std::int64_t>(cfg.fc_channels) * cfg.encoder_channels.back() + cfg.fc_channels;
    cin = cfg.fc_channels;
    for (int i = cfg.depth() - 2; i >= 0; --i) {
        const int cout = cfg.encoder_channels[static_cast<std::size_t>(i)];
        total += cin * cout * kk + cout;
        cin = cout;
    }
    total += cin * 1 * kk + 1;
    return total;
}

/// Full parameter set of the autoencoder. Tensors appear in declaration
/// order: encoder weight/bias pairs, fc weight/bias, decoder weight/bias
/// pairs. Checkpoints serialize in this order.
template <class Real>
struct CaeParams {
    NetConfig config;
    std::vector<Tensor<Real>> enc_w, enc_b;
    Tensor<Real> fc_w, fc_b;
    std::vector<Tensor<Real>> dec_w, dec_b;

    template <class F>
    void for_each_tensor(F&& f) {
        for (std::size_t i = 0; i < enc_w.size(); ++i) {
            f(enc_w[i]);
            f(enc_b[i]);
        }
        f(fc_w);
        f(fc_b);
        for (std::size_t i = 0; i < dec_w.size(); ++i) {
            f(dec_w[i]);
            f(dec_b[i]);
        }
    }

    template <class F>
    void for_each_tensor(F&& f) const {
        const_cast<CaeParams*>(this)->for_each_tensor([&](const Tensor<Real>& t) { f(t); });
    }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for_each_tensor([&n](const Tensor<Real>& t) { n += t.size(); });
        return n;
    }

    template <class Other>
    CaeParams<Other> cast() const {
        CaeParams<Other> out;
        out.config = config;
        for (const auto& t : enc_w) out.enc_w.push_back(t.template cast<Other>());
        for (const auto& t : enc_b) out.enc_b.push_back(t.template cast<Other>());
        out.fc_w = fc_w.template cast<Other>();
        out.fc_b = fc_b.template cast<Other>();
        for (const auto& t : dec_w) out.dec_w.push_back(t.template cast<Other>());
        for (const auto& t : dec_b) out.dec_b.push_back(t.template cast<Other>());
        return out;
    }
};

/// Decoder channel ladder is the mirror of the encoder ladder, ending in a
/// single output channel.
inline std::vector<std::pair<int, int>> decoder_ladder(const NetConfig& cfg) {
    std::vector<std::pair<int, int>> out;
    int cin = cfg.fc_channels;
    for (int i = cfg.depth() - 2; i >= 0; --i) {
        out.emplace_back(cin, cfg.encoder_channels[static_cast<std::size_t>(i)]);
        cin = cfg.encoder_channels[static_cast<std::size_t>(i)];
    }
    out.emplace_back(cin, 1);
    return out;
}

/// Allocate and initialize parameters: uniform in +-sqrt(1/fan_in) per
/// layer, drawn from a stream seeded with config.init_seed.
template <class Real>
CaeParams<Real> build_cae(const NetConfig& cfg) {
    validate(cfg);
    SplitRng rng(cfg.init_seed);
    const int k = cfg.kernel;
    auto init = [&rng](Tensor<Real>& t, int fan_in) {
        const double bound = std::sqrt(1.0 / fan_in);
        for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<Real>(rng.uniform(-bound, bound));
    };

    CaeParams<Real> p;
    p.config = cfg;
    int cin = 1;
    for (int cout : cfg.encoder_channels) {
        Tensor<Real> w{Shape{cout, cin, k, k}};
        Tensor<Real> b{Shape{cout}};
        init(w, cin * k * k);
        init(b, cin * k * k);
        p.enc_w.push_back(std::move(w));
        p.enc_b.push_back(std::move(b));
        cin = cout;
    }
    p.fc_w = Tensor<Real>{Shape{cfg.fc_channels, cfg.encoder_channels.back()}};
    p.fc_b = Tensor<Real>{Shape{cfg.fc_channels}};
    init(p.fc_w, cfg.encoder_channels.back());
    init(p.fc_b, cfg.encoder_channels.back());
    for (auto [lin, lout] : decoder_ladder(cfg)) {
        Tensor<Real> w{Shape{lin, lout, k, k}};
        Tensor<Real> b{Shape{lout}};
        init(w, lin * k * k);
        init(b, lin * k * k);
        p.dec_w.push_back(std::move(w));
        p.dec_b.push_back(std::move(b));
    }
    return p;
}

template <class Real>
void check_forward_extents(const NetConfig& cfg, const Tensor<Real>& x) {
    if (x.rank() != 3 || x.extent(0) != 1)
        throw DimensionError("network input must be [1,H,W], got " + shape_str(x.shape()));
    const int m = cfg.extent_multiple();
    if (x.extent(1) % m != 0 || x.extent(2) % m != 0)
        throw DimensionError("input extents " + shape_str(x.shape()) + " must be divisible by " +
                             std::to_string(m) + "; pad first");
}

/// Parameter handles registered on a tape for one forward/backward pass.
template <class Real>
struct CaeVars {
    using Var = typename Tape<Real>::Var;
    std::vector<Var> enc_w, enc_b;
    Var fc_w, fc_b;
    std::vector<Var> dec_w, dec_b;
};

template <class Real>
CaeVars<Real> register_cae(Tape<Real>& tape, const CaeParams<Real>& p) {
    CaeVars<Real> v;
    for (const auto& t : p.enc_w) v.enc_w.push_back(tape.leaf(t));
    for (const auto& t : p.enc_b) v.enc_b.push_back(tape.leaf(t));
    v.fc_w = tape.leaf(p.fc_w);
    v.fc_b = tape.leaf(p.fc_b);
    for (const auto& t : p.dec_w) v.dec_w.push_back(tape.leaf(t));
    for (const auto& t : p.dec_b) v.dec_b.push_back(tape.leaf(t));
    return v;
}

/// Differentiable forward pass. Hidden layers use the leaky rectifier; the
/// final decoder layer is linear so signed amplitudes pass through.
template <class Real>
typename Tape<Real>::Var cae_forward(Tape<Real>& tape, const CaeVars<Real>& v,
                                     typename Tape<Real>::Var x, const NetConfig& cfg) {
    check_forward_extents(cfg, tape.value(x));
    const Real slope = static_cast<Real>(cfg.activation_slope);
    auto h = x;
    for (std::size_t i = 0; i < v.enc_w.size(); ++i)
        h = tape.leaky_rect(tape.conv2d(h, v.enc_w[i], v.enc_b[i], cfg.stride, cfg.pad), slope);
    h = tape.leaky_rect(tape.channel_linear(h, v.fc_w, v.fc_b), slope);
    for (std::size_t i = 0; i + 1 < v.dec_w.size(); ++i)
        h = tape.leaky_rect(tape.conv2d_transpose(h, v.dec_w[i], v.dec_b[i], cfg.stride, cfg.pad), slope);
    h = tape.conv2d_transpose(h, v.dec_w.back(), v.dec_b.back(), cfg.stride, cfg.pad);
    return h;
}

/// Inference-only forward pass (no tape).
template <class Real>
Tensor<Real> cae_forward(const CaeParams<Real>& p, const Tensor<Real>& x) {
    check_forward_extents(p.config, x);
    const Real slope = static_cast<Real>(p.config.activation_slope);
    Tensor<Real> h = x;
    for (std::size_t i = 0; i < p.enc_w.size(); ++i)
        h = leaky_rect(conv2d(h, p.enc_w[i], p.enc_b[i], p.config.stride, p.config.pad), slope);
    h = leaky_rect(channel_linear(h, p.fc_w, p.fc_b), slope);
    for (std::size_t i = 0; i + 1 < p.dec_w.size(); ++i)
        h = leaky_rect(conv2d_transpose(h, p.dec_w[i], p.dec_b[i], p.config.stride, p.config.pad), slope);
    return conv2d_transpose(h, p.dec_w.back(), p.dec_b.back(), p.config.stride, p.config.pad);
}

/// Encoder output before the bottleneck, for inspection.
template <class Real>
Tensor<Real> cae_encode(const CaeParams<Real>& p, const Tensor<Real>& x) {
    check_forward_extents(p.config, x);
    const Real slope = static_cast<Real>(p.config.activation_slope);
    Tensor<Real> h = x;
    for (std::size_t i = 0; i < p.enc_w.size(); ++i)
        h = leaky_rect(conv2d(h, p.enc_w[i], p.enc_b[i], p.config.stride, p.config.pad), slope);
    return h;
}

// ---- checkpoint format ----
// "ZSCL" magic, u32 version, config echo, then tensors as little-endian
// IEEE-754 32-bit floats in declaration order.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    put_u32(os, static_cast<std::uint32_t>(v));
    put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline void put_f32(std::ostream& os, float v) {
    std::uint32_t u;
    static_assert(sizeof(u) == sizeof(v));
    std::memcpy(&u, &v, 4);
    put_u32(os, u);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated file while reading " + what);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

inline std::uint64_t get_u64(std::istream& is, const std::string& what) {
    std::uint64_t lo = get_u32(is, what);
    std::uint64_t hi = get_u32(is, what);
    return lo | hi << 32;
}

inline float get_f32(std::istream& is, const std::string& what) {
    std::uint32_t u = get_u32(is, what);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

}  // namespace detail

template <class Real>
void save_checkpoint(const CaeParams<Real>& p, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write("ZSCL", 4);
    detail::put_u32(os, 1u);  // format version
    detail::put_u32(os, static_cast<std::uint32_t>(p.config.kernel));
    detail::put_u32(os, static_cast<std::uint32_t>(p.config.stride));
    detail::put_u32(os, static_cast<std::uint32_t>(p.config.pad));
    detail::put_f32(os, static_cast<float>(p.config.activation_slope));
    detail::put_u64(os, p.config.init_seed);
    detail::put_u32(os, static_cast<std::uint32_t>(p.config.fc_channels));
    detail::put_u32(os, static_cast<std::uint32_t>(p.config.encoder_channels.size()));
    for (int c : p.config.encoder_channels) detail::put_u32(os, static_cast<std::uint32_t>(c));
    p.for_each_tensor([&os](const Tensor<Real>& t) {
        for (std::int64_t i = 0; i < t.size(); ++i) detail::put_f32(os, static_cast<float>(t[i]));
    });
    if (!os) throw IoError("write failed: " + path);
}

inline CaeParams<float> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "ZSCL")
        throw ParseError("not a checkpoint file (bad magic): " + path);
    const std::uint32_t version = detail::get_u32(is, "version");
    if (version != 1) throw ParseError("unsupported checkpoint version " + std::to_string(version));
    NetConfig cfg;
    cfg.kernel = static_cast<int>(detail::get_u32(is, "kernel"));
    cfg.stride = static_cast<int>(detail::get_u32(is, "stride"));
    cfg.pad = static_cast<int>(detail::get_u32(is, "pad"));
    cfg.activation_slope = static_cast<double>(detail::get_f32(is, "slope"));
    cfg.init_seed = detail::get_u64(is, "seed");
    cfg.fc_channels = static_cast<int>(detail::get_u32(is, "fc_channels"));
    const std::uint32_t n = detail::get_u32(is, "channel count");
    cfg.encoder_channels.clear();
    for (std::uint32_t i = 0; i < n; ++i)
        cfg.encoder_channels.push_back(static_cast<int>(detail::get_u32(is, "channels")));
    validate(cfg);
    CaeParams<float> p = build_cae<float>(cfg);
    p.for_each_tensor([&is, &path](Tensor<float>& t) {
        for (std::int64_t i = 0; i < t.size(); ++i) t[i] = detail::get_f32(is, "tensor data of " + path);
    });
    return p;
}

}  // namespace zsscl
