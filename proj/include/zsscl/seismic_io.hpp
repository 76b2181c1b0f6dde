#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "zsscl/gather.hpp"
#include "zsscl/masking.hpp"

namespace zsscl {

namespace detail {

// ---- big-endian primitives (SEG-Y) ----

inline std::uint16_t be16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] << 8 | p[1]);
}

inline std::uint32_t be32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) << 24 | static_cast<std::uint32_t>(p[1]) << 16 |
           static_cast<std::uint32_t>(p[2]) << 8 | static_cast<std::uint32_t>(p[3]);
}

inline void put_be16(unsigned char* p, std::uint16_t v) {
    p[0] = static_cast<unsigned char>(v >> 8);
    p[1] = static_cast<unsigned char>(v);
}

inline void put_be32(unsigned char* p, std::uint32_t v) {
    p[0] = static_cast<unsigned char>(v >> 24);
    p[1] = static_cast<unsigned char>(v >> 16);
    p[2] = static_cast<unsigned char>(v >> 8);
    p[3] = static_cast<unsigned char>(v);
}

/// IBM System/360 single precision: sign bit, 7-bit base-16 exponent
/// biased by 64, 24-bit fraction without hidden bit.
inline float ibm_to_ieee(std::uint32_t u) {
    const std::uint32_t frac = u & 0x00FFFFFFu;
    if (frac == 0) return 0.0f;
    const int exp16 = static_cast<int>((u >> 24) & 0x7F) - 64;
    const double mag = std::ldexp(static_cast<double>(frac), 4 * exp16 - 24);
    return static_cast<float>((u & 0x80000000u) ? -mag : mag);
}

inline std::uint32_t ieee_to_ibm(float f) {
    if (f == 0.0f || !std::isfinite(f)) return 0u;
    const std::uint32_t sign = f < 0.0f ? 0x80000000u : 0u;
    double x = std::fabs(static_cast<double>(f));
    int exp16 = 0;
    while (x >= 1.0) {
        x /= 16.0;
        ++exp16;
    }
    while (x < 0.0625) {
        x *= 16.0;
        --exp16;
    }
    std::uint32_t frac = static_cast<std::uint32_t>(std::llround(x * 16777216.0));  // 2^24
    if (frac >= 0x01000000u) {
        frac >>= 4;
        ++exp16;
    }
    int e = exp16 + 64;
    if (e < 0) return sign;  // underflow to zero
    if (e > 127) {
        e = 127;
        frac = 0x00FFFFFFu;
    }
    return sign | static_cast<std::uint32_t>(e) << 24 | frac;
}

// ---- little-endian primitives (ZSG1 grid) ----

inline void put_le32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_le32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated file while reading " + what);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

}  // namespace detail

// ---- SEG-Y subset: 3200-byte text header, 400-byte binary header,
// fixed-length traces with 240-byte trace headers. Big-endian. Read
// supports data format 1 (IBM float) and 5 (IEEE float). ----

constexpr int kSegyTextHeaderBytes = 3200;
constexpr int kSegyBinaryHeaderBytes = 400;
constexpr int kSegyTraceHeaderBytes = 240;

inline Gather read_segy(const std::string& path) {
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) throw IoError("cannot open SEG-Y file: " + path);
    const std::int64_t fsize = static_cast<std::int64_t>(is.tellg());
    is.seekg(0);
    if (fsize < kSegyTextHeaderBytes + kSegyBinaryHeaderBytes)
        throw ParseError("SEG-Y file shorter than the 3600-byte header block (" +
                         std::to_string(fsize) + " bytes): " + path);

    std::vector<unsigned char> hdr(kSegyTextHeaderBytes + kSegyBinaryHeaderBytes);
    is.read(reinterpret_cast<char*>(hdr.data()), static_cast<std::streamsize>(hdr.size()));

    // Binary header fields, byte positions per the standard (1-based):
    // 3217-3218 sample interval in microseconds, 3221-3222 samples per
    // trace, 3225-3226 data format code.
    const std::uint16_t dt_us = detail::be16(hdr.data() + 3216);
    const std::uint16_t ns = detail::be16(hdr.data() + 3220);
    const std::uint16_t format = detail::be16(hdr.data() + 3224);
    if (ns == 0) throw ParseError("SEG-Y binary header declares zero samples per trace (byte 3221): " + path);
    if (format != 1 && format != 5)
        throw ParseError("unsupported SEG-Y data format code " + std::to_string(format) +
                         " at byte offset 3224 (supported: 1 IBM float, 5 IEEE float): " + path);

    const std::int64_t trace_bytes = kSegyTraceHeaderBytes + static_cast<std::int64_t>(ns) * 4;
    const std::int64_t payload = fsize - kSegyTextHeaderBytes - kSegyBinaryHeaderBytes;
    if (payload % trace_bytes != 0)
        throw ParseError("SEG-Y trace data truncated: " + std::to_string(payload % trace_bytes) +
                         " stray bytes after byte offset " +
                         std::to_string(fsize - payload % trace_bytes) + ": " + path);
    const std::int64_t n_traces = payload / trace_bytes;
    if (n_traces == 0) throw ParseError("SEG-Y file contains no traces: " + path);

    Gather g(static_cast<int>(ns), static_cast<int>(n_traces),
             dt_us > 0 ? static_cast<double>(dt_us) * 1e-6 : 0.004);
    std::vector<unsigned char> buf(static_cast<std::size_t>(trace_bytes));
    for (std::int64_t t = 0; t < n_traces; ++t) {
        if (!is.read(reinterpret_cast<char*>(buf.data()), trace_bytes))
            throw ParseError("SEG-Y trace " + std::to_string(t + 1) + " truncated at byte offset " +
                             std::to_string(kSegyTextHeaderBytes + kSegyBinaryHeaderBytes +
                                            t * trace_bytes) +
                             ": " + path);
        const unsigned char* s = buf.data() + kSegyTraceHeaderBytes;
        for (int i = 0; i < static_cast<int>(ns); ++i) {
            const std::uint32_t u = detail::be32(s + static_cast<std::size_t>(i) * 4);
            float v;
            if (format == 5) {
                std::memcpy(&v, &u, 4);
            } else {
                v = detail::ibm_to_ieee(u);
            }
            g.at(i, static_cast<int>(t)) = v;
        }
    }
    return g;
}

inline void write_segy(const Gather& g, const std::string& path, int format = 5) {
    if (g.empty()) throw UsageError("write_segy on empty gather");
    if (format != 1 && format != 5)
        throw UsageError("write_segy supports format 1 (IBM) or 5 (IEEE), got " + std::to_string(format));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open SEG-Y file for writing: " + path);

    std::vector<unsigned char> text(kSegyTextHeaderBytes, ' ');
    const std::string banner = "C 1 ZS-SCL seismic gather export";
    std::copy(banner.begin(), banner.end(), text.begin());
    os.write(reinterpret_cast<const char*>(text.data()), text.size());

    std::vector<unsigned char> bin(kSegyBinaryHeaderBytes, 0);
    const std::uint16_t dt_us = static_cast<std::uint16_t>(std::llround(g.dt * 1e6));
    detail::put_be16(bin.data() + 16, dt_us);                                      // 3217-3218
    detail::put_be16(bin.data() + 20, static_cast<std::uint16_t>(g.n_samples));    // 3221-3222
    detail::put_be16(bin.data() + 24, static_cast<std::uint16_t>(format));         // 3225-3226
    os.write(reinterpret_cast<const char*>(bin.data()), bin.size());

    std::vector<unsigned char> trace(static_cast<std::size_t>(kSegyTraceHeaderBytes) +
                                     static_cast<std::size_t>(g.n_samples) * 4);
    for (int t = 0; t < g.n_traces; ++t) {
        std::fill(trace.begin(), trace.end(), 0);
        detail::put_be32(trace.data(), static_cast<std::uint32_t>(t + 1));  // trace sequence number
        detail::put_be16(trace.data() + 114, static_cast<std::uint16_t>(g.n_samples));
        detail::put_be16(trace.data() + 116, dt_us);
        unsigned char* s = trace.data() + kSegyTraceHeaderBytes;
        for (int i = 0; i < g.n_samples; ++i) {
            std::uint32_t u;
            if (format == 5) {
                const float v = g.at(i, t);
                std::memcpy(&u, &v, 4);
            } else {
                u = detail::ieee_to_ibm(g.at(i, t));
            }
            detail::put_be32(s + static_cast<std::size_t>(i) * 4, u);
        }
        os.write(reinterpret_cast<const char*>(trace.data()), static_cast<std::streamsize>(trace.size()));
    }
    if (!os) throw IoError("write failed: " + path);
}

// ---- ZSG1 grid: "ZSG1" magic, u32 n_samples, u32 n_traces, f64 dt in
// seconds, then amplitudes row-major as little-endian IEEE-754 32-bit
// floats. Lossless round trip. ----

inline void write_grid(const Gather& g, const std::string& path) {
    if (g.empty()) throw UsageError("write_grid on empty gather");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open grid file for writing: " + path);
    os.write("ZSG1", 4);
    detail::put_le32(os, static_cast<std::uint32_t>(g.n_samples));
    detail::put_le32(os, static_cast<std::uint32_t>(g.n_traces));
    std::uint64_t dtu;
    static_assert(sizeof(dtu) == sizeof(g.dt));
    std::memcpy(&dtu, &g.dt, 8);
    detail::put_le32(os, static_cast<std::uint32_t>(dtu));
    detail::put_le32(os, static_cast<std::uint32_t>(dtu >> 32));
    for (float v : g.data) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        detail::put_le32(os, u);
    }
    if (!os) throw IoError("write failed: " + path);
}

inline Gather read_grid(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open grid file: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "ZSG1")
        throw ParseError("not a ZSG1 grid file (bad magic): " + path);
    const std::uint32_t rows = detail::get_le32(is, "n_samples");
    const std::uint32_t cols = detail::get_le32(is, "n_traces");
    if (rows == 0 || cols == 0) throw ParseError("grid file declares empty dimensions: " + path);
    const std::uint64_t lo = detail::get_le32(is, "dt");
    const std::uint64_t hi = detail::get_le32(is, "dt");
    const std::uint64_t dtu = lo | hi << 32;
    double dt;
    std::memcpy(&dt, &dtu, 8);
    Gather g(static_cast<int>(rows), static_cast<int>(cols), dt);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        const std::uint32_t u = detail::get_le32(is, "amplitudes of " + path);
        std::memcpy(&g.data[i], &u, 4);
    }
    return g;
}

/// Sniff the format by magic and dispatch. SEG-Y has no magic, so anything
/// that is not a ZSG1 grid is treated as SEG-Y.
inline Gather read_gather(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open input file: " + path);
    char magic[4] = {0, 0, 0, 0};
    is.read(magic, 4);
    is.close();
    if (std::string(magic, 4) == "ZSG1") return read_grid(path);
    return read_segy(path);
}

inline bool has_segy_extension(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return false;
    std::string ext = path.substr(dot + 1);
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == "sgy" || ext == "segy";
}

inline void write_gather(const Gather& g, const std::string& path) {
    if (has_segy_extension(path))
        write_segy(g, path);
    else
        write_grid(g, path);
}

// ---- amplitude normalization ----

/// Divide by the 99.9th percentile of |amplitude| over live traces and
/// record the divisor in amp_scale for exact inversion.
inline Gather normalize(const Gather& g) {
    if (g.empty()) throw UsageError("normalize on empty gather");
    std::vector<float> colmax(static_cast<std::size_t>(g.n_traces), 0.0f);
    for (int s = 0; s < g.n_samples; ++s)
        for (int t = 0; t < g.n_traces; ++t)
            colmax[static_cast<std::size_t>(t)] =
                std::max(colmax[static_cast<std::size_t>(t)], std::fabs(g.at(s, t)));

    std::vector<float> mags;
    mags.reserve(g.data.size());
    for (int t = 0; t < g.n_traces; ++t) {
        if (colmax[static_cast<std::size_t>(t)] <= 0.0f) continue;  // dead trace
        for (int s = 0; s < g.n_samples; ++s) mags.push_back(std::fabs(g.at(s, t)));
    }
    if (mags.empty()) throw UsageError("normalize: all traces are zero");

    const std::size_t idx =
        std::min(mags.size() - 1,
                 static_cast<std::size_t>(std::ceil(0.999 * static_cast<double>(mags.size()))) - 1);
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(idx), mags.end());
    float scale = mags[idx];
    if (scale <= 0.0f) scale = *std::max_element(mags.begin(), mags.end());

    Gather out = g;
    out.amp_scale = static_cast<double>(scale) * g.amp_scale;
    for (float& v : out.data) v /= scale;
    return out;
}

inline Gather denormalize(const Gather& g) {
    Gather out = g;
    const float scale = static_cast<float>(g.amp_scale);
    for (float& v : out.data) v *= scale;
    out.amp_scale = 1.0;
    return out;
}

// ---- reflect padding to a spatial multiple ----

namespace detail {

/// Map index i of an extended axis back into [0, n) by symmetric
/// (edge-inclusive) reflection.
inline int mirror_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    int j = i % period;
    if (j < 0) j += period;
    return j < n ? j : period - 1 - j;
}

}  // namespace detail

inline int next_multiple(int v, int multiple) {
    return (v + multiple - 1) / multiple * multiple;
}

/// Reflect-pad on both axes up to the next multiple. Padding appends at the
/// bottom/right; each padded row/column copies a reflected source.
inline Gather pad_to_multiple(const Gather& g, int multiple = 16) {
    if (g.empty()) throw UsageError("pad_to_multiple on empty gather");
    const int rows = next_multiple(g.n_samples, multiple);
    const int cols = next_multiple(g.n_traces, multiple);
    if (rows == g.n_samples && cols == g.n_traces) return g;
    Gather out(rows, cols, g.dt);
    out.amp_scale = g.amp_scale;
    out.line_id = g.line_id;
    for (int r = 0; r < rows; ++r) {
        const int sr = detail::mirror_index(r, g.n_samples);
        for (int c = 0; c < cols; ++c)
            out.at(r, c) = g.at(sr, detail::mirror_index(c, g.n_traces));
    }
    return out;
}

/// Extend a trace mask to padded width: a padded column is observed only if
/// its reflected source column is observed.
inline TraceMask pad_mask(const TraceMask& m, int padded_cols) {
    TraceMask out;
    out.keep.resize(static_cast<std::size_t>(padded_cols));
    for (int c = 0; c < padded_cols; ++c)
        out.keep[static_cast<std::size_t>(c)] = m.keep[static_cast<std::size_t>(detail::mirror_index(c, m.n()))];
    out.seed = m.seed;
    return out;
}

inline Gather crop(const Gather& g, int rows, int cols) {
    if (rows > g.n_samples || cols > g.n_traces)
        throw DimensionError("crop target larger than gather");
    Gather out(rows, cols, g.dt);
    out.amp_scale = g.amp_scale;
    out.line_id = g.line_id;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out.at(r, c) = g.at(r, c);
    return out;
}

// ---- tiling with raised-cosine blending ----

/// Overlapping tile decomposition. Blend windows are positive raised
/// cosines normalized at stitch time so the weight field sums to 1 at every
/// sample; stitching tiles cut from one gather reproduces it.
struct TilePlan {
    int rows = 0, cols = 0;    // full gather extents
    int tile_h = 0, tile_w = 0;
    std::vector<int> row0, col0;  // tile origins per axis

    int count() const { return static_cast<int>(row0.size() * col0.size()); }

    std::pair<int, int> origin(int idx) const {
        const int nc = static_cast<int>(col0.size());
        return {row0[static_cast<std::size_t>(idx / nc)], col0[static_cast<std::size_t>(idx % nc)]};
    }
};

namespace detail {

inline std::vector<int> tile_origins(int extent, int tile, double overlap) {
    std::vector<int> origins;
    if (tile >= extent) {
        origins.push_back(0);
        return origins;
    }
    const int step = std::max(1, static_cast<int>(std::lround(tile * (1.0 - overlap))));
    for (int o = 0; o + tile < extent; o += step) origins.push_back(o);
    origins.push_back(extent - tile);
    return origins;
}

/// Raised cosine offset by half a sample so every weight is positive.
inline std::vector<double> blend_window(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        w[static_cast<std::size_t>(i)] =
            0.5 - 0.5 * std::cos(3.14159265358979323846 * (2.0 * i + 1.0) / n);
    return w;
}

}  // namespace detail

inline TilePlan plan_tiles(int rows, int cols, int tile_h = 512, int tile_w = 256,
                           double overlap = 0.5) {
    if (rows < 1 || cols < 1) throw DimensionError("plan_tiles needs a nonempty gather");
    if (tile_h < 1 || tile_w < 1) throw UsageError("tile extents must be >= 1");
    if (overlap < 0.0 || overlap >= 1.0) throw UsageError("overlap must be in [0,1)");
    TilePlan p;
    p.rows = rows;
    p.cols = cols;
    p.tile_h = std::min(tile_h, rows);
    p.tile_w = std::min(tile_w, cols);
    p.row0 = detail::tile_origins(rows, p.tile_h, overlap);
    p.col0 = detail::tile_origins(cols, p.tile_w, overlap);
    return p;
}

inline Gather cut_tile(const Gather& g, const TilePlan& p, int idx) {
    const auto [r0, c0] = p.origin(idx);
    Gather out(p.tile_h, p.tile_w, g.dt);
    out.amp_scale = g.amp_scale;
    for (int r = 0; r < p.tile_h; ++r)
        for (int c = 0; c < p.tile_w; ++c) out.at(r, c) = g.at(r0 + r, c0 + c);
    return out;
}

inline TraceMask tile_mask(const TraceMask& m, const TilePlan& p, int idx) {
    const auto [r0, c0] = p.origin(idx);
    (void)r0;
    TraceMask out;
    out.keep.assign(m.keep.begin() + c0, m.keep.begin() + c0 + p.tile_w);
    return out;
}

inline Gather stitch(const std::vector<Gather>& tiles, const TilePlan& p) {
    if (static_cast<int>(tiles.size()) != p.count())
        throw DimensionError("stitch expects " + std::to_string(p.count()) + " tiles, got " +
                             std::to_string(tiles.size()));
    const std::vector<double> wh = detail::blend_window(p.tile_h);
    const std::vector<double> ww = detail::blend_window(p.tile_w);
    std::vector<double> num(static_cast<std::size_t>(p.rows) * p.cols, 0.0);
    std::vector<double> den(static_cast<std::size_t>(p.rows) * p.cols, 0.0);
    for (int idx = 0; idx < p.count(); ++idx) {
        const auto [r0, c0] = p.origin(idx);
        const Gather& t = tiles[static_cast<std::size_t>(idx)];
        if (t.n_samples != p.tile_h || t.n_traces != p.tile_w)
            throw DimensionError("stitch tile " + std::to_string(idx) + " has wrong extents");
        for (int r = 0; r < p.tile_h; ++r) {
            const std::size_t row = static_cast<std::size_t>(r0 + r) * p.cols + c0;
            for (int c = 0; c < p.tile_w; ++c) {
                const double w = wh[static_cast<std::size_t>(r)] * ww[static_cast<std::size_t>(c)];
                num[row + static_cast<std::size_t>(c)] += w * static_cast<double>(t.at(r, c));
                den[row + static_cast<std::size_t>(c)] += w;
            }
        }
    }
    Gather out(p.rows, p.cols, tiles[0].dt);
    out.amp_scale = tiles[0].amp_scale;
    for (std::size_t i = 0; i < num.size(); ++i)
        out.data[i] = static_cast<float>(num[i] / den[i]);
    return out;
}

}  // namespace zsscl
