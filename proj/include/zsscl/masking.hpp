#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "zsscl/gather.hpp"
#include "zsscl/rng.hpp"
#include "zsscl/tape.hpp"

namespace zsscl {

/// Per-trace keep/drop vector realizing the spatial sampling operator:
/// 1 = observed, 0 = missing. Applying a mask twice equals applying it once.
struct TraceMask {
    std::vector<std::uint8_t> keep;
    std::optional<std::uint64_t> seed;  // provenance, when generated

    int n() const { return static_cast<int>(keep.size()); }

    int missing_count() const {
        int m = 0;
        for (auto k : keep) m += k ? 0 : 1;
        return m;
    }

    double missing_fraction() const {
        return keep.empty() ? 0.0 : static_cast<double>(missing_count()) / static_cast<double>(keep.size());
    }

    bool operator==(const TraceMask& o) const { return keep == o.keep; }
};

/// Drop exactly round(n_traces * missing_fraction) traces, chosen by a
/// seeded permutation.
inline TraceMask generate_mask(int n_traces, double missing_fraction, std::uint64_t seed) {
    if (n_traces < 1) throw UsageError("generate_mask needs n_traces >= 1");
    if (missing_fraction < 0.0 || missing_fraction >= 1.0)
        throw UsageError("missing_fraction must be in [0,1), got " + std::to_string(missing_fraction));
    const int drop = static_cast<int>(std::llround(n_traces * missing_fraction));
    SplitRng rng(seed);
    std::vector<int> perm = rng.permutation(n_traces);
    TraceMask m;
    m.keep.assign(static_cast<std::size_t>(n_traces), 1);
    for (int i = 0; i < drop; ++i) m.keep[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = 0;
    m.seed = seed;
    return m;
}

inline TraceMask complement(const TraceMask& m) {
    TraceMask c;
    c.keep.resize(m.keep.size());
    for (std::size_t i = 0; i < m.keep.size(); ++i) c.keep[i] = m.keep[i] ? 0 : 1;
    return c;
}

/// A trace counts as missing when its peak amplitude is below eps_rel times
/// the gather's global peak. Field zero-fill is exact zeros; the tiny
/// threshold tolerates format round-trip noise.
inline TraceMask detect_mask(const Gather& g, double eps_rel = 1e-8) {
    if (g.empty()) throw UsageError("detect_mask on empty gather");
    std::vector<float> colmax(static_cast<std::size_t>(g.n_traces), 0.0f);
    for (int s = 0; s < g.n_samples; ++s) {
        const float* row = g.data.data() + static_cast<std::size_t>(s) * g.n_traces;
        for (int t = 0; t < g.n_traces; ++t)
            colmax[static_cast<std::size_t>(t)] = std::max(colmax[static_cast<std::size_t>(t)], std::fabs(row[t]));
    }
    const float global = *std::max_element(colmax.begin(), colmax.end());
    if (global <= 0.0f) throw UsageError("detect_mask: no live traces");
    TraceMask m;
    m.keep.resize(static_cast<std::size_t>(g.n_traces));
    const double thresh = eps_rel * static_cast<double>(global);
    for (int t = 0; t < g.n_traces; ++t)
        m.keep[static_cast<std::size_t>(t)] = static_cast<double>(colmax[static_cast<std::size_t>(t)]) < thresh ? 0 : 1;
    return m;
}

template <class Real>
Tensor<Real> apply_mask(const Tensor<Real>& x, const TraceMask& m) {
    return mask_columns(x, m.keep);
}

template <class Real>
typename Tape<Real>::Var apply_mask(Tape<Real>& tape, typename Tape<Real>::Var x, const TraceMask& m) {
    return tape.mask_columns(x, m.keep);
}

inline Gather apply_mask(const Gather& g, const TraceMask& m) {
    if (m.n() != g.n_traces)
        throw DimensionError("mask length " + std::to_string(m.n()) + " does not match trace count " +
                             std::to_string(g.n_traces));
    Gather out = g;
    for (int s = 0; s < g.n_samples; ++s) {
        float* row = out.data.data() + static_cast<std::size_t>(s) * g.n_traces;
        for (int t = 0; t < g.n_traces; ++t)
            if (!m.keep[static_cast<std::size_t>(t)]) row[t] = 0.0f;
    }
    return out;
}

/// Policy for redrawing the per-iteration resampling mask.
struct RPrimePolicy {
    enum class Mode { match_base, fixed_fraction };
    Mode mode = Mode::match_base;
    double fraction = 0.5;  // used by fixed_fraction
    double clamp_lo = 0.1;
    double clamp_hi = 0.9;
};

/// Draw a fresh mask over all traces from the job's stream. The default
/// policy matches the base mask's missing fraction, clamped so both
/// consistency terms stay active.
inline TraceMask resample_rprime(const TraceMask& base, const RPrimePolicy& policy, SplitRng& rng) {
    if (base.n() < 1) throw UsageError("resample_rprime needs a nonempty base mask");
    double frac = policy.mode == RPrimePolicy::Mode::fixed_fraction
                      ? policy.fraction
                      : std::clamp(base.missing_fraction(), policy.clamp_lo, policy.clamp_hi);
    const int n = base.n();
    const int drop = static_cast<int>(std::llround(n * frac));
    std::vector<int> perm = rng.permutation(n);
    TraceMask m;
    m.keep.assign(static_cast<std::size_t>(n), 1);
    for (int i = 0; i < drop; ++i) m.keep[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = 0;
    return m;
}

// ---- mask file: one "0"/"1" line per trace, optional "# seed=..." header ----

inline void write_mask(const TraceMask& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open mask file for writing: " + path);
    if (m.seed) os << "# seed=" << *m.seed << "\n";
    for (auto k : m.keep) os << (k ? '1' : '0') << "\n";
    if (!os) throw IoError("write failed: " + path);
}

inline TraceMask read_mask(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open mask file: " + path);
    TraceMask m;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("seed=");
            if (pos != std::string::npos) m.seed = std::stoull(line.substr(pos + 5));
            continue;
        }
        if (line == "0")
            m.keep.push_back(0);
        else if (line == "1")
            m.keep.push_back(1);
        else
            throw ParseError("mask file line must be 0 or 1, got \"" + line + "\" in " + path);
    }
    if (m.keep.empty()) throw ParseError("mask file has no entries: " + path);
    return m;
}

}  // namespace zsscl
