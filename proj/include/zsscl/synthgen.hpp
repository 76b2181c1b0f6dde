#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "zsscl/gather.hpp"
#include "zsscl/rng.hpp"

namespace zsscl {

/// One synthetic reflection event. Linear events arrive at t0 + p*x with
/// slowness p in s/m; hyperbolic events at sqrt(t0^2 + x^2/v^2) with RMS
/// velocity v in m/s.
struct EventSpec {
    enum class Kind { linear, hyperbolic };
    Kind kind = Kind::hyperbolic;
    double t0 = 0.5;        // apex/intercept time, seconds
    double param = 2000.0;  // slowness (linear) or velocity (hyperbolic)
    double amplitude = 1.0;
    double frequency = 30.0;  // wavelet peak frequency, Hz
};

inline double ricker_value(double f, double t) {
    const double a = 3.14159265358979323846 * f * t;
    const double a2 = a * a;
    return (1.0 - 2.0 * a2) * std::exp(-a2);
}

/// Ricker wavelet sampled on [-halfwidth, halfwidth] at interval dt.
/// The center sample is w(0) = 1.
inline std::vector<double> ricker(double f, double dt, double halfwidth) {
    if (f <= 0.0 || dt <= 0.0 || halfwidth <= 0.0) throw UsageError("ricker needs positive f, dt, halfwidth");
    const int half = static_cast<int>(std::floor(halfwidth / dt));
    std::vector<double> w(static_cast<std::size_t>(2 * half + 1));
    for (int i = -half; i <= half; ++i)
        w[static_cast<std::size_t>(i + half)] = ricker_value(f, i * dt);
    return w;
}

/// Sum of wavelets placed along each event's moveout with linear
/// sub-sample interpolation, plus seeded Gaussian noise.
inline Gather make_gather(int n_traces, int n_samples, double dt, double dx,
                          const std::vector<EventSpec>& events, double noise_std,
                          std::uint64_t seed) {
    Gather g(n_samples, n_traces, dt);
    std::vector<double> acc(g.data.size(), 0.0);

    for (const EventSpec& ev : events) {
        if (ev.frequency <= 0.0) throw UsageError("event frequency must be positive");
        const double halfwidth = 1.5 / ev.frequency;  // tails below ~2e-10 beyond this
        const std::vector<double> w = ricker(ev.frequency, dt, halfwidth);
        const int half = static_cast<int>(w.size() / 2);
        for (int tr = 0; tr < n_traces; ++tr) {
            const double x = tr * dx;
            const double t_arr = ev.kind == EventSpec::Kind::linear
                                     ? ev.t0 + ev.param * x
                                     : std::sqrt(ev.t0 * ev.t0 + (x * x) / (ev.param * ev.param));
            const double s_arr = t_arr / dt;  // fractional sample index of the wavelet center
            const int lo = static_cast<int>(std::ceil(s_arr)) - half - 1;
            const int hi = static_cast<int>(std::floor(s_arr)) + half + 1;
            for (int s = std::max(0, lo); s <= std::min(n_samples - 1, hi); ++s) {
                const double u = (s - s_arr) + half;  // position in wavelet taps
                const int j = static_cast<int>(std::floor(u));
                if (j < -1 || j >= static_cast<int>(w.size())) continue;
                const double frac = u - j;
                const double wl = j >= 0 ? w[static_cast<std::size_t>(j)] : 0.0;
                const double wr = j + 1 < static_cast<int>(w.size()) ? w[static_cast<std::size_t>(j + 1)] : 0.0;
                acc[static_cast<std::size_t>(s) * n_traces + tr] +=
                    ev.amplitude * ((1.0 - frac) * wl + frac * wr);
            }
        }
    }

    if (noise_std > 0.0) {
        SplitRng rng(seed);
        for (double& v : acc) v += noise_std * rng.normal();
    }
    for (std::size_t i = 0; i < acc.size(); ++i) g.data[i] = static_cast<float>(acc[i]);
    return g;
}

/// The fixed desk-scale benchmark scene: 128 traces x 512 samples at 4 ms
/// and 25 m spacing, three hyperbolic and two linear events, 30 Hz wavelet.
inline std::vector<EventSpec> benchmark_events() {
    return {
        {EventSpec::Kind::hyperbolic, 0.40, 1800.0, 1.00, 30.0},
        {EventSpec::Kind::hyperbolic, 0.80, 2200.0, 0.80, 30.0},
        {EventSpec::Kind::hyperbolic, 1.30, 2600.0, 0.90, 30.0},
        {EventSpec::Kind::linear, 0.15, 0.00030, 0.70, 30.0},
        {EventSpec::Kind::linear, 1.60, 0.00012, 0.60, 30.0},
    };
}

inline Gather benchmark_scene(double noise_std = 0.0, std::uint64_t noise_seed = 0) {
    return make_gather(128, 512, 0.004, 25.0, benchmark_events(), noise_std, noise_seed);
}

inline float peak_amplitude(const Gather& g) {
    float peak = 0.0f;
    for (float v : g.data) peak = std::max(peak, std::fabs(v));
    return peak;
}

}  // namespace zsscl
