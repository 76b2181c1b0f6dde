#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "zsscl/gather.hpp"

namespace zsscl {

namespace detail {

/// Separable horizontal+vertical convolution with a symmetric kernel,
/// valid region only. in is rows x cols; out is (rows-k+1) x (cols-k+1).
inline void filter_valid(const std::vector<double>& in, int rows, int cols,
                         const std::vector<double>& kernel, std::vector<double>& tmp,
                         std::vector<double>& out) {
    const int k = static_cast<int>(kernel.size());
    const int ocols = cols - k + 1;
    const int orows = rows - k + 1;
    tmp.assign(static_cast<std::size_t>(rows) * ocols, 0.0);
    for (int r = 0; r < rows; ++r) {
        const double* src = in.data() + static_cast<std::size_t>(r) * cols;
        double* dst = tmp.data() + static_cast<std::size_t>(r) * ocols;
        for (int c = 0; c < ocols; ++c) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) acc += kernel[static_cast<std::size_t>(i)] * src[c + i];
            dst[c] = acc;
        }
    }
    out.assign(static_cast<std::size_t>(orows) * ocols, 0.0);
    for (int r = 0; r < orows; ++r) {
        double* dst = out.data() + static_cast<std::size_t>(r) * ocols;
        for (int i = 0; i < k; ++i) {
            const double kv = kernel[static_cast<std::size_t>(i)];
            const double* src = tmp.data() + static_cast<std::size_t>(r + i) * ocols;
            for (int c = 0; c < ocols; ++c) dst[c] += kv * src[c];
        }
    }
}

inline std::vector<double> gaussian_kernel(int window, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(window));
    const int half = window / 2;
    double sum = 0.0;
    for (int i = 0; i < window; ++i) {
        const double x = i - half;
        k[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations. The matrix
/// is destroyed. Good enough for the Gram matrices used here.
inline std::vector<double> jacobi_eigenvalues(std::vector<double>& a, int n) {
    auto at = [&a, n](int r, int c) -> double& { return a[static_cast<std::size_t>(r) * n + c]; };
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0, diag = 0.0;
        for (int r = 0; r < n; ++r) {
            diag += std::fabs(at(r, r));
            for (int c = r + 1; c < n; ++c) off += 2.0 * at(r, c) * at(r, c);
        }
        if (off <= 1e-24 * std::max(diag * diag, 1e-300)) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(p, q);
                if (apq == 0.0) continue;
                const double app = at(p, p), aqq = at(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = at(i, p), aiq = at(i, q);
                    at(i, p) = c * aip - s * aiq;
                    at(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = at(p, i), aqi = at(q, i);
                    at(p, i) = c * api - s * aqi;
                    at(q, i) = s * api + c * aqi;
                }
            }
        }
    }
    std::vector<double> ev(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = at(i, i);
    std::sort(ev.begin(), ev.end(), std::greater<double>());
    return ev;
}

}  // namespace detail

/// Mean local structural similarity over Gaussian-weighted sliding windows.
/// The dynamic range is taken from b, the reference.
inline double ssim(const Gather& a, const Gather& b, int window = 11, double k1 = 0.01,
                   double k2 = 0.03, double sigma = 1.5) {
    if (!a.same_shape(b))
        throw DimensionError("ssim shapes differ: " + std::to_string(a.n_samples) + "x" +
                             std::to_string(a.n_traces) + " vs " + std::to_string(b.n_samples) + "x" +
                             std::to_string(b.n_traces));
    if (window < 3 || window % 2 == 0) throw UsageError("ssim window must be odd and >= 3");
    if (a.n_samples < window || a.n_traces < window)
        throw DimensionError("ssim input smaller than window");

    const int rows = a.n_samples, cols = a.n_traces;
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    std::vector<double> xa(n), xb(n), xaa(n), xbb(n), xab(n);
    double bmin = static_cast<double>(b.data[0]), bmax = bmin;
    for (std::size_t i = 0; i < n; ++i) {
        const double va = static_cast<double>(a.data[i]);
        const double vb = static_cast<double>(b.data[i]);
        xa[i] = va;
        xb[i] = vb;
        xaa[i] = va * va;
        xbb[i] = vb * vb;
        xab[i] = va * vb;
        bmin = std::min(bmin, vb);
        bmax = std::max(bmax, vb);
    }
    double range = bmax - bmin;
    if (range <= 0.0) range = 1.0;  // constant reference: stabilizers keep this defined
    const double c1 = (k1 * range) * (k1 * range);
    const double c2 = (k2 * range) * (k2 * range);

    const std::vector<double> kern = detail::gaussian_kernel(window, sigma);
    std::vector<double> tmp, mu_a, mu_b, m_aa, m_bb, m_ab;
    detail::filter_valid(xa, rows, cols, kern, tmp, mu_a);
    detail::filter_valid(xb, rows, cols, kern, tmp, mu_b);
    detail::filter_valid(xaa, rows, cols, kern, tmp, m_aa);
    detail::filter_valid(xbb, rows, cols, kern, tmp, m_bb);
    detail::filter_valid(xab, rows, cols, kern, tmp, m_ab);

    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double va = m_aa[i] - mu_a[i] * mu_a[i];
        const double vb = m_bb[i] - mu_b[i] * mu_b[i];
        const double cov = m_ab[i] - mu_a[i] * mu_b[i];
        const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
        const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
        acc += num / den;
    }
    return acc / static_cast<double>(mu_a.size());
}

/// Coefficient of determination: 1 - SS_res/SS_tot with SS_tot about the
/// mean of truth.
inline double r_squared(const Gather& pred, const Gather& truth) {
    if (!pred.same_shape(truth)) throw DimensionError("r_squared shapes differ");
    const std::size_t n = truth.data.size();
    double mean = 0.0;
    for (float v : truth.data) mean += static_cast<double>(v);
    mean /= static_cast<double>(n);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = static_cast<double>(pred.data[i]) - static_cast<double>(truth.data[i]);
        const double t = static_cast<double>(truth.data[i]) - mean;
        ss_res += r * r;
        ss_tot += t * t;
    }
    if (ss_tot <= 0.0) throw UsageError("r_squared undefined for constant truth");
    return 1.0 - ss_res / ss_tot;
}

/// Noise standard deviation by principal component analysis: center the
/// columns, split the singular spectrum into signal and residual, and read
/// the noise level from the residual energy per sample. A component counts
/// as signal when it is dominant (its own energy reaches at least
/// (1 - energy_threshold) of the total) or when it rises clearly above the
/// noise-bulk edge implied by the remaining spectrum; unstructured noise
/// therefore keeps its full energy in the residual.
inline double pca_noise_std(const Gather& g, double energy_threshold = 0.95) {
    if (g.n_samples < 2 || g.n_traces < 2) throw DimensionError("pca_noise_std needs at least 2x2");
    if (energy_threshold <= 0.0 || energy_threshold >= 1.0)
        throw UsageError("energy threshold must be in (0,1)");

    const int m = g.n_samples, n = g.n_traces;
    std::vector<double> a(static_cast<std::size_t>(m) * n);
    for (int c = 0; c < n; ++c) {
        double mean = 0.0;
        for (int r = 0; r < m; ++r) mean += static_cast<double>(g.at(r, c));
        mean /= m;
        for (int r = 0; r < m; ++r)
            a[static_cast<std::size_t>(r) * n + c] = static_cast<double>(g.at(r, c)) - mean;
    }

    // Gram matrix on the smaller side; its eigenvalues are the squared
    // singular values.
    const int dim = std::min(m, n);
    std::vector<double> gram(static_cast<std::size_t>(dim) * dim, 0.0);
    if (dim == n) {
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                double acc = 0.0;
                for (int r = 0; r < m; ++r)
                    acc += a[static_cast<std::size_t>(r) * n + i] * a[static_cast<std::size_t>(r) * n + j];
                gram[static_cast<std::size_t>(i) * n + j] = acc;
                gram[static_cast<std::size_t>(j) * n + i] = acc;
            }
    } else {
        for (int i = 0; i < m; ++i)
            for (int j = i; j < m; ++j) {
                double acc = 0.0;
                const double* ri = a.data() + static_cast<std::size_t>(i) * n;
                const double* rj = a.data() + static_cast<std::size_t>(j) * n;
                for (int c = 0; c < n; ++c) acc += ri[c] * rj[c];
                gram[static_cast<std::size_t>(i) * m + j] = acc;
                gram[static_cast<std::size_t>(j) * m + i] = acc;
            }
    }

    std::vector<double> ev = detail::jacobi_eigenvalues(gram, dim);
    double total = 0.0;
    for (double& v : ev) {
        v = std::max(v, 0.0);
        total += v;
    }
    if (total <= 0.0) return 0.0;

    const double dominant_cut = (1.0 - energy_threshold) * total;
    const double long_side = static_cast<double>(std::max(m, n));
    double residual = total;
    int k = 0;
    while (k < dim - 1) {
        const double lead = ev[static_cast<std::size_t>(k)];
        // Bulk edge of the remaining spectrum if it were pure noise.
        const double remaining_dims = static_cast<double>(dim - k);
        const double sigma2 = residual / (long_side * remaining_dims);
        const double root = std::sqrt(long_side) + std::sqrt(remaining_dims);
        const double edge = sigma2 * root * root;
        if (lead < dominant_cut && lead <= 1.1 * edge) break;
        residual = std::max(residual - lead, 0.0);
        ++k;
    }
    return std::sqrt(residual / (static_cast<double>(m) * static_cast<double>(n)));
}

struct MetricsReport {
    double ssim = 0.0;
    double r_squared = 0.0;
    double noise_std_recon = 0.0;
    double noise_std_truth = 0.0;
};

inline void write_metrics_csv(const MetricsReport& r, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open metrics csv for writing: " + path);
    char buf[256];
    std::snprintf(buf, sizeof(buf), "ssim,r_squared,noise_std_recon,noise_std_truth\n%.6f,%.6f,%.6g,%.6g\n",
                  r.ssim, r.r_squared, r.noise_std_recon, r.noise_std_truth);
    os << buf;
}

inline std::string metrics_text(const MetricsReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "ssim            %.6f\nr_squared       %.6f\nnoise_std_recon %.6g\nnoise_std_truth %.6g\n",
                  r.ssim, r.r_squared, r.noise_std_recon, r.noise_std_truth);
    return buf;
}

}  // namespace zsscl
