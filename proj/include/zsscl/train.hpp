#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "zsscl/cae.hpp"
#include "zsscl/masking.hpp"

namespace zsscl {

enum class LossKind { scl, traditional };

inline std::string to_string(LossKind k) { return k == LossKind::scl ? "scl" : "traditional"; }

inline LossKind loss_kind_from_string(const std::string& s) {
    if (s == "scl") return LossKind::scl;
    if (s == "traditional") return LossKind::traditional;
    throw UsageError("unknown loss kind \"" + s + "\" (expected scl or traditional)");
}

struct TrainConfig {
    int iterations = 2000;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double w1 = 1.0, w2 = 1.0, w3 = 1.0;
    RPrimePolicy rprime;
    std::uint64_t seed = 0;
    int history_stride = 1;
    LossKind loss = LossKind::scl;
};

inline void validate(const TrainConfig& cfg) {
    if (cfg.iterations < 1) throw UsageError("iterations must be >= 1");
    if (cfg.learning_rate <= 0.0) throw UsageError("learning rate must be positive");
    if (cfg.w1 < 0.0 || cfg.w2 < 0.0 || cfg.w3 < 0.0) throw UsageError("loss weights must be >= 0");
    if (cfg.w1 + cfg.w2 + cfg.w3 <= 0.0) throw UsageError("at least one loss weight must be > 0");
    if (cfg.history_stride < 1) throw UsageError("history stride must be >= 1");
}

struct LossSample {
    int iteration;
    double term1, term2, term3, total;
};

template <class Real>
struct TrainReport {
    CaeParams<Real> params;
    std::vector<LossSample> history;
    double seconds = 0.0;
    std::uint64_t seed = 0;
};

/// Loss history CSV: iteration, term1, term2, term3, total.
inline void write_loss_history(const std::vector<LossSample>& history, std::ostream& os) {
    os << "iteration,term1,term2,term3,total\n";
    char buf[160];
    for (const auto& s : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g\n", s.iteration, s.term1, s.term2,
                      s.term3, s.total);
        os << buf;
    }
}

inline void write_loss_history(const std::vector<LossSample>& history, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open loss history for writing: " + path);
    write_loss_history(history, os);
}

namespace detail {

template <class Real>
void check_training_inputs(const Tensor<Real>& d, const TraceMask& mask) {
    if (d.rank() != 3 || d.extent(0) != 1)
        throw DimensionError("training data must be [1,H,W], got " + shape_str(d.shape()));
    if (mask.n() != d.extent(2))
        throw DimensionError("mask length " + std::to_string(mask.n()) + " does not match trace count " +
                             std::to_string(d.extent(2)));
    if (mask.missing_count() == mask.n()) throw UsageError("mask has zero live traces");
}

}  // namespace detail

/// Classic single-term objective: || N(d|theta)*R - d ||^2.
template <class Real>
typename Tape<Real>::Var traditional_loss(Tape<Real>& tape, const CaeVars<Real>& net,
                                          const NetConfig& cfg, typename Tape<Real>::Var d,
                                          const TraceMask& R) {
    auto y = cae_forward(tape, net, d, cfg);
    return tape.sq_norm_diff(apply_mask(tape, y, R), d);
}

template <class Real>
struct SclTerms {
    using Var = typename Tape<Real>::Var;
    Var total, term1, term2, term3;
};

/// The three consistency terms given the two network outputs:
///   y1 = N(d), y2 = N(y1 * R').
/// Split out so the algebra can be exercised with substitutes for N.
template <class Real>
SclTerms<Real> scl_terms(Tape<Real>& tape, typename Tape<Real>::Var d, typename Tape<Real>::Var y1,
                         typename Tape<Real>::Var y2, const TraceMask& R, double w1, double w2,
                         double w3) {
    SclTerms<Real> out;
    out.term1 = tape.sq_norm_diff(d, apply_mask(tape, y1, R));
    out.term2 = tape.sq_norm_diff(d, apply_mask(tape, y2, R));
    out.term3 = tape.sq_norm_diff(y1, y2);
    out.total = tape.weighted_sum({{out.term1, static_cast<Real>(w1)},
                                   {out.term2, static_cast<Real>(w2)},
                                   {out.term3, static_cast<Real>(w3)}});
    return out;
}

/// Self-consistency objective. The network is deployed twice with shared
/// parameters and gradients flow through both evaluations:
///   w1*||d - N(d)*R||^2 + w2*||d - N(N(d)*R')*R||^2 + w3*||N(d) - N(N(d)*R')||^2
template <class Real>
SclTerms<Real> scl_loss(Tape<Real>& tape, const CaeVars<Real>& net, const NetConfig& cfg,
                        typename Tape<Real>::Var d, const TraceMask& R, const TraceMask& Rp,
                        double w1, double w2, double w3) {
    auto y1 = cae_forward(tape, net, d, cfg);
    auto y2 = cae_forward(tape, net, apply_mask(tape, y1, Rp), cfg);
    return scl_terms(tape, d, y1, y2, R, w1, w2, w3);
}

/// Adaptive moment estimation over the flat parameter vector.
template <class Real>
class AdamOptimizer {
public:
    AdamOptimizer(std::int64_t n_params, double lr, double beta1, double beta2, double eps)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
          m_(static_cast<std::size_t>(n_params), 0.0), v_(static_cast<std::size_t>(n_params), 0.0) {}

    /// One update step; grads laid out to match the parameter order.
    void step(std::vector<Real*> params, std::vector<const Real*> grads,
              const std::vector<std::int64_t>& sizes) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        std::size_t off = 0;
        for (std::size_t ti = 0; ti < params.size(); ++ti) {
            Real* p = params[ti];
            const Real* g = grads[ti];
            for (std::int64_t i = 0; i < sizes[ti]; ++i, ++off) {
                const double gi = static_cast<double>(g[i]);
                m_[off] = beta1_ * m_[off] + (1.0 - beta1_) * gi;
                v_[off] = beta2_ * v_[off] + (1.0 - beta2_) * gi * gi;
                const double mhat = m_[off] / bc1;
                const double vhat = v_[off] / bc2;
                p[i] -= static_cast<Real>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<double> m_, v_;
};

/// Per-gather training loop: every step draws a fresh R', evaluates the
/// configured loss, backpropagates, and applies one Adam update. Identical
/// seeds give bit-identical reports within one build configuration.
template <class Real>
TrainReport<Real> train(const Tensor<Real>& d, const TraceMask& R, const NetConfig& net_cfg,
                        const TrainConfig& cfg) {
    validate(cfg);
    detail::check_training_inputs(d, R);
    const auto t0 = std::chrono::steady_clock::now();

    CaeParams<Real> params = build_cae<Real>(net_cfg);
    AdamOptimizer<Real> opt(params.parameter_count(), cfg.learning_rate, cfg.beta1, cfg.beta2,
                            cfg.epsilon);
    SplitRng rprime_rng(cfg.seed);

    TrainReport<Real> report;
    report.seed = cfg.seed;

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        Tape<Real> tape;
        CaeVars<Real> vars = register_cae(tape, params);
        auto dv = tape.leaf(d);

        double term1 = 0.0, term2 = 0.0, term3 = 0.0, total = 0.0;
        typename Tape<Real>::Var loss;
        if (cfg.loss == LossKind::scl) {
            TraceMask Rp = resample_rprime(R, cfg.rprime, rprime_rng);
            SclTerms<Real> terms = scl_loss(tape, vars, net_cfg, dv, R, Rp, cfg.w1, cfg.w2, cfg.w3);
            loss = terms.total;
            term1 = static_cast<double>(tape.value(terms.term1).scalar_value());
            term2 = static_cast<double>(tape.value(terms.term2).scalar_value());
            term3 = static_cast<double>(tape.value(terms.term3).scalar_value());
            total = static_cast<double>(tape.value(terms.total).scalar_value());
        } else {
            loss = traditional_loss(tape, vars, net_cfg, dv, R);
            term1 = total = static_cast<double>(tape.value(loss).scalar_value());
        }
        if (!std::isfinite(total))
            throw TrainingError("loss diverged (non-finite) at iteration " + std::to_string(iter));

        if ((iter - 1) % cfg.history_stride == 0 || iter == cfg.iterations)
            report.history.push_back({iter, term1, term2, term3, total});

        tape.backward(loss);

        std::vector<Real*> ptensors;
        std::vector<const Real*> gtensors;
        std::vector<std::int64_t> sizes;
        auto collect = [&](Tensor<Real>& t, typename Tape<Real>::Var v) {
            ptensors.push_back(t.data());
            gtensors.push_back(tape.grad(v).data());
            sizes.push_back(t.size());
        };
        for (std::size_t i = 0; i < params.enc_w.size(); ++i) {
            collect(params.enc_w[i], vars.enc_w[i]);
            collect(params.enc_b[i], vars.enc_b[i]);
        }
        collect(params.fc_w, vars.fc_w);
        collect(params.fc_b, vars.fc_b);
        for (std::size_t i = 0; i < params.dec_w.size(); ++i) {
            collect(params.dec_w[i], vars.dec_w[i]);
            collect(params.dec_b[i], vars.dec_b[i]);
        }
        opt.step(std::move(ptensors), std::move(gtensors), sizes);
    }

    report.params = std::move(params);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

/// Assemble the reconstruction: observed traces are copied verbatim from d,
/// missing traces are filled by the network.
template <class Real>
Tensor<Real> reconstruct(const CaeParams<Real>& params, const Tensor<Real>& d, const TraceMask& R) {
    if (d.rank() != 3 || d.extent(0) != 1)
        throw DimensionError("reconstruct input must be [1,H,W], got " + shape_str(d.shape()));
    if (R.n() != d.extent(2))
        throw DimensionError("mask length does not match trace count in reconstruct");
    Tensor<Real> net = cae_forward(params, d);
    Tensor<Real> out{d.shape()};
    const int w = d.extent(2);
    for (std::int64_t i = 0; i < out.size(); ++i)
        out[i] = R.keep[static_cast<std::size_t>(i % w)] ? d[i] : net[i];
    return out;
}

}  // namespace zsscl
