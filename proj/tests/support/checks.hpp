#pragma once

// Shared helpers for the unit and acceptance suites: random tensors and an
// independent central finite-difference oracle for gradients.

#include <cmath>
#include <functional>
#include <vector>

#include "zsscl/rng.hpp"
#include "zsscl/tape.hpp"

namespace zsscl::testing {

inline Tensor<double> random_tensor(const Shape& shape, SplitRng& rng, double lo = -1.0,
                                    double hi = 1.0) {
    Tensor<double> t{shape};
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

inline Tensor<float> random_tensor_f(const Shape& shape, SplitRng& rng, double lo = -1.0,
                                     double hi = 1.0) {
    Tensor<float> t{shape};
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

/// Builds a scalar loss from leaf vars registered for the given tensors.
using LossBuilder =
    std::function<Tape<double>::Var(Tape<double>&, const std::vector<Tape<double>::Var>&)>;

inline double eval_loss(std::vector<Tensor<double>>& inputs, const LossBuilder& build) {
    Tape<double> tape;
    std::vector<Tape<double>::Var> vars;
    vars.reserve(inputs.size());
    for (auto& t : inputs) vars.push_back(tape.leaf(t));
    return tape.value(build(tape, vars)).scalar_value();
}

/// Max relative error between reverse-mode gradients and central finite
/// differences over every element of every input tensor. The denominator
/// is floored so near-zero entries are compared absolutely.
inline double max_grad_error(std::vector<Tensor<double>> inputs, const LossBuilder& build,
                             double h = 1e-4, double floor = 1e-2) {
    Tape<double> tape;
    std::vector<Tape<double>::Var> vars;
    for (auto& t : inputs) vars.push_back(tape.leaf(t));
    tape.backward(build(tape, vars));
    std::vector<Tensor<double>> grads;
    for (auto v : vars) grads.push_back(tape.grad(v));

    double worst = 0.0;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        for (std::int64_t i = 0; i < inputs[ti].size(); ++i) {
            const double keep = inputs[ti][i];
            inputs[ti][i] = keep + h;
            const double fp = eval_loss(inputs, build);
            inputs[ti][i] = keep - h;
            const double fm = eval_loss(inputs, build);
            inputs[ti][i] = keep;
            const double fd = (fp - fm) / (2.0 * h);
            const double ad = grads[ti][i];
            const double denom = std::max({std::fabs(fd), std::fabs(ad), floor});
            worst = std::max(worst, std::fabs(ad - fd) / denom);
        }
    }
    return worst;
}

inline double rel_diff(double a, double b, double floor = 1e-12) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

}  // namespace zsscl::testing
