#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "zsscl/ops.hpp"

namespace zsscl {

/// Reverse-mode differentiation tape. Nodes are appended in evaluation
/// order, so the tape is acyclic by construction and a reverse sweep visits
/// each node exactly once. One tape belongs to one training job.
template <class Real>
class Tape {
public:
    struct Var {
        std::int32_t id = -1;
        bool valid() const { return id >= 0; }
    };

    /// Register an input or parameter tensor as a leaf node.
    Var leaf(Tensor<Real> value) { return push(std::move(value), nullptr); }

    const Tensor<Real>& value(Var v) const { return at(v).value; }

    /// Gradient of the last backward() target w.r.t. this node. Zero tensor
    /// for nodes the loss does not reach.
    const Tensor<Real>& grad(Var v) const { return at(v).grad; }

    std::size_t node_count() const { return nodes_.size(); }

    Var conv2d(Var x, Var w, Var b, int stride, int pad) {
        Tensor<Real> y = zsscl::conv2d(value(x), value(w), value(b), stride, pad);
        return push(std::move(y), [x, w, b, stride, pad](Tape& t, const Node& self) {
            const Tensor<Real>& xv = t.at(x).value;
            const Tensor<Real>& wv = t.at(w).value;
            detail::conv2d_bwd(self.grad.data(), self.grad.extent(0), self.grad.extent(1),
                               self.grad.extent(2), xv.data(), xv.extent(0), xv.extent(1),
                               xv.extent(2), wv.data(), wv.extent(2), stride, pad,
                               t.at(x).grad.data(), t.at(w).grad.data(), t.at(b).grad.data());
        });
    }

    Var conv2d_transpose(Var x, Var w, Var b, int stride, int pad) {
        Tensor<Real> y = zsscl::conv2d_transpose(value(x), value(w), value(b), stride, pad);
        return push(std::move(y), [x, w, b, stride, pad](Tape& t, const Node& self) {
            const Tensor<Real>& xv = t.at(x).value;
            const Tensor<Real>& wv = t.at(w).value;
            detail::tconv_bwd(self.grad.data(), self.grad.extent(0), self.grad.extent(1),
                              self.grad.extent(2), xv.data(), xv.extent(0), xv.extent(1),
                              xv.extent(2), wv.data(), wv.extent(2), stride, pad,
                              t.at(x).grad.data(), t.at(w).grad.data(), t.at(b).grad.data());
        });
    }

    Var channel_linear(Var x, Var w, Var b) {
        Tensor<Real> y = zsscl::channel_linear(value(x), value(w), value(b));
        return push(std::move(y), [x, w, b](Tape& t, const Node& self) {
            const Tensor<Real>& xv = t.at(x).value;
            const Tensor<Real>& wv = t.at(w).value;
            const int ci = xv.extent(0), co = wv.extent(0);
            const std::int64_t plane = static_cast<std::int64_t>(xv.extent(1)) * xv.extent(2);
            Tensor<Real>& gx = t.at(x).grad;
            Tensor<Real>& gw = t.at(w).grad;
            for (int oc = 0; oc < co; ++oc) {
                const Real* gyp = self.grad.data() + oc * plane;
                for (int ic = 0; ic < ci; ++ic) {
                    const Real wvv = wv[static_cast<std::int64_t>(oc) * ci + ic];
                    const Real* xp = xv.data() + ic * plane;
                    Real* gxp = gx.data() + ic * plane;
                    for (std::int64_t i = 0; i < plane; ++i) gxp[i] += wvv * gyp[i];
                    gw[static_cast<std::int64_t>(oc) * ci + ic] += detail::dot16(gyp, xp, plane);
                }
            }
            detail::sum_planes(self.grad.data(), co, plane, t.at(b).grad.data());
        });
    }

    Var leaky_rect(Var x, Real slope) {
        Tensor<Real> y = zsscl::leaky_rect(value(x), slope);
        return push(std::move(y), [x, slope](Tape& t, const Node& self) {
            const Tensor<Real>& xv = t.at(x).value;
            Tensor<Real>& gx = t.at(x).grad;
            const std::int64_t n = xv.size();
            for (std::int64_t i = 0; i < n; ++i)
                gx[i] += (xv[i] >= Real(0) ? Real(1) : slope) * self.grad[i];
        });
    }

    Var sq_norm_diff(Var a, Var b) {
        Real v = zsscl::sq_norm_diff(value(a), value(b));
        return push(Tensor<Real>::scalar(v), [a, b](Tape& t, const Node& self) {
            const Real g = self.grad[0];
            const Tensor<Real>& av = t.at(a).value;
            const Tensor<Real>& bv = t.at(b).value;
            Tensor<Real>& ga = t.at(a).grad;
            Tensor<Real>& gb = t.at(b).grad;
            const std::int64_t n = av.size();
            for (std::int64_t i = 0; i < n; ++i) {
                const Real d = Real(2) * (av[i] - bv[i]) * g;
                ga[i] += d;
                gb[i] -= d;
            }
        });
    }

    Var mask_columns(Var x, std::vector<std::uint8_t> keep) {
        Tensor<Real> y = zsscl::mask_columns(value(x), keep);
        return push(std::move(y), [x, keep = std::move(keep)](Tape& t, const Node& self) {
            Tensor<Real>& gx = t.at(x).grad;
            const int w = static_cast<int>(keep.size());
            const std::int64_t rows = gx.size() / w;
            for (std::int64_t r = 0; r < rows; ++r) {
                const Real* gyr = self.grad.data() + r * w;
                Real* gxr = gx.data() + r * w;
                for (int c = 0; c < w; ++c)
                    if (keep[static_cast<std::size_t>(c)]) gxr[c] += gyr[c];
            }
        });
    }

    /// Scalar combination sum_i weight_i * term_i. Terms must be scalars.
    Var weighted_sum(std::vector<std::pair<Var, Real>> terms) {
        double acc = 0.0;
        for (const auto& [v, w] : terms) acc += static_cast<double>(w) * static_cast<double>(value(v).scalar_value());
        return push(Tensor<Real>::scalar(static_cast<Real>(acc)),
                    [terms = std::move(terms)](Tape& t, const Node& self) {
                        for (const auto& [v, w] : terms) t.at(v).grad[0] += w * self.grad[0];
                    });
    }

    /// Reverse sweep from a scalar loss. Gradient accumulators are
    /// zero-initialized at the start of every pass.
    void backward(Var loss) {
        if (!loss.valid() || !at(loss).value.is_scalar())
            throw UsageError("backward requires a scalar loss node");
        zero_grad();
        at(loss).grad[0] = Real(1);
        for (std::int32_t i = loss.id; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.back) n.back(*this, n);
        }
    }

    void zero_grad() {
        for (Node& n : nodes_) {
            if (n.grad.size() != n.value.size())
                n.grad = Tensor<Real>{n.value.shape()};
            else
                n.grad.fill(Real(0));
        }
    }

private:
    struct Node {
        Tensor<Real> value;
        Tensor<Real> grad;
        std::function<void(Tape&, const Node&)> back;
    };

    Node& at(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
    const Node& at(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }

    Var push(Tensor<Real> value, std::function<void(Tape&, const Node&)> back) {
        Node n;
        n.value = std::move(value);
        n.grad = Tensor<Real>{n.value.shape()};
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
    }

    std::vector<Node> nodes_;
};

}  // namespace zsscl
