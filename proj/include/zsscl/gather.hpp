#pragma once

#include <string>
#include <vector>

#include "zsscl/tensor.hpp"

namespace zsscl {

/// A 2-D seismic section: n_samples time rows by n_traces receiver columns,
/// row-major so one row holds one time slice across all traces. A trace is
/// a column. amp_scale records the divisor applied by normalization so the
/// original amplitudes can be restored exactly.
struct Gather {
    int n_samples = 0;
    int n_traces = 0;
    double dt = 0.004;  // sample interval, seconds
    double amp_scale = 1.0;
    std::string line_id;
    std::vector<float> data;

    Gather() = default;
    Gather(int samples, int traces, double dt_s)
        : n_samples(samples), n_traces(traces), dt(dt_s),
          data(static_cast<std::size_t>(samples) * static_cast<std::size_t>(traces), 0.0f) {
        if (samples < 1 || traces < 1) throw DimensionError("gather extents must be >= 1");
        if (dt_s <= 0.0) throw UsageError("gather dt must be positive");
    }

    float& at(int sample, int trace) {
        return data[static_cast<std::size_t>(sample) * static_cast<std::size_t>(n_traces) +
                    static_cast<std::size_t>(trace)];
    }
    float at(int sample, int trace) const {
        return data[static_cast<std::size_t>(sample) * static_cast<std::size_t>(n_traces) +
                    static_cast<std::size_t>(trace)];
    }

    bool same_shape(const Gather& o) const {
        return n_samples == o.n_samples && n_traces == o.n_traces;
    }

    bool empty() const { return data.empty(); }
};

inline Tensor<float> to_tensor(const Gather& g) {
    Tensor<float> t{Shape{1, g.n_samples, g.n_traces}};
    std::copy(g.data.begin(), g.data.end(), t.data());
    return t;
}

/// Rebuild a gather from a [1,H,W] tensor, carrying metadata over.
inline Gather from_tensor(const Tensor<float>& t, const Gather& like) {
    if (t.rank() != 3 || t.extent(0) != 1)
        throw DimensionError("expected [1,H,W] tensor, got " + shape_str(t.shape()));
    Gather g(t.extent(1), t.extent(2), like.dt);
    g.amp_scale = like.amp_scale;
    g.line_id = like.line_id;
    std::copy(t.data(), t.data() + t.size(), g.data.begin());
    return g;
}

}  // namespace zsscl
