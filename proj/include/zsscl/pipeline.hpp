#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "zsscl/metrics.hpp"
#include "zsscl/seismic_io.hpp"
#include "zsscl/train.hpp"

namespace zsscl {

/// End-to-end reconstruction settings: network, training, and tiling.
struct PipelineConfig {
    NetConfig net;
    TrainConfig train;
    int tile_h = 512;
    int tile_w = 256;
    double overlap = 0.5;
    double detect_eps = 1e-8;
};

struct PipelineResult {
    Gather recon;       // observed traces verbatim, missing traces filled
    Gather net_field;   // raw network output over the whole gather
    TraceMask mask;     // the mask actually used
    std::vector<std::vector<LossSample>> tile_histories;
    CaeParams<float> params;  // trained parameters of the last tile
    double seconds = 0.0;
};

/// Full reconstruction pipeline: detect or accept a mask, normalize, pad,
/// train one network per tile, stitch, denormalize, and reinsert the
/// observed traces verbatim from the input.
inline PipelineResult reconstruct_gather(const Gather& input, const std::optional<TraceMask>& mask_in,
                                         const PipelineConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    PipelineResult result;

    result.mask = mask_in ? *mask_in : detect_mask(input, cfg.detect_eps);
    if (result.mask.n() != input.n_traces)
        throw DimensionError("mask length " + std::to_string(result.mask.n()) +
                             " does not match trace count " + std::to_string(input.n_traces));

    const Gather norm = normalize(apply_mask(input, result.mask));
    const int multiple = cfg.net.extent_multiple();
    const Gather padded = pad_to_multiple(norm, multiple);
    const TraceMask padded_mask = pad_mask(result.mask, padded.n_traces);

    const int tile_h = next_multiple(std::min(cfg.tile_h, padded.n_samples), multiple);
    const int tile_w = next_multiple(std::min(cfg.tile_w, padded.n_traces), multiple);
    const TilePlan plan = plan_tiles(padded.n_samples, padded.n_traces, tile_h, tile_w, cfg.overlap);

    std::vector<Gather> recon_tiles(static_cast<std::size_t>(plan.count()));
    std::vector<Gather> net_tiles(static_cast<std::size_t>(plan.count()));
    for (int idx = 0; idx < plan.count(); ++idx) {
        const Gather tile = cut_tile(padded, plan, idx);
        const TraceMask tmask = tile_mask(padded_mask, plan, idx);
        if (tmask.missing_count() == tmask.n())
            throw UsageError("tile " + std::to_string(idx) + " has zero live traces");

        TrainConfig tcfg = cfg.train;
        tcfg.seed = cfg.train.seed + static_cast<std::uint64_t>(idx);
        const Tensor<float> d = to_tensor(tile);
        TrainReport<float> report = train(d, tmask, cfg.net, tcfg);
        result.tile_histories.push_back(report.history);

        const Tensor<float> rec = reconstruct(report.params, d, tmask);
        const Tensor<float> field = cae_forward(report.params, d);
        recon_tiles[static_cast<std::size_t>(idx)] = from_tensor(rec, tile);
        net_tiles[static_cast<std::size_t>(idx)] = from_tensor(field, tile);
        result.params = std::move(report.params);
    }

    Gather stitched = crop(stitch(recon_tiles, plan), norm.n_samples, norm.n_traces);
    Gather net_stitched = crop(stitch(net_tiles, plan), norm.n_samples, norm.n_traces);
    stitched.amp_scale = norm.amp_scale;
    net_stitched.amp_scale = norm.amp_scale;
    result.recon = denormalize(stitched);
    result.net_field = denormalize(net_stitched);
    result.recon.dt = input.dt;
    result.net_field.dt = input.dt;

    // Observed traces come back bit-exact from the input regardless of
    // normalization and blending round-off.
    for (int s = 0; s < input.n_samples; ++s)
        for (int t = 0; t < input.n_traces; ++t)
            if (result.mask.keep[static_cast<std::size_t>(t)]) result.recon.at(s, t) = input.at(s, t);

    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace zsscl
