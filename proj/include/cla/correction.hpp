#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "cla/probe.hpp"

namespace claprobe {

struct UnitScore {
    std::size_t layer = 0;
    std::size_t unit = 0;
    double mean_cla = 0.0; // mean of member neurons' mean_curvature
    std::size_t neuron_count = 0;
};

struct CorrectionConfig {
    std::size_t stopping_layer = 0;
    std::size_t num_ablation_units = 1;
    double maintain_ratio = 0.9; // lambda; retained fraction, 0 = zero-ablation
    bool signed_ranking = false; // rank by signed mean instead of |mean|
};

// Mean CLA per featuremap unit of one layer (over the unit's spatial
// neurons; a dense layer has one neuron per unit).
inline std::vector<UnitScore> unit_cla(const std::vector<ClaRecord>& records,
                                       std::size_t layer) {
    std::map<std::size_t, UnitScore> by_unit;
    for (const ClaRecord& r : records) {
        if (r.site.layer != layer) continue;
        UnitScore& u = by_unit[r.site.unit];
        u.layer = layer;
        u.unit = r.site.unit;
        u.mean_cla += r.mean_curvature;
        ++u.neuron_count;
    }
    if (by_unit.empty())
        throw ConfigError("unit_cla: no records for layer " + std::to_string(layer));
    std::vector<UnitScore> out;
    out.reserve(by_unit.size());
    for (auto& [unit, score] : by_unit) {
        score.mean_cla /= static_cast<double>(score.neuron_count);
        out.push_back(score);
    }
    return out;
}

// Top `num_units` units by |mean CLA| (or signed mean when requested),
// tie-broken by unit id.
inline std::vector<std::size_t> identify_artifact_units(std::vector<UnitScore> unit_scores,
                                                        std::size_t num_units,
                                                        bool signed_ranking = false) {
    if (num_units < 1) throw ConfigError("identify_artifact_units: num_units must be >= 1");
    if (num_units > unit_scores.size())
        throw ConfigError("identify_artifact_units: num_units " + std::to_string(num_units) +
                          " exceeds available units " + std::to_string(unit_scores.size()));
    auto key = [signed_ranking](const UnitScore& u) {
        return signed_ranking ? u.mean_cla : std::abs(u.mean_cla);
    };
    std::sort(unit_scores.begin(), unit_scores.end(),
              [&](const UnitScore& a, const UnitScore& b) {
                  const double ka = key(a), kb = key(b);
                  if (ka != kb) return ka > kb;
                  return a.unit < b.unit;
              });
    std::vector<std::size_t> ids;
    ids.reserve(num_units);
    for (std::size_t i = 0; i < num_units; ++i) ids.push_back(unit_scores[i].unit);
    return ids;
}

struct CorrectionResult {
    Tensor original;
    Tensor corrected;
};

namespace detail {

// Scale the identified units of a layer activation in place. For rank-3
// featuremaps a unit is a channel; for dense layers it is one element.
inline void dampen_units(Tensor& h, const std::vector<std::size_t>& unit_ids, double lambda,
                         std::size_t layer) {
    const bool spatial = h.shape.size() == 3;
    const std::size_t units = spatial ? h.shape[0] : h.numel();
    const std::size_t unit_stride = spatial ? h.shape[1] * h.shape[2] : 1;
    for (std::size_t u : unit_ids) {
        if (u >= units)
            throw InvalidSiteError("correct: unit " + std::to_string(u) +
                                   " outside layer " + std::to_string(layer) + " (" +
                                   std::to_string(units) + " units)");
        for (std::size_t i = 0; i < unit_stride; ++i) h.data[u * unit_stride + i] *= lambda;
    }
}

} // namespace detail

// Regenerate with the identified units dampened at the stopping layer:
// h_u <- lambda * h_u, then resume the forward pass. lambda = 1 reproduces
// the original output, lambda = 0 is zero-ablation.
inline CorrectionResult correct(const NetworkSpec& net, const Tensor& z,
                                const CorrectionConfig& cfg,
                                const std::vector<std::size_t>& unit_ids) {
    if (cfg.stopping_layer >= net.depth())
        throw ConfigError("correct: stopping layer " + std::to_string(cfg.stopping_layer) +
                          " out of range");
    ForwardTrace tr = forward_trace(net, z);
    CorrectionResult res;
    res.original = tr.post.back();
    Tensor h = tr.post[cfg.stopping_layer];
    detail::dampen_units(h, unit_ids, cfg.maintain_ratio, cfg.stopping_layer);
    res.corrected = forward_from(net, cfg.stopping_layer + 1, h);
    return res;
}

} // namespace claprobe
