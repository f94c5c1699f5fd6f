#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <vector>

#include "cla/network.hpp"

namespace claprobe {

// Line-search configuration. The grid has 2*grid_divisions + 1 evenly spaced
// samples over [-R, R], so r = 0 is always a sample.
struct ProbeConfig {
    double search_bound = 30.0;   // R
    int grid_divisions = 20;      // points per side of z0
    double zero_tol = 1e-9;       // treat |value| <= zero_tol as zero
    bool parallel_axes = false;   // evaluate axes via std::async

    double cell() const { return search_bound / grid_divisions; }
};

// Left/right change points of one neuron along one latent axis. `*_value`
// carries the neuron value used at that point: exactly 0 at an interpolated
// crossing, the measured grid value otherwise.
struct ChangePointPair {
    double left = 0.0;   // in [-R, 0]
    double right = 0.0;  // in [0, R]
    bool left_is_bound = false;
    bool right_is_bound = false;
    double left_value = 0.0;
    double right_value = 0.0;
};

struct ClaRecord {
    NeuronSite site;
    std::vector<double> axis_curvature; // C(d, z0) per latent axis
    double mean_curvature = 0.0;        // arithmetic mean of axis_curvature
    double activation = 0.0;            // h at z0
    std::uint64_t latent_id = 0;
};

// Counters for the cost model: neuron_evals is incremented once per neuron
// value obtained from the engine, forward_passes once per engine pass.
struct ProbeStats {
    std::uint64_t neuron_evals = 0;
    std::uint64_t forward_passes = 0;
};

struct ProfilePoint {
    double r = 0.0;
    double value = 0.0;
};

namespace detail {

// Grid samples along one axis: index k in [0, 2n] maps to r = (k - n) * cell.
// `values` are post-activations (what the change-point definition is stated
// on); `pre` are the neuron's pre-activations from the same passes. Crossing
// localization interpolates the pre-activation: its zero set coincides with
// the post-activation zero boundary for relu/leaky_relu, and unlike the post
// it is not kinked at the zero itself, so the interpolated root is exact
// whenever the pre-activation is linear inside the straddling cell.
struct AxisProfile {
    std::vector<double> values;
    std::vector<double> pre;
    double cell = 0.0;
    int n = 0;

    double r_at(int k) const { return (k - n) * cell; }
    double center() const { return values[static_cast<std::size_t>(n)]; }
};

// One side of the change-point search: walk outward from the center, return
// the first zero (|pre| <= tol at a grid point, or a pre-activation sign
// straddle between two grid points, located by linear interpolation).
// `dir` is +1 or -1.
inline bool side_crossing(const AxisProfile& p, int dir, double tol, double& cp_r,
                          double& cp_value) {
    const int n = p.n;
    for (int step = 0; step <= n; ++step) {
        const int k = n + dir * step;
        const double v = p.pre[static_cast<std::size_t>(k)];
        if (step > 0 && std::abs(v) <= tol) {
            cp_r = p.r_at(k);
            cp_value = p.values[static_cast<std::size_t>(k)];
            return true;
        }
        if (step == n) break;
        const double vn = p.pre[static_cast<std::size_t>(k + dir)];
        if (std::abs(v) > tol && std::abs(vn) > tol && ((v > 0.0) != (vn > 0.0))) {
            const double r0 = p.r_at(k);
            const double r1 = p.r_at(k + dir);
            cp_r = r0 + (r1 - r0) * (v / (v - vn));
            cp_value = 0.0; // sigma(0) == 0 exactly
            return true;
        }
    }
    return false;
}

inline ChangePointPair change_points_from_profile(const AxisProfile& p, double tol) {
    ChangePointPair cp;
    if (std::abs(p.center()) <= tol) {
        // Neuron is zero at z0 itself: both change points collapse to 0.
        cp.left = cp.right = 0.0;
        cp.left_value = cp.right_value = p.center();
        return cp;
    }
    if (!side_crossing(p, +1, tol, cp.right, cp.right_value)) {
        cp.right = p.r_at(2 * p.n);
        cp.right_value = p.values.back();
        cp.right_is_bound = true;
    }
    if (!side_crossing(p, -1, tol, cp.left, cp.left_value)) {
        cp.left = p.r_at(0);
        cp.left_value = p.values.front();
        cp.left_is_bound = true;
    }
    return cp;
}

// Secant-slope curvature through (left cp, center, right cp). Degenerate
// spans (zero-width, or a change point at the center) yield 0.
inline double curvature_from(const ChangePointPair& cp, double center_value, double tol) {
    const double span = cp.right - cp.left;
    if (span < tol || std::abs(cp.right) < tol || std::abs(cp.left) < tol) return 0.0;
    const double right_slope = (cp.right_value - center_value) / cp.right;
    const double left_slope = (cp.left_value - center_value) / cp.left;
    return (right_slope - left_slope) / span;
}

inline void require_probeable(const NetworkSpec& net, std::size_t layer) {
    if (layer >= net.depth())
        throw InvalidSiteError("probe: layer " + std::to_string(layer) + " out of range");
    if (!net.layers[layer].activation.probeable())
        throw UnsupportedActivationError(
            "probe: layer " + std::to_string(layer) +
            " activation is not relu/leaky_relu; change points are undefined");
}

inline void require_valid_config(const ProbeConfig& cfg) {
    if (!(cfg.search_bound > 0.0)) throw ConfigError("probe: search bound must be > 0");
    if (cfg.grid_divisions < 2) throw ConfigError("probe: grid_divisions must be >= 2");
    if (cfg.zero_tol < 0.0) throw ConfigError("probe: zero tolerance must be >= 0");
}

inline Tensor offset_latent(const Tensor& z0, std::size_t axis, double r) {
    Tensor z = z0;
    z.data[axis] += r;
    return z;
}

// Samples one neuron on the axis grid. The center sample is passed in so it
// is evaluated once per latent code, not once per axis.
inline AxisProfile sample_axis(const NetworkSpec& net, const NeuronSite& site, const Tensor& z0,
                               std::size_t axis, const ProbeConfig& cfg,
                               std::pair<double, double> center_pre_post, ProbeStats* stats) {
    AxisProfile p;
    p.n = cfg.grid_divisions;
    p.cell = cfg.cell();
    p.values.resize(static_cast<std::size_t>(2 * p.n + 1));
    p.pre.resize(static_cast<std::size_t>(2 * p.n + 1));
    for (int k = 0; k <= 2 * p.n; ++k) {
        if (k == p.n) {
            p.pre[static_cast<std::size_t>(k)] = center_pre_post.first;
            p.values[static_cast<std::size_t>(k)] = center_pre_post.second;
            continue;
        }
        const auto [pre, post] = neuron_pre_post(net, offset_latent(z0, axis, p.r_at(k)), site);
        p.pre[static_cast<std::size_t>(k)] = pre;
        p.values[static_cast<std::size_t>(k)] = post;
        if (stats) {
            ++stats->neuron_evals;
            ++stats->forward_passes;
        }
    }
    return p;
}

} // namespace detail

// Change points of `site` along latent axis `axis` (Definition: nearest zero
// of the post-activation on each side of z0, clamped to +-R when none).
inline ChangePointPair find_change_points(const NetworkSpec& net, const NeuronSite& site,
                                          const Tensor& z0, std::size_t axis,
                                          const ProbeConfig& cfg, ProbeStats* stats = nullptr) {
    detail::require_valid_config(cfg);
    detail::require_probeable(net, site.layer);
    check_network_input(net, z0);
    if (axis >= net.latent_dim)
        throw InvalidSiteError("probe: axis " + std::to_string(axis) + " out of range");
    const auto center = neuron_pre_post(net, z0, site);
    if (stats) {
        ++stats->neuron_evals;
        ++stats->forward_passes;
    }
    const auto profile = detail::sample_axis(net, site, z0, axis, cfg, center, stats);
    return detail::change_points_from_profile(profile, cfg.zero_tol);
}

// C(d, z0) for a change-point pair previously computed at (site, z0, axis).
inline double axis_curvature(const NetworkSpec& net, const NeuronSite& site, const Tensor& z0,
                             std::size_t axis, const ChangePointPair& cp,
                             const ProbeConfig& cfg) {
    (void)axis;
    detail::require_probeable(net, site.layer);
    const double center = neuron_value(net, z0, site);
    return detail::curvature_from(cp, center, cfg.zero_tol);
}

// The sampled (r, value) curve backing find_change_points, for reports/plots.
inline std::vector<ProfilePoint> activation_profile(const NetworkSpec& net,
                                                    const NeuronSite& site, const Tensor& z0,
                                                    std::size_t axis, const ProbeConfig& cfg,
                                                    ProbeStats* stats = nullptr) {
    detail::require_valid_config(cfg);
    detail::require_probeable(net, site.layer);
    check_network_input(net, z0);
    const auto center = neuron_pre_post(net, z0, site);
    if (stats) {
        ++stats->neuron_evals;
        ++stats->forward_passes;
    }
    const auto p = detail::sample_axis(net, site, z0, axis, cfg, center, stats);
    std::vector<ProfilePoint> out(p.values.size());
    for (int k = 0; k <= 2 * p.n; ++k)
        out[static_cast<std::size_t>(k)] = {p.r_at(k), p.values[static_cast<std::size_t>(k)]};
    return out;
}

// Curvature of local activation for one neuron: per-axis curvatures averaged
// over the latent dimensions. Exactly 2*grid_divisions*D_z + 1 neuron
// evaluations (the center is shared across axes).
inline ClaRecord cla(const NetworkSpec& net, const NeuronSite& site, const Tensor& z0,
                     const ProbeConfig& cfg, ProbeStats* stats = nullptr,
                     std::uint64_t latent_id = 0) {
    detail::require_valid_config(cfg);
    detail::require_probeable(net, site.layer);
    check_network_input(net, z0);
    ClaRecord rec;
    rec.site = site;
    rec.latent_id = latent_id;
    const auto center = neuron_pre_post(net, z0, site);
    rec.activation = center.second;
    if (stats) {
        ++stats->neuron_evals;
        ++stats->forward_passes;
    }
    rec.axis_curvature.resize(net.latent_dim);

    auto eval_axis = [&](std::size_t d, ProbeStats* s) {
        const auto profile = detail::sample_axis(net, site, z0, d, cfg, center, s);
        const auto cp = detail::change_points_from_profile(profile, cfg.zero_tol);
        return detail::curvature_from(cp, rec.activation, cfg.zero_tol);
    };

    if (cfg.parallel_axes) {
        std::vector<ProbeStats> axis_stats(net.latent_dim);
        std::vector<std::future<double>> futs;
        futs.reserve(net.latent_dim);
        for (std::size_t d = 0; d < net.latent_dim; ++d)
            futs.push_back(std::async(std::launch::async, eval_axis, d, &axis_stats[d]));
        for (std::size_t d = 0; d < net.latent_dim; ++d) {
            rec.axis_curvature[d] = futs[d].get();
            if (stats) {
                stats->neuron_evals += axis_stats[d].neuron_evals;
                stats->forward_passes += axis_stats[d].forward_passes;
            }
        }
    } else {
        for (std::size_t d = 0; d < net.latent_dim; ++d)
            rec.axis_curvature[d] = eval_axis(d, stats);
    }

    double sum = 0.0;
    for (double c : rec.axis_curvature) sum += c;
    rec.mean_curvature = sum / static_cast<double>(net.latent_dim);
    return rec;
}

// CLA for every neuron of one layer. One engine pass per grid point yields
// the whole layer, so the cost is D_z*(2*grid_divisions) + 1 forward passes
// regardless of layer width.
inline std::vector<ClaRecord> layer_cla(const NetworkSpec& net, std::size_t layer,
                                        const Tensor& z0, const ProbeConfig& cfg,
                                        ProbeStats* stats = nullptr,
                                        std::uint64_t latent_id = 0) {
    detail::require_valid_config(cfg);
    detail::require_probeable(net, layer);
    check_network_input(net, z0);

    struct LayerSample {
        Tensor pre, post;
    };
    auto sample_at = [&](const Tensor& z) {
        ForwardTrace tr = forward_trace(net, z, layer);
        return LayerSample{std::move(tr.pre.back()), std::move(tr.post.back())};
    };

    const LayerSample center = sample_at(z0);
    if (stats) {
        ++stats->forward_passes;
        stats->neuron_evals += center.post.numel();
    }
    const std::size_t width = center.post.numel();
    const int n = cfg.grid_divisions;
    const double cell = cfg.cell();

    // profiles[d] holds the whole layer at each grid point of axis d.
    auto sample_layer_axis = [&](std::size_t d, ProbeStats* s) {
        std::vector<LayerSample> grid(static_cast<std::size_t>(2 * n + 1));
        for (int k = 0; k <= 2 * n; ++k) {
            if (k == n) {
                grid[static_cast<std::size_t>(k)] = center;
                continue;
            }
            const double r = (k - n) * cell;
            grid[static_cast<std::size_t>(k)] = sample_at(detail::offset_latent(z0, d, r));
            if (s) {
                ++s->forward_passes;
                s->neuron_evals += width;
            }
        }
        return grid;
    };

    std::vector<std::vector<LayerSample>> profiles(net.latent_dim);
    if (cfg.parallel_axes) {
        std::vector<ProbeStats> axis_stats(net.latent_dim);
        std::vector<std::future<std::vector<LayerSample>>> futs;
        futs.reserve(net.latent_dim);
        for (std::size_t d = 0; d < net.latent_dim; ++d)
            futs.push_back(std::async(std::launch::async, sample_layer_axis, d, &axis_stats[d]));
        for (std::size_t d = 0; d < net.latent_dim; ++d) {
            profiles[d] = futs[d].get();
            if (stats) {
                stats->neuron_evals += axis_stats[d].neuron_evals;
                stats->forward_passes += axis_stats[d].forward_passes;
            }
        }
    } else {
        for (std::size_t d = 0; d < net.latent_dim; ++d)
            profiles[d] = sample_layer_axis(d, stats);
    }

    const auto shape = center.post.shape;
    std::vector<ClaRecord> records;
    records.reserve(width);
    detail::AxisProfile axis_profile;
    axis_profile.n = n;
    axis_profile.cell = cell;
    axis_profile.values.resize(static_cast<std::size_t>(2 * n + 1));
    axis_profile.pre.resize(static_cast<std::size_t>(2 * n + 1));
    for (std::size_t flat = 0; flat < width; ++flat) {
        ClaRecord rec;
        rec.latent_id = latent_id;
        rec.site.layer = layer;
        if (shape.size() == 3) {
            rec.site.unit = flat / (shape[1] * shape[2]);
            rec.site.row = (flat / shape[2]) % shape[1];
            rec.site.col = flat % shape[2];
        } else {
            rec.site.unit = flat;
        }
        rec.activation = center.post.data[flat];
        rec.axis_curvature.resize(net.latent_dim);
        for (std::size_t d = 0; d < net.latent_dim; ++d) {
            for (int k = 0; k <= 2 * n; ++k) {
                axis_profile.values[static_cast<std::size_t>(k)] =
                    profiles[d][static_cast<std::size_t>(k)].post.data[flat];
                axis_profile.pre[static_cast<std::size_t>(k)] =
                    profiles[d][static_cast<std::size_t>(k)].pre.data[flat];
            }
            const auto cp = detail::change_points_from_profile(axis_profile, cfg.zero_tol);
            rec.axis_curvature[d] = detail::curvature_from(cp, rec.activation, cfg.zero_tol);
        }
        double sum = 0.0;
        for (double c : rec.axis_curvature) sum += c;
        rec.mean_curvature = sum / static_cast<double>(net.latent_dim);
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace claprobe
