#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "cla/network.hpp"
#include "cla/rng.hpp"

namespace claprobe {

// Reference/query point cloud with cached k-NN radii (distance to the k-th
// nearest neighbor, self excluded).
struct FeatureSet {
    std::vector<std::vector<double>> points;
    std::vector<double> radii;
    std::size_t k = 0;
};

// Euclidean distance to the k-th nearest neighbor per point, self excluded.
inline std::vector<double> knn_radii(const std::vector<std::vector<double>>& points,
                                     std::size_t k) {
    if (points.empty()) throw ConfigError("knn_radii: empty point set");
    if (k < 1 || k >= points.size())
        throw ConfigError("knn_radii: k must satisfy 1 <= k < set size");
    std::vector<double> radii(points.size());
    std::vector<double> dists;
    dists.reserve(points.size() - 1);
    for (std::size_t i = 0; i < points.size(); ++i) {
        dists.clear();
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j == i) continue;
            dists.push_back(squared_l2(points[i], points[j]));
        }
        std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         dists.end());
        radii[i] = std::sqrt(dists[k - 1]);
    }
    return radii;
}

inline FeatureSet make_feature_set(std::vector<std::vector<double>> points, std::size_t k) {
    FeatureSet fs;
    fs.radii = knn_radii(points, k);
    fs.points = std::move(points);
    fs.k = k;
    return fs;
}

namespace detail {

// Is x inside any of the set's k-NN balls?
inline bool covered_by(const FeatureSet& set, const std::vector<double>& x) {
    for (std::size_t i = 0; i < set.points.size(); ++i) {
        const double d2 = squared_l2(set.points[i], x);
        if (d2 <= set.radii[i] * set.radii[i]) return true;
    }
    return false;
}

} // namespace detail

struct PrecisionRecall {
    double precision = 0.0; // fraction of fake points on the real manifold
    double recall = 0.0;    // fraction of real points on the fake manifold
};

inline PrecisionRecall precision_recall(const FeatureSet& real, const FeatureSet& fake) {
    if (real.points.empty() || fake.points.empty())
        throw ConfigError("precision_recall: empty set");
    PrecisionRecall pr;
    std::size_t hits = 0;
    for (const auto& f : fake.points)
        if (detail::covered_by(real, f)) ++hits;
    pr.precision = static_cast<double>(hits) / static_cast<double>(fake.points.size());
    hits = 0;
    for (const auto& r : real.points)
        if (detail::covered_by(fake, r)) ++hits;
    pr.recall = static_cast<double>(hits) / static_cast<double>(real.points.size());
    return pr;
}

struct RealismScore {
    double value = 0.0;
    bool capped = false;
};

// RS(x) = max over reference points of radius / distance; > 1 means x lies
// inside some reference k-NN ball. A coincident point with positive radius
// is reported as the cap; coincident zero-radius points are skipped.
inline RealismScore realism_score(const FeatureSet& real, const std::vector<double>& x,
                                  double cap = 1e6) {
    if (real.points.empty()) throw ConfigError("realism_score: empty reference set");
    RealismScore rs;
    for (std::size_t i = 0; i < real.points.size(); ++i) {
        const double d = std::sqrt(squared_l2(real.points[i], x));
        if (d == 0.0) {
            if (real.radii[i] > 0.0) {
                rs.value = cap;
                rs.capped = true;
                return rs;
            }
            continue; // 0/0: defined by the max over the remaining points
        }
        rs.value = std::max(rs.value, real.radii[i] / d);
    }
    if (rs.value > cap) {
        rs.value = cap;
        rs.capped = true;
    }
    return rs;
}

enum class Interpolation { lerp, slerp };

struct PplConfig {
    double epsilon = 1e-4;
    std::size_t pairs = 1024;
    Interpolation interpolation = Interpolation::lerp;
};

namespace detail {

inline std::vector<double> lerp(const std::vector<double>& a, const std::vector<double>& b,
                                double t) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + t * (b[i] - a[i]);
    return out;
}

inline std::vector<double> slerp(const std::vector<double>& a, const std::vector<double>& b,
                                 double t) {
    const double na = norm2(a), nb = norm2(b);
    if (na == 0.0 || nb == 0.0) return lerp(a, b, t);
    double cosw = dot(a, b) / (na * nb);
    cosw = std::clamp(cosw, -1.0, 1.0);
    const double w = std::acos(cosw);
    if (w < 1e-12) return lerp(a, b, t);
    const double s = std::sin(w);
    const double ca = std::sin((1.0 - t) * w) / s, cb = std::sin(t * w) / s;
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = ca * a[i] + cb * b[i];
    return out;
}

inline std::vector<double> interp(Interpolation kind, const std::vector<double>& a,
                                  const std::vector<double>& b, double t) {
    return kind == Interpolation::lerp ? lerp(a, b, t) : slerp(a, b, t);
}

} // namespace detail

// Mean over sampled endpoint pairs of |G(interp(t)) - G(interp(t+eps))|^2 /
// eps^2, with raw output-space distance standing in for a perceptual one.
// `draw_endpoint` supplies latent codes (standard normal by default).
inline double ppl_over(const NetworkSpec& net, const PplConfig& cfg,
                       const std::function<std::vector<double>(Rng&)>& draw_endpoint,
                       std::uint64_t seed) {
    if (!(cfg.epsilon > 0.0)) throw ConfigError("ppl: epsilon must be > 0");
    if (cfg.pairs == 0) throw ConfigError("ppl: pair count must be >= 1");
    Rng rng(seed);
    double acc = 0.0;
    for (std::size_t p = 0; p < cfg.pairs; ++p) {
        const std::vector<double> z1 = draw_endpoint(rng);
        const std::vector<double> z2 = draw_endpoint(rng);
        const double t = rng.uniform();
        const auto za = detail::interp(cfg.interpolation, z1, z2, t);
        const auto zb = detail::interp(cfg.interpolation, z1, z2, t + cfg.epsilon);
        const Tensor ga = forward_output(net, Tensor::vector(za));
        const Tensor gb = forward_output(net, Tensor::vector(zb));
        acc += squared_l2(ga.data, gb.data) / (cfg.epsilon * cfg.epsilon);
    }
    return acc / static_cast<double>(cfg.pairs);
}

inline double ppl(const NetworkSpec& net, const PplConfig& cfg, std::uint64_t seed) {
    const std::size_t dz = net.latent_dim;
    return ppl_over(
        net, cfg,
        [dz](Rng& rng) {
            std::vector<double> z(dz);
            for (double& v : z) v = rng.normal();
            return z;
        },
        seed);
}

// PPL with both endpoints drawn from a fixed pool of codes (group PPL).
inline double ppl_over_codes(const NetworkSpec& net, const PplConfig& cfg,
                             const std::vector<std::vector<double>>& codes, std::uint64_t seed) {
    if (codes.empty()) throw ConfigError("ppl_over_codes: empty code pool");
    return ppl_over(
        net, cfg,
        [&codes](Rng& rng) {
            return codes[static_cast<std::size_t>(rng.uniform_index(codes.size()))];
        },
        seed);
}

} // namespace claprobe
