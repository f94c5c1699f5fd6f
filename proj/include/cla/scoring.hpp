#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cla/probe.hpp"
#include "cla/rng.hpp"

namespace claprobe {

struct SampleScore {
    std::uint64_t latent_id = 0;
    std::size_t layer = 0;
    double score = 0.0;
    std::size_t contributing_neurons = 0;
};

enum class GroupKind { high_cla, low_cla, random };

inline const char* group_kind_name(GroupKind k) {
    switch (k) {
        case GroupKind::high_cla: return "high_cla";
        case GroupKind::low_cla: return "low_cla";
        case GroupKind::random: return "random";
    }
    return "random";
}

struct GroupSelection {
    GroupKind kind = GroupKind::random;
    std::vector<std::uint64_t> members;
    double fraction = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {

inline double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

} // namespace detail

// Per-sample artifact score over one layer's records:
//   S = sum_i | min(C_i,0)*sign(max(h_i,0)) + max(C_i,0)*sign(min(h_i,0)) |
// with sign(0) = 0, so each neuron contributes through at most one term:
// concave over positive activation, or convex over negative activation.
inline SampleScore sample_score(const std::vector<ClaRecord>& records) {
    if (records.empty()) throw ConfigError("sample_score: empty record list");
    SampleScore out;
    out.latent_id = records.front().latent_id;
    out.layer = records.front().site.layer;
    std::vector<double> terms;
    terms.reserve(records.size());
    for (const ClaRecord& r : records) {
        if (r.latent_id != out.latent_id)
            throw ConfigError("sample_score: records mix latent ids " +
                              std::to_string(out.latent_id) + " and " +
                              std::to_string(r.latent_id));
        if (r.site.layer != out.layer)
            throw ConfigError("sample_score: records mix layers");
        const double c = r.mean_curvature;
        const double h = r.activation;
        const double term = std::min(c, 0.0) * detail::sign0(std::max(h, 0.0)) +
                            std::max(c, 0.0) * detail::sign0(std::min(h, 0.0));
        const double contribution = std::abs(term);
        if (contribution > 0.0) {
            terms.push_back(contribution);
            ++out.contributing_neurons;
        }
    }
    // summing in sorted order makes the score independent of record order
    std::sort(terms.begin(), terms.end());
    for (double t : terms) out.score += t;
    return out;
}

// Descending sort by score with latent-id tie-break; top/bottom `fraction`
// become the high/low CLA groups. The random baseline group is drawn without
// replacement from the full pool with the given seed.
inline std::vector<GroupSelection> rank_and_select(std::vector<SampleScore> scores,
                                                   double fraction, std::uint64_t seed) {
    if (scores.empty()) throw ConfigError("rank_and_select: empty score list");
    if (!(fraction > 0.0) || fraction > 0.5)
        throw ConfigError("rank_and_select: fraction must be in (0, 0.5]");

    std::sort(scores.begin(), scores.end(), [](const SampleScore& a, const SampleScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.latent_id < b.latent_id;
    });

    const std::size_t n = scores.size();
    std::size_t count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
    count = std::max<std::size_t>(1, std::min(count, n / 2 ? n / 2 : 1));

    GroupSelection high{GroupKind::high_cla, {}, fraction, seed};
    GroupSelection low{GroupKind::low_cla, {}, fraction, seed};
    for (std::size_t i = 0; i < count; ++i) high.members.push_back(scores[i].latent_id);
    for (std::size_t i = 0; i < count; ++i)
        low.members.push_back(scores[n - count + i].latent_id);

    std::vector<std::uint64_t> pool;
    pool.reserve(n);
    for (const SampleScore& s : scores) pool.push_back(s.latent_id);
    std::sort(pool.begin(), pool.end());
    Rng rng(seed);
    rng.shuffle(pool);
    GroupSelection random{GroupKind::random, {}, fraction, seed};
    random.members.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));

    return {high, low, random};
}

} // namespace claprobe
