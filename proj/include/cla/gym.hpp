#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cla/grad.hpp"
#include "cla/linan.hpp"
#include "cla/network.hpp"
#include "cla/probe.hpp"
#include "cla/rng.hpp"

namespace claprobe {

// ---------------------------------------------------------------------------
// Toy datasets
// ---------------------------------------------------------------------------

enum class ToyDatasetKind { gaussian_ring, gaussian_grid, synthetic_shapes_8x8 };

inline const char* toy_dataset_kind_name(ToyDatasetKind k) {
    switch (k) {
        case ToyDatasetKind::gaussian_ring: return "gaussian_ring";
        case ToyDatasetKind::gaussian_grid: return "gaussian_grid";
        case ToyDatasetKind::synthetic_shapes_8x8: return "synthetic_shapes_8x8";
    }
    return "gaussian_ring";
}

struct ToyDatasetSpec {
    ToyDatasetKind kind = ToyDatasetKind::gaussian_ring;
    std::size_t modes = 8;
    double noise_sigma = 0.05;
    std::size_t count = 1024;
    std::uint64_t seed = 1;
};

struct ToyDataset {
    std::size_t dim = 0;
    std::vector<std::vector<double>> samples;
    std::vector<std::vector<double>> mode_centers;
};

namespace detail {

inline std::vector<std::vector<double>> toy_mode_centers(const ToyDatasetSpec& spec) {
    std::vector<std::vector<double>> centers;
    switch (spec.kind) {
        case ToyDatasetKind::gaussian_ring: {
            const double two_pi = 6.283185307179586476925286766559;
            for (std::size_t j = 0; j < spec.modes; ++j) {
                const double th = two_pi * static_cast<double>(j) / static_cast<double>(spec.modes);
                centers.push_back({std::cos(th), std::sin(th)});
            }
            break;
        }
        case ToyDatasetKind::gaussian_grid: {
            std::size_t side = 1;
            while (side * side < spec.modes) ++side;
            for (std::size_t j = 0; j < spec.modes; ++j) {
                const std::size_t gy = j / side, gx = j % side;
                auto coord = [side](std::size_t g) {
                    return side == 1 ? 0.0
                                     : -1.0 + 2.0 * static_cast<double>(g) /
                                                  static_cast<double>(side - 1);
                };
                centers.push_back({coord(gx), coord(gy)});
            }
            break;
        }
        case ToyDatasetKind::synthetic_shapes_8x8: {
            for (std::size_t j = 0; j < spec.modes; ++j) {
                std::vector<double> img(64, 0.0);
                const std::size_t x0 = j % 4, y0 = (j / 4) % 4;
                const std::size_t w = 3 + j % 3, h = 3 + (j + 1) % 3;
                for (std::size_t y = y0; y < std::min<std::size_t>(8, y0 + h); ++y)
                    for (std::size_t x = x0; x < std::min<std::size_t>(8, x0 + w); ++x)
                        img[y * 8 + x] = 1.0;
                centers.push_back(std::move(img));
            }
            break;
        }
    }
    return centers;
}

} // namespace detail

inline ToyDataset make_toy_dataset(const ToyDatasetSpec& spec) {
    if (spec.modes < 1) throw ConfigError("make_toy_dataset: modes must be >= 1");
    if (!(spec.noise_sigma > 0.0)) throw ConfigError("make_toy_dataset: sigma must be > 0");
    ToyDataset ds;
    ds.mode_centers = detail::toy_mode_centers(spec);
    ds.dim = ds.mode_centers.front().size();
    Rng rng(spec.seed);
    ds.samples.reserve(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) {
        const auto& c = ds.mode_centers[static_cast<std::size_t>(rng.uniform_index(spec.modes))];
        std::vector<double> s(ds.dim);
        for (std::size_t d = 0; d < ds.dim; ++d) s[d] = c[d] + spec.noise_sigma * rng.normal();
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Vanilla GAN training
// ---------------------------------------------------------------------------

enum class Optimizer { sgd, adam };

struct TrainConfig {
    std::size_t latent_dim = 2;
    std::vector<std::size_t> gen_hidden = {16, 16};
    std::vector<std::size_t> disc_hidden = {16, 16};
    std::size_t data_dim = 2;
    double gamma = 0.2; // leaky_relu slope for hidden layers
    Optimizer optimizer = Optimizer::sgd;
    double learning_rate = 0.05;
    std::size_t batch_size = 32;
    std::size_t steps = 1000;
    std::size_t snapshot_interval = 100;
    std::uint64_t seed = 1;
};

struct TrainSnapshot {
    std::size_t step = 0;
    NetworkSpec generator;
    NetworkSpec discriminator;
    double d_loss = 0.0;
    double g_loss = 0.0;
};

namespace detail {

inline NetworkSpec build_mlp(std::size_t in_dim, const std::vector<std::size_t>& hidden,
                             std::size_t out_dim, double gamma, NetworkRole role, Rng& rng) {
    NetworkSpec net;
    net.latent_dim = in_dim;
    net.role = role;
    std::size_t prev = in_dim;
    auto add_dense = [&](std::size_t width, ActivationFn act) {
        Tensor w({width, prev});
        const double scale = std::sqrt(2.0 / ((1.0 + gamma * gamma) * static_cast<double>(prev)));
        for (double& v : w.data) v = scale * rng.normal();
        Tensor b({width});
        net.layers.push_back(LayerSpec::dense(std::move(w), std::move(b), act));
        prev = width;
    };
    for (std::size_t hsize : hidden) add_dense(hsize, leaky_relu(gamma));
    add_dense(out_dim, identity());
    return net;
}

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

// log f(y) and log(1 - f(y)) in overflow-safe form.
inline double log_sigmoid(double y) { return -softplus(-y); }
inline double log_one_minus_sigmoid(double y) { return -softplus(y); }

} // namespace detail

struct TermGrads {
    double value = 0.0;
    NetworkGrads gen;
    NetworkGrads disc;
};

// mean_b log f(D(x_b)) and its gradient with respect to discriminator
// parameters (the data term of the minimax value).
inline TermGrads real_term_grads(const NetworkSpec& disc,
                                 const std::vector<std::vector<double>>& xs) {
    TermGrads out;
    out.disc = NetworkGrads::zeros_for(disc);
    const double inv_b = 1.0 / static_cast<double>(xs.size());
    for (const auto& x : xs) {
        Tensor xt = Tensor::vector(x);
        ForwardTrace tr = forward_trace(disc, xt);
        const double y = tr.post.back().data[0];
        out.value += detail::log_sigmoid(y) * inv_b;
        Tensor dy(tr.post.back().shape);
        dy.data[0] = (1.0 - sigmoid(y)) * inv_b; // d/dy log f(y)
        out.disc.accumulate(backward(disc, xt, tr, dy));
    }
    return out;
}

// mean_b log(1 - f(D(G(z_b)))) and its gradients with respect to both
// networks (the generator term of the minimax value).
inline TermGrads fake_term_grads(const NetworkSpec& gen, const NetworkSpec& disc,
                                 const std::vector<Tensor>& zs) {
    TermGrads out;
    out.gen = NetworkGrads::zeros_for(gen);
    out.disc = NetworkGrads::zeros_for(disc);
    const double inv_b = 1.0 / static_cast<double>(zs.size());
    for (const Tensor& z : zs) {
        ForwardTrace gen_tr = forward_trace(gen, z);
        const Tensor& x = gen_tr.post.back();
        ForwardTrace disc_tr = forward_trace(disc, x);
        const double y = disc_tr.post.back().data[0];
        out.value += detail::log_one_minus_sigmoid(y) * inv_b;
        Tensor dy(disc_tr.post.back().shape);
        dy.data[0] = -sigmoid(y) * inv_b; // d/dy log(1 - f(y))
        NetworkGrads dgrads = backward(disc, x, disc_tr, dy);
        out.disc.accumulate(dgrads);
        out.gen.accumulate(backward(gen, z, gen_tr, dgrads.dinput));
    }
    return out;
}

namespace detail {

inline void sgd_apply(NetworkSpec& net, const NetworkGrads& grads, double eta, double direction) {
    for (std::size_t li = 0; li < net.depth(); ++li) {
        for (std::size_t i = 0; i < net.layers[li].weights.numel(); ++i)
            net.layers[li].weights.data[i] += direction * eta * grads.dweights[li].data[i];
        for (std::size_t i = 0; i < net.layers[li].bias.numel(); ++i)
            net.layers[li].bias.data[i] += direction * eta * grads.dbias[li].data[i];
    }
}

struct AdamState {
    std::vector<Tensor> mw, vw, mb, vb;
    std::size_t t = 0;

    static AdamState zeros_for(const NetworkSpec& net) {
        AdamState s;
        for (const LayerSpec& l : net.layers) {
            s.mw.push_back(Tensor::zeros_like(l.weights));
            s.vw.push_back(Tensor::zeros_like(l.weights));
            s.mb.push_back(Tensor::zeros_like(l.bias));
            s.vb.push_back(Tensor::zeros_like(l.bias));
        }
        return s;
    }
};

// direction = -1 descends, +1 ascends.
inline void adam_apply(NetworkSpec& net, AdamState& st, const NetworkGrads& grads, double eta,
                       double direction) {
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++st.t;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
    auto update = [&](std::vector<double>& p, const std::vector<double>& g, Tensor& m, Tensor& v) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = -direction * g[i]; // gradient of the minimized objective
            m.data[i] = b1 * m.data[i] + (1.0 - b1) * gi;
            v.data[i] = b2 * v.data[i] + (1.0 - b2) * gi * gi;
            p[i] -= eta * (m.data[i] / bc1) / (std::sqrt(v.data[i] / bc2) + eps);
        }
    };
    for (std::size_t li = 0; li < net.depth(); ++li) {
        update(net.layers[li].weights.data, grads.dweights[li].data, st.mw[li], st.vw[li]);
        update(net.layers[li].bias.data, grads.dbias[li].data, st.mb[li], st.vb[li]);
    }
}

} // namespace detail

// One plain-SGD generator update on the vanilla loss for a single latent
// code: descends mean log(1 - f(D(G(z)))). The discriminator is untouched.
inline void sgd_generator_step(NetworkSpec& gen, const NetworkSpec& disc, const Tensor& z,
                               double eta) {
    const TermGrads g = fake_term_grads(gen, disc, {z});
    detail::sgd_apply(gen, g.gen, eta, -1.0);
}

using TrainStepCallback = std::function<void(std::size_t step, double d_loss, double g_loss)>;

// Alternating vanilla-GAN training (one discriminator ascent step, one
// generator descent step per iteration). Deterministic for a fixed config.
inline std::vector<TrainSnapshot> train_gan(const TrainConfig& cfg, const ToyDataset& data,
                                            const TrainStepCallback& on_step = {}) {
    // learning_rate == 0 is the degenerate no-op run; negative rates are bugs
    if (cfg.learning_rate < 0.0) throw ConfigError("train_gan: learning rate must be >= 0");
    if (cfg.steps == 0 || cfg.snapshot_interval == 0 || cfg.steps % cfg.snapshot_interval != 0)
        throw ConfigError("train_gan: snapshot interval must divide steps");
    if (data.samples.empty()) throw ConfigError("train_gan: empty dataset");
    if (data.dim != cfg.data_dim)
        throw ConfigError("train_gan: dataset dim " + std::to_string(data.dim) +
                          " != config data_dim " + std::to_string(cfg.data_dim));

    Rng rng(cfg.seed);
    NetworkSpec gen = detail::build_mlp(cfg.latent_dim, cfg.gen_hidden, cfg.data_dim, cfg.gamma,
                                        NetworkRole::generator, rng);
    NetworkSpec disc = detail::build_mlp(cfg.data_dim, cfg.disc_hidden, 1, cfg.gamma,
                                         NetworkRole::discriminator, rng);

    detail::AdamState gen_adam = detail::AdamState::zeros_for(gen);
    detail::AdamState disc_adam = detail::AdamState::zeros_for(disc);

    auto draw_z = [&]() {
        Tensor z({cfg.latent_dim});
        for (double& v : z.data) v = rng.normal();
        return z;
    };

    std::vector<TrainSnapshot> snapshots;
    double d_loss = 0.0, g_loss = 0.0;
    snapshots.push_back({0, gen, disc, d_loss, g_loss});

    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        // Discriminator: ascend mean log f(D(x)) + mean log(1 - f(D(G(z)))).
        std::vector<std::vector<double>> xs(cfg.batch_size);
        for (auto& x : xs)
            x = data.samples[static_cast<std::size_t>(rng.uniform_index(data.samples.size()))];
        std::vector<Tensor> zs(cfg.batch_size);
        for (auto& z : zs) z = draw_z();

        const TermGrads real = real_term_grads(disc, xs);
        const TermGrads fake = fake_term_grads(gen, disc, zs);
        NetworkGrads disc_grads = real.disc;
        disc_grads.accumulate(fake.disc);
        if (cfg.optimizer == Optimizer::sgd)
            detail::sgd_apply(disc, disc_grads, cfg.learning_rate, +1.0);
        else
            detail::adam_apply(disc, disc_adam, disc_grads, cfg.learning_rate, +1.0);
        d_loss = -(real.value + fake.value);

        // Generator: descend mean log(1 - f(D(G(z)))) on a fresh batch.
        std::vector<Tensor> gzs(cfg.batch_size);
        for (auto& z : gzs) z = draw_z();
        const TermGrads gterm = fake_term_grads(gen, disc, gzs);
        if (cfg.optimizer == Optimizer::sgd)
            detail::sgd_apply(gen, gterm.gen, cfg.learning_rate, -1.0);
        else
            detail::adam_apply(gen, gen_adam, gterm.gen, cfg.learning_rate, -1.0);
        g_loss = gterm.value;

        if (!std::isfinite(d_loss) || !std::isfinite(g_loss))
            throw EngineError("train_gan: loss diverged to non-finite at step " +
                              std::to_string(step));
        if (on_step) on_step(step, d_loss, g_loss);
        if (step % cfg.snapshot_interval == 0)
            snapshots.push_back({step, gen, disc, d_loss, g_loss});
    }
    return snapshots;
}

// ---------------------------------------------------------------------------
// CLA learning dynamics
// ---------------------------------------------------------------------------

struct ClaSeries {
    NeuronSite site;
    std::vector<std::size_t> steps;
    std::vector<ClaRecord> records;
};

inline std::vector<ClaSeries> track_cla_dynamics(const std::vector<TrainSnapshot>& snapshots,
                                                 const std::vector<NeuronSite>& sites,
                                                 const Tensor& z_fixed, const ProbeConfig& cfg) {
    std::vector<ClaSeries> series(sites.size());
    for (std::size_t s = 0; s < sites.size(); ++s) series[s].site = sites[s];
    for (const TrainSnapshot& snap : snapshots) {
        for (std::size_t s = 0; s < sites.size(); ++s) {
            series[s].steps.push_back(snap.step);
            series[s].records.push_back(cla(snap.generator, sites[s], z_fixed, cfg));
        }
    }
    return series;
}

// ---------------------------------------------------------------------------
// Planted-artifact fixture
// ---------------------------------------------------------------------------

// Generator with one designated unit realizing a piecewise-linear bump
//   A * relu(1 - |z - center|_1 / radius)
// whose outgoing weights inject a large perturbation into the output. The
// clean reference is the same network with those outgoing weights zeroed, so
// planted and clean outputs agree exactly outside the bump support.
struct PlantedFixture {
    NetworkSpec planted;
    NetworkSpec clean;
    std::size_t bump_layer = 1; // stopping layer for correction
    std::size_t bump_unit = 0;
    std::vector<double> center;
    double radius = 1.0;
    double amplitude = 1.0;

    bool in_bump_region(const Tensor& z) const {
        double l1 = 0.0;
        for (std::size_t d = 0; d < center.size(); ++d) l1 += std::abs(z.data[d] - center[d]);
        return l1 < radius;
    }

    // Closed-form per-axis curvature of the bump neuron probed at the center.
    double center_axis_curvature() const { return -amplitude / (radius * radius); }
};

inline PlantedFixture plant_artifact_generator(const TrainConfig& base, std::vector<double> center,
                                               double radius, std::size_t target_unit,
                                               double amplitude = 50.0) {
    const std::size_t dz = base.latent_dim;
    if (center.size() != dz)
        throw ConfigError("plant_artifact_generator: center size != latent_dim");
    if (!(radius > 0.0)) throw ConfigError("plant_artifact_generator: radius must be > 0");
    const std::size_t normal_feats = base.gen_hidden.empty() ? 8 : base.gen_hidden.front();
    const std::size_t units =
        base.gen_hidden.size() > 1 ? base.gen_hidden[1] : std::max<std::size_t>(8, target_unit + 1);
    if (normal_feats < 1)
        throw ConfigError("plant_artifact_generator: first hidden width must be >= 1");
    if (target_unit >= units)
        throw ConfigError("plant_artifact_generator: target unit " + std::to_string(target_unit) +
                          " >= stopping layer width " + std::to_string(units));

    Rng rng(base.seed);
    const std::size_t arms = 2 * dz;

    // Layer 0: 2*Dz tent arms |z_d - c_d|/radius split into two relus, plus
    // broad random features.
    Tensor w0({arms + normal_feats, dz}), b0({arms + normal_feats});
    for (std::size_t d = 0; d < dz; ++d) {
        w0.data[(2 * d) * dz + d] = 1.0 / radius;
        b0.data[2 * d] = -center[d] / radius;
        w0.data[(2 * d + 1) * dz + d] = -1.0 / radius;
        b0.data[2 * d + 1] = center[d] / radius;
    }
    const double feat_scale = 1.0 / std::sqrt(static_cast<double>(dz));
    for (std::size_t r = arms; r < arms + normal_feats; ++r) {
        for (std::size_t c = 0; c < dz; ++c) w0.data[r * dz + c] = feat_scale * rng.normal();
        b0.data[r] = 0.5 * std::abs(rng.normal()) + 0.1;
    }

    // Layer 1 (stopping layer): the target unit turns the arm sum into the
    // bump; the rest mix the broad features only.
    Tensor w1({units, arms + normal_feats}), b1({units});
    const double mix_scale = 1.0 / std::sqrt(static_cast<double>(normal_feats));
    for (std::size_t u = 0; u < units; ++u) {
        if (u == target_unit) {
            for (std::size_t a = 0; a < arms; ++a) w1.data[u * (arms + normal_feats) + a] = -amplitude;
            b1.data[u] = amplitude;
            continue;
        }
        for (std::size_t f = 0; f < normal_feats; ++f)
            w1.data[u * (arms + normal_feats) + arms + f] = mix_scale * rng.normal();
        b1.data[u] = 0.25 * std::abs(rng.normal()) + 0.05;
    }

    // Output layer: the target unit's column injects the perturbation.
    Tensor w2({base.data_dim, units}), b2({base.data_dim});
    const double out_scale = 1.0 / std::sqrt(static_cast<double>(units));
    std::vector<double> perturb(base.data_dim);
    double pnorm = 0.0;
    for (double& v : perturb) {
        v = rng.normal();
        pnorm += v * v;
    }
    pnorm = std::sqrt(pnorm);
    for (std::size_t r = 0; r < base.data_dim; ++r) {
        for (std::size_t u = 0; u < units; ++u)
            w2.data[r * units + u] = u == target_unit ? perturb[r] / pnorm
                                                      : out_scale * rng.normal();
        b2.data[r] = 0.1 * rng.normal();
    }

    PlantedFixture fx;
    fx.bump_unit = target_unit;
    fx.center = std::move(center);
    fx.radius = radius;
    fx.amplitude = amplitude;
    fx.planted.latent_dim = dz;
    fx.planted.role = NetworkRole::generator;
    fx.planted.layers.push_back(LayerSpec::dense(w0, b0, relu()));
    fx.planted.layers.push_back(LayerSpec::dense(w1, b1, relu()));
    fx.planted.layers.push_back(LayerSpec::dense(w2, b2, identity()));

    fx.clean = fx.planted;
    Tensor& cw2 = fx.clean.layers[2].weights;
    for (std::size_t r = 0; r < base.data_dim; ++r) cw2.data[r * units + target_unit] = 0.0;
    return fx;
}

// Synthetic snapshot series with the bump radius narrowed step by step;
// everything else (seed, widths, amplitude) is held fixed.
inline std::vector<TrainSnapshot> planted_snapshot_series(const TrainConfig& base,
                                                          const std::vector<double>& center,
                                                          const std::vector<double>& radii,
                                                          std::size_t target_unit,
                                                          double amplitude = 50.0) {
    std::vector<TrainSnapshot> out;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        PlantedFixture fx = plant_artifact_generator(base, center, radii[i], target_unit, amplitude);
        TrainSnapshot snap;
        snap.step = i;
        snap.generator = std::move(fx.planted);
        snap.discriminator = NetworkSpec{};
        out.push_back(std::move(snap));
    }
    return out;
}

} // namespace claprobe
