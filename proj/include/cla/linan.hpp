#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "cla/network.hpp"

namespace claprobe {

namespace detail {

// Minimal row-major matrix for composing linearized layers.
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline Mat matmul(const Mat& a, const Mat& b) {
    Mat out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double v = a(i, k);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += v * b(k, j);
        }
    return out;
}

inline std::vector<double> matvec(const Mat& m, const std::vector<double>& v) {
    std::vector<double> out(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += m(i, j) * v[j];
        out[i] = acc;
    }
    return out;
}

// Linear part and bias of one layer as an explicit matrix, obtained for
// conv/upsample by probing with basis vectors; dense weights are read off
// directly.
inline void materialize_layer(const NetworkSpec& net, std::size_t li,
                              const std::vector<std::size_t>& in_shape, Mat& a,
                              std::vector<double>& b) {
    const LayerSpec& l = net.layers[li];
    const std::size_t in_n = Tensor::numel_of(in_shape);
    if (l.kind == LayerKind::dense) {
        a = Mat(l.weights.shape[0], l.weights.shape[1]);
        a.a = l.weights.data;
        b = l.bias.data;
        return;
    }
    Tensor zero(in_shape);
    Tensor base = layer_pre_activation(net, li, zero);
    b = base.data;
    a = Mat(base.numel(), in_n);
    Tensor probe(in_shape);
    for (std::size_t j = 0; j < in_n; ++j) {
        probe.data[j] = 1.0;
        Tensor col = layer_pre_activation(net, li, probe);
        probe.data[j] = 0.0;
        for (std::size_t i = 0; i < col.numel(); ++i) a(i, j) = col.data[i] - b[i];
    }
}

inline std::vector<double> slopes_of(const LayerSpec& l, const Tensor& pre) {
    std::vector<double> m(pre.numel());
    for (std::size_t i = 0; i < pre.numel(); ++i) m[i] = l.activation.slope_at(pre.data[i]);
    return m;
}

inline void require_piecewise_linear(const NetworkSpec& net, std::size_t from,
                                     const char* which) {
    for (std::size_t li = from; li < net.depth(); ++li)
        if (!net.layers[li].activation.piecewise_linear())
            throw UnsupportedActivationError(std::string("linearize: ") + which + " layer " +
                                             std::to_string(li) +
                                             " activation is not piecewise linear");
}

// Composes masked layers `from..depth-1` into (W, off) so that the stack's
// output equals W * input + off at the anchor. Masks are taken from the
// given trace's pre-activations.
inline void compose_tail(const NetworkSpec& net, std::size_t from, const ForwardTrace& trace,
                         std::size_t in_size, const std::vector<std::size_t>& in_shape_start,
                         Mat& w, std::vector<double>& off,
                         std::vector<std::vector<double>>& masks) {
    w = Mat::identity(in_size);
    off.assign(in_size, 0.0);
    std::vector<std::size_t> cur_shape = in_shape_start;
    for (std::size_t li = from; li < net.depth(); ++li) {
        Mat a;
        std::vector<double> b;
        materialize_layer(net, li, cur_shape, a, b);
        const std::vector<double> m = slopes_of(net.layers[li], trace.pre[li]);
        masks.push_back(m);
        for (std::size_t i = 0; i < a.rows; ++i) {
            for (std::size_t j = 0; j < a.cols; ++j) a(i, j) *= m[i];
            b[i] *= m[i];
        }
        // w <- a*w, off <- a*off + b
        w = matmul(a, w);
        std::vector<double> new_off = matvec(a, off);
        for (std::size_t i = 0; i < b.size(); ++i) new_off[i] += b[i];
        off = std::move(new_off);
        cur_shape = layer_out_shape(net, li, cur_shape);
    }
}

} // namespace detail

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-sample linearization of the generator tail (layers after `split_layer`)
// and the whole discriminator, with activation masks frozen at z0.
struct Linearization {
    Tensor z0;
    std::size_t split_layer = 0;
    std::vector<std::vector<double>> gen_masks;
    std::vector<std::vector<double>> disc_masks;
    detail::Mat w_gen;              // h_l -> generator output
    std::vector<double> off_gen;
    std::vector<double> w_disc;     // generator output -> scalar (row vector)
    double off_disc = 0.0;
    std::vector<double> neuron_gain; // u_i = W_D^T W_{G,i}^T per neuron of layer l
    std::vector<double> h_split;     // h_l at z0 (flattened)
    double y_lin = 0.0;              // linearized discriminator output
    double y_exact = 0.0;            // D(G(z0)) from the exact forward

    std::vector<double> generator_output() const {
        std::vector<double> out = detail::matvec(w_gen, h_split);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += off_gen[i];
        return out;
    }
};

inline Linearization linearize(const NetworkSpec& gen, const NetworkSpec& disc,
                               const Tensor& z0, std::size_t split_layer) {
    if (split_layer >= gen.depth())
        throw ConfigError("linearize: split layer " + std::to_string(split_layer) +
                          " out of range");
    detail::require_piecewise_linear(gen, split_layer + 1, "generator");
    detail::require_piecewise_linear(disc, 0, "discriminator");

    ForwardTrace gen_tr = forward_trace(gen, z0);
    const Tensor& x = gen_tr.post.back();
    ForwardTrace disc_tr = forward_trace(disc, x);
    if (disc_tr.post.back().numel() != 1)
        throw ShapeError("linearize: discriminator output must be scalar");

    Linearization lin;
    lin.z0 = z0;
    lin.split_layer = split_layer;
    lin.h_split = gen_tr.post[split_layer].data;

    const std::size_t dl = lin.h_split.size();
    detail::compose_tail(gen, split_layer + 1, gen_tr, dl, gen_tr.post[split_layer].shape,
                         lin.w_gen, lin.off_gen, lin.gen_masks);

    detail::Mat wd;
    std::vector<double> od;
    detail::compose_tail(disc, 0, disc_tr, x.numel(), x.shape, wd, od, lin.disc_masks);
    lin.w_disc.assign(wd.a.begin(), wd.a.end()); // single row
    lin.off_disc = od[0];

    lin.neuron_gain.resize(dl, 0.0);
    for (std::size_t i = 0; i < dl; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < lin.w_gen.rows; ++k)
            acc += lin.w_disc[k] * lin.w_gen(k, i);
        lin.neuron_gain[i] = acc;
    }

    double y = lin.off_disc;
    const std::vector<double> gx = lin.generator_output();
    for (std::size_t k = 0; k < gx.size(); ++k) y += lin.w_disc[k] * gx[k];
    lin.y_lin = y;
    lin.y_exact = disc_tr.post.back().data[0];
    return lin;
}

enum class SignClass { positive, negative, zero };

// Update cases keyed by (sign of activation, sign of update weight delta).
// delta = 0 counts as the positive direction so the four cases partition the
// nonzero-activation neurons.
enum class UpdateCase {
    pos_act_pos_delta = 0,
    pos_act_neg_delta = 1,
    neg_act_pos_delta = 2,
    neg_act_neg_delta = 3,
    degenerate = 4
};

inline const char* update_case_name(UpdateCase c) {
    switch (c) {
        case UpdateCase::pos_act_pos_delta: return "h+d+";
        case UpdateCase::pos_act_neg_delta: return "h+d-";
        case UpdateCase::neg_act_pos_delta: return "h-d+";
        case UpdateCase::neg_act_neg_delta: return "h-d-";
        case UpdateCase::degenerate: return "degenerate";
    }
    return "degenerate";
}

inline UpdateCase classify_case(double activation, double delta_sign_source) {
    if (activation == 0.0) return UpdateCase::degenerate;
    if (activation > 0.0)
        return delta_sign_source >= 0.0 ? UpdateCase::pos_act_pos_delta
                                        : UpdateCase::pos_act_neg_delta;
    return delta_sign_source >= 0.0 ? UpdateCase::neg_act_pos_delta
                                    : UpdateCase::neg_act_neg_delta;
}

struct ContributionRecord {
    std::size_t neuron = 0;
    double contribution = 0.0; // u_i * h_i
    SignClass sign_class = SignClass::zero;
    UpdateCase update_case = UpdateCase::degenerate;
};

// Per-neuron additive terms of the linearized discriminator output:
// sum_i contribution_i + (W_D off_G + off_D) == y_lin.
inline std::vector<ContributionRecord> contributions(const Linearization& lin,
                                                     const std::vector<double>& h_split) {
    if (h_split.size() != lin.neuron_gain.size())
        throw ShapeError("contributions: h has " + std::to_string(h_split.size()) +
                         " elements, expected " + std::to_string(lin.neuron_gain.size()));
    std::vector<ContributionRecord> out(h_split.size());
    for (std::size_t i = 0; i < h_split.size(); ++i) {
        ContributionRecord& r = out[i];
        r.neuron = i;
        r.contribution = lin.neuron_gain[i] * h_split[i];
        r.sign_class = r.contribution > 0.0
                           ? SignClass::positive
                           : (r.contribution < 0.0 ? SignClass::negative : SignClass::zero);
        r.update_case = classify_case(h_split[i], lin.neuron_gain[i]);
    }
    return out;
}

// Constant offset terms that complete the decomposition to y_lin.
inline double contribution_offset(const Linearization& lin) {
    double acc = lin.off_disc;
    for (std::size_t k = 0; k < lin.off_gen.size(); ++k)
        acc += lin.w_disc[k] * lin.off_gen[k];
    return acc;
}

struct UpdateSimResult {
    std::size_t layer = 0;
    std::size_t neuron = 0;
    double eta = 0.0;
    double delta = 0.0;            // update weight on the direction h_{l-1}
    double neuron_gain = 0.0;      // u_i
    double activation_slope = 0.0; // local sigma slope at the neuron
    std::vector<double> w_plus;    // updated incoming weight vector
    double pre_before = 0.0, pre_after = 0.0;
    double act_before = 0.0, act_after = 0.0;
    double dist_before = 0.0, dist_after = 0.0; // |w.h + b| / ||w||
    double h_prev_norm_sq = 0.0;   // ||h_{l-1}||^2
};

namespace detail {

inline const Tensor& layer_input(const ForwardTrace& tr, const Tensor& z0, std::size_t layer) {
    return layer == 0 ? z0 : tr.post[layer - 1];
}

inline UpdateSimResult simulate_update_with(const NetworkSpec& gen, const Linearization& lin,
                                            const ForwardTrace& gen_tr, const Tensor& z0,
                                            std::size_t layer, std::size_t neuron, double eta) {
    const LayerSpec& l = gen.layers[layer];
    if (l.kind != LayerKind::dense)
        throw ConfigError("simulate_update: layer " + std::to_string(layer) +
                          " must be dense");
    const std::size_t out_n = l.weights.shape[0], in_n = l.weights.shape[1];
    if (neuron >= out_n)
        throw InvalidSiteError("simulate_update: neuron " + std::to_string(neuron) +
                               " out of range");
    if (!(eta > 0.0)) throw ConfigError("simulate_update: eta must be positive");

    const double one_minus_f = 1.0 - sigmoid(lin.y_exact);
    if (one_minus_f == 0.0)
        throw SingularityError("simulate_update: f(D(G(z0))) == 1, c0 is singular");
    const double c0 = 1.0 / one_minus_f;
    const double fy = sigmoid(lin.y_lin);
    const double fprime = fy * (1.0 - fy);

    const Tensor& h_prev = layer_input(gen_tr, z0, layer);
    const double m = l.activation.slope_at(gen_tr.pre[layer].data[neuron]);

    UpdateSimResult res;
    res.layer = layer;
    res.neuron = neuron;
    res.eta = eta;
    res.neuron_gain = lin.neuron_gain[neuron];
    res.activation_slope = m;
    res.delta = eta * c0 * fprime * res.neuron_gain * m;

    const double* w = l.weights.data.data() + neuron * in_n;
    const double b = l.bias.data[neuron];
    res.w_plus.resize(in_n);
    double wh = 0.0, norm_w_sq = 0.0, norm_h_sq = 0.0, wph = 0.0, norm_wp_sq = 0.0;
    for (std::size_t j = 0; j < in_n; ++j) {
        const double hj = h_prev.data[j];
        res.w_plus[j] = w[j] + res.delta * hj;
        wh += w[j] * hj;
        wph += res.w_plus[j] * hj;
        norm_w_sq += w[j] * w[j];
        norm_h_sq += hj * hj;
        norm_wp_sq += res.w_plus[j] * res.w_plus[j];
    }
    res.h_prev_norm_sq = norm_h_sq;
    res.pre_before = wh + b;
    res.pre_after = wph + b;
    res.act_before = l.activation(res.pre_before);
    res.act_after = l.activation(res.pre_after);
    res.dist_before = norm_w_sq > 0.0 ? std::abs(res.pre_before) / std::sqrt(norm_w_sq) : 0.0;
    res.dist_after = norm_wp_sq > 0.0 ? std::abs(res.pre_after) / std::sqrt(norm_wp_sq) : 0.0;
    return res;
}

} // namespace detail

// One linearized SGD step on the incoming weights of a single neuron:
// w+ = w + delta * h_{l-1} with delta = eta * c0 * f'(y) * u_i * sigma'.
inline UpdateSimResult simulate_update(const NetworkSpec& gen, const NetworkSpec& disc,
                                       const Tensor& z0, std::size_t layer, std::size_t neuron,
                                       double eta) {
    const Linearization lin = linearize(gen, disc, z0, layer);
    const ForwardTrace gen_tr = forward_trace(gen, z0);
    return detail::simulate_update_with(gen, lin, gen_tr, z0, layer, neuron, eta);
}

// simulate_update for every neuron of the layer, sharing one linearization.
inline std::vector<UpdateSimResult> simulate_layer_updates(const NetworkSpec& gen,
                                                           const NetworkSpec& disc,
                                                           const Tensor& z0, std::size_t layer,
                                                           double eta) {
    const Linearization lin = linearize(gen, disc, z0, layer);
    const ForwardTrace gen_tr = forward_trace(gen, z0);
    const std::size_t width = gen_tr.post[layer].numel();
    std::vector<UpdateSimResult> out;
    out.reserve(width);
    for (std::size_t i = 0; i < width; ++i)
        out.push_back(detail::simulate_update_with(gen, lin, gen_tr, z0, layer, i, eta));
    return out;
}

// Largest eta for which the negative-contribution activation-shrinkage
// argument is guaranteed: the pre-activation may move at most |pre| toward
// (and past) zero. Returns +inf when the neuron's delta is zero.
inline double shrinkage_eta_threshold(const UpdateSimResult& r) {
    const double rate = std::abs(r.delta / r.eta) * r.h_prev_norm_sq;
    if (rate == 0.0) return std::numeric_limits<double>::infinity();
    return std::abs(r.pre_before) / rate;
}

struct CaseHistogram {
    std::size_t counts[4] = {0, 0, 0, 0};
    double mean_distance_delta[4] = {0.0, 0.0, 0.0, 0.0};
    double mean_activation_delta[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t active_neurons = 0; // neurons with nonzero activation
    std::size_t zero_neurons = 0;
    double eta = 0.0;

    std::size_t total_counted() const {
        return counts[0] + counts[1] + counts[2] + counts[3];
    }
};

// Classifies every neuron of the split layer by (sign of activation, sign of
// delta) and reports per-case mean distance/activation change at the given
// reference eta.
inline CaseHistogram classify_update_cases(const NetworkSpec& gen, const NetworkSpec& disc,
                                           const Tensor& z0, std::size_t layer, double eta) {
    CaseHistogram hist;
    hist.eta = eta;
    for (const UpdateSimResult& r : simulate_layer_updates(gen, disc, z0, layer, eta)) {
        const UpdateCase c = classify_case(r.act_before, r.delta);
        if (c == UpdateCase::degenerate) {
            ++hist.zero_neurons;
            continue;
        }
        ++hist.active_neurons;
        const auto idx = static_cast<std::size_t>(c);
        ++hist.counts[idx];
        hist.mean_distance_delta[idx] += r.dist_after - r.dist_before;
        hist.mean_activation_delta[idx] += std::abs(r.act_after) - std::abs(r.act_before);
    }
    for (std::size_t c = 0; c < 4; ++c) {
        if (hist.counts[c] == 0) continue;
        hist.mean_distance_delta[c] /= static_cast<double>(hist.counts[c]);
        hist.mean_activation_delta[c] /= static_cast<double>(hist.counts[c]);
    }
    return hist;
}

} // namespace claprobe
