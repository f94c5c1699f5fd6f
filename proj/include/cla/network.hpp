#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cla/errors.hpp"
#include "cla/tensor.hpp"

namespace claprobe {

enum class Act { relu, leaky_relu, tanh, identity };

struct ActivationFn {
    Act kind = Act::identity;
    double gamma = 0.0; // negative-side slope, leaky_relu only

    double operator()(double x) const {
        switch (kind) {
            case Act::relu: return x > 0.0 ? x : 0.0;
            case Act::leaky_relu: return x >= 0.0 ? x : gamma * x;
            case Act::tanh: return std::tanh(x);
            case Act::identity: return x;
        }
        return x;
    }

    // Local slope at the given pre-activation. Convention: slope 1 at
    // pre == 0 for relu/leaky_relu, matching the linearized-parameter mask.
    double slope_at(double pre) const {
        switch (kind) {
            case Act::relu: return pre >= 0.0 ? 1.0 : 0.0;
            case Act::leaky_relu: return pre >= 0.0 ? 1.0 : gamma;
            case Act::tanh: {
                const double t = std::tanh(pre);
                return 1.0 - t * t;
            }
            case Act::identity: return 1.0;
        }
        return 1.0;
    }

    bool piecewise_linear() const { return kind != Act::tanh; }
    bool probeable() const { return kind == Act::relu || kind == Act::leaky_relu; }
};

inline ActivationFn relu() { return {Act::relu, 0.0}; }
inline ActivationFn leaky_relu(double gamma) { return {Act::leaky_relu, gamma}; }
inline ActivationFn tanh_act() { return {Act::tanh, 0.0}; }
inline ActivationFn identity() { return {Act::identity, 0.0}; }

enum class LayerKind { dense, conv2d, upsample_nearest };

// One layer of a piecewise-linear feedforward stack.
//   dense            weights [out, in], bias [out]; input flattened row-major.
//   conv2d           weights [out_c, in_c, kh, kw], bias [out_c]; input [C,H,W].
//   upsample_nearest no parameters; input [C,H,W] -> [C, f*H, f*W].
// `reshape`, when set on a dense layer, declares the output viewed with that
// shape (product must equal the weight row count).
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    Tensor weights;
    Tensor bias;
    ActivationFn activation;
    std::size_t stride = 1;   // conv2d
    std::size_t padding = 0;  // conv2d
    std::size_t factor = 2;   // upsample_nearest
    std::vector<std::size_t> reshape; // optional dense output view

    static LayerSpec dense(Tensor w, Tensor b, ActivationFn act,
                           std::vector<std::size_t> out_view = {}) {
        LayerSpec l;
        l.kind = LayerKind::dense;
        l.weights = std::move(w);
        l.bias = std::move(b);
        l.activation = act;
        l.reshape = std::move(out_view);
        return l;
    }
    static LayerSpec conv(Tensor w, Tensor b, ActivationFn act,
                          std::size_t stride = 1, std::size_t padding = 0) {
        LayerSpec l;
        l.kind = LayerKind::conv2d;
        l.weights = std::move(w);
        l.bias = std::move(b);
        l.activation = act;
        l.stride = stride;
        l.padding = padding;
        return l;
    }
    static LayerSpec upsample(std::size_t factor, ActivationFn act = identity()) {
        LayerSpec l;
        l.kind = LayerKind::upsample_nearest;
        l.factor = factor;
        l.activation = act;
        return l;
    }
};

enum class NetworkRole { generator, discriminator };

struct NetworkSpec {
    std::vector<LayerSpec> layers;
    std::size_t latent_dim = 0; // input size (flattened)
    NetworkRole role = NetworkRole::generator;

    std::size_t depth() const { return layers.size(); }
};

// Address of one post-activation scalar: layer is a 0-based index into
// NetworkSpec::layers; unit is the channel (or the element for dense layers);
// row/col address the spatial position inside a rank-3 featuremap.
struct NeuronSite {
    std::size_t layer = 0;
    std::size_t unit = 0;
    std::size_t row = 0;
    std::size_t col = 0;

    bool operator==(const NeuronSite&) const = default;
};

namespace detail {

inline void check_finite(const Tensor& t, std::size_t layer_index, const char* what) {
    for (double v : t.data)
        if (!std::isfinite(v))
            throw EngineError("layer " + std::to_string(layer_index) +
                              ": non-finite value in " + std::string(what));
}

inline std::vector<std::size_t> conv_out_shape(const LayerSpec& l,
                                               const std::vector<std::size_t>& in,
                                               std::size_t layer_index) {
    if (in.size() != 3)
        throw ShapeError("layer " + std::to_string(layer_index) +
                         ": conv2d expects rank-3 input, got " + shape_str(in));
    if (l.weights.shape.size() != 4)
        throw ShapeError("layer " + std::to_string(layer_index) +
                         ": conv2d weights must be rank 4, got " + shape_str(l.weights.shape));
    const std::size_t out_c = l.weights.shape[0], in_c = l.weights.shape[1];
    const std::size_t kh = l.weights.shape[2], kw = l.weights.shape[3];
    if (in_c != in[0])
        throw ShapeError("layer " + std::to_string(layer_index) + ": conv2d expects " +
                         std::to_string(in_c) + " input channels, got " + std::to_string(in[0]));
    const std::size_t h = in[1] + 2 * l.padding, w = in[2] + 2 * l.padding;
    if (kh > h || kw > w)
        throw ShapeError("layer " + std::to_string(layer_index) + ": kernel exceeds padded input");
    return {out_c, (h - kh) / l.stride + 1, (w - kw) / l.stride + 1};
}

} // namespace detail

// Output shape of layer `li` applied to input of shape `in`.
inline std::vector<std::size_t> layer_out_shape(const NetworkSpec& net, std::size_t li,
                                                const std::vector<std::size_t>& in) {
    const LayerSpec& l = net.layers[li];
    switch (l.kind) {
        case LayerKind::dense: {
            if (l.weights.shape.size() != 2)
                throw ShapeError("layer " + std::to_string(li) + ": dense weights must be rank 2");
            const std::size_t rows = l.weights.shape[0], cols = l.weights.shape[1];
            if (cols != Tensor::numel_of(in))
                throw ShapeError("layer " + std::to_string(li) + ": dense expects input of " +
                                 std::to_string(cols) + " elements, got " + shape_str(in));
            if (l.bias.numel() != rows)
                throw ShapeError("layer " + std::to_string(li) + ": bias size " +
                                 std::to_string(l.bias.numel()) + " != rows " + std::to_string(rows));
            if (!l.reshape.empty()) {
                if (Tensor::numel_of(l.reshape) != rows)
                    throw ShapeError("layer " + std::to_string(li) +
                                     ": reshape product != dense rows");
                return l.reshape;
            }
            return {rows};
        }
        case LayerKind::conv2d: {
            auto s = detail::conv_out_shape(l, in, li);
            if (l.bias.numel() != s[0])
                throw ShapeError("layer " + std::to_string(li) + ": conv bias size " +
                                 std::to_string(l.bias.numel()) + " != channels " +
                                 std::to_string(s[0]));
            return s;
        }
        case LayerKind::upsample_nearest: {
            if (in.size() != 3)
                throw ShapeError("layer " + std::to_string(li) +
                                 ": upsample expects rank-3 input, got " + shape_str(in));
            if (l.factor < 1)
                throw ShapeError("layer " + std::to_string(li) + ": upsample factor must be >= 1");
            return {in[0], in[1] * l.factor, in[2] * l.factor};
        }
    }
    throw ShapeError("layer " + std::to_string(li) + ": unknown kind");
}

// Pre-activation of one layer. Pure linear/affine part; activation applied
// separately so linearization and backprop can reuse it.
inline Tensor layer_pre_activation(const NetworkSpec& net, std::size_t li, const Tensor& in) {
    const LayerSpec& l = net.layers[li];
    const auto out_shape = layer_out_shape(net, li, in.shape);
    Tensor out(out_shape);
    switch (l.kind) {
        case LayerKind::dense: {
            const std::size_t rows = l.weights.shape[0], cols = l.weights.shape[1];
            for (std::size_t r = 0; r < rows; ++r) {
                double acc = l.bias[r];
                const double* wrow = l.weights.data.data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) acc += wrow[c] * in.data[c];
                out.data[r] = acc;
            }
            break;
        }
        case LayerKind::conv2d: {
            const std::size_t out_c = out_shape[0], oh = out_shape[1], ow = out_shape[2];
            const std::size_t in_c = in.shape[0], ih = in.shape[1], iw = in.shape[2];
            const std::size_t kh = l.weights.shape[2], kw = l.weights.shape[3];
            const long pad = static_cast<long>(l.padding);
            for (std::size_t oc = 0; oc < out_c; ++oc) {
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        double acc = l.bias[oc];
                        for (std::size_t ic = 0; ic < in_c; ++ic) {
                            for (std::size_t ky = 0; ky < kh; ++ky) {
                                const long iy = static_cast<long>(oy * l.stride + ky) - pad;
                                if (iy < 0 || iy >= static_cast<long>(ih)) continue;
                                for (std::size_t kx = 0; kx < kw; ++kx) {
                                    const long ix = static_cast<long>(ox * l.stride + kx) - pad;
                                    if (ix < 0 || ix >= static_cast<long>(iw)) continue;
                                    acc += l.weights.data[((oc * in_c + ic) * kh + ky) * kw + kx] *
                                           in.at3(ic, static_cast<std::size_t>(iy),
                                                  static_cast<std::size_t>(ix));
                                }
                            }
                        }
                        out.at3(oc, oy, ox) = acc;
                    }
                }
            }
            break;
        }
        case LayerKind::upsample_nearest: {
            const std::size_t c = in.shape[0], ih = in.shape[1], iw = in.shape[2];
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t y = 0; y < ih * l.factor; ++y)
                    for (std::size_t x = 0; x < iw * l.factor; ++x)
                        out.at3(ch, y, x) = in.at3(ch, y / l.factor, x / l.factor);
            break;
        }
    }
    return out;
}

inline Tensor apply_activation(const ActivationFn& act, const Tensor& pre) {
    Tensor out = pre;
    for (double& v : out.data) v = act(v);
    return out;
}

struct ForwardTrace {
    std::vector<Tensor> pre;  // pre-activation per layer
    std::vector<Tensor> post; // post-activation per layer

    const Tensor& output() const { return post.back(); }
};

inline void check_network_input(const NetworkSpec& net, const Tensor& z) {
    if (net.layers.empty()) throw ShapeError("network has no layers");
    if (z.numel() != net.latent_dim)
        throw ShapeError("network input has " + std::to_string(z.numel()) +
                         " elements, expected " + std::to_string(net.latent_dim));
}

// Full forward pass keeping pre- and post-activations of every layer.
inline ForwardTrace forward_trace(const NetworkSpec& net, const Tensor& z,
                                  std::size_t up_to_layer = static_cast<std::size_t>(-1)) {
    check_network_input(net, z);
    const std::size_t last = std::min(up_to_layer, net.depth() - 1);
    ForwardTrace tr;
    tr.pre.reserve(last + 1);
    tr.post.reserve(last + 1);
    const Tensor* cur = &z;
    for (std::size_t li = 0; li <= last; ++li) {
        Tensor pre = layer_pre_activation(net, li, *cur);
        detail::check_finite(pre, li, "pre-activation");
        tr.post.push_back(apply_activation(net.layers[li].activation, pre));
        tr.pre.push_back(std::move(pre));
        cur = &tr.post.back();
    }
    return tr;
}

// Post-activation tensors h_1..h_L; the last entry is the network output.
inline std::vector<Tensor> forward(const NetworkSpec& net, const Tensor& z) {
    return forward_trace(net, z).post;
}

inline Tensor forward_output(const NetworkSpec& net, const Tensor& z) {
    return forward_trace(net, z).post.back();
}

// Resume a forward pass after `layers_done` layers have been applied.
// layers_done == 0 is a full pass from the latent code; layers_done == depth
// returns h unchanged.
inline Tensor forward_from(const NetworkSpec& net, std::size_t layers_done, const Tensor& h) {
    if (layers_done > net.depth())
        throw ShapeError("forward_from: layers_done " + std::to_string(layers_done) +
                         " exceeds depth " + std::to_string(net.depth()));
    Tensor cur = h;
    for (std::size_t li = layers_done; li < net.depth(); ++li) {
        Tensor pre = layer_pre_activation(net, li, cur);
        detail::check_finite(pre, li, "pre-activation");
        cur = apply_activation(net.layers[li].activation, pre);
    }
    return cur;
}

// Flat offset of a site inside its layer's post-activation tensor.
inline std::size_t site_flat_index(const NeuronSite& site,
                                   const std::vector<std::size_t>& act_shape) {
    if (act_shape.size() == 3) {
        if (site.unit >= act_shape[0] || site.row >= act_shape[1] || site.col >= act_shape[2])
            throw InvalidSiteError("site (" + std::to_string(site.unit) + "," +
                                   std::to_string(site.row) + "," + std::to_string(site.col) +
                                   ") outside layer " + std::to_string(site.layer) +
                                   " shape " + shape_str(act_shape));
        return (site.unit * act_shape[1] + site.row) * act_shape[2] + site.col;
    }
    if (site.row != 0 || site.col != 0)
        throw InvalidSiteError("site on dense layer " + std::to_string(site.layer) +
                               " must have row == col == 0");
    if (site.unit >= Tensor::numel_of(act_shape))
        throw InvalidSiteError("site unit " + std::to_string(site.unit) + " outside layer " +
                               std::to_string(site.layer) + " shape " + shape_str(act_shape));
    return site.unit;
}

// Shapes of every layer's post-activation for an input of shape [latent_dim].
inline std::vector<std::vector<std::size_t>> activation_shapes(const NetworkSpec& net) {
    std::vector<std::vector<std::size_t>> shapes;
    std::vector<std::size_t> cur{net.latent_dim};
    for (std::size_t li = 0; li < net.depth(); ++li) {
        cur = layer_out_shape(net, li, cur);
        shapes.push_back(cur);
    }
    return shapes;
}

// Post-activation scalar of one addressed neuron.
inline double neuron_value(const NetworkSpec& net, const Tensor& z, const NeuronSite& site) {
    if (site.layer >= net.depth())
        throw InvalidSiteError("site layer " + std::to_string(site.layer) +
                               " out of range (depth " + std::to_string(net.depth()) + ")");
    ForwardTrace tr = forward_trace(net, z, site.layer);
    const Tensor& h = tr.post.back();
    return h.data[site_flat_index(site, h.shape)];
}

// (pre-activation, post-activation) of one neuron from a single pass.
inline std::pair<double, double> neuron_pre_post(const NetworkSpec& net, const Tensor& z,
                                                 const NeuronSite& site) {
    if (site.layer >= net.depth())
        throw InvalidSiteError("site layer " + std::to_string(site.layer) +
                               " out of range (depth " + std::to_string(net.depth()) + ")");
    ForwardTrace tr = forward_trace(net, z, site.layer);
    const std::size_t flat = site_flat_index(site, tr.post.back().shape);
    return {tr.pre.back().data[flat], tr.post.back().data[flat]};
}

// Validates that consecutive layer shapes compose and, for discriminators,
// that the final output is a single scalar.
inline void validate_network(const NetworkSpec& net) {
    const auto shapes = activation_shapes(net);
    if (net.role == NetworkRole::discriminator && Tensor::numel_of(shapes.back()) != 1)
        throw ShapeError("discriminator output must be a single scalar, got " +
                         shape_str(shapes.back()));
}

} // namespace claprobe
