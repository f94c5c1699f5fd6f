#pragma once

#include <vector>

#include "cla/network.hpp"

namespace claprobe {

struct NetworkGrads {
    std::vector<Tensor> dweights;
    std::vector<Tensor> dbias;
    Tensor dinput;

    static NetworkGrads zeros_for(const NetworkSpec& net) {
        NetworkGrads g;
        g.dweights.reserve(net.depth());
        g.dbias.reserve(net.depth());
        for (const LayerSpec& l : net.layers) {
            g.dweights.push_back(Tensor::zeros_like(l.weights));
            g.dbias.push_back(Tensor::zeros_like(l.bias));
        }
        return g;
    }

    void accumulate(const NetworkGrads& other) {
        for (std::size_t li = 0; li < dweights.size(); ++li) {
            for (std::size_t i = 0; i < dweights[li].numel(); ++i)
                dweights[li].data[i] += other.dweights[li].data[i];
            for (std::size_t i = 0; i < dbias[li].numel(); ++i)
                dbias[li].data[i] += other.dbias[li].data[i];
        }
    }

    void scale(double s) {
        for (auto& t : dweights)
            for (double& v : t.data) v *= s;
        for (auto& t : dbias)
            for (double& v : t.data) v *= s;
    }
};

// Reverse pass of one trace. `dout` is the loss gradient with respect to the
// network output; the result holds parameter gradients and the gradient with
// respect to the input.
inline NetworkGrads backward(const NetworkSpec& net, const Tensor& z, const ForwardTrace& trace,
                             const Tensor& dout) {
    NetworkGrads grads = NetworkGrads::zeros_for(net);
    Tensor g_post = dout;
    for (std::size_t li = net.depth(); li-- > 0;) {
        const LayerSpec& l = net.layers[li];
        const Tensor& pre = trace.pre[li];

        Tensor g_pre = g_post;
        for (std::size_t i = 0; i < g_pre.numel(); ++i)
            g_pre.data[i] *= l.activation.slope_at(pre.data[i]);

        const Tensor& input = li == 0 ? z : trace.post[li - 1];
        Tensor g_in(input.shape);

        switch (l.kind) {
            case LayerKind::dense: {
                const std::size_t rows = l.weights.shape[0], cols = l.weights.shape[1];
                for (std::size_t r = 0; r < rows; ++r) {
                    const double gr = g_pre.data[r];
                    grads.dbias[li].data[r] += gr;
                    double* dwrow = grads.dweights[li].data.data() + r * cols;
                    const double* wrow = l.weights.data.data() + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) {
                        dwrow[c] += gr * input.data[c];
                        g_in.data[c] += gr * wrow[c];
                    }
                }
                break;
            }
            case LayerKind::conv2d: {
                const std::size_t out_c = g_pre.shape[0], oh = g_pre.shape[1],
                                  ow = g_pre.shape[2];
                const std::size_t in_c = input.shape[0], ih = input.shape[1],
                                  iw = input.shape[2];
                const std::size_t kh = l.weights.shape[2], kw = l.weights.shape[3];
                const long pad = static_cast<long>(l.padding);
                for (std::size_t oc = 0; oc < out_c; ++oc) {
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const double gr = g_pre.at3(oc, oy, ox);
                            if (gr == 0.0) continue;
                            grads.dbias[li].data[oc] += gr;
                            for (std::size_t ic = 0; ic < in_c; ++ic) {
                                for (std::size_t ky = 0; ky < kh; ++ky) {
                                    const long iy = static_cast<long>(oy * l.stride + ky) - pad;
                                    if (iy < 0 || iy >= static_cast<long>(ih)) continue;
                                    for (std::size_t kx = 0; kx < kw; ++kx) {
                                        const long ix =
                                            static_cast<long>(ox * l.stride + kx) - pad;
                                        if (ix < 0 || ix >= static_cast<long>(iw)) continue;
                                        const std::size_t widx =
                                            ((oc * in_c + ic) * kh + ky) * kw + kx;
                                        grads.dweights[li].data[widx] +=
                                            gr * input.at3(ic, static_cast<std::size_t>(iy),
                                                           static_cast<std::size_t>(ix));
                                        g_in.at3(ic, static_cast<std::size_t>(iy),
                                                 static_cast<std::size_t>(ix)) +=
                                            gr * l.weights.data[widx];
                                    }
                                }
                            }
                        }
                    }
                }
                break;
            }
            case LayerKind::upsample_nearest: {
                const std::size_t c = input.shape[0], ihh = input.shape[1], iww = input.shape[2];
                for (std::size_t ch = 0; ch < c; ++ch)
                    for (std::size_t y = 0; y < ihh * l.factor; ++y)
                        for (std::size_t x = 0; x < iww * l.factor; ++x)
                            g_in.at3(ch, y / l.factor, x / l.factor) += g_pre.at3(ch, y, x);
                break;
            }
        }
        g_post = std::move(g_in);
    }
    grads.dinput = std::move(g_post);
    return grads;
}

} // namespace claprobe
