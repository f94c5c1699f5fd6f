#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cla/network.hpp"

namespace claprobe {

// Model container: 8-byte magic "CLAPROBE", u32 LE version (1), u32 LE
// manifest length, UTF-8 JSON manifest, then raw tensor payloads as
// little-endian 64-bit floats in row-major order, in manifest order.
inline constexpr char kModelMagic[8] = {'C', 'L', 'A', 'P', 'R', 'O', 'B', 'E'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

inline void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32_le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f64_le(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

inline double get_f64_le(const std::uint8_t* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline const char* act_name(Act a) {
    switch (a) {
        case Act::relu: return "relu";
        case Act::leaky_relu: return "leaky_relu";
        case Act::tanh: return "tanh";
        case Act::identity: return "identity";
    }
    return "identity";
}

inline Act act_from_name(const std::string& s) {
    if (s == "relu") return Act::relu;
    if (s == "leaky_relu") return Act::leaky_relu;
    if (s == "tanh") return Act::tanh;
    if (s == "identity") return Act::identity;
    throw ModelIoError(ModelIoError::Kind::bad_manifest, "unknown activation '" + s + "'");
}

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::upsample_nearest: return "upsample_nearest";
    }
    return "dense";
}

inline LayerKind layer_kind_from_name(const std::string& s) {
    if (s == "dense") return LayerKind::dense;
    if (s == "conv2d") return LayerKind::conv2d;
    if (s == "upsample_nearest") return LayerKind::upsample_nearest;
    throw ModelIoError(ModelIoError::Kind::bad_manifest, "unknown layer kind '" + s + "'");
}

inline bool layer_has_params(LayerKind k) { return k != LayerKind::upsample_nearest; }

} // namespace detail

inline std::vector<std::uint8_t> save_model(const NetworkSpec& net) {
    using nlohmann::json;
    json manifest;
    manifest["role"] = net.role == NetworkRole::generator ? "generator" : "discriminator";
    manifest["latent_dim"] = net.latent_dim;
    json layers = json::array();
    std::size_t offset = 0;
    for (const LayerSpec& l : net.layers) {
        json jl;
        jl["kind"] = detail::layer_kind_name(l.kind);
        jl["activation"] = detail::act_name(l.activation.kind);
        if (l.activation.kind == Act::leaky_relu) jl["gamma"] = l.activation.gamma;
        if (l.kind == LayerKind::conv2d) {
            jl["stride"] = l.stride;
            jl["padding"] = l.padding;
        }
        if (l.kind == LayerKind::upsample_nearest) jl["factor"] = l.factor;
        if (!l.reshape.empty()) jl["reshape"] = l.reshape;
        if (detail::layer_has_params(l.kind)) {
            jl["weights"] = {{"shape", l.weights.shape}, {"offset", offset}};
            offset += l.weights.numel() * 8;
            jl["bias"] = {{"shape", l.bias.shape}, {"offset", offset}};
            offset += l.bias.numel() * 8;
        }
        layers.push_back(jl);
    }
    manifest["layers"] = layers;

    const std::string mstr = manifest.dump();
    std::vector<std::uint8_t> out;
    out.reserve(16 + mstr.size() + offset);
    for (char c : kModelMagic) out.push_back(static_cast<std::uint8_t>(c));
    detail::put_u32_le(out, kModelVersion);
    detail::put_u32_le(out, static_cast<std::uint32_t>(mstr.size()));
    out.insert(out.end(), mstr.begin(), mstr.end());
    for (const LayerSpec& l : net.layers) {
        if (!detail::layer_has_params(l.kind)) continue;
        for (double v : l.weights.data) detail::put_f64_le(out, v);
        for (double v : l.bias.data) detail::put_f64_le(out, v);
    }
    return out;
}

inline NetworkSpec load_model(const std::vector<std::uint8_t>& bytes) {
    using nlohmann::json;
    if (bytes.size() < 16)
        throw ModelIoError(ModelIoError::Kind::truncated, "container shorter than header");
    if (std::memcmp(bytes.data(), kModelMagic, 8) != 0)
        throw ModelIoError(ModelIoError::Kind::bad_magic, "bad magic bytes");
    const std::uint32_t version = detail::get_u32_le(bytes.data() + 8);
    if (version != kModelVersion)
        throw ModelIoError(ModelIoError::Kind::bad_version,
                           "unsupported container version " + std::to_string(version));
    const std::uint32_t mlen = detail::get_u32_le(bytes.data() + 12);
    if (bytes.size() < 16 + static_cast<std::size_t>(mlen))
        throw ModelIoError(ModelIoError::Kind::truncated, "manifest truncated");

    json manifest;
    try {
        manifest = json::parse(bytes.begin() + 16, bytes.begin() + 16 + mlen);
    } catch (const json::exception& e) {
        throw ModelIoError(ModelIoError::Kind::bad_manifest,
                           std::string("manifest parse failure: ") + e.what());
    }

    const std::uint8_t* payload = bytes.data() + 16 + mlen;
    const std::size_t payload_size = bytes.size() - 16 - mlen;

    auto read_tensor = [&](const json& jt, const std::string& name) {
        std::vector<std::size_t> shape = jt.at("shape").get<std::vector<std::size_t>>();
        const std::size_t offset = jt.at("offset").get<std::size_t>();
        const std::size_t n = Tensor::numel_of(shape);
        if (offset + n * 8 > payload_size)
            throw ModelIoError(ModelIoError::Kind::truncated,
                               "payload truncated inside " + name);
        std::vector<double> data(n);
        for (std::size_t i = 0; i < n; ++i)
            data[i] = detail::get_f64_le(payload + offset + 8 * i);
        return Tensor(std::move(shape), std::move(data));
    };

    NetworkSpec net;
    try {
        net.role = manifest.at("role").get<std::string>() == "discriminator"
                       ? NetworkRole::discriminator
                       : NetworkRole::generator;
        net.latent_dim = manifest.at("latent_dim").get<std::size_t>();
        std::size_t li = 0;
        for (const json& jl : manifest.at("layers")) {
            LayerSpec l;
            l.kind = detail::layer_kind_from_name(jl.at("kind").get<std::string>());
            l.activation.kind = detail::act_from_name(jl.at("activation").get<std::string>());
            l.activation.gamma = jl.value("gamma", 0.0);
            l.stride = jl.value("stride", std::size_t{1});
            l.padding = jl.value("padding", std::size_t{0});
            l.factor = jl.value("factor", std::size_t{2});
            if (jl.contains("reshape"))
                l.reshape = jl.at("reshape").get<std::vector<std::size_t>>();
            if (detail::layer_has_params(l.kind)) {
                const std::string tag = "layer " + std::to_string(li);
                l.weights = read_tensor(jl.at("weights"), tag + " weights");
                l.bias = read_tensor(jl.at("bias"), tag + " bias");
            }
            net.layers.push_back(std::move(l));
            ++li;
        }
    } catch (const json::exception& e) {
        throw ModelIoError(ModelIoError::Kind::bad_manifest,
                           std::string("manifest field failure: ") + e.what());
    }
    try {
        validate_network(net);
    } catch (const ShapeError& e) {
        throw ModelIoError(ModelIoError::Kind::bad_manifest,
                           std::string("inconsistent architecture: ") + e.what());
    }
    return net;
}

inline void save_model_file(const NetworkSpec& net, const std::string& path) {
    const auto bytes = save_model(net);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ModelIoError(ModelIoError::Kind::io, "cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw ModelIoError(ModelIoError::Kind::io, "short write to '" + path + "'");
}

inline NetworkSpec load_model_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ModelIoError(ModelIoError::Kind::io, "cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return load_model(bytes);
}

} // namespace claprobe
