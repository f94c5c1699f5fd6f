#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <thread>

#include "cla/network.hpp"
#include "test_util.hpp"

using namespace claprobe;
using testutil::Rng;

TEST_CASE("dense identity layer passes the input through") {
    NetworkSpec net;
    net.latent_dim = 2;
    net.layers.push_back(
        LayerSpec::dense(Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}), identity()));
    const auto acts = forward(net, Tensor::vector({1.0, 2.0}));
    REQUIRE(acts.size() == 1);
    CHECK(acts[0].data == std::vector<double>{1.0, 2.0});
}

TEST_CASE("relu clamps negative components") {
    NetworkSpec net;
    net.latent_dim = 2;
    net.layers.push_back(LayerSpec::dense(Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}), relu()));
    const auto out = forward_output(net, Tensor::vector({-3.0, 5.0}));
    CHECK(out.data == std::vector<double>{0.0, 5.0});
}

TEST_CASE("leaky_relu with gamma 0 equals relu bit-exactly") {
    Rng rng(7);
    auto net_relu = testutil::random_mlp(rng, 3, {8, 8}, 4, relu());
    auto net_leaky = net_relu;
    for (auto& l : net_leaky.layers)
        if (l.activation.kind == Act::relu) l.activation = leaky_relu(0.0);
    Rng zr(8);
    for (int i = 0; i < 50; ++i) {
        const Tensor z = testutil::random_latent(zr, 3);
        CHECK(forward_output(net_relu, z).data == forward_output(net_leaky, z).data);
    }
}

TEST_CASE("2-layer leaky_relu net matches an independent reference evaluator") {
    Rng rng(42);
    const auto net = testutil::random_mlp(rng, 4, {10}, 6, leaky_relu(0.2));
    Rng zr(43);
    for (int i = 0; i < 20; ++i) {
        const Tensor z = testutil::random_latent(zr, 4);
        const auto engine = forward_output(net, z).data;
        const auto ref = testutil::reference_mlp_forward(net, z.data);
        REQUIRE(engine.size() == ref.size());
        for (std::size_t k = 0; k < ref.size(); ++k)
            CHECK(engine[k] == doctest::Approx(ref[k]).epsilon(1e-12));
    }
}

TEST_CASE("forward is deterministic and safe to run concurrently") {
    Rng rng(3);
    const auto net = testutil::random_mlp(rng, 3, {16, 16}, 5, leaky_relu(0.1));
    const Tensor z = Tensor::vector({0.3, -1.2, 0.7});
    const auto once = forward_output(net, z).data;
    CHECK(forward_output(net, z).data == once);

    std::vector<std::vector<double>> results(4);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&, t] { results[t] = forward_output(net, z).data; });
    for (auto& th : threads) th.join();
    for (const auto& r : results) CHECK(r == once);
}

TEST_CASE("conv2d matches a hand-computed example") {
    // 1 input channel 3x3, one 2x2 kernel, stride 1, no padding.
    NetworkSpec net;
    net.latent_dim = 9;
    net.layers.push_back(LayerSpec::dense(
        [] {
            Tensor w({9, 9});
            for (int i = 0; i < 9; ++i) w.data[i * 9 + i] = 1.0;
            return w;
        }(),
        Tensor({9}), identity(), {1, 3, 3}));
    net.layers.push_back(
        LayerSpec::conv(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}), Tensor({1}, {0.5}), identity()));
    const auto out =
        forward_output(net, Tensor::vector({1, 2, 3, 4, 5, 6, 7, 8, 9}));
    REQUIRE(out.shape == std::vector<std::size_t>{1, 2, 2});
    // window (1,2,4,5): 1*1+2*2+4*3+5*4 = 37, plus bias.
    CHECK(out.data[0] == doctest::Approx(37.5));
    CHECK(out.data[1] == doctest::Approx(1 * 2 + 2 * 3 + 3 * 5 + 4 * 6 + 0.5));
    CHECK(out.data[2] == doctest::Approx(1 * 4 + 2 * 5 + 3 * 7 + 4 * 8 + 0.5));
    CHECK(out.data[3] == doctest::Approx(1 * 5 + 2 * 6 + 3 * 8 + 4 * 9 + 0.5));
}

TEST_CASE("conv2d with padding/stride matches an independent loop oracle") {
    Rng rng(11);
    // ramp input 1x4x4 through a 2-channel 3x3 conv, stride 2, padding 1.
    Tensor w({2, 1, 3, 3});
    for (double& v : w.data) v = rng.normal();
    Tensor b({2}, {0.1, -0.2});
    NetworkSpec net;
    net.latent_dim = 16;
    net.layers.push_back(LayerSpec::dense(
        [] {
            Tensor d({16, 16});
            for (int i = 0; i < 16; ++i) d.data[i * 16 + i] = 1.0;
            return d;
        }(),
        Tensor({16}), identity(), {1, 4, 4}));
    net.layers.push_back(LayerSpec::conv(w, b, identity(), 2, 1));

    Tensor z({16});
    for (int i = 0; i < 16; ++i) z.data[i] = 0.25 * i - 1.0;
    const auto out = forward_output(net, z);
    REQUIRE(out.shape == std::vector<std::size_t>{2, 2, 2});

    // input-centric accumulation, non-engine loop order
    auto in_at = [&](long y, long x) {
        if (y < 0 || y > 3 || x < 0 || x > 3) return 0.0;
        return z.data[static_cast<std::size_t>(y * 4 + x)];
    };
    for (std::size_t oc = 0; oc < 2; ++oc)
        for (std::size_t oy = 0; oy < 2; ++oy)
            for (std::size_t ox = 0; ox < 2; ++ox) {
                double acc = b.data[oc];
                for (long ky = 0; ky < 3; ++ky)
                    for (long kx = 0; kx < 3; ++kx)
                        acc += w.data[(oc * 9) + static_cast<std::size_t>(ky * 3 + kx)] *
                               in_at(static_cast<long>(oy) * 2 + ky - 1,
                                     static_cast<long>(ox) * 2 + kx - 1);
                CHECK(out.at3(oc, oy, ox) == doctest::Approx(acc).epsilon(1e-12));
            }
}

TEST_CASE("upsample_nearest repeats blocks") {
    NetworkSpec net;
    net.latent_dim = 4;
    net.layers.push_back(LayerSpec::dense(
        [] {
            Tensor d({4, 4});
            for (int i = 0; i < 4; ++i) d.data[i * 4 + i] = 1.0;
            return d;
        }(),
        Tensor({4}), identity(), {1, 2, 2}));
    net.layers.push_back(LayerSpec::upsample(2));
    const auto out = forward_output(net, Tensor::vector({1, 2, 3, 4}));
    REQUIRE(out.shape == std::vector<std::size_t>{1, 4, 4});
    CHECK(out.at3(0, 0, 0) == 1);
    CHECK(out.at3(0, 0, 1) == 1);
    CHECK(out.at3(0, 1, 1) == 1);
    CHECK(out.at3(0, 0, 2) == 2);
    CHECK(out.at3(0, 3, 3) == 4);
}

TEST_CASE("forward_from composes with forward at every layer") {
    Rng rng(5);
    const auto net = testutil::random_mlp(rng, 3, {6, 7, 5}, 4, leaky_relu(0.2));
    const Tensor z = Tensor::vector({0.5, -0.25, 1.5});
    const auto acts = forward(net, z);
    const auto full = acts.back().data;
    CHECK(forward_from(net, 0, z).data == full);
    for (std::size_t l = 0; l < net.depth(); ++l)
        CHECK(forward_from(net, l + 1, acts[l]).data == full);
    CHECK(forward_from(net, net.depth(), acts.back()).data == full);
}

TEST_CASE("zero-ablating a channel equals a full forward with a masking layer") {
    Rng rng(9);
    const auto net = testutil::random_mlp(rng, 2, {6, 6}, 3, leaky_relu(0.2));
    const Tensor z = Tensor::vector({0.4, -0.9});
    const std::size_t ablate_layer = 1, ablate_unit = 2;

    auto acts = forward(net, z);
    Tensor h = acts[ablate_layer];
    h.data[ablate_unit] = 0.0;
    const auto resumed = forward_from(net, ablate_layer + 1, h);

    // same net with an explicit diagonal mask layer inserted
    NetworkSpec masked = net;
    const std::size_t width = acts[ablate_layer].numel();
    Tensor mw({width, width});
    for (std::size_t i = 0; i < width; ++i)
        mw.data[i * width + i] = i == ablate_unit ? 0.0 : 1.0;
    masked.layers.insert(masked.layers.begin() + static_cast<std::ptrdiff_t>(ablate_layer + 1),
                         LayerSpec::dense(std::move(mw), Tensor({width}), identity()));
    CHECK(forward_output(masked, z).data == resumed.data);
}

TEST_CASE("neuron_value agrees with forward at the site") {
    Rng rng(21);
    const auto net = testutil::random_mlp(rng, 4, {8, 8}, 3, leaky_relu(0.3));
    Rng zr(22);
    for (int i = 0; i < 100; ++i) {
        const Tensor z = testutil::random_latent(zr, 4);
        const auto acts = forward(net, z);
        const NeuronSite site{1, static_cast<std::size_t>(i % 8), 0, 0};
        CHECK(neuron_value(net, z, site) == acts[1].data[site.unit]);
    }
}

TEST_CASE("neuron_value on identity and dead-relu sites") {
    NetworkSpec net;
    net.latent_dim = 1;
    net.layers.push_back(LayerSpec::dense(Tensor({1, 1}, {1.0}), Tensor({1}), identity()));
    CHECK(neuron_value(net, Tensor::vector({7.0}), {0, 0, 0, 0}) == 7.0);

    NetworkSpec rnet;
    rnet.latent_dim = 1;
    rnet.layers.push_back(LayerSpec::dense(Tensor({1, 1}, {1.0}), Tensor({1}, {-10.0}), relu()));
    CHECK(neuron_value(rnet, Tensor::vector({2.0}), {0, 0, 0, 0}) == 0.0);
}

TEST_CASE("shape mismatches raise structured errors naming the layer") {
    Rng rng(1);
    auto net = testutil::random_mlp(rng, 3, {4}, 2, relu());
    CHECK_THROWS_AS(forward(net, Tensor::vector({1.0, 2.0})), ShapeError);
    try {
        forward_from(net, 1, Tensor::vector({1.0}));
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
    }
    CHECK_THROWS_AS(neuron_value(net, Tensor::vector({1, 2, 3}), NeuronSite{9, 0, 0, 0}),
                    InvalidSiteError);
    CHECK_THROWS_AS(neuron_value(net, Tensor::vector({1, 2, 3}), NeuronSite{0, 99, 0, 0}),
                    InvalidSiteError);
}

TEST_CASE("discriminator validation requires scalar output") {
    Rng rng(2);
    auto net = testutil::random_mlp(rng, 3, {4}, 2, relu());
    net.role = NetworkRole::discriminator;
    CHECK_THROWS_AS(validate_network(net), ShapeError);
    auto ok = testutil::random_mlp(rng, 3, {4}, 1, relu());
    ok.role = NetworkRole::discriminator;
    CHECK_NOTHROW(validate_network(ok));
}

TEST_CASE("pre-activations along any latent line are piecewise affine") {
    Rng rng(33);
    const auto net = testutil::random_mlp(rng, 3, {10, 10}, 4, leaky_relu(0.2));
    Rng zr(34);
    const Tensor z0 = testutil::random_latent(zr, 3);
    const Tensor v = testutil::random_latent(zr, 3);
    const NeuronSite site{2, 1, 0, 0};

    const int fine = 400;
    const double span = 2.0;
    std::vector<double> vals(fine + 1);
    for (int k = 0; k <= fine; ++k) {
        Tensor z = z0;
        const double t = -span + 2 * span * k / static_cast<double>(fine);
        for (std::size_t d = 0; d < 3; ++d) z.data[d] += t * v.data[d];
        ForwardTrace tr = forward_trace(net, z, site.layer);
        vals[static_cast<std::size_t>(k)] = tr.pre.back().data[site.unit];
    }
    double scale = 0.0;
    for (double x : vals) scale = std::max(scale, std::abs(x));
    std::size_t kinks = 0;
    for (int k = 1; k < fine; ++k) {
        const double d2 = vals[k - 1] - 2 * vals[k] + vals[k + 1];
        if (std::abs(d2) > 1e-9 * std::max(1.0, scale))
            ++kinks;
        else
            CHECK(std::abs(d2) <= 1e-9 * std::max(1.0, scale));
    }
    // a handful of kink cells, affine everywhere between
    CHECK(kinks < 40);
}
