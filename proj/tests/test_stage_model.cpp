#include <doctest.h>

#include <cmath>

#include "firmcascade/errors.hpp"
#include "firmcascade/rng.hpp"
#include "firmcascade/stage_model.hpp"

using namespace firmcascade;

namespace {
StageSpec linear_spec(std::vector<int> mask) {
    StageSpec spec;
    spec.kind = StageKind::LinearLogistic;
    spec.feature_mask = std::move(mask);
    spec.cost = 1.0;
    return spec;
}

StageSpec ff_spec(std::vector<int> mask, std::vector<int> hidden) {
    StageSpec spec;
    spec.kind = StageKind::Feedforward;
    spec.feature_mask = std::move(mask);
    spec.hidden_sizes = std::move(hidden);
    spec.cost = 1.0;
    return spec;
}
}  // namespace

TEST_CASE("zero parameters give probability one half") {
    const auto spec = linear_spec({0, 1, 2});
    auto params = init_stage(spec, 1);
    params.fill(0.0);
    CHECK(stage_forward(spec, params, std::vector<double>{3.0, -1.0, 0.5}) == 0.5);
}

TEST_CASE("hand-evaluated linear-logistic stage") {
    const auto spec = linear_spec({0, 1});
    StageParams params;
    LayerParams layer;
    layer.fan_in = 2;
    layer.fan_out = 1;
    layer.weights = {1.0, -1.0};
    layer.biases = {0.0};
    params.layers.push_back(layer);
    // w.x = 2 - 1 = 1
    CHECK(stage_forward(spec, params, std::vector<double>{2.0, 1.0}) ==
          doctest::Approx(0.73105857863000488).epsilon(1e-15));
}

TEST_CASE("zero final layer makes any feedforward stage emit one half") {
    const auto spec = ff_spec({0, 1, 2}, {4});
    auto params = init_stage(spec, 9);
    std::fill(params.layers.back().weights.begin(), params.layers.back().weights.end(), 0.0);
    std::fill(params.layers.back().biases.begin(), params.layers.back().biases.end(), 0.0);
    CHECK(stage_forward(spec, params, std::vector<double>{0.3, -2.0, 5.0}) == 0.5);
}

TEST_CASE("initialization is reproducible and correctly shaped") {
    SUBCASE("same seed, same parameters") {
        const auto spec = ff_spec({0, 1, 2, 3}, {3});
        const auto a = init_stage(spec, 77);
        const auto b = init_stage(spec, 77);
        REQUIRE(a.layers.size() == b.layers.size());
        for (std::size_t l = 0; l < a.layers.size(); ++l) {
            CHECK(a.layers[l].weights == b.layers[l].weights);
            CHECK(a.layers[l].biases == b.layers[l].biases);
        }
        const auto c = init_stage(spec, 78);
        CHECK(a.layers[0].weights != c.layers[0].weights);
    }
    SUBCASE("linear-logistic over 5 features: 5 weights and 1 bias") {
        const auto params = init_stage(linear_spec({0, 1, 2, 3, 4}), 5);
        REQUIRE(params.layers.size() == 1);
        CHECK(params.layers[0].weights.size() == 5);
        CHECK(params.layers[0].biases.size() == 1);
        CHECK(params.count() == 6);
    }
    SUBCASE("feedforward 37 -> 10 -> 1") {
        std::vector<int> mask(37);
        for (int i = 0; i < 37; ++i) mask[static_cast<std::size_t>(i)] = i;
        const auto params = init_stage(ff_spec(mask, {10}), 5);
        REQUIRE(params.layers.size() == 2);
        CHECK(params.layers[0].weights.size() == 370);
        CHECK(params.layers[0].biases.size() == 10);
        CHECK(params.layers[1].weights.size() == 10);
        CHECK(params.layers[1].biases.size() == 1);
    }
    SUBCASE("biases start at zero") {
        const auto params = init_stage(ff_spec({0, 1}, {3}), 123);
        for (const auto& l : params.layers) {
            for (double b : l.biases) CHECK(b == 0.0);
        }
    }
}

TEST_CASE("forward output stays strictly inside (0,1)") {
    Rng rng(31);
    std::vector<int> mask{0, 1, 2, 3};
    for (int n = 0; n < 200; ++n) {
        const auto spec = rng.bernoulli(0.5) ? linear_spec(mask) : ff_spec(mask, {3});
        const auto params = init_stage(spec, rng.next_u64());
        std::vector<double> x(4);
        for (auto& v : x) v = rng.uniform(-3.0, 3.0);
        const double p = stage_forward(spec, params, x);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}

TEST_CASE("permuting the mask together with first-layer weight columns is a no-op") {
    Rng rng(8);
    const auto spec = ff_spec({2, 0, 3}, {3});
    const auto params = init_stage(spec, 44);
    std::vector<double> x{0.3, -1.2, 2.0, 0.7};
    const double before = stage_forward(spec, params, x);

    StageSpec permuted = spec;
    permuted.feature_mask = {3, 2, 0};  // positions 2,0,1 of the original mask
    const std::vector<int> positions{2, 0, 1};
    StageParams moved = params;
    for (int r = 0; r < params.layers[0].fan_out; ++r) {
        for (std::size_t c = 0; c < positions.size(); ++c) {
            moved.layers[0].w(r, static_cast<int>(c)) = params.layers[0].w(r, positions[c]);
        }
    }
    CHECK(stage_forward(permuted, moved, x) == doctest::Approx(before).epsilon(1e-15));
}

TEST_CASE("shape and input errors") {
    const auto spec = linear_spec({0, 1});
    auto params = init_stage(spec, 3);
    SUBCASE("mask outside the input row") {
        CHECK_THROWS_AS(stage_forward(spec, params, std::vector<double>{1.0}), StructuralError);
    }
    SUBCASE("non-finite input") {
        CHECK_THROWS_AS(stage_forward(spec, params, std::vector<double>{1.0, std::nan("")}), InputError);
    }
    SUBCASE("wrong layer count") {
        params.layers.emplace_back();
        CHECK_THROWS_AS(check_stage_shapes(spec, params), StructuralError);
    }
    SUBCASE("non-finite weight") {
        auto bad = init_stage(spec, 3);
        bad.layers[0].weights[0] = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(check_stage_shapes(spec, bad), InputError);
    }
    SUBCASE("combiner stages have no forward model") {
        StageSpec comb;
        comb.kind = StageKind::Combiner;
        CHECK_THROWS_AS(stage_forward(comb, StageParams{}, std::vector<double>{1.0}), StructuralError);
    }
}

TEST_CASE("basis expansion") {
    const auto out = basis_expand(std::vector<double>{2.0, 3.0});
    CHECK(out == std::array<double, 5>{2.0, 3.0, 4.0, 9.0, 6.0});
    CHECK(basis_expand(std::vector<double>{0.0, 0.0}) == std::array<double, 5>{0.0, 0.0, 0.0, 0.0, 0.0});
    CHECK(basis_expand(std::vector<double>{1.0, 1.0}) == std::array<double, 5>{1.0, 1.0, 1.0, 1.0, 1.0});
    CHECK_THROWS_AS(basis_expand(std::vector<double>{1.0}), InputError);
    CHECK_THROWS_AS(basis_expand(std::vector<double>{1.0, 2.0, 3.0}), InputError);
}

TEST_CASE("mac counts used for default costs") {
    CHECK(linear_spec({0, 1, 2, 3, 4}).mac_count() == 6);
    std::vector<int> mask(37);
    for (int i = 0; i < 37; ++i) mask[static_cast<std::size_t>(i)] = i;
    CHECK(ff_spec(mask, {10}).mac_count() == 37 * 10 + 10 + 10 + 1);
}
