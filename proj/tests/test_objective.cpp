#include <doctest.h>

#include <cmath>

#include "firmcascade/combine.hpp"
#include "firmcascade/errors.hpp"
#include "firmcascade/objective.hpp"
#include "test_helpers.hpp"

using namespace firmcascade;
using namespace test_helpers;

namespace {
const GatingConfig kAlpha32 = GatingConfig::finite(32.0);
}

TEST_CASE("cross entropy") {
    CHECK(cross_entropy(1, 0.5) == doctest::Approx(-0.69314718055994531).epsilon(1e-15));
    CHECK(cross_entropy(0, 0.5) == doctest::Approx(-0.69314718055994531).epsilon(1e-15));
    CHECK(std::abs(cross_entropy(1, 1.0 - 1e-12)) < 1e-11);
    CHECK(std::abs(cross_entropy(1, 1.0)) < 1e-11);      // clamped inside the log
    CHECK(std::isfinite(cross_entropy(1, 0.0)));          // clamp avoids -inf
    CHECK_THROWS_AS(cross_entropy(2, 0.5), InputError);
    CHECK_THROWS_AS(cross_entropy(-1, 0.5), InputError);
    SUBCASE("derivative is zero in the clamped region, 1/p outside") {
        CHECK(cross_entropy_dp(1, 0.25) == doctest::Approx(4.0).epsilon(1e-15));
        CHECK(cross_entropy_dp(0, 0.25) == doctest::Approx(-4.0 / 3.0).epsilon(1e-15));
        CHECK(cross_entropy_dp(1, 1e-14) == 0.0);
        CHECK(cross_entropy_dp(0, 1.0) == 0.0);
    }
}

TEST_CASE("firm linear regularizer") {
    SUBCASE("single stage is charged unconditionally") {
        CHECK(regularizer_linear_firm(std::vector<double>{0.42}, std::vector<double>{3.0}, kAlpha32) == 3.0);
    }
    SUBCASE("frozen values") {
        CHECK(regularizer_linear_firm(std::vector<double>{0.9, 0.42}, std::vector<double>{1.0, 2.0}, kAlpha32) ==
              doctest::Approx(2.9999947035392316).epsilon(1e-14));
        CHECK(regularizer_linear_firm(std::vector<double>{0.1, 0.42}, std::vector<double>{1.0, 2.0}, kAlpha32) ==
              doctest::Approx(1.0000052964607684).epsilon(1e-14));
    }
    SUBCASE("bounded by the unconditional and total cost") {
        Rng rng(14);
        for (int n = 0; n < 1000; ++n) {
            const std::size_t L = 1 + rng.below(5);
            std::vector<double> probs(L), costs(L);
            for (auto& p : probs) p = rng.uniform();
            double total = 0.0;
            for (auto& c : costs) {
                c = rng.uniform(0.0, 5.0);
                total += c;
            }
            const double r = regularizer_linear_firm(probs, costs, kAlpha32);
            CHECK(r >= costs[0] - 1e-12);
            CHECK(r <= total + 1e-12);
        }
    }
}

TEST_CASE("firm tree regularizer") {
    SUBCASE("no gated terms: everything unconditional") {
        const std::vector<std::vector<double>> bp{{0.3}, {0.8}, {0.51}};
        const std::vector<double> bout{0.3, 0.8, 0.51};
        const std::vector<std::vector<double>> bc{{2.0}, {3.0}, {4.0}};
        CHECK(regularizer_tree_firm(bp, bout, std::vector<double>{}, bc, std::vector<double>{5.0}, kAlpha32) ==
              14.0);
    }
    SUBCASE("gates exactly one charge the full root") {
        const std::vector<std::vector<double>> bp{{1.0}, {1.0}};
        const std::vector<double> bout{1.0, 1.0};
        const std::vector<std::vector<double>> bc{{1.0}, {1.0}};
        CHECK(regularizer_tree_firm(bp, bout, std::vector<double>{0.42}, bc, std::vector<double>{1.0, 4.0},
                                    kAlpha32) == 7.0);
    }
    SUBCASE("frozen value for a partially confident pair of branches") {
        const std::vector<std::vector<double>> bp{{0.9}, {0.1}};
        const std::vector<double> bout{0.9, 0.1};
        const std::vector<std::vector<double>> bc{{1.0}, {1.0}};
        CHECK(regularizer_tree_firm(bp, bout, std::vector<double>{0.42}, bc, std::vector<double>{1.0, 4.0},
                                    kAlpha32) == doctest::Approx(3.0000105928934842).epsilon(1e-13));
    }
}

TEST_CASE("soft regularizers") {
    CHECK(regularizer_linear_soft(std::vector<double>{0.9, 0.42}, std::vector<double>{1.0, 2.0}) ==
          doctest::Approx(2.8).epsilon(1e-15));
    CHECK(regularizer_linear_soft(std::vector<double>{0.5, 0.42}, std::vector<double>{1.0, 2.0}) ==
          doctest::Approx(2.0).epsilon(1e-15));
    SUBCASE("firm and soft agree exactly on 0/1 probabilities") {
        Rng rng(77);
        for (int n = 0; n < 200; ++n) {
            const std::size_t L = 1 + rng.below(4);
            std::vector<double> probs(L), costs(L);
            for (auto& p : probs) p = rng.bernoulli(0.5) ? 1.0 : 0.0;
            for (auto& c : costs) c = rng.uniform(0.0, 3.0);
            CHECK(regularizer_linear_firm(probs, costs, kAlpha32) ==
                  doctest::Approx(regularizer_linear_soft(probs, costs)).epsilon(1e-13));
        }
    }
}

TEST_CASE("objective reductions") {
    Rng rng(404);
    SUBCASE("soft family with lambda 0 equals the noisy-AND log likelihood, computed independently") {
        const auto arch = random_architecture(rng, false, 4);
        const auto params = init_parameters(arch, 5);
        const auto data = random_dataset(rng, 100, 4);
        const auto rows = all_rows(data);
        ObjectiveConfig cfg;
        cfg.family = ObjectiveFamily::Soft;
        cfg.lambda = 0.0;
        const double got = objective_value(arch, params, data, rows, cfg);
        double expected = 0.0;
        for (int r : rows) {
            std::vector<double> probs;
            for (std::size_t l = 0; l < arch.root.size(); ++l) {
                probs.push_back(stage_forward(arch.root[l], params[l], data.row(r)));
            }
            expected += cross_entropy(data.labels[static_cast<std::size_t>(r)], combine_noisy_and(probs));
        }
        CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("single linear-logistic stage at lambda 0 is plain logistic regression") {
        CascadeArchitecture arch;
        arch.mode = CascadeMode::Linear;
        arch.gating = kAlpha32;
        StageSpec spec;
        spec.kind = StageKind::LinearLogistic;
        spec.feature_mask = {0, 1};
        spec.cost = 1.0;
        arch.root.push_back(spec);
        const auto params = init_parameters(arch, 3);
        const auto data = random_dataset(rng, 50, 2);
        const auto rows = all_rows(data);
        ObjectiveConfig cfg;
        cfg.family = ObjectiveFamily::Soft;
        double expected = 0.0;
        for (int r : rows) {
            expected += cross_entropy(data.labels[static_cast<std::size_t>(r)],
                                      stage_forward(arch.root[0], params[0], data.row(r)));
        }
        CHECK(objective_value(arch, params, data, rows, cfg) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("objective decreases weakly in lambda for fixed parameters") {
        const auto arch = random_architecture(rng, true, 5);
        const auto params = init_parameters(arch, 6);
        const auto data = random_dataset(rng, 40, 5);
        const auto rows = all_rows(data);
        ObjectiveConfig lo, hi;
        lo.lambda = 0.01;
        hi.lambda = 10.0;
        CHECK(objective_value(arch, params, data, rows, lo) >= objective_value(arch, params, data, rows, hi));
    }
}

TEST_CASE("gradient closed forms and masking") {
    SUBCASE("zero-weight single stage: bias gradient is sum of (y - 1/2)") {
        CascadeArchitecture arch;
        arch.mode = CascadeMode::Linear;
        arch.gating = kAlpha32;
        StageSpec spec;
        spec.kind = StageKind::LinearLogistic;
        spec.feature_mask = {0};
        spec.cost = 1.0;
        arch.root.push_back(spec);
        ParameterSet params = init_parameters(arch, 1);
        params[0].fill(0.0);
        Dataset data;
        data.rows = 4;
        data.cols = 1;
        data.features = {0.2, -1.0, 0.7, 2.0};
        data.labels = {1, 1, 1, 0};
        const auto rows = all_rows(data);
        ObjectiveConfig cfg;  // firm, lambda 0
        const auto grads = objective_gradient(arch, params, data, rows, cfg);
        CHECK(grads[0].layers[0].biases[0] == doctest::Approx(0.5 + 0.5 + 0.5 - 0.5).epsilon(1e-12));
    }
    SUBCASE("unmasked feature columns never influence the gradient") {
        Rng rng(21);
        CascadeArchitecture arch;
        arch.mode = CascadeMode::Linear;
        arch.gating = kAlpha32;
        StageSpec s1;
        s1.kind = StageKind::LinearLogistic;
        s1.feature_mask = {0, 2};  // feature 1 excluded everywhere
        s1.cost = 1.0;
        arch.root.push_back(s1);
        const auto params = init_parameters(arch, 9);
        auto data = random_dataset(rng, 30, 3);
        const auto rows = all_rows(data);
        ObjectiveConfig cfg;
        cfg.lambda = 0.3;
        const auto before = objective_gradient(arch, params, data, rows, cfg);
        for (int r = 0; r < data.rows; ++r) data.at(r, 1) += rng.uniform(-5.0, 5.0);
        const auto after = objective_gradient(arch, params, data, rows, cfg);
        for (std::size_t l = 0; l < before[0].layers.size(); ++l) {
            CHECK(before[0].layers[l].weights == after[0].layers[l].weights);
            CHECK(before[0].layers[l].biases == after[0].layers[l].biases);
        }
    }
}

TEST_CASE("finite differences validate the gradient across modes and families") {
    Rng rng(1234);
    int done = 0;
    for (int trial = 0; done < 8; ++trial) {
        const bool tree = trial % 2 == 1;
        const auto arch = random_architecture(rng, tree, 4);
        auto params = init_parameters(arch, 1000 + static_cast<std::uint64_t>(trial));
        const auto data = random_dataset(rng, 6, 4);
        const auto rows = all_rows(data);
        ObjectiveConfig cfg;
        cfg.family = trial % 4 < 2 ? ObjectiveFamily::Firm : ObjectiveFamily::Soft;
        cfg.lambda = rng.uniform(0.0, 1.0);
        cfg.gating = kAlpha32;
        CHECK(finite_difference_check(arch, params, data, rows, cfg, 1e-5) < 1e-4);
        ++done;
    }
}

TEST_CASE("finite-difference core is exact on a quadratic") {
    std::vector<double> x{0.3, -1.2, 2.0};
    const std::vector<double> a{2.0, 0.5, -1.0};
    auto f = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += a[i] * x[i] * x[i];
        return s;
    };
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) grad[i] = 2.0 * a[i] * x[i];
    CHECK(fd_max_rel_error(f, x, grad, 1e-4) < 1e-10);
}

TEST_CASE("objective error paths") {
    Rng rng(3);
    const auto arch = random_architecture(rng, false, 3);
    auto params = init_parameters(arch, 2);
    const auto data = random_dataset(rng, 5, 3);
    const auto rows = all_rows(data);
    SUBCASE("hard gating has no gradient") {
        ObjectiveConfig cfg;
        cfg.gating = GatingConfig::hard();
        CHECK_THROWS_AS(objective_gradient(arch, params, data, rows, cfg), ConfigError);
    }
    SUBCASE("parameter set must conform") {
        params.emplace_back();
        CHECK_THROWS_AS(objective_value(arch, params, data, rows, ObjectiveConfig{}), StructuralError);
    }
    SUBCASE("empty batch") {
        const auto good = init_parameters(arch, 2);
        CHECK_THROWS_AS(objective_value(arch, good, data, std::vector<int>{}, ObjectiveConfig{}), InputError);
    }
}
