#include <doctest.h>

#include <nlohmann/json.hpp>

#include "firmcascade/errors.hpp"
#include "firmcascade/experiment.hpp"
#include "test_helpers.hpp"

using namespace firmcascade;

namespace {

ordered_json tiny_experiment_doc() {
    return ordered_json::parse(R"({
      "architecture": {
        "schema_version": 1,
        "gating_alpha": 32.0,
        "mode": "linear",
        "branches": [],
        "root": [
          {"kind": "linear-logistic", "features": [0, 1], "cost": 1.0},
          {"kind": "linear-logistic", "features": [0, 1, 2, 3, 4], "cost": 8.0}
        ]
      },
      "data": {"synthetic": {"n": 240, "positive_rate": 0.25, "cheap_dim": 2,
                              "expensive_dim": 3, "cheap_reject_rate": 0.7, "seed": 13}},
      "family": "both",
      "lambda_grid": [0.0],
      "folds": 2,
      "seed": 5,
      "train": {"epochs": 10, "batch_size": 64, "learning_rate": 0.05, "init": "reverse-stagewise"}
    })");
}

}  // namespace

TEST_CASE("experiment config parsing") {
    const auto cfg = experiment_from_json(tiny_experiment_doc(), "");
    CHECK(cfg.families.size() == 2);
    CHECK(cfg.folds == 2);
    CHECK(cfg.lambda_grid == std::vector<double>{0.0});
    CHECK(cfg.train.epochs == 10);
    CHECK(cfg.train.seed == 5);  // experiment seed governs training
    CHECK(!cfg.alpha_substituted);

    SUBCASE("hard alpha is substituted for training") {
        auto doc = tiny_experiment_doc();
        doc["alpha"] = "inf";
        const auto hard = experiment_from_json(doc, "");
        CHECK(hard.alpha_substituted);
        CHECK(!hard.arch.gating.is_hard());
        CHECK(hard.arch.gating.alpha() == 1024.0);
    }
    SUBCASE("bad family") {
        auto doc = tiny_experiment_doc();
        doc["family"] = "medium";
        CHECK_THROWS_AS(experiment_from_json(doc, ""), ConfigError);
    }
    SUBCASE("missing data block") {
        auto doc = tiny_experiment_doc();
        doc.erase("data");
        CHECK_THROWS_AS(experiment_from_json(doc, ""), ConfigError);
    }
}

TEST_CASE("experiment report shape, comparison and determinism") {
    const auto cfg = experiment_from_json(tiny_experiment_doc(), "");
    const auto report = run_experiment(cfg);
    const auto& doc = report.document;

    REQUIRE(doc.contains("families"));
    REQUIRE(doc["families"].contains("firm"));
    REQUIRE(doc["families"].contains("soft"));
    const auto& firm = doc["families"]["firm"];
    CHECK(firm["grid"].size() == 1);
    CHECK(firm["grid"][0]["folds"].size() == 2);
    CHECK(firm["best"]["index"].get<int>() == 0);
    CHECK(doc.contains("comparison"));
    CHECK(doc["dataset"]["rows"].get<int>() == 240);

    SUBCASE("re-running the identical config reproduces the report") {
        const auto again = run_experiment(cfg);
        CHECK(strip_timing(report.document).dump() == strip_timing(again.document).dump());
    }
    SUBCASE("the embedded echo regenerates the report") {
        const auto cfg2 = experiment_from_json(doc["config_echo"], "");
        const auto regen = run_experiment(cfg2);
        CHECK(strip_timing(report.document).dump() == strip_timing(regen.document).dump());
    }
}

TEST_CASE("architecture json round-trip is the identity") {
    fc::Rng rng(88);
    for (int n = 0; n < 20; ++n) {
        const auto arch = test_helpers::random_architecture(rng, n % 2 == 1, 6);
        const auto j1 = architecture_to_json(arch);
        const auto back = architecture_from_json(j1);
        const auto j2 = architecture_to_json(back);
        CHECK(j1.dump() == j2.dump());
        CHECK(validate_architecture(back, 6).empty());
    }
    SUBCASE("omitted costs are materialized from mac counts") {
        auto j = ordered_json::parse(R"({
          "gating_alpha": 32.0, "mode": "linear", "branches": [],
          "root": [{"kind": "linear-logistic", "features": [0, 1, 2]}]
        })");
        const auto arch = architecture_from_json(j);
        CHECK(arch.root[0].cost == 4.0);
    }
    SUBCASE("gating serialization covers the hard setting") {
        CHECK(gating_from_json(gating_to_json(GatingConfig::hard())).is_hard());
        CHECK(gating_from_json(gating_to_json(GatingConfig::finite(8.0))).alpha() == 8.0);
        CHECK_THROWS_AS(gating_from_json(ordered_json("soft")), ConfigError);
    }
}

TEST_CASE("model files round-trip exactly") {
    const Dataset data = gen_synthetic({200, 0.25, 2, 3, 0.7, 3});
    CascadeArchitecture arch;
    arch.mode = CascadeMode::Linear;
    arch.gating = GatingConfig::finite(32.0);
    StageSpec spec;
    spec.kind = StageKind::Feedforward;
    spec.hidden_sizes = {3};
    spec.feature_mask = {0, 1, 2, 3, 4};
    spec.cost = 2.0;
    arch.root.push_back(spec);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.init = InitScheme::RandomOnly;
    const TrainedModel model = train(arch, data, cfg);

    const auto doc = model_to_json(model);
    const TrainedModel back = model_from_json(doc);
    REQUIRE(back.params.size() == model.params.size());
    for (std::size_t s = 0; s < model.params.size(); ++s) {
        for (std::size_t l = 0; l < model.params[s].layers.size(); ++l) {
            CHECK(back.params[s].layers[l].weights == model.params[s].layers[l].weights);
            CHECK(back.params[s].layers[l].biases == model.params[s].layers[l].biases);
        }
    }
    CHECK(back.history == model.history);
    CHECK(model_to_json(back).dump() == doc.dump());
}

TEST_CASE("a singleton alpha study reduces to the plain sweep") {
    auto doc = tiny_experiment_doc();
    doc["family"] = "firm";
    const auto cfg = experiment_from_json(doc, "");
    const auto cells = alpha_sensitivity(cfg, {"32"});
    REQUIRE(cells.size() == 1);
    CHECK(!cells[0].substituted);

    const Dataset data = load_data(cfg.data);
    TrainConfig train_cfg = cfg.train;
    train_cfg.objective.family = ObjectiveFamily::Firm;
    train_cfg.objective.gating = cfg.arch.gating;
    const auto sweep = lambda_sweep(cfg.arch, data, cfg.lambda_grid, train_cfg, cfg.folds, 1);
    const auto& best = sweep.points[static_cast<std::size_t>(sweep.best_index)];
    CHECK(cells[0].best_accuracy == doctest::Approx(best.accuracy_mean).epsilon(1e-15));
    CHECK(cells[0].best_cost == doctest::Approx(best.cost_mean).epsilon(1e-15));
    CHECK(cells[0].best_lambda == best.lambda);
}
