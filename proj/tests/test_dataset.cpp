#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "firmcascade/dataset.hpp"
#include "firmcascade/errors.hpp"
#include "firmcascade/stage_model.hpp"

using namespace firmcascade;
namespace fs = std::filesystem;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& contents)
        : path((fs::temp_directory_path() / name).string()) {
        std::ofstream out(path);
        out << contents;
    }
    ~TempFile() { std::error_code ec; fs::remove(path, ec); }
};

}  // namespace

TEST_CASE("loading a small csv with a header") {
    TempFile file("fc_small.csv",
                  "label,a,b\n"
                  "1,0.5,2\n"
                  "0,-1,3.25\n"
                  "0,4,5\n");
    CsvSchema schema;
    schema.header = true;
    schema.label_column = std::string("label");
    const Dataset data = load_csv(file.path, schema);
    CHECK(data.rows == 3);
    CHECK(data.cols == 2);
    CHECK(data.at(0, 0) == 0.5);
    CHECK(data.at(1, 1) == 3.25);
    CHECK(data.labels == std::vector<int>{1, 0, 0});
    CHECK(data.feature_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("non-binary label under a binary schema names the line") {
    TempFile file("fc_badlabel.csv",
                  "label,a\n"
                  "1,0.5\n"
                  "2,1.5\n");
    CsvSchema schema;
    schema.header = true;
    schema.label_column = 0;
    CHECK_THROWS_WITH_AS(load_csv(file.path, schema), doctest::Contains("line 3"), DataError);
}

TEST_CASE("unparseable feature rows are dropped and reported") {
    TempFile file("fc_reject.csv",
                  "label,a\n"
                  "1,0.5\n"
                  "0,oops\n"
                  "0,2.5\n"
                  "1,inf\n");
    CsvSchema schema;
    schema.header = true;
    schema.label_column = 0;
    LoadReport report;
    const Dataset data = load_csv(file.path, schema, &report);
    CHECK(data.rows == 2);
    CHECK(report.rejected_lines == std::vector<int>{3, 5});
}

TEST_CASE("schema errors") {
    TempFile file("fc_cols.csv", "label,a\n1,0.5\n");
    SUBCASE("missing named column") {
        CsvSchema schema;
        schema.header = true;
        schema.label_column = std::string("missing");
        CHECK_THROWS_AS(load_csv(file.path, schema), DataError);
    }
    SUBCASE("index out of range") {
        CsvSchema schema;
        schema.header = true;
        schema.label_column = 7;
        CHECK_THROWS_AS(load_csv(file.path, schema), DataError);
    }
    SUBCASE("empty file") {
        TempFile empty("fc_empty.csv", "");
        CsvSchema schema;
        CHECK_THROWS_AS(load_csv(empty.path, schema), InputError);
    }
    SUBCASE("missing file") {
        CsvSchema schema;
        CHECK_THROWS_AS(load_csv("/nonexistent/nope.csv", schema), DataError);
    }
}

TEST_CASE("save then load reproduces doubles exactly") {
    Dataset data;
    data.rows = 3;
    data.cols = 2;
    data.features = {0.1, 1.0 / 3.0, -2.5e-13, 3.141592653589793, 1e300, -7.0};
    data.labels = {1, 0, 1};
    data.feature_names = {"x", "y"};
    const std::string path = (fs::temp_directory_path() / "fc_roundtrip.csv").string();
    save_csv(data, path);
    CsvSchema schema;
    schema.header = true;
    schema.label_column = std::string("label");
    const Dataset back = load_csv(path, schema);
    REQUIRE(back.rows == data.rows);
    REQUIRE(back.cols == data.cols);
    for (int r = 0; r < data.rows; ++r) {
        for (int c = 0; c < data.cols; ++c) CHECK(back.at(r, c) == data.at(r, c));
    }
    CHECK(back.labels == data.labels);
    fs::remove(path);
}

TEST_CASE("categorical labels binarize through the schema") {
    TempFile file("fc_cat.csv",
                  "label,a\n"
                  "walk,1\n"
                  "sit,2\n"
                  "run,3\n"
                  "walk,4\n");
    CsvSchema schema;
    schema.header = true;
    schema.label_column = 0;
    schema.binary_labels = false;
    schema.positive_labels = {"walk"};
    const Dataset data = load_csv(file.path, schema);
    CHECK(data.labels == std::vector<int>{1, 0, 0, 1});
    CHECK(data.positive_class_note.find("walk") != std::string::npos);
}

TEST_CASE("binarize_labels") {
    const std::vector<std::string> raw{"a", "b", "c", "a", "c"};
    CHECK(binarize_labels(raw, {"a"}) == std::vector<int>{1, 0, 0, 1, 0});
    CHECK(binarize_labels(raw, {"a", "b", "c"}) == std::vector<int>{1, 1, 1, 1, 1});
    CHECK(binarize_labels(raw, {"b", "c"}) == std::vector<int>{0, 1, 1, 0, 1});
    CHECK_THROWS_AS(binarize_labels(raw, {}), ConfigError);
    CHECK_THROWS_AS(binarize_labels(raw, {"zebra"}), ConfigError);
}

namespace {
Dataset tiny_labeled(int n, int positives) {
    Dataset data;
    data.rows = n;
    data.cols = 1;
    data.features.assign(static_cast<std::size_t>(n), 0.0);
    data.labels.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < positives; ++i) data.labels[static_cast<std::size_t>(i)] = 1;
    return data;
}
}  // namespace

TEST_CASE("stratified folds") {
    SUBCASE("exact divisibility") {
        const Dataset data = tiny_labeled(100, 10);
        const FoldPlan plan = stratified_kfold(data, 5, 3);
        std::vector<int> pos_counts(5, 0), sizes(5, 0);
        for (int i = 0; i < data.rows; ++i) {
            sizes[static_cast<std::size_t>(plan.assignments[static_cast<std::size_t>(i)])]++;
            if (data.labels[static_cast<std::size_t>(i)] == 1)
                pos_counts[static_cast<std::size_t>(plan.assignments[static_cast<std::size_t>(i)])]++;
        }
        for (int f = 0; f < 5; ++f) {
            CHECK(pos_counts[static_cast<std::size_t>(f)] == 2);
            CHECK(sizes[static_cast<std::size_t>(f)] == 20);
        }
    }
    SUBCASE("counts differ by at most one when uneven") {
        const Dataset data = tiny_labeled(103, 11);
        const FoldPlan plan = stratified_kfold(data, 5, 3);
        std::vector<int> pos_counts(5, 0), sizes(5, 0);
        for (int i = 0; i < data.rows; ++i) {
            sizes[static_cast<std::size_t>(plan.assignments[static_cast<std::size_t>(i)])]++;
            if (data.labels[static_cast<std::size_t>(i)] == 1)
                pos_counts[static_cast<std::size_t>(plan.assignments[static_cast<std::size_t>(i)])]++;
        }
        const auto [pmin, pmax] = std::minmax_element(pos_counts.begin(), pos_counts.end());
        const auto [smin, smax] = std::minmax_element(sizes.begin(), sizes.end());
        CHECK(*pmax - *pmin <= 1);
        CHECK(*smax - *smin <= 1);
    }
    SUBCASE("same seed gives the same plan; folds partition the rows") {
        const Dataset data = tiny_labeled(57, 13);
        const FoldPlan a = stratified_kfold(data, 4, 99);
        const FoldPlan b = stratified_kfold(data, 4, 99);
        CHECK(a.assignments == b.assignments);
        std::vector<char> seen(static_cast<std::size_t>(data.rows), 0);
        for (int f = 0; f < 4; ++f) {
            for (int r : a.test_rows(f)) {
                CHECK(!seen[static_cast<std::size_t>(r)]);
                seen[static_cast<std::size_t>(r)] = 1;
            }
        }
        for (char s : seen) CHECK(s == 1);
        const auto train0 = a.train_rows(0);
        const auto test0 = a.test_rows(0);
        CHECK(train0.size() + test0.size() == static_cast<std::size_t>(data.rows));
    }
    SUBCASE("stratification bound per fold") {
        const Dataset data = tiny_labeled(200, 37);
        const FoldPlan plan = stratified_kfold(data, 8, 5);
        const double overall = 37.0 / 200.0;
        for (int f = 0; f < 8; ++f) {
            const auto rows = plan.test_rows(f);
            int pos = 0;
            for (int r : rows) pos += data.labels[static_cast<std::size_t>(r)];
            const double rate = static_cast<double>(pos) / static_cast<double>(rows.size());
            CHECK(std::abs(rate - overall) <= 1.0 / static_cast<double>(rows.size()));
        }
    }
    SUBCASE("k larger than the smaller class is rejected") {
        const Dataset data = tiny_labeled(40, 3);
        CHECK_THROWS_AS(stratified_kfold(data, 5, 1), InputError);
    }
}

TEST_CASE("synthetic generator") {
    SyntheticSpec spec;
    spec.n = 4000;
    spec.positive_rate = 0.05;
    spec.cheap_dim = 5;
    spec.expensive_dim = 32;
    spec.cheap_reject_rate = 0.8;
    spec.seed = 11;
    const Dataset data = gen_synthetic(spec);
    CHECK(data.rows == 4000);
    CHECK(data.cols == 37);

    SUBCASE("positive count within three binomial sigmas") {
        const double expect = 4000 * 0.05;
        const double sigma = std::sqrt(4000 * 0.05 * 0.95);
        CHECK(std::abs(data.positive_count() - expect) <= 3.0 * sigma);
    }

    SUBCASE("constructed cheap-group separator: recall >= 99%, rejection >= rate") {
        // a linear-logistic stage thresholding the first cheap axis at
        // -0.045; no training involved
        StageSpec cheap_stage;
        cheap_stage.kind = StageKind::LinearLogistic;
        cheap_stage.feature_mask = {0};
        cheap_stage.cost = 1.0;
        StageParams w;
        LayerParams layer;
        layer.fan_in = 1;
        layer.fan_out = 1;
        layer.weights = {400.0};
        layer.biases = {400.0 * 0.045};  // p > 0.5 iff x0 > -0.045
        w.layers.push_back(layer);
        long tn = 0, neg = 0, tp = 0, pos = 0;
        for (int r = 0; r < data.rows; ++r) {
            const bool pass = stage_forward(cheap_stage, w, data.row(r)) > 0.5;
            if (data.labels[static_cast<std::size_t>(r)] == 1) {
                ++pos;
                if (pass) ++tp;
            } else {
                ++neg;
                if (!pass) ++tn;
            }
        }
        CHECK(static_cast<double>(tp) / static_cast<double>(pos) >= 0.99);
        CHECK(static_cast<double>(tn) / static_cast<double>(neg) >= spec.cheap_reject_rate - 1e-12);
    }

    SUBCASE("constructed full-feature separator is perfect") {
        long correct = 0;
        for (int r = 0; r < data.rows; ++r) {
            const int pred = data.at(r, spec.cheap_dim) > 0.0 ? 1 : 0;
            if (pred == data.labels[static_cast<std::size_t>(r)]) ++correct;
        }
        CHECK(static_cast<double>(correct) / data.rows >= 0.99);
    }

    SUBCASE("generation is byte-identical for the same spec") {
        const Dataset again = gen_synthetic(spec);
        CHECK(again.features == data.features);
        CHECK(again.labels == data.labels);
        SyntheticSpec other = spec;
        other.seed = 12;
        CHECK(gen_synthetic(other).labels != data.labels);
    }

    SUBCASE("invalid specs rejected") {
        SyntheticSpec bad = spec;
        bad.positive_rate = 0.0;
        CHECK_THROWS_AS(gen_synthetic(bad), ConfigError);
        bad = spec;
        bad.cheap_reject_rate = 1.0;
        CHECK_THROWS_AS(gen_synthetic(bad), ConfigError);
    }
}
