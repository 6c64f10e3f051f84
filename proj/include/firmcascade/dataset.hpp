#ifndef FIRMCASCADE_DATASET_HPP
#define FIRMCASCADE_DATASET_HPP

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace firmcascade {

// In-memory labeled dataset: row-major feature matrix plus binary labels.
struct Dataset {
    int rows = 0;
    int cols = 0;
    std::vector<double> features;
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    std::string positive_class_note;

    std::span<const double> row(int i) const {
        return {features.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
    }
    double& at(int r, int c) { return features[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return features[static_cast<std::size_t>(r) * cols + c]; }

    int positive_count() const;
};

// Column selector: index, or name when the file has a header.
using ColumnRef = std::variant<int, std::string>;

struct CsvSchema {
    ColumnRef label_column = 0;
    std::vector<ColumnRef> feature_columns;  // empty selects every other column
    bool header = false;
    bool binary_labels = true;                  // false: labels are categories, binarized below
    std::vector<std::string> positive_labels;   // categories mapped to 1 when binary_labels is false
};

struct LoadReport {
    std::vector<int> rejected_lines;  // 1-based file line numbers with bad feature values
};

// Loads a comma-delimited file. Feature cells that fail to parse or are
// non-finite cause the whole row to be dropped and its line recorded in
// the report. A label outside {0,1} under a binary schema is a DataError
// naming the line; under a categorical schema labels are matched against
// positive_labels.
Dataset load_csv(const std::string& path, const CsvSchema& schema, LoadReport* report = nullptr);

// Writes features + label with round-trip-exact double formatting.
void save_csv(const Dataset& data, const std::string& path);

// 1 where the raw category is in positive_set, else 0. ConfigError when
// positive_set is empty or names an unobserved category.
std::vector<int> binarize_labels(const std::vector<std::string>& raw_labels,
                                 const std::set<std::string>& positive_set);

struct FoldPlan {
    int k = 0;
    std::vector<int> assignments;  // fold index per row
    std::uint64_t seed = 0;

    std::vector<int> train_rows(int fold) const;
    std::vector<int> test_rows(int fold) const;
};

// Stratified assignment: a seeded shuffle within each class followed by
// round-robin placement with a fold cursor shared across classes, so both
// per-fold class counts and per-fold sizes differ by at most one.
FoldPlan stratified_kfold(const Dataset& data, int k, std::uint64_t seed);

// Imbalanced two-group generator used as the cascade benchmark. The cheap
// feature group separates a fixed fraction of the negatives from every
// positive; the expensive group separates the rest.
struct SyntheticSpec {
    int n = 3836;
    double positive_rate = 0.05;
    int cheap_dim = 5;
    int expensive_dim = 32;
    double cheap_reject_rate = 0.8;
    std::uint64_t seed = 1;
};

Dataset gen_synthetic(const SyntheticSpec& spec);

}  // namespace firmcascade

#endif
