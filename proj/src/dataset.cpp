#include "firmcascade/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "firmcascade/errors.hpp"
#include "firmcascade/rng.hpp"

namespace firmcascade {

int Dataset::positive_count() const {
    int n = 0;
    for (int y : labels) n += y;
    return n;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim surrounding whitespace
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end) return std::nullopt;
    return v;
}

int resolve_column(const ColumnRef& ref, const std::vector<std::string>& header_cells, bool has_header,
                   int n_cols) {
    if (std::holds_alternative<int>(ref)) {
        const int idx = std::get<int>(ref);
        if (idx < 0 || idx >= n_cols) {
            throw DataError("column index " + std::to_string(idx) + " outside file with " + std::to_string(n_cols) +
                            " columns");
        }
        return idx;
    }
    const std::string& name = std::get<std::string>(ref);
    if (!has_header) throw DataError("column '" + name + "' referenced by name but the file has no header");
    for (std::size_t i = 0; i < header_cells.size(); ++i) {
        if (header_cells[i] == name) return static_cast<int>(i);
    }
    throw DataError("column '" + name + "' not found in header");
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema, LoadReport* report) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");

    std::string line;
    std::vector<std::string> header_cells;
    int line_no = 0;
    if (schema.header) {
        if (!std::getline(in, line)) throw InputError("'" + path + "' is empty");
        ++line_no;
        header_cells = split_line(line);
    }

    std::vector<std::vector<std::string>> raw_rows;
    std::vector<int> raw_lines;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        raw_rows.push_back(split_line(line));
        raw_lines.push_back(line_no);
    }
    if (raw_rows.empty()) throw InputError("'" + path + "' has no data rows");

    const int n_cols = static_cast<int>(schema.header ? header_cells.size() : raw_rows.front().size());
    const int label_col = resolve_column(schema.label_column, header_cells, schema.header, n_cols);
    std::vector<int> feat_cols;
    if (schema.feature_columns.empty()) {
        for (int c = 0; c < n_cols; ++c)
            if (c != label_col) feat_cols.push_back(c);
    } else {
        for (const auto& ref : schema.feature_columns) {
            feat_cols.push_back(resolve_column(ref, header_cells, schema.header, n_cols));
        }
    }

    Dataset data;
    data.cols = static_cast<int>(feat_cols.size());
    for (int c : feat_cols) {
        data.feature_names.push_back(schema.header ? header_cells[static_cast<std::size_t>(c)]
                                                   : "c" + std::to_string(c));
    }

    std::set<std::string> positive(schema.positive_labels.begin(), schema.positive_labels.end());
    std::set<std::string> seen_categories;
    std::vector<std::string> raw_labels;

    for (std::size_t r = 0; r < raw_rows.size(); ++r) {
        const auto& cells = raw_rows[r];
        const int file_line = raw_lines[r];
        if (static_cast<int>(cells.size()) != n_cols) {
            throw DataError("line " + std::to_string(file_line) + " has " + std::to_string(cells.size()) +
                            " columns, expected " + std::to_string(n_cols));
        }
        std::vector<double> feats(feat_cols.size());
        bool ok = true;
        for (std::size_t i = 0; i < feat_cols.size(); ++i) {
            const auto v = parse_double(cells[static_cast<std::size_t>(feat_cols[i])]);
            if (!v || !std::isfinite(*v)) {
                ok = false;
                break;
            }
            feats[i] = *v;
        }
        if (!ok) {
            if (report) report->rejected_lines.push_back(file_line);
            continue;
        }
        const std::string& label_cell = cells[static_cast<std::size_t>(label_col)];
        if (schema.binary_labels) {
            if (label_cell == "0") {
                data.labels.push_back(0);
            } else if (label_cell == "1") {
                data.labels.push_back(1);
            } else {
                throw DataError("line " + std::to_string(file_line) + ": label '" + label_cell +
                                "' is not binary (expected 0 or 1)");
            }
        } else {
            seen_categories.insert(label_cell);
            raw_labels.push_back(label_cell);
        }
        data.features.insert(data.features.end(), feats.begin(), feats.end());
        ++data.rows;
    }
    if (data.rows == 0) throw InputError("'" + path + "' has no usable rows");

    if (!schema.binary_labels) {
        data.labels = binarize_labels(raw_labels, positive);
        std::string note = "positive classes:";
        for (const auto& p : positive) note += " " + p;
        data.positive_class_note = note;
    } else {
        data.positive_class_note = "labels loaded as binary";
    }
    return data;
}

void save_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "label";
    for (int c = 0; c < data.cols; ++c) {
        out << ',' << (c < static_cast<int>(data.feature_names.size()) ? data.feature_names[static_cast<std::size_t>(c)]
                                                                       : "c" + std::to_string(c));
    }
    out << '\n';
    char buf[40];
    for (int r = 0; r < data.rows; ++r) {
        out << data.labels[static_cast<std::size_t>(r)];
        for (int c = 0; c < data.cols; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", data.at(r, c));
            out << ',' << buf;
        }
        out << '\n';
    }
}

std::vector<int> binarize_labels(const std::vector<std::string>& raw_labels,
                                 const std::set<std::string>& positive_set) {
    if (positive_set.empty()) throw ConfigError("positive class set is empty");
    std::set<std::string> seen(raw_labels.begin(), raw_labels.end());
    for (const auto& p : positive_set) {
        if (!seen.count(p)) throw ConfigError("positive class '" + p + "' never occurs in the labels");
    }
    std::vector<int> out(raw_labels.size());
    for (std::size_t i = 0; i < raw_labels.size(); ++i) out[i] = positive_set.count(raw_labels[i]) ? 1 : 0;
    return out;
}

std::vector<int> FoldPlan::train_rows(int fold) const {
    std::vector<int> rows;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] != fold) rows.push_back(static_cast<int>(i));
    return rows;
}

std::vector<int> FoldPlan::test_rows(int fold) const {
    std::vector<int> rows;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] == fold) rows.push_back(static_cast<int>(i));
    return rows;
}

FoldPlan stratified_kfold(const Dataset& data, int k, std::uint64_t seed) {
    if (k < 2) throw InputError("need at least 2 folds, got " + std::to_string(k));
    std::vector<int> pos, neg;
    for (int i = 0; i < data.rows; ++i) {
        (data.labels[static_cast<std::size_t>(i)] == 1 ? pos : neg).push_back(i);
    }
    if (static_cast<int>(pos.size()) < k || static_cast<int>(neg.size()) < k) {
        throw InputError("k=" + std::to_string(k) + " exceeds the smaller class count (" +
                         std::to_string(std::min(pos.size(), neg.size())) + ")");
    }
    Rng rng(seed);
    rng.shuffle(pos);
    rng.shuffle(neg);
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.assign(static_cast<std::size_t>(data.rows), -1);
    int cursor = 0;  // shared across classes so fold sizes stay within one
    for (int i : pos) {
        plan.assignments[static_cast<std::size_t>(i)] = cursor;
        cursor = (cursor + 1) % k;
    }
    for (int i : neg) {
        plan.assignments[static_cast<std::size_t>(i)] = cursor;
        cursor = (cursor + 1) % k;
    }
    return plan;
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
    if (spec.n <= 0) throw ConfigError("synthetic size must be positive");
    if (spec.positive_rate <= 0.0 || spec.positive_rate >= 1.0) {
        throw ConfigError("positive rate must lie in (0,1)");
    }
    if (spec.cheap_reject_rate <= 0.0 || spec.cheap_reject_rate >= 1.0) {
        throw ConfigError("cheap reject rate must lie in (0,1)");
    }
    if (spec.cheap_dim < 1 || spec.expensive_dim < 1) throw ConfigError("feature groups need at least one dimension");

    Rng rng(spec.seed);
    Dataset data;
    data.rows = spec.n;
    data.cols = spec.cheap_dim + spec.expensive_dim;
    data.features.assign(static_cast<std::size_t>(data.rows) * data.cols, 0.0);
    data.labels.resize(static_cast<std::size_t>(spec.n));
    for (int c = 0; c < spec.cheap_dim; ++c) data.feature_names.push_back("cheap" + std::to_string(c));
    for (int c = 0; c < spec.expensive_dim; ++c) data.feature_names.push_back("exp" + std::to_string(c));
    data.positive_class_note = "synthetic rare-event benchmark";

    for (int i = 0; i < spec.n; ++i) data.labels[static_cast<std::size_t>(i)] = rng.bernoulli(spec.positive_rate) ? 1 : 0;

    // Easy negatives get a 1% surplus over the advertised reject rate so
    // that the stray budget below can never pull the constructed
    // separator's true-negative rate under the rate itself.
    std::vector<int> negatives;
    for (int i = 0; i < spec.n; ++i)
        if (data.labels[static_cast<std::size_t>(i)] == 0) negatives.push_back(i);
    rng.shuffle(negatives);
    const double neg_count = static_cast<double>(negatives.size());
    const std::size_t easy_count = std::min(
        negatives.size(), static_cast<std::size_t>(std::ceil(spec.cheap_reject_rate * neg_count) +
                                                   std::ceil(0.01 * neg_count)));
    std::vector<char> easy(static_cast<std::size_t>(spec.n), 0);
    for (std::size_t j = 0; j < easy_count && j < negatives.size(); ++j)
        easy[static_cast<std::size_t>(negatives[j])] = 1;

    // Discriminative axes are noisy Gaussians with guarded overlap. The
    // rejectable class sits at N(-1, 0.45) reflected below -0.05 so the
    // threshold -0.045 rejects it; the passing class sits at N(+1, 0.45)
    // and is reflected away from the threshold. A small budget of "stray"
    // instances is drawn from the opposite cluster instead, giving the
    // data irreducible overlap at both stages. The budgets (0.5% each
    // way) are sized so the constructed cheap separator keeps >= 99%
    // recall with a true-negative rate >= cheap_reject_rate, and the
    // constructed expensive separator stays above 99% accuracy.
    const long pos_total = std::count(data.labels.begin(), data.labels.end(), 1);
    long stray_pos_cheap = static_cast<long>(0.005 * static_cast<double>(pos_total));
    long stray_pos_exp = stray_pos_cheap;
    long stray_easy_cheap = static_cast<long>(0.005 * neg_count);
    long stray_neg_exp = stray_easy_cheap;
    auto reject_side = [&rng](long* stray_budget) {
        if (stray_budget && *stray_budget > 0 && rng.bernoulli(0.0075)) {
            --*stray_budget;
            return 1.0 + 0.45 * rng.normal();  // disguised among the passing class
        }
        double v = -1.0 + 0.45 * rng.normal();
        if (v > -0.05) v = -0.1 - v;
        return v;
    };
    auto pass_side = [&rng](long* stray_budget) {
        if (stray_budget && *stray_budget > 0 && rng.bernoulli(0.0075)) {
            --*stray_budget;
            return -1.0 + 0.45 * rng.normal();  // lost to the rejecting side
        }
        double v = 1.0 + 0.45 * rng.normal();
        if (v < -0.045) v = -0.09 - v;
        return v;
    };
    for (int i = 0; i < spec.n; ++i) {
        const bool is_pos = data.labels[static_cast<std::size_t>(i)] == 1;
        const bool is_easy_neg = !is_pos && easy[static_cast<std::size_t>(i)];
        // hard negatives share the positives' cheap distribution
        data.at(i, 0) = is_easy_neg ? reject_side(&stray_easy_cheap)
                                    : pass_side(is_pos ? &stray_pos_cheap : nullptr);
        for (int c = 1; c < spec.cheap_dim; ++c) data.at(i, c) = rng.normal();
        data.at(i, spec.cheap_dim) =
            is_pos ? pass_side(&stray_pos_exp) : reject_side(&stray_neg_exp);
        for (int c = 1; c < spec.expensive_dim; ++c) data.at(i, spec.cheap_dim + c) = rng.normal();
    }
    return data;
}

}  // namespace firmcascade
