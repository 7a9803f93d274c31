#include "annstat/dataset.hpp"

#include "annstat/csv.hpp"
#include "annstat/error.hpp"
#include "annstat/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace annstat {

void Dataset::validate() const {
    if (labels.empty()) throw ValidationError("dataset", "dataset has no rows");
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw ShapeError("dataset", "feature rows do not match label count");
    }
    if (!feature_names.empty() && feature_names.size() != static_cast<std::size_t>(features.cols())) {
        throw ShapeError("dataset", "feature name count does not match feature columns");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes()) {
            throw ValidationError("dataset", "label out of range at row " + std::to_string(i));
        }
    }
    if (!features.allFinite()) throw ValidationError("dataset", "features contain missing or non-finite values");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= labels.size()) throw ShapeError("dataset", "row index out of range");
        out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
        out.labels.push_back(labels[rows[i]]);
    }
    out.feature_names = feature_names;
    out.class_names = class_names;
    return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
    return counts;
}

SplitIndices stratified_split(std::span<const int> labels, int num_classes, double test_fraction,
                              std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("dataset", "test fraction must lie in (0, 1)");
    }
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
    }
    SplitIndices split;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& rows = by_class[c];
        Rng rng(derive_seed(seed, "split", c));
        std::shuffle(rows.begin(), rows.end(), rng);
        auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
        n_test = std::min(n_test, rows.size());
        split.test.insert(split.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
        split.train.insert(split.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

TrainTestSplit split_dataset(const Dataset& data, double test_fraction, std::uint64_t seed) {
    TrainTestSplit out;
    out.indices = stratified_split(data.labels, data.num_classes(), test_fraction, seed);
    out.train = data.subset(out.indices.train);
    out.test = data.subset(out.indices.test);
    return out;
}

namespace {

double interpolated_quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

ColumnSummary summarize_column(std::span<const double> values, std::string name) {
    ColumnSummary s;
    s.name = std::move(name);
    s.count = values.size();
    if (values.empty()) return s;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
    if (sorted.size() > 1) {
        double ss = 0.0;
        for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
        s.std_dev = std::sqrt(ss / (n - 1.0));
    }
    s.min = sorted.front();
    s.max = sorted.back();
    s.q25 = interpolated_quantile(sorted, 0.25);
    s.median = interpolated_quantile(sorted, 0.5);
    s.q75 = interpolated_quantile(sorted, 0.75);
    return s;
}

std::vector<ColumnSummary> describe(const Dataset& data) {
    std::vector<ColumnSummary> out;
    for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
        std::vector<double> column(data.features.col(c).begin(), data.features.col(c).end());
        std::string name = c < static_cast<Eigen::Index>(data.feature_names.size())
                               ? data.feature_names[static_cast<std::size_t>(c)]
                               : "x" + std::to_string(c);
        out.push_back(summarize_column(column, std::move(name)));
    }
    return out;
}

Dataset parse_dataset_csv(std::istream& in, const std::string& label_column,
                          const std::string& source_name) {
    const CsvTable table = parse_csv_text(in, source_name);
    auto label_it = std::find(table.header.begin(), table.header.end(), label_column);
    if (label_it == table.header.end()) {
        throw ConfigError("dataset", "label column '" + label_column + "' not found in " + source_name);
    }
    const auto label_idx = static_cast<std::size_t>(label_it - table.header.begin());

    Dataset data;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c != label_idx) data.feature_names.push_back(table.header[c]);
    }
    data.features.resize(static_cast<Eigen::Index>(table.rows.size()),
                         static_cast<Eigen::Index>(data.feature_names.size()));
    std::map<std::string, int> class_index;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        Eigen::Index out_col = 0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            // header is line 1; blank lines are skipped, so report data row number
            const std::string location = source_name + ": data row " + std::to_string(r + 1) + ", column '" +
                                         table.header[c] + "'";
            if (c == label_idx) {
                if (row[c].empty()) throw ParseError("dataset", "missing label", location);
                auto [it, inserted] = class_index.try_emplace(row[c], static_cast<int>(data.class_names.size()));
                if (inserted) data.class_names.push_back(row[c]);
                data.labels.push_back(it->second);
            } else {
                const double v = parse_number(row[c], location);
                if (!std::isfinite(v)) throw ParseError("dataset", "non-finite value", location);
                data.features(static_cast<Eigen::Index>(r), out_col++) = v;
            }
        }
    }
    data.validate();
    return data;
}

Dataset ingest_csv(const std::filesystem::path& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw ConfigError("dataset", "cannot open " + path.string());
    return parse_dataset_csv(in, label_column, path.string());
}

}  // namespace annstat
