#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

namespace annstat {

struct Dataset {
    Eigen::MatrixXd features;  // n x d
    std::vector<int> labels;   // class indices in [0, num_classes())
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;

    std::size_t size() const { return labels.size(); }
    Eigen::Index num_features() const { return features.cols(); }
    int num_classes() const { return static_cast<int>(class_names.size()); }

    void validate() const;
    Dataset subset(std::span<const std::size_t> rows) const;
    std::vector<std::size_t> class_counts() const;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Per class, shuffles that class's rows with a seeded generator and sends
// round(test_fraction * class_size) of them to the test side. Both index
// lists come back sorted ascending.
SplitIndices stratified_split(std::span<const int> labels, int num_classes, double test_fraction,
                              std::uint64_t seed);

struct TrainTestSplit {
    Dataset train;
    Dataset test;
    SplitIndices indices;
};

TrainTestSplit split_dataset(const Dataset& data, double test_fraction, std::uint64_t seed);

// Descriptive statistics of one feature column; quartiles use linear
// interpolation between order statistics.
struct ColumnSummary {
    std::string name;
    std::size_t count = 0;
    double mean = 0.0;
    double std_dev = 0.0;  // n - 1 denominator
    double min = 0.0;
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
    double max = 0.0;
};

ColumnSummary summarize_column(std::span<const double> values, std::string name);
std::vector<ColumnSummary> describe(const Dataset& data);

// Labels are mapped to class indices in order of first appearance.
Dataset parse_dataset_csv(std::istream& in, const std::string& label_column,
                          const std::string& source_name);
Dataset ingest_csv(const std::filesystem::path& path, const std::string& label_column = "label");

}  // namespace annstat
