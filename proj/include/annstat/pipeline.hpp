#pragma once

#include "annstat/dataset.hpp"
#include "annstat/network.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace annstat {

inline constexpr const char* kOutputDirEnv = "ANNSTAT_OUTPUT_DIR";

struct RunConfig {
    std::string subcommand;  // e.g. "train", "analyze hidden-test", "ci bootstrap"
    std::filesystem::path data;
    std::string label_column = "label";
    std::filesystem::path model;
    std::filesystem::path output_dir;  // empty: $ANNSTAT_OUTPUT_DIR, then "annstat_out"
    std::uint64_t seed = 42;
    double alpha = 0.05;
    double test_fraction = 0.2;
    std::string on = "test";  // rows analysed by analyze/significance/plots: train | test | all

    // train
    std::size_t hidden = 10;
    std::string hidden_activation = "relu";
    int epochs = 200;
    double learning_rate = 0.05;
    std::size_t batch_size = 8;
    double l2 = 0.0;

    // analyze efficiency
    std::string test_method = "anova";

    // reduce
    std::size_t m = 3;
    std::string cluster_method = "ward";
    std::string aggregation = "mean";
    bool full_retrain = false;
    bool standardize = false;

    // ci
    std::size_t replicates = 1000;
    int retrain_epochs = 10;
    std::string evaluation = "oob";
    double level = 0.95;
    std::filesystem::path bootstrap_run;  // ci clt input

    // surrogate
    std::string positive;  // label treated as class 1; empty: second class in appearance order
    std::size_t m_first = 1;
    std::size_t m_last = 0;  // 0: number of features

    // significance
    std::size_t input_index = 0;
    std::size_t null_draws = 10000;
    std::size_t cover_size = 20;
    std::string cover = "permutation";
    double epsilon = 0.1;
    int cover_epochs = 50;
    std::string functional = "basis_sq_mean";

    // report plots
    std::string plot_kind = "all";  // histogram | correlation | dendrogram | all
    std::size_t bins = 20;

    void validate() const;
    std::filesystem::path resolved_output_dir() const;
    // Canonical JSON of every field that influences results (not output_dir).
    std::string canonical_json() const;
    std::string hash() const;  // 16 hex digits, fnv1a64 of canonical_json()
};

struct Report {
    std::string name;       // report file stem
    std::string document;   // JSON text
    std::map<std::string, std::string> sidecars;  // file name -> content

    // Writes <name>.json and every sidecar atomically; returns written paths.
    std::vector<std::filesystem::path> write(const std::filesystem::path& dir) const;
};

Report run_pipeline(const RunConfig& cfg);

struct CorrelationMatrix {
    Eigen::MatrixXd values;        // k x k
    std::vector<bool> degenerate;  // zero-variance columns
};

// Pearson correlation of columns. Zero-variance columns correlate 0 with
// everything (1 on their own diagonal) and are flagged.
CorrelationMatrix correlation_matrix(const Eigen::MatrixXd& columns);

struct Histogram {
    std::vector<double> edges;  // bins + 1
    std::vector<std::size_t> counts;
};

// Equal-width bins over [min, max]; the last bin is closed.
Histogram histogram(const Eigen::VectorXd& values, std::size_t bins);

enum class PlotKind { histogram, correlation, dendrogram, all };
PlotKind plot_kind_from_string(const std::string& name);

// File name -> CSV content for the requested plot data.
std::map<std::string, std::string> emit_plot_data(const ActivationMatrix& acts, PlotKind kind, std::size_t bins = 20);

}  // namespace annstat
