#pragma once

#include "annstat/dataset.hpp"
#include "annstat/network.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace annstat {

enum class IntervalMethod { clt, bootstrap_basic };
std::string to_string(IntervalMethod m);

struct IntervalEstimate {
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
    IntervalMethod method = IntervalMethod::clt;
    std::size_t n_samples = 0;
    double mean_accuracy = 0.0;
    double std_dev = 0.0;         // clt only
    double critical_value = 0.0;  // clt only
    std::vector<std::string> warnings;

    double width() const { return upper - lower; }
};

/// Mean +/- crit * s / sqrt(n), s with n - 1 denominator. crit is the
/// t quantile (n - 1 df) for n < 30 and the normal quantile otherwise.
/// Endpoints are never clipped to [0, 1]; a warning is attached instead.
IntervalEstimate clt_ci(std::span<const double> accuracies, double level = 0.95);

enum class ReplicateEvaluation { out_of_bag, in_sample };
std::string to_string(ReplicateEvaluation e);
ReplicateEvaluation replicate_evaluation_from_string(const std::string& name);

struct BootstrapConfig {
    std::size_t replicates = 1000;
    TrainConfig retrain{.epochs = 10};  // further epochs from the base weights
    std::uint64_t seed = 42;
    ReplicateEvaluation evaluation = ReplicateEvaluation::out_of_bag;
    int max_retries = 100;
};

struct BootstrapRun {
    std::vector<double> accuracies;
    std::vector<std::uint64_t> seeds;  // seeds[i] = derive_seed(master, "bootstrap", i)
    TrainConfig retrain;
    ReplicateEvaluation evaluation = ReplicateEvaluation::out_of_bag;

    std::size_t size() const { return accuracies.size(); }
};

// Each replicate draws n rows with replacement, redraws if a class present in
// `data` is missing (or, out-of-bag, if no row is left out), retrains from
// the base weights and records its accuracy.
BootstrapRun bootstrap_accuracies(const NetworkModel& base, const Dataset& data, const BootstrapConfig& cfg);

/// Basic (reverse-percentile) interval: with d_i = acc_i - mean sorted
/// ascending, k = ceil(alpha/2 * B), l = floor((1 - alpha/2) * B),
/// returns [mean - d_(l), mean - d_(k)].
IntervalEstimate bootstrap_ci(std::span<const double> accuracies, double level = 0.95);
IntervalEstimate bootstrap_ci(const BootstrapRun& run, double level = 0.95);

// CSV columns: replicate, seed, accuracy.
std::string bootstrap_run_csv(const BootstrapRun& run);
BootstrapRun parse_bootstrap_run_csv(const std::string& text, const std::string& source_name = "<memory>");
void save_bootstrap_run(const BootstrapRun& run, const std::filesystem::path& path);
BootstrapRun load_bootstrap_run(const std::filesystem::path& path);

}  // namespace annstat
