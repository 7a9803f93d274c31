#include "annstat/resampling.hpp"

#include "annstat/csv.hpp"
#include "annstat/error.hpp"
#include "annstat/random.hpp"
#include "annstat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace annstat {

namespace {
constexpr const char* kModule = "resampling";

void require_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw InputError(kModule, "confidence level must lie in (0, 1)");
}
}  // namespace

std::string to_string(IntervalMethod m) {
    return m == IntervalMethod::clt ? "clt" : "bootstrap_basic";
}

std::string to_string(ReplicateEvaluation e) {
    return e == ReplicateEvaluation::out_of_bag ? "out_of_bag" : "in_sample";
}

ReplicateEvaluation replicate_evaluation_from_string(const std::string& name) {
    if (name == "out_of_bag" || name == "oob") return ReplicateEvaluation::out_of_bag;
    if (name == "in_sample" || name == "in-sample") return ReplicateEvaluation::in_sample;
    throw ConfigError(kModule, "unknown replicate evaluation '" + name + "'");
}

IntervalEstimate clt_ci(std::span<const double> accuracies, double level) {
    require_level(level);
    const std::size_t n = accuracies.size();
    if (n < 2) throw InputError(kModule, "CLT interval needs at least two accuracies");
    const auto nd = static_cast<double>(n);
    const double mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / nd;
    double ss = 0.0;
    for (double a : accuracies) ss += (a - mean) * (a - mean);
    const double s = std::sqrt(ss / (nd - 1.0));
    const double alpha = 1.0 - level;

    IntervalEstimate ci;
    ci.method = IntervalMethod::clt;
    ci.level = level;
    ci.n_samples = n;
    ci.mean_accuracy = mean;
    ci.std_dev = s;
    ci.critical_value = n < 30 ? t_quantile(1.0 - alpha / 2.0, nd - 1.0) : normal_quantile(1.0 - alpha / 2.0);
    const double margin = ci.critical_value * s / std::sqrt(nd);
    ci.lower = mean - margin;
    ci.upper = mean + margin;
    if (ci.lower < 0.0 || ci.upper > 1.0) ci.warnings.push_back("interval extends beyond [0, 1]; reported unclipped");
    return ci;
}

IntervalEstimate bootstrap_ci(std::span<const double> accuracies, double level) {
    require_level(level);
    const std::size_t b = accuracies.size();
    if (b < 2) throw InputError(kModule, "bootstrap interval needs at least two replicates");
    const auto bd = static_cast<double>(b);
    const double mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / bd;
    std::vector<double> diffs;
    diffs.reserve(b);
    for (double a : accuracies) diffs.push_back(a - mean);
    std::sort(diffs.begin(), diffs.end());

    const double alpha = 1.0 - level;
    // 1e-9 absorbs representation error, e.g. (1 - 0.95) / 2 * 200 = 5.000000000000004
    auto k = static_cast<std::size_t>(std::ceil(alpha / 2.0 * bd - 1e-9));
    auto l = static_cast<std::size_t>(std::floor((1.0 - alpha / 2.0) * bd + 1e-9));
    k = std::clamp<std::size_t>(k, 1, b);
    l = std::clamp<std::size_t>(l, 1, b);

    IntervalEstimate ci;
    ci.method = IntervalMethod::bootstrap_basic;
    ci.level = level;
    ci.n_samples = b;
    ci.mean_accuracy = mean;
    ci.lower = mean - diffs[l - 1];
    ci.upper = mean - diffs[k - 1];
    if (ci.lower > ci.upper) std::swap(ci.lower, ci.upper);  // only when k > l for tiny B
    return ci;
}

IntervalEstimate bootstrap_ci(const BootstrapRun& run, double level) {
    return bootstrap_ci(run.accuracies, level);
}

BootstrapRun bootstrap_accuracies(const NetworkModel& base, const Dataset& data, const BootstrapConfig& cfg) {
    if (cfg.replicates < 2) throw InputError(kModule, "bootstrap needs B >= 2");
    cfg.retrain.validate(/*allow_zero_epochs=*/true);
    base.validate();
    data.validate();
    const std::size_t n = data.size();
    const auto counts = data.class_counts();

    BootstrapRun run;
    run.retrain = cfg.retrain;
    run.evaluation = cfg.evaluation;
    run.accuracies.reserve(cfg.replicates);
    run.seeds.reserve(cfg.replicates);

    std::vector<std::size_t> drawn(n);
    std::vector<char> in_bag(n);
    for (std::size_t i = 0; i < cfg.replicates; ++i) {
        const std::uint64_t seed = derive_seed(cfg.seed, "bootstrap", i);
        Rng rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<std::size_t> oob;
        bool ok = false;
        for (int attempt = 0; attempt <= cfg.max_retries && !ok; ++attempt) {
            std::fill(in_bag.begin(), in_bag.end(), 0);
            std::vector<std::size_t> seen(counts.size(), 0);
            for (auto& r : drawn) {
                r = pick(rng);
                in_bag[r] = 1;
                ++seen[static_cast<std::size_t>(data.labels[r])];
            }
            ok = true;
            for (std::size_t c = 0; c < counts.size(); ++c) {
                if (counts[c] > 0 && seen[c] == 0) ok = false;
            }
            oob.clear();
            for (std::size_t r = 0; r < n; ++r) {
                if (!in_bag[r]) oob.push_back(r);
            }
            if (cfg.evaluation == ReplicateEvaluation::out_of_bag && oob.empty()) ok = false;
        }
        if (!ok) {
            throw InputError(kModule, "replicate " + std::to_string(i) + " could not draw every class after " +
                                          std::to_string(cfg.max_retries) + " retries");
        }
        const Dataset sample = data.subset(drawn);
        TrainConfig retrain = cfg.retrain;
        retrain.seed = seed;
        const NetworkModel fitted = continue_training(base, sample, retrain);
        const double acc = cfg.evaluation == ReplicateEvaluation::out_of_bag ? accuracy(fitted, data.subset(oob))
                                                                               : accuracy(fitted, sample);
        run.accuracies.push_back(acc);
        run.seeds.push_back(seed);
    }
    return run;
}

std::string bootstrap_run_csv(const BootstrapRun& run) {
    CsvTable csv;
    csv.header = {"replicate", "seed", "accuracy"};
    for (std::size_t i = 0; i < run.accuracies.size(); ++i) {
        csv.add_row({std::to_string(i), i < run.seeds.size() ? std::to_string(run.seeds[i]) : "",
                     format_double(run.accuracies[i])});
    }
    return csv.to_string();
}

BootstrapRun parse_bootstrap_run_csv(const std::string& text, const std::string& source_name) {
    std::istringstream in(text);
    const CsvTable csv = parse_csv_text(in, source_name);
    auto col = [&](const std::string& name) -> std::ptrdiff_t {
        auto it = std::find(csv.header.begin(), csv.header.end(), name);
        return it == csv.header.end() ? -1 : it - csv.header.begin();
    };
    const auto acc_col = col("accuracy");
    const auto seed_col = col("seed");
    if (acc_col < 0) throw ParseError(kModule, "missing 'accuracy' column", source_name + ":1");
    BootstrapRun run;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const std::string location = source_name + ": data row " + std::to_string(r + 1);
        const double acc = parse_number(csv.rows[r][static_cast<std::size_t>(acc_col)], location);
        if (!(acc >= 0.0 && acc <= 1.0)) throw ParseError(kModule, "accuracy outside [0, 1]", location);
        run.accuracies.push_back(acc);
        if (seed_col >= 0 && !csv.rows[r][static_cast<std::size_t>(seed_col)].empty()) {
            run.seeds.push_back(std::stoull(csv.rows[r][static_cast<std::size_t>(seed_col)]));
        }
    }
    return run;
}

void save_bootstrap_run(const BootstrapRun& run, const std::filesystem::path& path) {
    write_file_atomic(path, bootstrap_run_csv(run));
}

BootstrapRun load_bootstrap_run(const std::filesystem::path& path) {
    return parse_bootstrap_run_csv(read_text_file(path), path.string());
}

}  // namespace annstat
