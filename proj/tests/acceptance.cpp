// Acceptance checks: one PASS/FAIL line per criterion, exit 1 if any fails.

#include "annstat/dataset.hpp"
#include "annstat/network.hpp"
#include "annstat/pipeline.hpp"
#include "annstat/random.hpp"
#include "annstat/reduction.hpp"
#include "annstat/resampling.hpp"
#include "annstat/significance.hpp"
#include "annstat/stats.hpp"
#include "annstat/surrogate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

using namespace annstat;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failed = 0;

void report(int id, const char* title, const std::function<Outcome()>& check) {
    Outcome out;
    try {
        out = check();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    if (!out.pass) ++g_failed;
    std::printf("%s criterion %d: %s | %s\n", out.pass ? "PASS" : "FAIL", id, title, out.detail.c_str());
    std::fflush(stdout);
}

Dataset iris() { return ingest_csv(std::string(ANNSTAT_DATA_DIR) + "/iris.csv"); }

TrainConfig iris_training(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.seed = derive_seed(seed, "train");
    return cfg;
}

const Architecture kIrisArch{4, 10, 3};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// brute-force U null distribution
std::vector<std::uint64_t> enumerate_counts(std::size_t n1, std::size_t n2) {
    const std::size_t n = n1 + n2;
    std::vector<std::uint64_t> counts(n1 * n2 + 1, 0);
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != n1) continue;
        std::size_t u = 0, below = 0;
        for (std::size_t r = 0; r < n; ++r) {
            if (mask & (1u << r)) u += below;
            else ++below;
        }
        ++counts[u];
    }
    return counts;
}

Outcome criterion1() {
    const auto data = iris();
    const auto start = std::chrono::steady_clock::now();
    double worst = 1.0;
    std::ostringstream accs;
    std::size_t params = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto split = split_dataset(data, 0.2, seed);
        const auto model = train(split.train, kIrisArch, iris_training(seed));
        params = model.parameter_count();
        const double acc = accuracy(model, split.test);
        worst = std::min(worst, acc);
        accs << (seed > 1 ? "," : "") << fmt("%.4f", acc);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {params == 83 && worst >= 0.90 && secs < 60.0,
            "params=" + std::to_string(params) + " test_acc=[" + accs.str() + "] time=" + fmt("%.2fs", secs)};
}

Outcome criterion2() {
    std::size_t mismatches = 0, cases = 0;
    for (std::size_t n1 = 1; n1 <= 6; ++n1) {
        for (std::size_t n2 = 1; n2 <= 6; ++n2) {
            const auto oracle = enumerate_counts(n1, n2);
            const std::uint64_t total = std::accumulate(oracle.begin(), oracle.end(), std::uint64_t{0});
            for (std::size_t u = 0; u <= n1 * n2; ++u) {
                std::uint64_t le = 0, ge = 0;
                for (std::size_t v = 0; v < oracle.size(); ++v) {
                    if (v <= u) le += oracle[v];
                    if (v >= u) ge += oracle[v];
                }
                const auto p = mann_whitney_exact_p(u, n1, n2);
                ++cases;
                if (p.numerator != std::min(total, 2 * std::min(le, ge)) || p.denominator != total) ++mismatches;
            }
        }
    }
    std::vector<double> a(30), b(30);
    for (std::size_t i = 0; i < 30; ++i) {
        a[i] = 0.01 * static_cast<double>(i);
        b[i] = 1.0 + 0.01 * static_cast<double>(i);
    }
    const auto r = mann_whitney_u(a, b);
    const bool separated = r.statistic == 0.0 && std::abs(r.p_value / 3.02e-11 - 1.0) <= 0.05;
    return {mismatches == 0 && separated, std::to_string(cases) + " exact cases, " + std::to_string(mismatches) +
                                              " mismatches; 30v30 U=" + fmt("%g", r.statistic) +
                                              " p=" + fmt("%.4g", r.p_value)};
}

Outcome criterion3() {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> acc(1000);
    for (auto& x : acc) x = g(rng);
    const double m = std::accumulate(acc.begin(), acc.end(), 0.0) / 1000.0;
    double ss = 0;
    for (double x : acc) ss += (x - m) * (x - m);
    const double s = std::sqrt(ss / 999.0);
    for (auto& x : acc) x = 0.9614 + 0.0352 * (x - m) / s;
    const auto ci = clt_ci(acc, 0.95);
    const bool ok = std::abs(ci.lower - 0.9592) <= 2e-4 && std::abs(ci.upper - 0.9636) <= 2e-4;
    return {ok, "[" + fmt("%.5f", ci.lower) + ", " + fmt("%.5f", ci.upper) + "]"};
}

Outcome criterion4() {
    const auto data = iris();
    bool ok = true;
    std::ostringstream detail;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto split = split_dataset(data, 0.2, seed);
        const auto model = train(split.train, kIrisArch, iris_training(seed));
        BootstrapConfig cfg;
        cfg.replicates = 200;
        cfg.seed = seed;
        cfg.retrain.seed = derive_seed(seed, "bootstrap-retrain");
        const auto run = bootstrap_accuracies(model, split.train, cfg);
        const auto boot = bootstrap_ci(run);
        const auto clt = clt_ci(run.accuracies);
        ok = ok && boot.width() > clt.width();
        detail << (seed > 1 ? "; " : "") << "seed " << seed << ": boot " << fmt("%.4f", boot.width()) << " vs clt "
               << fmt("%.4f", clt.width());
    }
    return {ok, detail.str()};
}

struct ClusterCheck {
    bool holds = false;
    std::string detail;
};

// Per-cluster sub-networks retrained end to end (input weights included).
ClusterCheck cluster_ordering(const Dataset& data, std::uint64_t seed, bool full_retrain) {
    const auto split = split_dataset(data, 0.2, seed);
    const auto model = train(split.train, kIrisArch, iris_training(seed));
    const double original = accuracy(model, split.test);
    const auto acts = extract_hidden(model, split.train);
    const auto asg = cluster_neurons(acts, 3);
    const auto sizes = asg.sizes();
    const auto largest = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    TrainConfig head;
    head.seed = derive_seed(seed, "reduce");
    std::vector<double> accs(asg.clusters);
    for (std::size_t c = 0; c < asg.clusters; ++c) {
        accs[c] = build_cluster_submodel(model, split.train, split.test, asg, c, head, ReductionOptions{full_retrain})
                      .test_accuracy;
    }
    ClusterCheck out;
    out.holds = asg.clusters == 3 && std::abs(accs[largest] - original) <= 0.05;
    std::ostringstream detail;
    detail << "original " << fmt("%.4f", original) << "; clusters";
    for (std::size_t c = 0; c < asg.clusters; ++c) {
        detail << " [size " << sizes[c] << " acc " << fmt("%.4f", accs[c]) << "]";
        if (sizes[c] == 1 && c != largest && !(accs[c] < accs[largest])) out.holds = false;
    }
    out.detail = detail.str();
    return out;
}

Outcome criterion5() {
    const auto data = iris();
    const auto main = cluster_ordering(data, 42, true);
    int full_ok = 0, head_ok = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        full_ok += cluster_ordering(data, seed, true).holds;
        head_ok += cluster_ordering(data, seed, false).holds;
    }
    return {main.holds, "seed 42, full retrain: " + main.detail + "; seeds 1-5 satisfying: full retrain " +
                            std::to_string(full_ok) + "/5, head-only " + std::to_string(head_ok) + "/5"};
}

Outcome criterion6() {
    const auto data = iris();
    const auto split = split_dataset(data, 0.2, 42);
    const auto model = train(split.train, kIrisArch, iris_training(42));
    const auto h = hidden_outputs(model, split.train.features);
    const auto proj = pca_fit(h, 10);
    const double cum = proj.cumulative_ratio[9];
    const double recon = (pca_inverse_transform(proj, pca_transform(proj, h)) - h).cwiseAbs().maxCoeff();

    // virginica vs rest, all four raw features
    std::vector<int> ytr, yte;
    for (int l : split.train.labels) ytr.push_back(l == 2);
    for (int l : split.test.labels) yte.push_back(l == 2);
    const auto sweep = lr_pca_sweep(split.train.features, ytr, split.test.features, yte, 4, 4);
    const Eigen::RowVectorXd mu = split.train.features.colwise().mean();
    const auto raw = logistic_fit(split.train.features.rowwise() - mu, ytr);
    const auto pred = raw.predict(split.test.features.rowwise() - mu);
    double hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == yte[i];
    const double raw_acc = hits / static_cast<double>(pred.size());
    const double gap = std::abs(sweep.rows.front().accuracy - raw_acc);
    return {std::abs(cum - 1.0) <= 1e-9 && recon <= 1e-8 && gap <= 1e-9,
            "cumulative=" + fmt("%.12f", cum) + " reconstruction=" + fmt("%.2e", recon) +
                " lr-pca(m=q)=" + fmt("%.4f", sweep.rows.front().accuracy) + " raw=" + fmt("%.4f", raw_acc)};
}

Outcome criterion7() {
    const auto s = fit_statistics(-30142.35, -132000.0, 23, 222019);
    const auto row = coefficient_row(-0.4315, 0.0259, 0.95);
    const bool ok = std::abs(s.aic - 60332.70) <= 0.01 && std::abs(s.bic - 60580.15) <= 0.01 &&
                    std::abs(s.pseudo_r2 - 0.772) <= 0.001 && std::abs(row.z + 16.66) <= 0.05 &&
                    std::abs(row.ci_lower + 0.482) <= 0.003 && std::abs(row.ci_upper + 0.381) <= 0.003;
    return {ok, "AIC=" + fmt("%.2f", s.aic) + " BIC=" + fmt("%.2f", s.bic) + " R2=" + fmt("%.4f", s.pseudo_r2) +
                    " z=" + fmt("%.2f", row.z) + " CI=[" + fmt("%.4f", row.ci_lower) + ", " +
                    fmt("%.4f", row.ci_upper) + "]"};
}

Outcome criterion8() {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const Architecture arch{4, 10, 3, t % 2 ? Activation::tanh : Activation::sigmoid, Activation::softmax};
        NetworkModel m = initialize_model(arch, 1.0, static_cast<std::uint64_t>(t));
        m.hidden_biases = Eigen::VectorXd::NullaryExpr(10, [&] { return g(rng); });
        const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(4, [&] { return g(rng); });
        for (Eigen::Index c = 0; c < 3; ++c) {
            const auto grad = input_gradient(m, x, c);
            for (Eigen::Index j = 0; j < 4; ++j) {
                const double h = 1e-6;
                Eigen::VectorXd up = x, down = x;
                up[j] += h;
                down[j] -= h;
                const double fd = (forward(m, up).output[c] - forward(m, down).output[c]) / (2 * h);
                worst = std::max(worst, std::abs(grad[j] - fd) / std::max(std::abs(fd), 1e-3));
            }
        }
    }
    return {worst < 1e-4, "max relative error " + fmt("%.2e", worst)};
}

Dataset noise_input_data(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        ds.features(r, 0) = g(rng);
        ds.features(r, 1) = g(rng);
        ds.labels.push_back(ds.features(r, 0) + 0.5 * g(rng) > 0.0 ? 1 : 0);
    }
    ds.feature_names = {"x0", "x1"};
    ds.class_names = {"neg", "pos"};
    return ds;
}

Outcome criterion9() {
    const int sims = 200;
    TrainConfig tc;
    tc.epochs = 40;
    tc.learning_rate = 0.1;
    NullConfig nc;
    nc.draws = 1000;
    nc.cover_size = 20;
    nc.cover_training = tc;
    int rejects = 0;
    for (int s = 0; s < sims; ++s) {
        const auto ds = noise_input_data(100, 5000 + static_cast<std::uint64_t>(s));
        tc.seed = derive_seed(7, "size-train", static_cast<std::uint64_t>(s));
        const auto m = train(ds, Architecture{2, 4, 2}, tc);
        nc.seed = derive_seed(7, "size-null", static_cast<std::uint64_t>(s));
        rejects += input_significance_test(m, ds, 1, 0.05, nc).reject;
    }
    const double size = static_cast<double>(rejects) / sims;

    // dead input: zero first-layer column
    const auto ds = noise_input_data(100, 1);
    tc.seed = 1;
    auto m = train(ds, Architecture{2, 4, 2}, tc);
    m.hidden_weights.col(1).setZero();
    const auto d = input_significance_test(m, ds, 1, 0.05, nc);
    return {size <= 0.10 && d.statistic == 0.0 && !d.reject,
            "empirical size " + fmt("%.3f", size) + " over " + std::to_string(sims) +
                " sims; dead input statistic=" + fmt("%g", d.statistic) + (d.reject ? " rejected" : " not rejected")};
}

Outcome criterion10() {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "annstat_acceptance";
    fs::remove_all(dir);
    RunConfig tr;
    tr.subcommand = "train";
    tr.data = std::string(ANNSTAT_DATA_DIR) + "/iris.csv";
    tr.output_dir = dir;
    run_pipeline(tr).write(dir);

    int checked = 0, differing = 0;
    std::string which;
    const char* subs[] = {"train",        "analyze hidden-test", "analyze efficiency", "reduce cluster",
                          "reduce pca",   "ci bootstrap",        "surrogate lr",       "surrogate lr-pca",
                          "significance input", "report plots"};
    for (const char* sub : subs) {
        RunConfig cfg = tr;
        cfg.subcommand = sub;
        cfg.model = dir / "model.json";
        cfg.replicates = 50;
        cfg.null_draws = 500;
        cfg.cover_size = 5;
        cfg.positive = "virginica";
        const auto a = run_pipeline(cfg);
        const auto b = run_pipeline(cfg);
        ++checked;
        if (a.document != b.document || a.sidecars != b.sidecars) {
            ++differing;
            which += std::string(" ") + sub;
        }
    }
    RunConfig clt;
    clt.subcommand = "ci clt";
    RunConfig boot = tr;
    boot.subcommand = "ci bootstrap";
    boot.model = dir / "model.json";
    boot.replicates = 50;
    run_pipeline(boot).write(dir);
    clt.bootstrap_run = dir / "bootstrap_run.csv";
    ++checked;
    if (run_pipeline(clt).document != run_pipeline(clt).document) {
        ++differing;
        which += " ci clt";
    }
    return {differing == 0, std::to_string(checked) + " subcommands re-run, " + std::to_string(differing) +
                                " differing" + which};
}

}  // namespace

int main() {
    report(1, "Iris 4-10-3 network trains to >= 0.90 test accuracy on 5 seeds", criterion1);
    report(2, "Mann-Whitney exact p matches enumeration; separated 30 vs 30 case", criterion2);
    report(3, "CLT interval on 1000 synthetic accuracies", criterion3);
    report(4, "Bootstrap interval wider than CLT on Iris, B=200, 3 seeds", criterion4);
    report(5, "Ward m=3 clusters and per-cluster models on Iris", criterion5);
    report(6, "PCA completeness at m=k and LR-PCA identity at m=q", criterion6);
    report(7, "Logistic fit statistics and coefficient inference arithmetic", criterion7);
    report(8, "Analytic input gradients match finite differences", criterion8);
    report(9, "Input significance test size and dead-input behaviour", criterion9);
    report(10, "Subcommand outputs are deterministic", criterion10);
    std::printf("%d of 10 criteria failed\n", g_failed);
    return g_failed == 0 ? 0 : 1;
}
