#include "annstat/error.hpp"
#include "annstat/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    annstat::RunConfig cfg;
    CLI::App app{"Statistical analysis of single-hidden-layer neural networks"};
    app.set_config("--config", "", "TOML/INI file with option values");
    app.require_subcommand(1);
    app.fallthrough();

    std::string data, model, out, bootstrap_run;
    app.add_option("--data", data, "Dataset CSV (header row, numeric features, label column)");
    app.add_option("--label", cfg.label_column, "Label column name")->capture_default_str();
    app.add_option("--model", model, "Model JSON written by `train`");
    app.add_option("--out", out, std::string("Output directory (default: $") + annstat::kOutputDirEnv + " or annstat_out)");
    app.add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    app.add_option("--alpha", cfg.alpha, "Significance level")->capture_default_str();
    app.add_option("--split", cfg.test_fraction, "Test fraction of the stratified split")->capture_default_str();
    app.add_option("--on", cfg.on, "Rows analysed: train, test or all")->capture_default_str();
    app.add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
    app.add_option("--lr", cfg.learning_rate, "SGD learning rate")->capture_default_str();
    app.add_option("--batch", cfg.batch_size, "Mini-batch size")->capture_default_str();
    app.add_option("--l2", cfg.l2, "L2 penalty")->capture_default_str();
    app.add_option("--level", cfg.level, "Confidence level")->capture_default_str();

    auto* train = app.add_subcommand("train", "Train the network on the training split");
    train->add_option("--hidden", cfg.hidden, "Hidden neurons")->capture_default_str();
    train->add_option("--activation", cfg.hidden_activation, "Hidden activation: relu, sigmoid, tanh, identity")
        ->capture_default_str();

    auto* analyze = app.add_subcommand("analyze", "Hidden-neuron tests")->require_subcommand(1);
    analyze->add_subcommand("hidden-test", "Mann-Whitney U per neuron and class pair");
    auto* eff = analyze->add_subcommand("efficiency", "ANOVA or Kruskal-Wallis per neuron");
    eff->add_option("--method", cfg.test_method, "anova or kruskal")->capture_default_str();

    auto* reduce = app.add_subcommand("reduce", "Hidden-layer reduction")->require_subcommand(1);
    auto* rc = reduce->add_subcommand("cluster", "Cluster neurons and retrain on aggregated features");
    rc->add_option("--m", cfg.m, "Number of clusters")->capture_default_str();
    rc->add_option("--agg", cfg.aggregation, "mean, centroid, sum or max")->capture_default_str();
    rc->add_option("--method", cfg.cluster_method, "ward or kmeans")->capture_default_str();
    rc->add_flag("--full-retrain", cfg.full_retrain, "Also retrain input weights");
    auto* rp = reduce->add_subcommand("pca", "Project hidden outputs on principal components");
    rp->add_option("--m", cfg.m, "Number of components")->capture_default_str();
    rp->add_flag("--standardize", cfg.standardize, "Standardize neurons before PCA");
    rp->add_flag("--full-retrain", cfg.full_retrain, "Also retrain input weights");

    auto* ci = app.add_subcommand("ci", "Accuracy confidence intervals")->require_subcommand(1);
    auto* clt = ci->add_subcommand("clt", "Normal/t interval from saved replicate accuracies");
    clt->add_option("--run", bootstrap_run, "bootstrap_run.csv")->required();
    auto* boot = ci->add_subcommand("bootstrap", "Basic bootstrap interval");
    boot->add_option("--replicates", cfg.replicates, "Bootstrap replicates B")->capture_default_str();
    boot->add_option("--retrain-epochs", cfg.retrain_epochs, "Epochs per replicate")->capture_default_str();
    boot->add_option("--evaluation", cfg.evaluation, "oob or in-sample")->capture_default_str();

    auto* sur = app.add_subcommand("surrogate", "Logistic-regression surrogates")->require_subcommand(1);
    auto* lr = sur->add_subcommand("lr", "Logistic regression with full inference");
    lr->add_option("--features", data, "Feature CSV (alias of --data)");
    lr->add_option("--positive", cfg.positive, "Label treated as class 1");
    auto* lrpca = sur->add_subcommand("lr-pca", "Logistic regression on leading principal components");
    lrpca->add_option("--features", data, "Feature CSV (alias of --data)");
    lrpca->add_option("--positive", cfg.positive, "Label treated as class 1");
    std::string m_range;
    lrpca->add_option("--m-range", m_range, "Component range a..b (default 1..q)");

    auto* sig = app.add_subcommand("significance", "Input significance")->require_subcommand(1);
    auto* si = sig->add_subcommand("input", "Gaussian-null test of one input");
    si->add_option("--index", cfg.input_index, "Input column j")->capture_default_str();
    si->add_option("--mn", cfg.null_draws, "Null draws")->capture_default_str();
    si->add_option("--cover-size", cfg.cover_size, "Cover members")->capture_default_str();
    si->add_option("--cover", cfg.cover, "permutation or perturbed")->capture_default_str();
    si->add_option("--epsilon", cfg.epsilon, "Perturbed cover jitter")->capture_default_str();
    si->add_option("--cover-epochs", cfg.cover_epochs, "Epochs per permutation-cover fit")->capture_default_str();
    si->add_option("--functional", cfg.functional, "basis_sq_mean or gaussian_max")->capture_default_str();

    auto* rep = app.add_subcommand("report", "Report helpers")->require_subcommand(1);
    auto* plots = rep->add_subcommand("plots", "Histogram, correlation and dendrogram data");
    plots->add_option("--kind", cfg.plot_kind, "histogram, correlation, dendrogram or all")->capture_default_str();
    plots->add_option("--bins", cfg.bins, "Histogram bins")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        for (auto* sub = app.get_subcommands().front(); sub; ) {
            cfg.subcommand += (cfg.subcommand.empty() ? "" : " ") + sub->get_name();
            const auto next = sub->get_subcommands();
            sub = next.empty() ? nullptr : next.front();
        }
        cfg.data = data;
        cfg.model = model;
        cfg.output_dir = out;
        cfg.bootstrap_run = bootstrap_run;
        if (!m_range.empty()) {
            const auto dots = m_range.find("..");
            if (dots == std::string::npos) throw annstat::ConfigError("cli", "--m-range must look like a..b");
            try {
                cfg.m_first = std::stoul(m_range.substr(0, dots));
                cfg.m_last = std::stoul(m_range.substr(dots + 2));
            } catch (const std::exception&) {
                throw annstat::ConfigError("cli", "--m-range must look like a..b");
            }
        }
        const auto report = annstat::run_pipeline(cfg);
        for (const auto& path : report.write(cfg.resolved_output_dir())) std::cout << path.string() << '\n';
    } catch (const annstat::Error& e) {
        std::cerr << "annstat: error " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "annstat: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
