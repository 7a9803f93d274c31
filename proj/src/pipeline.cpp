#include "annstat/pipeline.hpp"

#include "annstat/csv.hpp"
#include "annstat/error.hpp"
#include "annstat/random.hpp"
#include "annstat/reduction.hpp"
#include "annstat/resampling.hpp"
#include "annstat/significance.hpp"
#include "annstat/stats.hpp"
#include "annstat/surrogate.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

namespace annstat {

namespace {

using json = nlohmann::ordered_json;
constexpr const char* kModule = "cli";

const std::set<std::string> kSubcommands = {
    "train",        "analyze hidden-test", "analyze efficiency", "reduce cluster",   "reduce pca",
    "ci clt",       "ci bootstrap",        "surrogate lr",       "surrogate lr-pca", "significance input",
    "report plots"};

bool needs_model(const std::string& sub) {
    return sub.starts_with("analyze") || sub.starts_with("reduce") || sub == "ci bootstrap" ||
           sub == "significance input" || sub == "report plots";
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json interval_json(const IntervalEstimate& ci) {
    json j;
    j["method"] = to_string(ci.method);
    j["level"] = ci.level;
    j["lower"] = ci.lower;
    j["upper"] = ci.upper;
    j["width"] = ci.width();
    j["n_samples"] = ci.n_samples;
    j["mean_accuracy"] = ci.mean_accuracy;
    if (ci.method == IntervalMethod::clt) {
        j["std_dev"] = ci.std_dev;
        j["critical_value"] = ci.critical_value;
    }
    j["warnings"] = ci.warnings;
    return j;
}

json class_report_json(const ClassReport& r, const std::vector<std::string>& names) {
    auto metrics = [](const ClassMetrics& m) {
        return json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
    };
    json j;
    json per = json::array();
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        json row = metrics(r.per_class[c]);
        row["class"] = c < names.size() ? names[c] : std::to_string(c);
        per.push_back(row);
    }
    j["per_class"] = per;
    j["accuracy"] = r.accuracy;
    j["macro_avg"] = metrics(r.macro);
    j["weighted_avg"] = metrics(r.weighted);
    j["notes"] = r.notes;
    return j;
}

json reduced_summary(const std::string& name, const ReducedModel& r) {
    return json{{"model", name},
                {"kind", to_string(r.kind)},
                {"reduced_dim", r.reduced_dim()},
                {"full_retrain", r.full_retrain},
                {"train_accuracy", r.train_accuracy},
                {"test_accuracy", r.test_accuracy},
                {"head_parameters", r.head_parameter_count()},
                {"trainable_parameters", r.trainable_parameter_count()},
                {"total_parameters", r.total_parameter_count()}};
}

struct Context {
    const RunConfig& cfg;
    Dataset data;
    TrainTestSplit split;
    NetworkModel model;
    bool has_model = false;

    const Dataset& rows() const {
        if (cfg.on == "train") return split.train;
        if (cfg.on == "test") return split.test;
        return data;
    }
};

TrainConfig train_config(const RunConfig& cfg, int epochs, std::string_view component) {
    TrainConfig t;
    t.epochs = epochs;
    t.learning_rate = cfg.learning_rate;
    t.batch_size = cfg.batch_size;
    t.l2_penalty = cfg.l2;
    t.seed = derive_seed(cfg.seed, component);
    return t;
}

void check_model_fits(const NetworkModel& model, const Dataset& data) {
    if (model.input_dim() != data.num_features()) {
        throw ShapeError(kModule, "model expects " + std::to_string(model.input_dim()) + " inputs but the data has " +
                                      std::to_string(data.num_features()) + " feature columns");
    }
    if (model.output_dim() != data.num_classes()) {
        throw ShapeError(kModule, "model has " + std::to_string(model.output_dim()) + " outputs but the data has " +
                                      std::to_string(data.num_classes()) + " classes");
    }
}

json dataset_json(const Dataset& data, const TrainTestSplit& split) {
    json j;
    j["rows"] = data.size();
    j["features"] = data.feature_names;
    j["classes"] = data.class_names;
    j["label_order"] = "first appearance";
    j["class_counts"] = data.class_counts();
    j["train_rows"] = split.train.size();
    j["test_rows"] = split.test.size();
    return j;
}

std::string describe_csv(const Dataset& data) {
    CsvTable csv;
    csv.header = {"column", "count", "mean", "std", "min", "25%", "50%", "75%", "max"};
    for (const auto& s : describe(data)) {
        csv.add_row({s.name, std::to_string(s.count), format_double(s.mean), format_double(s.std_dev),
                     format_double(s.min), format_double(s.q25), format_double(s.median), format_double(s.q75),
                     format_double(s.max)});
    }
    return csv.to_string();
}

void run_train(Context& ctx, json& results, Report& rep) {
    const auto& cfg = ctx.cfg;
    Architecture arch;
    arch.input_dim = ctx.data.num_features();
    arch.hidden_dim = static_cast<Eigen::Index>(cfg.hidden);
    arch.output_dim = ctx.data.num_classes();
    arch.hidden_activation = activation_from_string(cfg.hidden_activation);
    arch.output_activation = Activation::softmax;
    const NetworkModel model = train(ctx.split.train, arch, train_config(cfg, cfg.epochs, "train"));

    results["architecture"] = {{"d", arch.input_dim},
                               {"k", arch.hidden_dim},
                               {"p", arch.output_dim},
                               {"hidden_activation", to_string(arch.hidden_activation)},
                               {"output_activation", to_string(arch.output_activation)}};
    results["parameters"] = model.parameter_count();
    results["train_accuracy"] = accuracy(model, ctx.split.train);
    results["test_accuracy"] = accuracy(model, ctx.split.test);
    const auto pred = predict(model, ctx.split.test.features);
    const auto report = classification_report(ctx.split.test.labels, pred, ctx.data.num_classes());
    results["test_classification_report"] = class_report_json(report, ctx.data.class_names);
    rep.sidecars["model.json"] = model_to_json(model);
    rep.sidecars["descriptive_stats.csv"] = describe_csv(ctx.data);
    rep.sidecars["classification_report.csv"] = classification_report_csv(report, ctx.data.class_names);
}

void run_hidden_test(Context& ctx, json& results, Report& rep) {
    const auto acts = extract_hidden(ctx.model, ctx.rows());
    const auto table = hidden_output_tests(acts, ctx.cfg.alpha);
    std::vector<std::size_t> sizes(static_cast<std::size_t>(ctx.data.num_classes()), 0);
    for (int l : acts.labels) ++sizes[static_cast<std::size_t>(l)];
    results["rows"] = ctx.cfg.on;
    results["group_sizes"] = sizes;
    results["alpha"] = ctx.cfg.alpha;
    json entries = json::array();
    for (const auto& e : table.entries) {
        entries.push_back({{"neuron", e.neuron},
                           {"class_i", e.class_i},
                           {"class_j", e.class_j},
                           {"U", e.result.statistic},
                           {"p_value", e.result.p_value},
                           {"method", to_string(e.result.method)},
                           {"significant", e.result.significant}});
    }
    results["tests"] = entries;
    rep.sidecars["hidden_tests.csv"] = neuron_test_table_csv(table);
}

void run_efficiency(Context& ctx, json& results, Report& rep) {
    const auto acts = extract_hidden(ctx.model, ctx.rows());
    const auto method = test_method_from_string(ctx.cfg.test_method);
    const auto tests = neuron_efficiency_tests(acts, ctx.cfg.alpha, method);
    CsvTable csv;
    csv.header = {"neuron", "statistic", "p_value", "significant"};
    json rows = json::array();
    for (std::size_t i = 0; i < tests.size(); ++i) {
        const auto& t = tests[i];
        csv.add_row({std::to_string(i), format_double(t.statistic), format_double(t.p_value),
                     t.significant ? "1" : "0"});
        rows.push_back({{"neuron", i}, {"statistic", t.statistic}, {"p_value", t.p_value}, {"significant", t.significant}});
    }
    results["rows"] = ctx.cfg.on;
    results["method"] = tests.empty() ? ctx.cfg.test_method : to_string(tests.front().method);
    results["group_sizes"] = tests.empty() ? std::vector<std::size_t>{} : tests.front().group_sizes;
    results["alpha"] = ctx.cfg.alpha;
    results["neurons"] = rows;
    rep.sidecars["neuron_efficiency.csv"] = csv.to_string();
}

std::string comparison_csv(const json& rows) {
    CsvTable csv;
    csv.header = {"model", "reduced_dim", "train_accuracy", "test_accuracy", "trainable_parameters",
                  "total_parameters"};
    for (const auto& r : rows) {
        csv.add_row({r["model"].get<std::string>(), std::to_string(r["reduced_dim"].get<long long>()),
                     format_double(r["train_accuracy"].is_null() ? NAN : r["train_accuracy"].get<double>()),
                     format_double(r["test_accuracy"].is_null() ? NAN : r["test_accuracy"].get<double>()),
                     std::to_string(r["trainable_parameters"].get<std::size_t>()),
                     std::to_string(r["total_parameters"].get<std::size_t>())});
    }
    return csv.to_string();
}

json original_summary(const Context& ctx) {
    const auto params = ctx.model.parameter_count();
    return json{{"model", "original"},
                {"reduced_dim", ctx.model.hidden_dim()},
                {"train_accuracy", accuracy(ctx.model, ctx.split.train)},
                {"test_accuracy", accuracy(ctx.model, ctx.split.test)},
                {"trainable_parameters", params},
                {"total_parameters", params}};
}

void run_reduce_cluster(Context& ctx, json& results, Report& rep) {
    const auto& cfg = ctx.cfg;
    const auto acts = extract_hidden(ctx.model, ctx.split.train);
    ClusterOptions opts;
    opts.method = cluster_method_from_string(cfg.cluster_method);
    opts.aggregation = aggregation_from_string(cfg.aggregation);
    opts.seed = derive_seed(cfg.seed, "cluster");
    const auto asg = cluster_neurons(acts, cfg.m, opts);
    const ReductionOptions ropts{cfg.full_retrain};
    const auto head_cfg = train_config(cfg, cfg.epochs, "reduce");
    const auto reduced = build_reduced_model(ctx.model, ctx.split.train, ctx.split.test, asg, head_cfg, ropts);

    json comparison = json::array();
    comparison.push_back(original_summary(ctx));
    comparison.push_back(reduced_summary("aggregated", reduced));
    for (std::size_t c = 0; c < asg.clusters; ++c) {
        const auto sub = build_cluster_submodel(ctx.model, ctx.split.train, ctx.split.test, asg, c, head_cfg, ropts);
        comparison.push_back(reduced_summary("cluster_" + std::to_string(c), sub));
    }
    json sizes = asg.sizes();
    results["m"] = cfg.m;
    results["cluster_sizes"] = sizes;
    results["mapping"] = json::parse(cluster_assignment_json(asg));
    results["comparison"] = comparison;
    rep.sidecars["cluster_mapping.json"] = cluster_assignment_json(asg);
    rep.sidecars["reduced_model.json"] = reduced_model_json(reduced);
    rep.sidecars["comparison.csv"] = comparison_csv(comparison);
    if (opts.method == ClusterMethod::ward) rep.sidecars["dendrogram.csv"] = dendrogram_csv(asg);
}

void run_reduce_pca(Context& ctx, json& results, Report& rep) {
    const auto& cfg = ctx.cfg;
    const auto acts = extract_hidden(ctx.model, ctx.split.train);
    const auto proj = pca_fit(acts.values, cfg.m, cfg.standardize);
    const ReductionOptions ropts{cfg.full_retrain};
    const auto reduced = build_reduced_model(ctx.model, ctx.split.train, ctx.split.test, proj,
                                             train_config(cfg, cfg.epochs, "reduce"), ropts);
    json comparison = json::array();
    comparison.push_back(original_summary(ctx));
    comparison.push_back(reduced_summary("pca", reduced));
    results["m"] = cfg.m;
    results["explained_variance_ratio"] = vec_json(proj.explained_variance_ratio);
    results["cumulative_ratio"] = vec_json(proj.cumulative_ratio);
    results["comparison"] = comparison;
    rep.sidecars["pca_projection.json"] = pca_projection_json(proj);
    rep.sidecars["reduced_model.json"] = reduced_model_json(reduced);
    rep.sidecars["comparison.csv"] = comparison_csv(comparison);
}

void run_ci_clt(const RunConfig& cfg, json& results) {
    const auto run = load_bootstrap_run(cfg.bootstrap_run);
    results["source"] = cfg.bootstrap_run.filename().string();
    results["interval"] = interval_json(clt_ci(run.accuracies, cfg.level));
}

void run_ci_bootstrap(Context& ctx, json& results, Report& rep) {
    const auto& cfg = ctx.cfg;
    BootstrapConfig bc;
    bc.replicates = cfg.replicates;
    bc.retrain = train_config(cfg, cfg.retrain_epochs, "bootstrap-retrain");
    bc.seed = cfg.seed;
    bc.evaluation = replicate_evaluation_from_string(cfg.evaluation);
    const auto run = bootstrap_accuracies(ctx.model, ctx.split.train, bc);
    results["replicates"] = run.size();
    results["retrain_epochs"] = cfg.retrain_epochs;
    results["evaluation"] = to_string(run.evaluation);
    results["base_test_accuracy"] = accuracy(ctx.model, ctx.split.test);
    results["bootstrap_interval"] = interval_json(bootstrap_ci(run, cfg.level));
    results["clt_interval"] = interval_json(clt_ci(run.accuracies, cfg.level));
    rep.sidecars["bootstrap_run.csv"] = bootstrap_run_csv(run);
}

// Binary labels for the logistic surrogate.
Dataset binary_view(const Dataset& data, const std::string& positive) {
    int pos = -1;
    if (positive.empty()) {
        if (data.num_classes() != 2) {
            throw ConfigError(kModule, "data has " + std::to_string(data.num_classes()) +
                                           " classes; choose the positive label with --positive");
        }
        pos = 1;
    } else {
        const auto it = std::find(data.class_names.begin(), data.class_names.end(), positive);
        if (it == data.class_names.end()) throw ConfigError(kModule, "positive label '" + positive + "' not found");
        pos = static_cast<int>(it - data.class_names.begin());
    }
    Dataset out = data;
    for (auto& l : out.labels) l = l == pos ? 1 : 0;
    out.class_names = {data.num_classes() == 2 ? data.class_names[static_cast<std::size_t>(1 - pos)] : "rest",
                       data.class_names[static_cast<std::size_t>(pos)]};
    return out;
}

void run_surrogate_lr(Context& ctx, json& results, Report& rep) {
    const auto bin = binary_view(ctx.data, ctx.cfg.positive);
    const auto split = split_dataset(bin, ctx.cfg.test_fraction, ctx.cfg.seed);
    const auto fit = logistic_fit(split.train.features, split.train.labels);
    const auto stats = fit_statistics(fit);
    auto table = coefficient_table(fit, ctx.cfg.level);
    if (fit.intercept) table.front().name = "const";
    for (std::size_t i = 0; i < bin.feature_names.size(); ++i) {
        table[i + (fit.intercept ? 1 : 0)].name = bin.feature_names[i];
    }
    const auto pred = fit.predict(split.test.features);
    const auto report = classification_report(split.test.labels, pred, 2);
    json screened = json::array();
    for (auto i : significance_screen(table, ctx.cfg.alpha)) screened.push_back(table[i].name);

    results["classes"] = bin.class_names;
    results["converged"] = fit.converged;
    results["separation"] = fit.separation;
    results["iterations"] = fit.iterations;
    results["warnings"] = fit.warnings;
    results["fit"] = {{"log_likelihood", stats.log_likelihood},
                      {"null_log_likelihood", stats.null_log_likelihood},
                      {"pseudo_r2", stats.pseudo_r2},
                      {"aic", stats.aic},
                      {"bic", stats.bic},
                      {"llr", stats.llr},
                      {"llr_p_value", stats.llr_p_value},
                      {"n_obs", stats.n_obs},
                      {"df_model", stats.df_model},
                      {"df_residuals", stats.df_residuals}};
    results["not_significant"] = screened;
    results["test_classification_report"] = class_report_json(report, bin.class_names);
    rep.sidecars["fit_statistics.csv"] = fit_statistics_csv(stats);
    rep.sidecars["coefficients.csv"] = coefficient_table_csv(table);
    rep.sidecars["classification_report.csv"] = classification_report_csv(report, bin.class_names);
    rep.sidecars["descriptive_stats.csv"] = describe_csv(ctx.data);
}

void run_surrogate_lr_pca(Context& ctx, json& results, Report& rep) {
    const auto bin = binary_view(ctx.data, ctx.cfg.positive);
    const auto q = static_cast<std::size_t>(bin.num_features());
    const std::size_t last = ctx.cfg.m_last == 0 ? q : ctx.cfg.m_last;
    const auto split = split_dataset(bin, ctx.cfg.test_fraction, ctx.cfg.seed);
    const auto sweep = lr_pca_sweep(split.train.features, split.train.labels, split.test.features,
                                    split.test.labels, ctx.cfg.m_first, last);

    const auto proj = pca_fit(split.train.features, sweep.best_components);
    const auto fit = logistic_fit(pca_transform(proj, split.train.features), split.train.labels);
    const auto report = classification_report(split.test.labels, fit.predict(pca_transform(proj, split.test.features)), 2);

    json rows = json::array();
    for (const auto& r : sweep.rows) {
        rows.push_back({{"components", r.components},
                        {"accuracy", r.accuracy},
                        {"explained_variance", r.explained_variance},
                        {"converged", r.converged}});
    }
    results["classes"] = bin.class_names;
    results["sweep"] = rows;
    results["best_components"] = sweep.best_components;
    results["best_classification_report"] = class_report_json(report, bin.class_names);
    rep.sidecars["sweep.csv"] = sweep_csv(sweep);
    rep.sidecars["classification_report.csv"] = classification_report_csv(report, bin.class_names);
}

void run_significance(Context& ctx, json& results, Report& rep) {
    const auto& cfg = ctx.cfg;
    NullConfig nc;
    nc.draws = cfg.null_draws;
    nc.cover_size = cfg.cover_size;
    nc.cover = cover_kind_from_string(cfg.cover);
    nc.epsilon = cfg.epsilon;
    nc.cover_training = train_config(cfg, cfg.cover_epochs, "cover-train");
    nc.functional = builtin_functional_from_string(cfg.functional);
    nc.seed = derive_seed(cfg.seed, "significance");
    const auto j = static_cast<Eigen::Index>(cfg.input_index);
    const auto d = input_significance_test(ctx.model, ctx.rows(), j, cfg.alpha, nc);
    results["rows"] = cfg.on;
    results["input_index"] = cfg.input_index;
    results["input_name"] = ctx.data.feature_names.at(cfg.input_index);
    results["statistic_label"] = "Horel-Giesecke-style statistic";
    results["statistic_formula"] = d.statistic_formula;
    results["statistic"] = d.statistic;
    results["critical_value"] = d.critical_value;
    results["alpha"] = d.alpha;
    results["decision"] = d.reject ? "reject" : "fail to reject";
    results["null"] = {{"draws", d.null.draws()},
                       {"functional", d.null.functional},
                       {"cover", to_string(nc.cover)},
                       {"cover_size", nc.cover_size}};
    rep.sidecars["null_distribution.csv"] = null_distribution_csv(d.null);
}

void run_plots(Context& ctx, json& results, Report& rep) {
    const auto acts = extract_hidden(ctx.model, ctx.rows());
    const auto kind = plot_kind_from_string(ctx.cfg.plot_kind);
    auto files = emit_plot_data(acts, kind, ctx.cfg.bins);
    json names = json::array();
    for (const auto& [name, text] : files) names.push_back(name);
    results["rows"] = ctx.cfg.on;
    results["files"] = names;
    if (kind == PlotKind::correlation || kind == PlotKind::all) {
        const auto corr = correlation_matrix(acts.values);
        json flagged = json::array();
        for (std::size_t i = 0; i < corr.degenerate.size(); ++i) {
            if (corr.degenerate[i]) flagged.push_back(acts.neuron_names[i]);
        }
        results["degenerate_neurons"] = flagged;
    }
    for (auto& [name, text] : files) rep.sidecars[name] = std::move(text);
}

std::string report_name(const std::string& sub) {
    std::string out = sub;
    std::replace(out.begin(), out.end(), ' ', '_');
    return out;
}

}  // namespace

void RunConfig::validate() const {
    if (!kSubcommands.count(subcommand)) throw ConfigError(kModule, "unknown subcommand '" + subcommand + "'");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError(kModule, "alpha must lie in (0, 1)");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError(kModule, "split fraction must lie in (0, 1)");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError(kModule, "level must lie in (0, 1)");
    if (on != "train" && on != "test" && on != "all") throw ConfigError(kModule, "--on must be train, test or all");
    auto require = [](const std::filesystem::path& p, const char* what) {
        if (p.empty()) throw ConfigError(kModule, std::string(what) + " path is required");
        if (!std::filesystem::exists(p)) throw ConfigError(kModule, std::string(what) + " not found: " + p.string());
    };
    if (subcommand == "ci clt") {
        require(bootstrap_run, "bootstrap run");
    } else {
        require(data, "data");
    }
    if (needs_model(subcommand)) require(model, "model");
}

std::filesystem::path RunConfig::resolved_output_dir() const {
    if (!output_dir.empty()) return output_dir;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
    return "annstat_out";
}

std::string RunConfig::canonical_json() const {
    json j;
    j["subcommand"] = subcommand;
    j["data"] = data.filename().string();
    j["label_column"] = label_column;
    j["model"] = model.filename().string();
    j["seed"] = seed;
    j["alpha"] = alpha;
    j["test_fraction"] = test_fraction;
    j["on"] = on;
    j["hidden"] = hidden;
    j["hidden_activation"] = hidden_activation;
    j["epochs"] = epochs;
    j["learning_rate"] = learning_rate;
    j["batch_size"] = batch_size;
    j["l2"] = l2;
    j["test_method"] = test_method;
    j["m"] = m;
    j["cluster_method"] = cluster_method;
    j["aggregation"] = aggregation;
    j["full_retrain"] = full_retrain;
    j["standardize"] = standardize;
    j["replicates"] = replicates;
    j["retrain_epochs"] = retrain_epochs;
    j["evaluation"] = evaluation;
    j["level"] = level;
    j["bootstrap_run"] = bootstrap_run.filename().string();
    j["positive"] = positive;
    j["m_first"] = m_first;
    j["m_last"] = m_last;
    j["input_index"] = input_index;
    j["null_draws"] = null_draws;
    j["cover_size"] = cover_size;
    j["cover"] = cover;
    j["epsilon"] = epsilon;
    j["cover_epochs"] = cover_epochs;
    j["functional"] = functional;
    j["plot_kind"] = plot_kind;
    j["bins"] = bins;
    return j.dump();
}

std::string RunConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_json())));
    return buf;
}

std::vector<std::filesystem::path> Report::write(const std::filesystem::path& dir) const {
    std::vector<std::filesystem::path> written;
    const auto main = dir / (name + ".json");
    write_file_atomic(main, document);
    written.push_back(main);
    for (const auto& [file, text] : sidecars) {
        write_file_atomic(dir / file, text);
        written.push_back(dir / file);
    }
    return written;
}

Report run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    Report rep;
    rep.name = report_name(cfg.subcommand);
    json results = json::object();

    if (cfg.subcommand == "ci clt") {
        run_ci_clt(cfg, results);
    } else {
        Context ctx{cfg, ingest_csv(cfg.data, cfg.label_column), {}, {}, false};
        ctx.split = split_dataset(ctx.data, cfg.test_fraction, cfg.seed);
        if (needs_model(cfg.subcommand)) {
            ctx.model = load_model(cfg.model);
            check_model_fits(ctx.model, ctx.data);
            ctx.has_model = true;
        }
        results["dataset"] = dataset_json(ctx.data, ctx.split);
        const auto& sub = cfg.subcommand;
        if (sub == "train") run_train(ctx, results, rep);
        else if (sub == "analyze hidden-test") run_hidden_test(ctx, results, rep);
        else if (sub == "analyze efficiency") run_efficiency(ctx, results, rep);
        else if (sub == "reduce cluster") run_reduce_cluster(ctx, results, rep);
        else if (sub == "reduce pca") run_reduce_pca(ctx, results, rep);
        else if (sub == "ci bootstrap") run_ci_bootstrap(ctx, results, rep);
        else if (sub == "surrogate lr") run_surrogate_lr(ctx, results, rep);
        else if (sub == "surrogate lr-pca") run_surrogate_lr_pca(ctx, results, rep);
        else if (sub == "significance input") run_significance(ctx, results, rep);
        else run_plots(ctx, results, rep);
    }

    json doc;
    doc["tool"] = "annstat";
    doc["subcommand"] = cfg.subcommand;
    doc["config_hash"] = cfg.hash();
    doc["config"] = json::parse(cfg.canonical_json());
    doc["seed"] = cfg.seed;
    doc["seed_rule"] = std::string(kSeedRule);
    doc["results"] = results;
    json files = json::array();
    for (const auto& [file, text] : rep.sidecars) files.push_back(file);
    doc["sidecars"] = files;
    rep.document = doc.dump(2) + "\n";
    return rep;
}

CorrelationMatrix correlation_matrix(const Eigen::MatrixXd& columns) {
    const auto n = columns.rows();
    const auto k = columns.cols();
    if (n < 2) throw InputError(kModule, "correlation needs at least two rows");
    Eigen::MatrixXd centered = columns.rowwise() - columns.colwise().mean();
    Eigen::VectorXd norms = centered.colwise().norm().transpose();
    CorrelationMatrix out;
    out.degenerate.assign(static_cast<std::size_t>(k), false);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double scale = std::max(1.0, columns.col(j).cwiseAbs().maxCoeff());
        if (norms[j] <= 1e-12 * scale * std::sqrt(static_cast<double>(n))) {
            out.degenerate[static_cast<std::size_t>(j)] = true;
            centered.col(j).setZero();
        } else {
            centered.col(j) /= norms[j];
        }
    }
    out.values = centered.transpose() * centered;
    for (Eigen::Index j = 0; j < k; ++j) {
        out.values(j, j) = 1.0;
        for (Eigen::Index i = 0; i < k; ++i) {
            out.values(i, j) = std::clamp(out.values(i, j), -1.0, 1.0);
        }
    }
    return out;
}

Histogram histogram(const Eigen::VectorXd& values, std::size_t bins) {
    if (bins < 1) throw InputError(kModule, "histogram needs at least one bin");
    if (values.size() == 0) throw InputError(kModule, "histogram of an empty column");
    double lo = values.minCoeff();
    double hi = values.maxCoeff();
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram h;
    h.counts.assign(bins, 0);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(b == bins ? hi : lo + width * static_cast<double>(b));
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        auto b = static_cast<std::size_t>((values[i] - lo) / width);
        h.counts[std::min(b, bins - 1)] += 1;
    }
    return h;
}

PlotKind plot_kind_from_string(const std::string& name) {
    if (name == "histogram") return PlotKind::histogram;
    if (name == "correlation") return PlotKind::correlation;
    if (name == "dendrogram") return PlotKind::dendrogram;
    if (name == "all") return PlotKind::all;
    throw ConfigError(kModule, "unknown plot kind '" + name + "'");
}

std::map<std::string, std::string> emit_plot_data(const ActivationMatrix& acts, PlotKind kind, std::size_t bins) {
    if (acts.values.rows() == 0 || acts.values.cols() == 0) {
        throw ConfigError(kModule, "plot data needs a non-empty activation table");
    }
    std::map<std::string, std::string> files;
    if (kind == PlotKind::histogram || kind == PlotKind::all) {
        CsvTable csv;
        csv.header = {"neuron", "bin", "lower", "upper", "count"};
        for (Eigen::Index j = 0; j < acts.values.cols(); ++j) {
            const auto h = histogram(acts.values.col(j), bins);
            for (std::size_t b = 0; b < bins; ++b) {
                csv.add_row({acts.neuron_names[static_cast<std::size_t>(j)], std::to_string(b),
                             format_double(h.edges[b]), format_double(h.edges[b + 1]), std::to_string(h.counts[b])});
            }
        }
        files["histograms.csv"] = csv.to_string();
    }
    if (kind == PlotKind::correlation || kind == PlotKind::all) {
        const auto corr = correlation_matrix(acts.values);
        CsvTable csv;
        csv.header = {"neuron"};
        for (const auto& n : acts.neuron_names) csv.header.push_back(n);
        csv.header.push_back("degenerate");
        for (Eigen::Index i = 0; i < corr.values.rows(); ++i) {
            std::vector<std::string> row{acts.neuron_names[static_cast<std::size_t>(i)]};
            for (Eigen::Index j = 0; j < corr.values.cols(); ++j) row.push_back(format_double(corr.values(i, j)));
            row.push_back(corr.degenerate[static_cast<std::size_t>(i)] ? "1" : "0");
            csv.add_row(std::move(row));
        }
        files["correlation.csv"] = csv.to_string();
    }
    if (kind == PlotKind::dendrogram || kind == PlotKind::all) {
        if (acts.values.cols() < 2) throw ConfigError(kModule, "dendrogram needs at least two neurons");
        ClusterOptions opts;
        opts.method = ClusterMethod::ward;
        files["dendrogram.csv"] = dendrogram_csv(cluster_neurons(acts, 1, opts));
    }
    return files;
}

}  // namespace annstat
