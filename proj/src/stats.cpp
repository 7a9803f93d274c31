#include "annstat/stats.hpp"

#include "annstat/csv.hpp"
#include "annstat/error.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace annstat {

namespace {

constexpr const char* kModule = "stat_tests";

void require_probability(double q) {
    if (!(q > 0.0 && q < 1.0)) throw InputError(kModule, "quantile argument must lie in (0, 1)");
}

void require_df(double df) {
    if (!(df >= 1.0) || !std::isfinite(df)) throw InputError(kModule, "degrees of freedom must be >= 1");
}

}  // namespace

double normal_cdf(double z) {
    if (std::isnan(z)) throw InputError(kModule, "normal_cdf of NaN");
    if (std::isinf(z)) return z > 0 ? 1.0 : 0.0;
    return boost::math::cdf(boost::math::normal_distribution<double>(), z);
}

double normal_sf(double z) {
    if (std::isnan(z)) throw InputError(kModule, "normal_sf of NaN");
    if (std::isinf(z)) return z > 0 ? 0.0 : 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), z));
}

double normal_quantile(double q) {
    require_probability(q);
    return boost::math::quantile(boost::math::normal_distribution<double>(), q);
}

double t_cdf(double x, double df) {
    require_df(df);
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    return boost::math::cdf(boost::math::students_t_distribution<double>(df), x);
}

double t_quantile(double q, double df) {
    require_probability(q);
    require_df(df);
    return boost::math::quantile(boost::math::students_t_distribution<double>(df), q);
}

double f_cdf(double x, double df1, double df2) {
    require_df(df1);
    require_df(df2);
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return boost::math::cdf(boost::math::fisher_f_distribution<double>(df1, df2), x);
}

double f_sf(double x, double df1, double df2) {
    require_df(df1);
    require_df(df2);
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::cdf(boost::math::complement(boost::math::fisher_f_distribution<double>(df1, df2), x));
}

double chisq_cdf(double x, double df) {
    require_df(df);
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return boost::math::cdf(boost::math::chi_squared_distribution<double>(df), x);
}

double chisq_sf(double x, double df) {
    require_df(df);
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(df), x));
}

std::string to_string(TestMethod m) {
    switch (m) {
        case TestMethod::mann_whitney_exact: return "mann_whitney_exact";
        case TestMethod::mann_whitney_normal: return "mann_whitney_normal";
        case TestMethod::anova_f: return "anova_f";
        case TestMethod::kruskal_wallis: return "kruskal_wallis";
    }
    return "unknown";
}

TestMethod test_method_from_string(const std::string& name) {
    if (name == "anova" || name == "anova_f") return TestMethod::anova_f;
    if (name == "kruskal" || name == "kruskal_wallis") return TestMethod::kruskal_wallis;
    if (name == "mann_whitney_exact") return TestMethod::mann_whitney_exact;
    if (name == "mann_whitney_normal") return TestMethod::mann_whitney_normal;
    throw ConfigError(kModule, "unknown test method '" + name + "'");
}

std::vector<std::uint64_t> mann_whitney_null_counts(std::size_t n1, std::size_t n2) {
    // counts[a][b][u]: arrangements of a first-sample and b second-sample
    // values with statistic u. The largest value either belongs to the first
    // sample (adding b to U) or to the second (adding nothing).
    const std::size_t umax = n1 * n2;
    std::vector<std::vector<std::vector<std::uint64_t>>> counts(
        n1 + 1, std::vector<std::vector<std::uint64_t>>(n2 + 1));
    for (std::size_t a = 0; a <= n1; ++a) {
        for (std::size_t b = 0; b <= n2; ++b) {
            auto& cur = counts[a][b];
            cur.assign(a * b + 1, 0);
            if (a == 0 || b == 0) {
                cur[0] = 1;
                continue;
            }
            const auto& take_a = counts[a - 1][b];
            const auto& take_b = counts[a][b - 1];
            for (std::size_t u = 0; u < take_a.size(); ++u) cur[u + b] += take_a[u];
            for (std::size_t u = 0; u < take_b.size(); ++u) cur[u] += take_b[u];
        }
    }
    auto out = counts[n1][n2];
    out.resize(umax + 1, 0);
    return out;
}

ExactPValue mann_whitney_exact_p(std::size_t u, std::size_t n1, std::size_t n2) {
    if (u > n1 * n2) throw InputError(kModule, "U exceeds n1 * n2");
    const auto counts = mann_whitney_null_counts(n1, n2);
    std::uint64_t total = 0, le = 0, ge = 0;
    for (std::size_t v = 0; v < counts.size(); ++v) {
        total += counts[v];
        if (v <= u) le += counts[v];
        if (v >= u) ge += counts[v];
    }
    return {std::min(total, 2 * std::min(le, ge)), total};
}

namespace {

struct RankInfo {
    std::vector<double> ranks;  // midranks, 1-based, in input order
    double tie_sum = 0.0;       // sum of (t^3 - t) over tie groups
    bool has_ties = false;
};

RankInfo midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
    RankInfo info;
    info.ranks.resize(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t t = i; t < j; ++t) info.ranks[order[t]] = rank;
        const auto t = static_cast<double>(j - i);
        if (j - i > 1) {
            info.has_ties = true;
            info.tie_sum += t * t * t - t;
        }
        i = j;
    }
    return info;
}

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw InputError(kModule, std::string(what) + " contains non-finite values");
    }
}

}  // namespace

HypothesisResult mann_whitney_u(std::span<const double> a, std::span<const double> b, double alpha) {
    if (a.empty() || b.empty()) throw InputError(kModule, "Mann-Whitney U needs two non-empty samples");
    require_finite(a, "first sample");
    require_finite(b, "second sample");

    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const RankInfo info = midranks(pooled);
    const auto n1 = static_cast<double>(a.size());
    const auto n2 = static_cast<double>(b.size());
    const double big_n = n1 + n2;
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) rank_sum += info.ranks[i];
    const double u = rank_sum - n1 * (n1 + 1.0) / 2.0;

    HypothesisResult r;
    r.statistic = u;
    r.alpha = alpha;
    r.group_sizes = {a.size(), b.size()};

    if (!info.has_ties && a.size() + b.size() <= kExactMannWhitneyLimit) {
        r.method = TestMethod::mann_whitney_exact;
        r.p_value = mann_whitney_exact_p(static_cast<std::size_t>(std::llround(u)), a.size(), b.size()).value();
    } else {
        r.method = TestMethod::mann_whitney_normal;
        const double mu = n1 * n2 / 2.0;
        const double var = n1 * n2 / 12.0 * ((big_n + 1.0) - info.tie_sum / (big_n * (big_n - 1.0)));
        if (var <= 0.0) {
            r.p_value = 1.0;
        } else {
            const double z = (std::abs(u - mu) - 0.5) / std::sqrt(var);
            r.p_value = std::min(1.0, 2.0 * normal_sf(z));
        }
    }
    r.significant = r.p_value <= alpha;
    return r;
}

const NeuronPairTest& NeuronTestTable::at(std::size_t neuron, std::size_t pair_index) const {
    if (neuron >= neurons || pair_index >= class_pairs.size()) throw InputError(kModule, "table index out of range");
    return entries[neuron * class_pairs.size() + pair_index];
}

std::vector<std::vector<double>> split_by_class(const ActivationMatrix& acts, Eigen::Index neuron) {
    if (neuron < 0 || neuron >= acts.neurons()) throw InputError(kModule, "neuron index out of range");
    if (static_cast<std::size_t>(acts.values.rows()) != acts.labels.size()) {
        throw ShapeError(kModule, "activation rows do not match label count");
    }
    int num_classes = static_cast<int>(acts.class_names.size());
    for (int y : acts.labels) num_classes = std::max(num_classes, y + 1);
    std::vector<std::vector<double>> groups(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < acts.labels.size(); ++i) {
        groups[static_cast<std::size_t>(acts.labels[i])].push_back(acts.values(static_cast<Eigen::Index>(i), neuron));
    }
    return groups;
}

namespace {

std::string class_label(const std::vector<std::string>& names, std::size_t c) {
    return c < names.size() ? names[c] : std::to_string(c);
}

void require_all_classes(const std::vector<std::vector<double>>& groups, const std::vector<std::string>& names) {
    std::string missing;
    for (std::size_t c = 0; c < groups.size(); ++c) {
        if (groups[c].empty()) missing += (missing.empty() ? "" : ", ") + class_label(names, c);
    }
    if (!missing.empty()) throw InputError(kModule, "classes with zero samples: " + missing);
}

}  // namespace

NeuronTestTable hidden_output_tests(const ActivationMatrix& acts, double alpha) {
    NeuronTestTable table;
    table.neurons = static_cast<std::size_t>(acts.neurons());
    table.class_names = acts.class_names;
    table.alpha = alpha;
    if (table.neurons == 0) throw InputError(kModule, "activation matrix has no neurons");
    for (Eigen::Index k = 0; k < acts.neurons(); ++k) {
        const auto groups = split_by_class(acts, k);
        if (groups.size() < 2) throw InputError(kModule, "need at least two classes");
        require_all_classes(groups, acts.class_names);
        if (k == 0) {
            for (int i = 0; i < static_cast<int>(groups.size()); ++i)
                for (int j = i + 1; j < static_cast<int>(groups.size()); ++j) table.class_pairs.emplace_back(i, j);
        }
        for (const auto& [i, j] : table.class_pairs) {
            table.entries.push_back({static_cast<std::size_t>(k), i, j,
                                     mann_whitney_u(groups[static_cast<std::size_t>(i)],
                                                    groups[static_cast<std::size_t>(j)], alpha)});
        }
    }
    return table;
}

std::string neuron_test_table_csv(const NeuronTestTable& table) {
    CsvTable csv;
    csv.header.push_back("neuron");
    for (const auto& [i, j] : table.class_pairs) {
        csv.header.push_back("U_" + std::to_string(i) + "_" + std::to_string(j));
        csv.header.push_back("p_" + std::to_string(i) + "_" + std::to_string(j));
    }
    for (std::size_t k = 0; k < table.neurons; ++k) {
        std::vector<std::string> row{std::to_string(k)};
        for (std::size_t pi = 0; pi < table.class_pairs.size(); ++pi) {
            const auto& r = table.at(k, pi).result;
            row.push_back(format_double(r.statistic));
            row.push_back(format_double(r.p_value));
        }
        csv.add_row(std::move(row));
    }
    return csv.to_string();
}

HypothesisResult neuron_efficiency_test(const std::vector<std::vector<double>>& groups, double alpha,
                                        TestMethod method) {
    if (groups.size() < 2) throw InputError(kModule, "efficiency test needs at least two groups");
    HypothesisResult r;
    r.alpha = alpha;
    r.method = method;
    std::vector<double> pooled;
    for (const auto& g : groups) {
        if (g.empty()) throw InputError(kModule, "efficiency test group is empty");
        if (method == TestMethod::anova_f && g.size() < 2) {
            throw InputError(kModule, "anova_f needs at least two samples per group");
        }
        require_finite(g, "group");
        r.group_sizes.push_back(g.size());
        pooled.insert(pooled.end(), g.begin(), g.end());
    }
    const auto big_n = static_cast<double>(pooled.size());
    const auto n_groups = static_cast<double>(groups.size());

    if (method == TestMethod::anova_f) {
        const double grand = std::accumulate(pooled.begin(), pooled.end(), 0.0) / big_n;
        double ss_between = 0.0, ss_within = 0.0;
        for (const auto& g : groups) {
            const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
            ss_between += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
            for (double v : g) ss_within += (v - mean) * (v - mean);
        }
        const double df_between = n_groups - 1.0;
        const double df_within = big_n - n_groups;
        if (ss_within == 0.0) {
            r.statistic = ss_between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
            r.p_value = ss_between == 0.0 ? 1.0 : 0.0;
        } else {
            r.statistic = (ss_between / df_between) / (ss_within / df_within);
            r.p_value = f_sf(r.statistic, df_between, df_within);
        }
    } else if (method == TestMethod::kruskal_wallis) {
        const RankInfo info = midranks(pooled);
        double term = 0.0;
        std::size_t offset = 0;
        for (const auto& g : groups) {
            double rank_sum = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) rank_sum += info.ranks[offset + i];
            offset += g.size();
            term += rank_sum * rank_sum / static_cast<double>(g.size());
        }
        const double h_raw = 12.0 / (big_n * (big_n + 1.0)) * term - 3.0 * (big_n + 1.0);
        const double correction = 1.0 - info.tie_sum / (big_n * big_n * big_n - big_n);
        if (correction <= 0.0) {
            r.statistic = 0.0;
            r.p_value = 1.0;
        } else {
            r.statistic = std::max(0.0, h_raw / correction);
            r.p_value = chisq_sf(r.statistic, n_groups - 1.0);
        }
    } else {
        throw ConfigError(kModule, "efficiency test method must be anova_f or kruskal_wallis");
    }
    r.significant = r.p_value < alpha;
    return r;
}

std::vector<HypothesisResult> neuron_efficiency_tests(const ActivationMatrix& acts, double alpha, TestMethod method) {
    std::vector<HypothesisResult> out;
    for (Eigen::Index k = 0; k < acts.neurons(); ++k) {
        const auto groups = split_by_class(acts, k);
        require_all_classes(groups, acts.class_names);
        out.push_back(neuron_efficiency_test(groups, alpha, method));
    }
    return out;
}

}  // namespace annstat
