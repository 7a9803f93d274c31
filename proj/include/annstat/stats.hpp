#pragma once

#include "annstat/network.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace annstat {

// Standard distribution functions. Quantile arguments must lie in (0, 1).
double normal_cdf(double z);
double normal_sf(double z);  // 1 - normal_cdf(z) without cancellation
double normal_quantile(double q);
double t_cdf(double x, double df);
double t_quantile(double q, double df);
double f_cdf(double x, double df1, double df2);
double f_sf(double x, double df1, double df2);
double chisq_cdf(double x, double df);
double chisq_sf(double x, double df);

enum class TestMethod { mann_whitney_exact, mann_whitney_normal, anova_f, kruskal_wallis };
std::string to_string(TestMethod m);
TestMethod test_method_from_string(const std::string& name);

struct HypothesisResult {
    double statistic = 0.0;
    double p_value = 1.0;
    TestMethod method = TestMethod::mann_whitney_normal;
    bool significant = false;
    double alpha = 0.05;
    std::vector<std::size_t> group_sizes;
};

// Exact two-sided p-value as a fraction of rank arrangements.
struct ExactPValue {
    std::uint64_t numerator = 0;
    std::uint64_t denominator = 1;
    double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
};

// Number of the C(n1+n2, n1) equally likely tie-free rank arrangements giving
// each U in 0..n1*n2.
std::vector<std::uint64_t> mann_whitney_null_counts(std::size_t n1, std::size_t n2);

// min(1, 2 * min(P(U <= u), P(U >= u))) under the tie-free null.
ExactPValue mann_whitney_exact_p(std::size_t u, std::size_t n1, std::size_t n2);

/// Two-sided Mann-Whitney U test. The reported U belongs to sample `a`:
/// #{a_s > b_t} + 0.5 * #{a_s == b_t}. With no ties and |a| + |b| <= 20 the
/// p-value is exact; otherwise the normal approximation with tie-corrected
/// variance and a 0.5 continuity correction is used.
/// significant <=> p_value <= alpha.
HypothesisResult mann_whitney_u(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

inline constexpr std::size_t kExactMannWhitneyLimit = 20;

struct NeuronPairTest {
    std::size_t neuron = 0;
    int class_i = 0;
    int class_j = 0;
    HypothesisResult result;
};

// Per hidden neuron, per unordered class pair (i < j, lexicographic):
// neurons * p(p-1)/2 entries, neuron-major.
struct NeuronTestTable {
    std::size_t neurons = 0;
    std::vector<std::pair<int, int>> class_pairs;
    std::vector<std::string> class_names;
    std::vector<NeuronPairTest> entries;
    double alpha = 0.05;

    const NeuronPairTest& at(std::size_t neuron, std::size_t pair_index) const;
};

NeuronTestTable hidden_output_tests(const ActivationMatrix& acts, double alpha = 0.05);

// Columns: neuron, then U_i_j and p_i_j for every class pair.
std::string neuron_test_table_csv(const NeuronTestTable& table);

/// One-way comparison of k groups. anova_f needs >= 2 samples per group;
/// kruskal_wallis uses midranks with tie correction and a chi-square(k-1)
/// p-value. Rejects H0 (significant) iff p < alpha.
/// If every value in every group is identical, anova_f reports F = 0, p = 1
/// (and kruskal_wallis H = 0, p = 1). Zero within-group variance with
/// distinct group means gives F = +inf, p = 0.
HypothesisResult neuron_efficiency_test(const std::vector<std::vector<double>>& groups, double alpha,
                                        TestMethod method);

// Runs neuron_efficiency_test on every neuron column, grouping by class.
std::vector<HypothesisResult> neuron_efficiency_tests(const ActivationMatrix& acts, double alpha, TestMethod method);

// Values of one activation column split by class label.
std::vector<std::vector<double>> split_by_class(const ActivationMatrix& acts, Eigen::Index neuron);

}  // namespace annstat
