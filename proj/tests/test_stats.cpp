#include "doctest.h"

#include "annstat/error.hpp"
#include "annstat/stats.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace annstat;

namespace {

// Brute force over every choice of ranks for the first sample.
std::vector<std::uint64_t> enumerate_counts(std::size_t n1, std::size_t n2) {
    const std::size_t n = n1 + n2;
    std::vector<std::uint64_t> counts(n1 * n2 + 1, 0);
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != n1) continue;
        // U = #{(a, b): a ranked above b}
        std::size_t u = 0, bs_below = 0;
        for (std::size_t r = 0; r < n; ++r) {
            if (mask & (1u << r)) u += bs_below;
            else ++bs_below;
        }
        ++counts[u];
    }
    return counts;
}

double normal_two_sided(double u, double n1, double n2, double tie_sum) {
    const double n = n1 + n2;
    const double mu = n1 * n2 / 2.0;
    const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    const double z = (std::abs(u - mu) - 0.5) / std::sqrt(var);
    return std::min(1.0, std::erfc(std::max(z, 0.0) / std::sqrt(2.0)));
}

}  // namespace

TEST_CASE("exact null counts equal brute-force enumeration") {
    for (std::size_t n1 = 1; n1 <= 6; ++n1) {
        for (std::size_t n2 = 1; n2 <= 6; ++n2) {
            const auto oracle = enumerate_counts(n1, n2);
            CHECK(mann_whitney_null_counts(n1, n2) == oracle);
            const std::uint64_t total = std::accumulate(oracle.begin(), oracle.end(), std::uint64_t{0});
            for (std::size_t u = 0; u <= n1 * n2; ++u) {
                std::uint64_t le = 0, ge = 0;
                for (std::size_t v = 0; v <= n1 * n2; ++v) {
                    if (v <= u) le += oracle[v];
                    if (v >= u) ge += oracle[v];
                }
                const auto p = mann_whitney_exact_p(u, n1, n2);
                CHECK(p.denominator == total);
                CHECK(p.numerator == std::min(total, 2 * std::min(le, ge)));
            }
        }
    }
}

TEST_CASE("small tie-free samples use the exact p-value") {
    const std::vector<double> a{1.1, 2.2, 5.5};
    const std::vector<double> b{3.3, 4.4, 6.6, 7.7};
    const auto r = mann_whitney_u(a, b);
    CHECK(r.method == TestMethod::mann_whitney_exact);
    // a beats b only through 5.5 > 3.3, 4.4
    CHECK(r.statistic == 2.0);
    CHECK(r.p_value == mann_whitney_exact_p(2, 3, 4).value());
    CHECK(r.group_sizes == std::vector<std::size_t>{3, 4});
}

TEST_CASE("fully separated 30 vs 30") {
    std::vector<double> a(30), b(30);
    for (int i = 0; i < 30; ++i) {
        a[static_cast<std::size_t>(i)] = i;
        b[static_cast<std::size_t>(i)] = 100 + i;
    }
    const auto r = mann_whitney_u(a, b);
    CHECK(r.statistic == 0.0);
    CHECK(r.method == TestMethod::mann_whitney_normal);
    CHECK(r.p_value == doctest::Approx(3.02e-11).epsilon(0.05));
    CHECK(r.p_value == doctest::Approx(normal_two_sided(0, 30, 30, 0)).epsilon(1e-9));
    CHECK(r.significant);
    const auto flipped = mann_whitney_u(b, a);
    CHECK(flipped.statistic == 900.0);
    CHECK(flipped.p_value == doctest::Approx(r.p_value));
}

TEST_CASE("tie-corrected normal approximation") {
    const std::vector<double> a{1, 2, 2, 3, 3, 3, 4, 5, 6, 6, 7};
    const std::vector<double> b{2, 3, 4, 4, 5, 6, 7, 7, 8, 9, 9, 10};
    const auto r = mann_whitney_u(a, b);
    CHECK(r.method == TestMethod::mann_whitney_normal);
    double u = 0;
    for (double x : a)
        for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
    CHECK(r.statistic == u);
    // tie groups in the pooled sample
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::sort(pooled.begin(), pooled.end());
    double tie_sum = 0;
    for (std::size_t i = 0; i < pooled.size();) {
        std::size_t j = i;
        while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
        const double t = static_cast<double>(j - i);
        tie_sum += t * t * t - t;
        i = j;
    }
    CHECK(r.p_value == doctest::Approx(normal_two_sided(u, 11, 12, tie_sum)).epsilon(1e-12));
}

TEST_CASE("U of both orders sums to n1 n2") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> d(0, 5);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> a(7), b(9);
        for (auto& x : a) x = d(rng);
        for (auto& x : b) x = d(rng);
        CHECK(mann_whitney_u(a, b).statistic + mann_whitney_u(b, a).statistic == 63.0);
    }
}

TEST_CASE("all values tied gives p = 1") {
    const std::vector<double> a(5, 0.0), b(6, 0.0);
    const auto r = mann_whitney_u(a, b);
    CHECK(r.p_value == 1.0);
    CHECK_FALSE(r.significant);
}

TEST_CASE("empty sample is rejected") {
    const std::vector<double> a{}, b{1.0};
    CHECK_THROWS_AS(mann_whitney_u(a, b), InputError);
}

TEST_CASE("null size of the normal approximation") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> g(0.0, 1.0);
    int rejections = 0;
    const int sims = 2000;
    for (int s = 0; s < sims; ++s) {
        std::vector<double> a(25), b(25);
        for (auto& x : a) x = g(rng);
        for (auto& x : b) x = g(rng);
        rejections += mann_whitney_u(a, b, 0.05).significant;
    }
    const double rate = static_cast<double>(rejections) / sims;
    CHECK(rate <= 0.065);
    CHECK(rate >= 0.03);
}

TEST_CASE("distribution helpers") {
    CHECK(t_quantile(0.975, 1) == doctest::Approx(12.7062).epsilon(1e-5));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
    CHECK(f_sf(12.0, 2, 6) == doctest::Approx(1.0 / 125.0));
    CHECK(chisq_sf(7.2, 2) == doctest::Approx(std::exp(-3.6)));
    CHECK_THROWS_AS(normal_quantile(1.0), InputError);
}

TEST_CASE("anova on three hand groups") {
    const std::vector<std::vector<double>> groups{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
    const auto r = neuron_efficiency_test(groups, 0.05, TestMethod::anova_f);
    // SSB = 54 on 2 df, SSW = 6 on 6 df
    CHECK(r.statistic == doctest::Approx(27.0));
    // F(2, 6) tail: (1 + 2F/6)^-3
    CHECK(r.p_value == doctest::Approx(0.001));
    CHECK(r.significant);
}

TEST_CASE("kruskal-wallis on three hand groups") {
    const std::vector<std::vector<double>> groups{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
    const auto r = neuron_efficiency_test(groups, 0.05, TestMethod::kruskal_wallis);
    CHECK(r.statistic == doctest::Approx(7.2));
    CHECK(r.p_value == doctest::Approx(std::exp(-3.6)));
}

TEST_CASE("kruskal-wallis tie correction") {
    const std::vector<std::vector<double>> groups{{1, 1, 2}, {2, 3, 3}};
    // midranks: 1.5 1.5 3.5 | 3.5 5.5 5.5 ; sums 6.5 and 14.5
    const double h_raw = 12.0 / 42.0 * (6.5 * 6.5 / 3 + 14.5 * 14.5 / 3) - 21.0;
    const double c = 1.0 - 3.0 * 6.0 / (216.0 - 6.0);
    const auto r = neuron_efficiency_test(groups, 0.05, TestMethod::kruskal_wallis);
    CHECK(r.statistic == doctest::Approx(h_raw / c));
}

TEST_CASE("degenerate efficiency inputs") {
    const std::vector<std::vector<double>> flat{{0, 0}, {0, 0}, {0, 0}};
    for (auto m : {TestMethod::anova_f, TestMethod::kruskal_wallis}) {
        const auto r = neuron_efficiency_test(flat, 0.05, m);
        CHECK(r.statistic == 0.0);
        CHECK(r.p_value == 1.0);
        CHECK_FALSE(r.significant);
    }
    const std::vector<std::vector<double>> split{{1, 1}, {2, 2}};
    const auto r = neuron_efficiency_test(split, 0.05, TestMethod::anova_f);
    CHECK(std::isinf(r.statistic));
    CHECK(r.p_value == 0.0);
}

TEST_CASE("hidden output test table shape") {
    ActivationMatrix acts;
    acts.values.resize(9, 2);
    acts.values << 0, 1, 0.1, 2, 0.2, 3, 1, 4, 1.1, 5, 1.2, 6, 2, 7, 2.1, 8, 2.2, 9;
    acts.labels = {0, 0, 0, 1, 1, 1, 2, 2, 2};
    acts.neuron_names = {"h0", "h1"};
    acts.class_names = {"a", "b", "c"};
    const auto t = hidden_output_tests(acts);
    CHECK(t.entries.size() == 6);
    CHECK(t.class_pairs.size() == 3);
    CHECK(t.at(1, 2).class_i == 1);
    CHECK(t.at(1, 2).class_j == 2);
    CHECK(t.at(0, 0).result.statistic == 0.0);

    std::istringstream csv(neuron_test_table_csv(t));
    std::string header;
    std::getline(csv, header);
    CHECK(header == "neuron,U_0_1,p_0_1,U_0_2,p_0_2,U_1_2,p_1_2");

    acts.labels = {0, 0, 0, 0, 0, 0, 2, 2, 2};
    CHECK_THROWS_AS(hidden_output_tests(acts), InputError);
}
