#include "doctest.h"

#include "annstat/error.hpp"
#include "annstat/significance.hpp"

#include <cmath>
#include <random>

using namespace annstat;

namespace {

// Label depends on x0 only; x1 is noise.
Dataset threshold_data(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        ds.features(r, 0) = g(rng);
        ds.features(r, 1) = g(rng);
        ds.labels.push_back(ds.features(r, 0) + 0.3 * g(rng) > 0.0 ? 1 : 0);
    }
    ds.feature_names = {"signal", "noise"};
    ds.class_names = {"neg", "pos"};
    return ds;
}

}  // namespace

TEST_CASE("cover covariance on a hand basis") {
    CoverBasis b;
    b.evaluations.resize(3, 2);
    b.evaluations << 1, 0, 0, 1, 1, 1;
    const auto s = estimate_covariance(b);
    Eigen::Matrix2d expect;
    expect << 2, 1, 1, 2;
    CHECK(s.isApprox(expect / 3.0));
    CoverBasis tiny;
    tiny.evaluations = Eigen::MatrixXd::Ones(1, 2);
    CHECK_THROWS_AS(estimate_covariance(tiny), InputError);
}

TEST_CASE("empirical quantile uses the ceiling order statistic") {
    NullDistribution null;
    for (int i = 1; i <= 100; ++i) null.samples.push_back(i);
    CHECK(null.quantile(0.95) == 95.0);
    CHECK(null.quantile(0.951) == 96.0);
    CHECK(null.quantile(0.001) == 1.0);
    CHECK(null.quantile(1.0) == 100.0);
    CHECK_THROWS_AS(null.quantile(0.0), InputError);
}

TEST_CASE("single-member gaussian max is a scaled normal") {
    CoverBasis b;
    b.evaluations = Eigen::VectorXd::Constant(50, 2.0);  // Sigma = 4
    const auto null = gaussian_null(b, 20000, make_functional(BuiltinFunctional::gaussian_max), "gaussian_max", 1);
    CHECK(null.draws() == 20000);
    CHECK(std::is_sorted(null.samples.begin(), null.samples.end()));
    CHECK(null.quantile(0.95) == doctest::Approx(2.0 * 1.6448536).epsilon(0.04));
    CHECK(null.quantile(0.5) == doctest::Approx(0.0).epsilon(0.05).scale(1.0));
}

TEST_CASE("tied draws pick the lowest index") {
    // Sigma = 0 makes every draw exactly zero
    CoverBasis b;
    b.evaluations = Eigen::MatrixXd::Zero(10, 3);
    std::vector<Eigen::Index> seen;
    NullFunctional record = [&](Eigen::Index best, const Eigen::VectorXd&, const CoverBasis&) {
        seen.push_back(best);
        return 0.0;
    };
    gaussian_null(b, 200, record, "record", 3);
    for (auto s : seen) CHECK(s == 0);
}

TEST_CASE("null simulation is seeded and validates m_N") {
    CoverBasis b;
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 1.0);
    b.evaluations = Eigen::MatrixXd::NullaryExpr(30, 4, [&] { return g(rng); });
    const auto f = make_functional(BuiltinFunctional::basis_sq_mean);
    const auto a = gaussian_null(b, 500, f, "basis_sq_mean", 9);
    const auto c = gaussian_null(b, 500, f, "basis_sq_mean", 9);
    CHECK(a.samples == c.samples);
    for (double t : a.samples) {
        bool matches_member = false;
        for (Eigen::Index i = 0; i < 4; ++i) {
            matches_member |= std::abs(t - b.evaluations.col(i).squaredNorm() / 30.0) < 1e-12;
        }
        CHECK(matches_member);
    }
    CHECK_THROWS_AS(gaussian_null(b, 99, f, "x", 1), InputError);
}

TEST_CASE("statistic of a linear identity network") {
    NetworkModel m = NetworkModel::zeros(Architecture{2, 2, 1, Activation::identity, Activation::identity});
    m.hidden_weights << 1, 2, 3, 4;
    m.output_weights << 0.5, -1;
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(7, 2);
    // d out / d x_1 = 0.5 * 2 - 1 * 4 = -3
    const auto sens = input_sensitivity(m, x, 1);
    for (Eigen::Index i = 0; i < sens.size(); ++i) CHECK(sens[i] == doctest::Approx(-3.0));
    CHECK(gradient_statistic(m, x, 1) == doctest::Approx(9.0));
}

TEST_CASE("softmax sensitivity matches probability-weighted finite differences") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 1.0);
    NetworkModel m = NetworkModel::zeros(Architecture{3, 4, 3, Activation::tanh, Activation::softmax});
    m.hidden_weights = m.hidden_weights.unaryExpr([&](double) { return g(rng); });
    m.output_weights = m.output_weights.unaryExpr([&](double) { return g(rng); });
    const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(5, 3, [&] { return g(rng); });
    const auto sens = input_sensitivity(m, x, 2);
    for (Eigen::Index s = 0; s < 5; ++s) {
        const Eigen::VectorXd at = x.row(s).transpose();
        const Eigen::VectorXd p = forward(m, at).output;
        Eigen::VectorXd up = at, down = at;
        const double h = 1e-6;
        up[2] += h;
        down[2] -= h;
        const Eigen::VectorXd fd = (forward(m, up).output - forward(m, down).output) / (2 * h);
        CHECK(sens[s] == doctest::Approx(p.dot(fd)).epsilon(1e-6));
    }
}

TEST_CASE("dead input has zero statistic and is never rejected") {
    const auto ds = threshold_data(80, 1);
    TrainConfig tc;
    tc.epochs = 30;
    auto m = train(ds, Architecture{2, 4, 2}, tc);
    m.hidden_weights.col(1).setZero();
    CHECK(gradient_statistic(m, ds.features, 1) == 0.0);
    NullConfig nc;
    nc.draws = 500;
    nc.cover_size = 5;
    nc.cover_training.epochs = 10;
    for (auto kind : {CoverKind::permutation, CoverKind::perturbed}) {
        nc.cover = kind;
        const auto d = input_significance_test(m, ds, 1, 0.05, nc);
        CHECK(d.statistic == 0.0);
        CHECK_FALSE(d.reject);
    }
}

TEST_CASE("perturbed cover with zero jitter repeats the model") {
    const auto ds = threshold_data(20, 2);
    const auto m = initialize_model(Architecture{2, 3, 2}, 0.0, 5);
    const auto cover = perturbed_weight_cover(m, ds.features, 0, 0.0, 3, 1);
    const auto base = input_sensitivity(m, ds.features, 0);
    for (Eigen::Index c = 0; c < 3; ++c) CHECK(cover.evaluations.col(c).isApprox(base));
}

TEST_CASE("relevant input is rejected, noise input mostly is not") {
    TrainConfig tc;
    tc.epochs = 40;
    tc.learning_rate = 0.1;
    NullConfig nc;
    nc.draws = 1000;
    nc.cover_size = 20;
    nc.cover_training = tc;
    int signal_rejects = 0, noise_rejects = 0;
    const int sims = 60;
    for (int s = 0; s < sims; ++s) {
        const auto ds = threshold_data(100, 100 + static_cast<std::uint64_t>(s));
        tc.seed = static_cast<std::uint64_t>(s);
        const auto m = train(ds, Architecture{2, 4, 2}, tc);
        nc.seed = static_cast<std::uint64_t>(s);
        signal_rejects += input_significance_test(m, ds, 0, 0.05, nc).reject;
        noise_rejects += input_significance_test(m, ds, 1, 0.05, nc).reject;
    }
    CHECK(signal_rejects >= 57);
    // size is about 1 / (cover_size + 1); 9 of 60 is far in the binomial tail
    CHECK(noise_rejects <= 9);
}

TEST_CASE("null distribution csv") {
    NullDistribution null;
    null.samples = {0.5, 1.5};
    CHECK(null_distribution_csv(null) == "rank,T\n1,0.5\n2,1.5\n");
}

TEST_CASE("constant single-member basis has unit covariance") {
    CoverBasis b;
    b.evaluations = Eigen::VectorXd::Ones(25);
    CHECK(estimate_covariance(b)(0, 0) == doctest::Approx(1.0));
    CoverBasis ortho;
    ortho.evaluations = Eigen::MatrixXd::Zero(4, 2);
    ortho.evaluations << 1, 1, 1, -1, -1, 1, -1, -1;
    CHECK(estimate_covariance(ortho).isApprox(Eigen::Matrix2d::Identity()));
}

TEST_CASE("covariance matches a double-loop sum") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(0.0, 1.0);
    CoverBasis b;
    b.evaluations = Eigen::MatrixXd::NullaryExpr(40, 5, [&] { return g(rng); });
    const auto s = estimate_covariance(b);
    for (Eigen::Index u = 0; u < 5; ++u) {
        for (Eigen::Index v = 0; v < 5; ++v) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < 40; ++i) acc += b.evaluations(i, u) * b.evaluations(i, v);
            CHECK(s(u, v) == doctest::Approx(acc / 40.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("gaussian max upper quantile for one member") {
    CoverBasis b;
    b.evaluations = Eigen::VectorXd::Constant(10, 1.5);  // Sigma = 2.25
    const int m = 40000;
    const auto null = gaussian_null(b, m, make_functional(BuiltinFunctional::gaussian_max), "gaussian_max", 77);
    // 3 standard errors of the sample quantile
    const double z = 1.959964, sd = 1.5;
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    const double se = sd * std::sqrt(0.975 * 0.025 / m) / phi;
    CHECK(std::abs(null.quantile(0.975) - z * sd) <= 3.0 * se);
}

TEST_CASE("statistic is invariant to row order") {
    const auto ds = threshold_data(60, 5);
    TrainConfig cfg;
    cfg.epochs = 20;
    const auto m = train(ds, Architecture{2, 4, 2}, cfg);
    Eigen::MatrixXd rev = ds.features.colwise().reverse();
    CHECK(gradient_statistic(m, rev, 0) == doctest::Approx(gradient_statistic(m, ds.features, 0)).epsilon(1e-12));
}
