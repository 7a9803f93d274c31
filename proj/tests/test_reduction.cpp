#include "doctest.h"

#include "annstat/error.hpp"
#include "annstat/reduction.hpp"

#include "json.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

using namespace annstat;

namespace {

struct NaiveMerge {
    std::size_t a, b;
    double height;
};

// Ward by brute force: recompute every pairwise Ward distance from centroids.
std::vector<NaiveMerge> naive_ward(const Eigen::MatrixXd& pts) {
    struct C {
        std::size_t id;
        std::vector<Eigen::Index> members;
    };
    const auto k = static_cast<std::size_t>(pts.cols());
    std::vector<C> live;
    for (std::size_t i = 0; i < k; ++i) live.push_back({i, {static_cast<Eigen::Index>(i)}});
    auto centroid = [&](const C& c) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(pts.rows());
        for (auto m : c.members) s += pts.col(m);
        return Eigen::VectorXd(s / static_cast<double>(c.members.size()));
    };
    std::vector<NaiveMerge> out;
    for (std::size_t step = 0; step + 1 < k; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < live.size(); ++i) {
            for (std::size_t j = i + 1; j < live.size(); ++j) {
                const double na = static_cast<double>(live[i].members.size());
                const double nb = static_cast<double>(live[j].members.size());
                const double d = std::sqrt(2.0 * na * nb / (na + nb)) * (centroid(live[i]) - centroid(live[j])).norm();
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        out.push_back({std::min(live[bi].id, live[bj].id), std::max(live[bi].id, live[bj].id), best});
        C merged{k + step, live[bi].members};
        merged.members.insert(merged.members.end(), live[bj].members.begin(), live[bj].members.end());
        live.erase(live.begin() + static_cast<std::ptrdiff_t>(bj));
        live[bi] = merged;
    }
    return out;
}

Dataset blobs(std::size_t per_class, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.5);
    const double centers[3][2] = {{0, 0}, {3, 0}, {0, 3}};
    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(3 * per_class), 2);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            const auto r = static_cast<Eigen::Index>(static_cast<std::size_t>(c) * per_class + i);
            ds.features(r, 0) = centers[c][0] + g(rng);
            ds.features(r, 1) = centers[c][1] + g(rng);
            ds.labels.push_back(c);
        }
    }
    ds.feature_names = {"u", "v"};
    ds.class_names = {"a", "b", "c"};
    return ds;
}

}  // namespace

TEST_CASE("ward merges match a brute-force centroid implementation") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::MatrixXd pts = Eigen::MatrixXd::NullaryExpr(6, 9, [&] { return g(rng); });
        const auto asg = cluster_neurons(pts, 3);
        const auto oracle = naive_ward(pts);
        REQUIRE(asg.merges.size() == oracle.size());
        for (std::size_t i = 0; i < oracle.size(); ++i) {
            CHECK(asg.merges[i].left == oracle[i].a);
            CHECK(asg.merges[i].right == oracle[i].b);
            CHECK(asg.merges[i].height == doctest::Approx(oracle[i].height).epsilon(1e-10));
        }
    }
}

TEST_CASE("ward cut produces m clusters labelled by first appearance") {
    Eigen::MatrixXd pts(2, 6);
    pts << 10, 0, 10.1, 0.1, 20, 0.2,
           0, 0, 0, 0, 0, 0;
    const auto asg = cluster_neurons(pts, 3);
    CHECK(asg.clusters == 3);
    CHECK(asg.assignment == std::vector<std::size_t>{0, 1, 0, 1, 2, 1});
    CHECK(asg.sizes() == std::vector<std::size_t>{2, 3, 1});
    CHECK(asg.members(1) == std::vector<std::size_t>{1, 3, 5});
    const auto one = cluster_neurons(pts, 1);
    CHECK(one.sizes() == std::vector<std::size_t>{6});
    const auto all = cluster_neurons(pts, 6);
    CHECK(all.assignment == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("kmeans separates obvious groups") {
    Eigen::MatrixXd pts(2, 8);
    pts << 0, 0.1, 5, 5.1, 0.2, 5.2, 10, 10.1,
           0, 0.1, 5, 5.1, 0.1, 5.0, 0, 0.2;
    ClusterOptions opts;
    opts.method = ClusterMethod::kmeans;
    opts.seed = 3;
    const auto asg = cluster_neurons(pts, 3, opts);
    CHECK(asg.assignment[0] == asg.assignment[1]);
    CHECK(asg.assignment[0] == asg.assignment[4]);
    CHECK(asg.assignment[2] == asg.assignment[3]);
    CHECK(asg.assignment[2] == asg.assignment[5]);
    CHECK(asg.assignment[6] == asg.assignment[7]);
    CHECK(std::set<std::size_t>(asg.assignment.begin(), asg.assignment.end()).size() == 3);
    for (std::size_t i = 1; i < asg.inertia_history.size(); ++i) {
        CHECK(asg.inertia_history[i] <= asg.inertia_history[i - 1] + 1e-12);
    }
    const auto again = cluster_neurons(pts, 3, opts);
    CHECK(again.assignment == asg.assignment);
}

TEST_CASE("cluster count outside [1, k] is rejected") {
    const Eigen::MatrixXd pts = Eigen::MatrixXd::Random(3, 4);
    CHECK_THROWS_AS(cluster_neurons(pts, 0), InputError);
    CHECK_THROWS_AS(cluster_neurons(pts, 5), InputError);
}

TEST_CASE("aggregation rules") {
    Eigen::MatrixXd h(2, 3);
    h << 1, 2, 3,
         4, 6, 8;
    ClusterAssignment asg;
    asg.clusters = 2;
    asg.assignment = {0, 1, 0};
    asg.aggregation = Aggregation::mean;
    Eigen::MatrixXd expect(2, 2);
    expect << 2, 2, 6, 6;
    CHECK(aggregate_clusters(h, asg).isApprox(expect));
    asg.aggregation = Aggregation::sum;
    expect << 4, 2, 12, 6;
    CHECK(aggregate_clusters(h, asg).isApprox(expect));
    asg.aggregation = Aggregation::max;
    expect << 3, 2, 8, 6;
    CHECK(aggregate_clusters(h, asg).isApprox(expect));
}

TEST_CASE("pca on a hand 2x2 case") {
    Eigen::MatrixXd x(4, 2);
    x << 2, 0, -2, 0, 0, 1, 0, -1;
    const auto p = pca_fit(x, 2);
    CHECK(p.eigenvalues[0] == doctest::Approx(8.0 / 3.0));
    CHECK(p.eigenvalues[1] == doctest::Approx(2.0 / 3.0));
    CHECK(p.components(0, 0) == doctest::Approx(1.0));
    CHECK(p.components(1, 1) == doctest::Approx(1.0));
    const auto z = pca_transform(p, x);
    CHECK(z(0, 0) == doctest::Approx(2.0));
    CHECK(z(2, 1) == doctest::Approx(1.0));
    CHECK(p.explained_variance_ratio[0] == doctest::Approx(0.8));
}

TEST_CASE("pca sign convention and correlated data") {
    Eigen::MatrixXd x(4, 2);
    x << 1, 1, -1, -1, 2, 2, -2, -2;
    const auto p = pca_fit(x, 1);
    CHECK(p.components(0, 0) == doctest::Approx(std::sqrt(0.5)));
    CHECK(p.components(1, 0) == doctest::Approx(std::sqrt(0.5)));
    CHECK(p.eigenvalues[0] == doctest::Approx(20.0 / 3.0));
    CHECK(p.cumulative_ratio[0] == doctest::Approx(1.0));
}

TEST_CASE("pca invariants at m = k") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(40, 5, [&] { return g(rng); });
    x.col(3) = 2.0 * x.col(0) - x.col(1);  // rank 4
    for (bool standardize : {false, true}) {
        const auto p = pca_fit(x, 5, standardize);
        CHECK((p.components.transpose() * p.components - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-8);
        for (Eigen::Index i = 1; i < 5; ++i) CHECK(p.eigenvalues[i] <= p.eigenvalues[i - 1]);
        CHECK(p.eigenvalues.minCoeff() >= -1e-10);
        CHECK(std::abs(p.cumulative_ratio[4] - 1.0) <= 1e-9);
        const auto back = pca_inverse_transform(p, pca_transform(p, x));
        CHECK((back - x).cwiseAbs().maxCoeff() <= 1e-8);
        for (Eigen::Index c = 0; c < 5; ++c) {
            Eigen::Index arg = 0;
            p.components.col(c).cwiseAbs().maxCoeff(&arg);
            CHECK(p.components(arg, c) > 0.0);
        }
    }
}

TEST_CASE("pca beyond the rank yields zero eigenvalues") {
    Eigen::MatrixXd x(3, 4);
    x << 1, 2, 3, 4, 2, 1, 0, 3, 5, 5, 5, 5;
    const auto p = pca_fit(x, 4);
    CHECK(std::abs(p.eigenvalues[2]) <= 1e-10);
    CHECK(std::abs(p.eigenvalues[3]) <= 1e-10);
}

TEST_CASE("reduced models") {
    const auto ds = blobs(30, 5);
    TrainConfig tc;
    tc.epochs = 80;
    tc.seed = 1;
    const auto model = train(ds, Architecture{2, 8, 3}, tc);
    const auto acts = extract_hidden(model, ds);
    const auto asg = cluster_neurons(acts, 3);
    TrainConfig head;
    head.epochs = 80;

    const auto r = build_reduced_model(model, ds, ds, asg, head);
    CHECK(r.kind == ReductionKind::cluster);
    CHECK(r.reduced_dim() == 3);
    CHECK(r.head_parameter_count() == 3 * 3 + 3);
    CHECK(r.trainable_parameter_count() == 12);
    CHECK(r.total_parameter_count() == 12 + 8 * 3);
    CHECK(r.features.hidden_weights == model.hidden_weights);
    CHECK(r.map_hidden(acts.values).isApprox(aggregate_clusters(acts.values, asg)));
    CHECK(r.train_accuracy == doctest::Approx(r.accuracy(ds)));

    ReductionOptions full{true};
    const auto rf = build_reduced_model(model, ds, ds, asg, head, full);
    CHECK(rf.trainable_parameter_count() == 12 + 24);
    CHECK(rf.features.hidden_weights != model.hidden_weights);

    const auto proj = pca_fit(acts.values, 2);
    const auto rp = build_reduced_model(model, ds, ds, proj, head);
    CHECK(rp.kind == ReductionKind::pca);
    CHECK(rp.head_parameter_count() == 2 * 3 + 3);
    CHECK(rp.accuracy(ds) >= 0.8);

    const auto big = asg.sizes();
    for (std::size_t c = 0; c < asg.clusters; ++c) {
        const auto sub = build_cluster_submodel(model, ds, ds, asg, c, head);
        CHECK(sub.kind == ReductionKind::cluster_subset);
        CHECK(sub.source_neurons == asg.members(c));
        CHECK(sub.total_parameter_count() == big[c] * 3 + big[c] * 3 + 3);
    }
    CHECK_THROWS_AS(build_cluster_submodel(model, ds, ds, asg, 3, head), InputError);

    Dataset empty = ds.subset(std::vector<std::size_t>{});
    const auto no_test = build_reduced_model(model, ds, empty, asg, head);
    CHECK(std::isnan(no_test.test_accuracy));
}

TEST_CASE("singleton clusters keep the identity map") {
    const auto ds = blobs(20, 6);
    TrainConfig tc;
    tc.epochs = 40;
    const auto model = train(ds, Architecture{2, 5, 3}, tc);
    const auto acts = extract_hidden(model, ds);
    const auto asg = cluster_neurons(acts, 5);
    TrainConfig head;
    head.epochs = 5;
    const auto r = build_reduced_model(model, ds, ds, asg, head);
    CHECK(r.map_hidden(acts.values).isApprox(acts.values));
}

TEST_CASE("mapping documents are valid json") {
    Eigen::MatrixXd pts(2, 4);
    pts << 0, 1, 10, 11,
           0, 0, 0, 0;
    const auto asg = cluster_neurons(pts, 2);
    const auto j = nlohmann::json::parse(cluster_assignment_json(asg));
    CHECK(j.contains("assignment"));
    Eigen::MatrixXd x(3, 2);
    x << 1, 2, 3, 1, 0, 0;
    CHECK(nlohmann::json::parse(pca_projection_json(pca_fit(x, 1))).is_object());
    CHECK(dendrogram_csv(asg).rfind("child_a,child_b,height,size\n", 0) == 0);
}
