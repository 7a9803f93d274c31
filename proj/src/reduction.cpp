#include "annstat/reduction.hpp"

#include "annstat/csv.hpp"
#include "annstat/error.hpp"
#include "annstat/random.hpp"

#include "json.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace annstat {

namespace {
constexpr const char* kModule = "reduction";
}

std::string to_string(ClusterMethod m) { return m == ClusterMethod::ward ? "ward" : "kmeans"; }

std::string to_string(Aggregation a) {
    switch (a) {
        case Aggregation::mean: return "mean";
        case Aggregation::centroid: return "centroid";
        case Aggregation::sum: return "sum";
        case Aggregation::max: return "max";
    }
    return "unknown";
}

ClusterMethod cluster_method_from_string(const std::string& name) {
    if (name == "ward") return ClusterMethod::ward;
    if (name == "kmeans") return ClusterMethod::kmeans;
    throw ConfigError(kModule, "unknown clustering method '" + name + "'");
}

Aggregation aggregation_from_string(const std::string& name) {
    if (name == "mean") return Aggregation::mean;
    if (name == "centroid") return Aggregation::centroid;
    if (name == "sum") return Aggregation::sum;
    if (name == "max") return Aggregation::max;
    throw ConfigError(kModule, "unknown aggregation '" + name + "'");
}

std::string to_string(ReductionKind k) {
    switch (k) {
        case ReductionKind::cluster: return "cluster";
        case ReductionKind::cluster_subset: return "cluster_subset";
        case ReductionKind::pca: return "pca";
    }
    return "unknown";
}

std::vector<std::size_t> ClusterAssignment::members(std::size_t cluster) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] == cluster) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> ClusterAssignment::sizes() const {
    std::vector<std::size_t> out(clusters, 0);
    for (auto c : assignment) ++out.at(c);
    return out;
}

namespace {

// Renumbers cluster labels in order of first appearance over neurons 0..k-1.
std::vector<std::size_t> canonical_labels(const std::vector<std::size_t>& raw) {
    const std::size_t top = raw.empty() ? 0 : *std::max_element(raw.begin(), raw.end());
    std::vector<std::size_t> remap(top + 1, std::numeric_limits<std::size_t>::max());
    std::size_t next = 0;
    std::vector<std::size_t> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto& slot = remap.at(raw[i]);
        if (slot == std::numeric_limits<std::size_t>::max()) slot = next++;
        out[i] = slot;
    }
    return out;
}

ClusterAssignment ward_clusters(const Eigen::MatrixXd& points_by_column, std::size_t m) {
    const auto k = static_cast<std::size_t>(points_by_column.cols());
    Eigen::MatrixXd dist(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            dist(i, j) = (points_by_column.col(i) - points_by_column.col(j)).norm();
        }
    }
    std::vector<std::size_t> slot_id(k), slot_size(k, 1);
    std::iota(slot_id.begin(), slot_id.end(), std::size_t{0});
    std::vector<char> active(k, 1);
    // parent links over linkage ids for the cut
    std::vector<std::size_t> parent(2 * k, std::numeric_limits<std::size_t>::max());

    ClusterAssignment asg;
    asg.method = ClusterMethod::ward;
    for (std::size_t step = 0; step + 1 < k; ++step) {
        std::size_t bi = 0, bj = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < k; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < k; ++j) {
                if (active[j] && dist(i, j) < best) {
                    best = dist(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        const auto ni = static_cast<double>(slot_size[bi]);
        const auto nj = static_cast<double>(slot_size[bj]);
        for (std::size_t x = 0; x < k; ++x) {
            if (!active[x] || x == bi || x == bj) continue;
            const auto nx = static_cast<double>(slot_size[x]);
            const double d2 = ((nx + ni) * dist(bi, x) * dist(bi, x) + (nx + nj) * dist(bj, x) * dist(bj, x) -
                               nx * best * best) /
                              (nx + ni + nj);
            dist(bi, x) = dist(x, bi) = std::sqrt(std::max(0.0, d2));
        }
        const std::size_t new_id = k + step;
        std::size_t left = slot_id[bi], right = slot_id[bj];
        if (left > right) std::swap(left, right);
        asg.merges.push_back({left, right, best, slot_size[bi] + slot_size[bj]});
        parent[left] = parent[right] = new_id;
        slot_id[bi] = new_id;
        slot_size[bi] += slot_size[bj];
        active[bj] = 0;
    }

    // Apply the first k - m merges: a leaf's cluster is its highest ancestor
    // created before the cut.
    const std::size_t cut = k - m;
    std::vector<std::size_t> raw(k);
    for (std::size_t leaf = 0; leaf < k; ++leaf) {
        std::size_t node = leaf;
        while (parent[node] != std::numeric_limits<std::size_t>::max() && parent[node] - k < cut) node = parent[node];
        raw[leaf] = node;
    }
    asg.clusters = m;
    asg.assignment = canonical_labels(raw);
    return asg;
}

double squared_distance(const Eigen::MatrixXd& pts, std::size_t i, const Eigen::VectorXd& center) {
    return (pts.col(static_cast<Eigen::Index>(i)) - center).squaredNorm();
}

ClusterAssignment kmeans_clusters(const Eigen::MatrixXd& pts, std::size_t m, std::uint64_t seed, int max_iter) {
    const auto k = static_cast<std::size_t>(pts.cols());
    const auto dim = pts.rows();
    Rng rng(derive_seed(seed, "kmeans++"));

    // k-means++ seeding
    std::vector<std::size_t> chosen;
    std::vector<char> taken(k, 0);
    chosen.push_back(std::uniform_int_distribution<std::size_t>(0, k - 1)(rng));
    taken[chosen.back()] = 1;
    std::vector<double> d2(k);
    while (chosen.size() < m) {
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (auto c : chosen) best = std::min(best, (pts.col(static_cast<Eigen::Index>(i)) - pts.col(static_cast<Eigen::Index>(c))).squaredNorm());
            d2[i] = taken[i] ? 0.0 : best;
            total += d2[i];
        }
        std::size_t next = 0;
        if (total > 0.0) {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            next = k - 1;
            for (std::size_t i = 0; i < k; ++i) {
                if (d2[i] <= 0.0) continue;
                if (r < d2[i]) {
                    next = i;
                    break;
                }
                r -= d2[i];
            }
            while (taken[next]) next = (next + k - 1) % k;
        } else {
            // remaining points coincide with chosen centres
            std::vector<std::size_t> free;
            for (std::size_t i = 0; i < k; ++i) {
                if (!taken[i]) free.push_back(i);
            }
            next = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
        }
        chosen.push_back(next);
        taken[next] = 1;
    }
    Eigen::MatrixXd centers(dim, static_cast<Eigen::Index>(m));
    for (std::size_t c = 0; c < m; ++c) centers.col(static_cast<Eigen::Index>(c)) = pts.col(static_cast<Eigen::Index>(chosen[c]));

    ClusterAssignment asg;
    asg.method = ClusterMethod::kmeans;
    asg.clusters = m;
    std::vector<std::size_t> labels(k, std::numeric_limits<std::size_t>::max());
    for (int iter = 1; iter <= max_iter; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t best_c = 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < m; ++c) {
                const double dd = squared_distance(pts, i, centers.col(static_cast<Eigen::Index>(c)));
                if (dd < best) {
                    best = dd;
                    best_c = c;
                }
            }
            if (labels[i] != best_c) changed = true;
            labels[i] = best_c;
        }
        // empty clusters take the point farthest from its centre among
        // clusters that can spare one
        std::vector<std::size_t> counts(m, 0);
        for (auto l : labels) ++counts[l];
        for (std::size_t c = 0; c < m; ++c) {
            if (counts[c] > 0) continue;
            std::size_t far = k;
            double far_d = -1.0;
            for (std::size_t i = 0; i < k; ++i) {
                if (counts[labels[i]] < 2) continue;
                const double dd = squared_distance(pts, i, centers.col(static_cast<Eigen::Index>(labels[i])));
                if (dd > far_d) {
                    far_d = dd;
                    far = i;
                }
            }
            --counts[labels[far]];
            labels[far] = c;
            counts[c] = 1;
            changed = true;
        }
        centers.setZero();
        for (std::size_t i = 0; i < k; ++i) centers.col(static_cast<Eigen::Index>(labels[i])) += pts.col(static_cast<Eigen::Index>(i));
        for (std::size_t c = 0; c < m; ++c) centers.col(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
        double inertia = 0.0;
        for (std::size_t i = 0; i < k; ++i) inertia += squared_distance(pts, i, centers.col(static_cast<Eigen::Index>(labels[i])));
        asg.inertia_history.push_back(inertia);
        asg.iterations = iter;
        if (!changed) break;
    }
    asg.inertia = asg.inertia_history.back();
    asg.assignment = canonical_labels(labels);
    return asg;
}

}  // namespace

ClusterAssignment cluster_neurons(const Eigen::MatrixXd& activations, std::size_t m, const ClusterOptions& opts) {
    const auto k = static_cast<std::size_t>(activations.cols());
    if (m < 1 || m > k) {
        throw InputError(kModule, "cluster count m = " + std::to_string(m) + " must lie in [1, " + std::to_string(k) + "]");
    }
    if (activations.rows() < 2) throw InputError(kModule, "clustering needs at least two samples");
    if (!activations.allFinite()) throw InputError(kModule, "activation matrix contains non-finite values");
    ClusterAssignment asg = opts.method == ClusterMethod::ward
                                ? ward_clusters(activations, m)
                                : kmeans_clusters(activations, m, opts.seed, opts.max_iterations);
    asg.aggregation = opts.aggregation;
    return asg;
}

ClusterAssignment cluster_neurons(const ActivationMatrix& acts, std::size_t m, const ClusterOptions& opts) {
    return cluster_neurons(acts.values, m, opts);
}

Eigen::MatrixXd aggregate_clusters(const Eigen::MatrixXd& activations, const ClusterAssignment& asg) {
    if (static_cast<std::size_t>(activations.cols()) != asg.assignment.size()) {
        throw ShapeError(kModule, "assignment length does not match activation columns");
    }
    const auto m = static_cast<Eigen::Index>(asg.clusters);
    Eigen::MatrixXd out = asg.aggregation == Aggregation::max
                              ? Eigen::MatrixXd::Constant(activations.rows(), m, -std::numeric_limits<double>::infinity())
                              : Eigen::MatrixXd::Zero(activations.rows(), m);
    const auto sizes = asg.sizes();
    for (std::size_t i = 0; i < asg.assignment.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(asg.assignment[i]);
        const auto col = activations.col(static_cast<Eigen::Index>(i));
        switch (asg.aggregation) {
            case Aggregation::max: out.col(c) = out.col(c).cwiseMax(col); break;
            case Aggregation::sum: out.col(c) += col; break;
            case Aggregation::mean:
            case Aggregation::centroid: out.col(c) += col / static_cast<double>(sizes[asg.assignment[i]]); break;
        }
    }
    return out;
}

std::string dendrogram_csv(const ClusterAssignment& asg) {
    CsvTable csv;
    csv.header = {"child_a", "child_b", "height", "size"};
    for (const auto& mg : asg.merges) {
        csv.add_row({std::to_string(mg.left), std::to_string(mg.right), format_double(mg.height), std::to_string(mg.size)});
    }
    return csv.to_string();
}

PCAProjection pca_fit(const Eigen::MatrixXd& activations, std::size_t m, bool standardize) {
    const auto k = static_cast<std::size_t>(activations.cols());
    const auto n = activations.rows();
    if (m < 1 || m > k) throw InputError(kModule, "component count must lie in [1, k]");
    if (n < 2) throw InputError(kModule, "PCA needs at least two samples");
    if (!activations.allFinite()) throw InputError(kModule, "activation matrix contains non-finite values");

    PCAProjection proj;
    proj.standardized = standardize;
    proj.mean = activations.colwise().mean().transpose();
    Eigen::MatrixXd centered = activations.rowwise() - proj.mean.transpose();
    proj.scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(k));
    if (standardize) {
        for (Eigen::Index c = 0; c < centered.cols(); ++c) {
            const double sd = std::sqrt(centered.col(c).squaredNorm() / static_cast<double>(n - 1));
            if (sd > 0.0) proj.scale[c] = sd;
        }
        centered = centered.array().rowwise() / proj.scale.transpose().array();
    }
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericError(kModule, "covariance eigendecomposition failed");

    const auto kk = static_cast<Eigen::Index>(k);
    proj.all_eigenvalues = eig.eigenvalues().reverse().cwiseMax(0.0);
    Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
    for (Eigen::Index c = 0; c < kk; ++c) {
        Eigen::Index arg = 0;
        vectors.col(c).cwiseAbs().maxCoeff(&arg);
        if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
    }
    const auto mm = static_cast<Eigen::Index>(m);
    proj.components = vectors.leftCols(mm);
    proj.eigenvalues = proj.all_eigenvalues.head(mm);
    const double total = proj.all_eigenvalues.sum();
    proj.explained_variance_ratio = total > 0.0 ? Eigen::VectorXd(proj.eigenvalues / total) : Eigen::VectorXd::Zero(mm);
    proj.cumulative_ratio.resize(mm);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < mm; ++i) {
        acc += proj.explained_variance_ratio[i];
        proj.cumulative_ratio[i] = acc;
    }
    return proj;
}

Eigen::MatrixXd pca_transform(const PCAProjection& proj, const Eigen::MatrixXd& activations) {
    if (activations.cols() != proj.input_dim()) throw ShapeError(kModule, "column count does not match PCA input");
    Eigen::MatrixXd centered = activations.rowwise() - proj.mean.transpose();
    centered = centered.array().rowwise() / proj.scale.transpose().array();
    return centered * proj.components;
}

Eigen::MatrixXd pca_inverse_transform(const PCAProjection& proj, const Eigen::MatrixXd& scores) {
    if (scores.cols() != proj.output_dim()) throw ShapeError(kModule, "score columns do not match PCA output");
    Eigen::MatrixXd back = scores * proj.components.transpose();
    back = back.array().rowwise() * proj.scale.transpose().array();
    return back.rowwise() + proj.mean.transpose();
}

// ---------------------------------------------------------------------------
// Reduced models

std::size_t ReducedModel::head_parameter_count() const {
    return static_cast<std::size_t>(head_weights.size() + head_biases.size());
}

std::size_t ReducedModel::hidden_parameter_count() const {
    return static_cast<std::size_t>(features.hidden_weights.size() + features.hidden_biases.size());
}

std::size_t ReducedModel::trainable_parameter_count() const {
    return head_parameter_count() + (full_retrain ? hidden_parameter_count() : 0);
}

std::size_t ReducedModel::total_parameter_count() const {
    return head_parameter_count() + hidden_parameter_count();
}

Eigen::MatrixXd ReducedModel::map_hidden(const Eigen::MatrixXd& hidden) const {
    if (const auto* asg = std::get_if<ClusterAssignment>(&mapping)) return aggregate_clusters(hidden, *asg);
    return pca_transform(std::get<PCAProjection>(mapping), hidden);
}

Eigen::MatrixXd ReducedModel::predict_proba(const Eigen::MatrixXd& inputs) const {
    const Eigen::MatrixXd z = map_hidden(hidden_outputs(features, inputs));
    Eigen::MatrixXd logits = (z * head_weights.transpose()).rowwise() + head_biases.transpose();
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        out.row(i) = apply_output_activation(Activation::softmax, logits.row(i).transpose()).transpose();
    }
    return out;
}

std::vector<int> ReducedModel::predict(const Eigen::MatrixXd& inputs) const {
    const Eigen::MatrixXd proba = predict_proba(inputs);
    std::vector<int> out(static_cast<std::size_t>(proba.rows()));
    for (Eigen::Index i = 0; i < proba.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax_lowest(proba.row(i).transpose());
    return out;
}

double ReducedModel::accuracy(const Dataset& data) const {
    if (data.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    const auto pred = predict(data.features);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

namespace {

// d(loss)/d(hidden) given d(loss)/d(mapped) for one sample.
Eigen::VectorXd map_backward(const ReducedModel& rm, const Eigen::VectorXd& hidden, const Eigen::VectorXd& dz) {
    Eigen::VectorXd dh = Eigen::VectorXd::Zero(hidden.size());
    if (const auto* asg = std::get_if<ClusterAssignment>(&rm.mapping)) {
        const auto sizes = asg->sizes();
        if (asg->aggregation == Aggregation::max) {
            std::vector<Eigen::Index> winner(asg->clusters, -1);
            for (std::size_t i = 0; i < asg->assignment.size(); ++i) {
                auto& w = winner[asg->assignment[i]];
                const auto ii = static_cast<Eigen::Index>(i);
                if (w < 0 || hidden[ii] > hidden[w]) w = ii;
            }
            for (std::size_t c = 0; c < asg->clusters; ++c) dh[winner[c]] += dz[static_cast<Eigen::Index>(c)];
        } else {
            for (std::size_t i = 0; i < asg->assignment.size(); ++i) {
                const std::size_t c = asg->assignment[i];
                const double w = asg->aggregation == Aggregation::sum ? 1.0 : 1.0 / static_cast<double>(sizes[c]);
                dh[static_cast<Eigen::Index>(i)] = w * dz[static_cast<Eigen::Index>(c)];
            }
        }
    } else {
        const auto& proj = std::get<PCAProjection>(rm.mapping);
        dh = (proj.components * dz).cwiseQuotient(proj.scale);
    }
    return dh;
}

void fit_reduced(ReducedModel& rm, const Dataset& train, int num_classes, const TrainConfig& cfg) {
    cfg.validate();
    train.validate();
    const Eigen::Index m = [&] {
        if (const auto* asg = std::get_if<ClusterAssignment>(&rm.mapping)) return static_cast<Eigen::Index>(asg->clusters);
        return std::get<PCAProjection>(rm.mapping).output_dim();
    }();
    const Eigen::Index p = num_classes;

    // fresh Glorot-uniform head
    Rng init_rng(derive_seed(cfg.seed, "head-init"));
    const double scale = cfg.init_scale > 0.0 ? cfg.init_scale : std::sqrt(6.0 / static_cast<double>(m + p));
    std::uniform_real_distribution<double> init(-scale, scale);
    rm.head_weights.resize(p, m);
    for (Eigen::Index r = 0; r < p; ++r)
        for (Eigen::Index c = 0; c < m; ++c) rm.head_weights(r, c) = init(init_rng);
    rm.head_biases = Eigen::VectorXd::Zero(p);

    const std::size_t n = train.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, "head-shuffle"));
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    const double lr = cfg.learning_rate;

    Eigen::MatrixXd frozen;  // mapped features when the hidden layer is fixed
    if (!rm.full_retrain) frozen = rm.map_hidden(hidden_outputs(rm.features, train.features));

    auto epoch_loss = [&]() {
        const Eigen::MatrixXd proba = rm.predict_proba(train.features);
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            loss -= std::log(std::max(proba(static_cast<Eigen::Index>(i), train.labels[i]), 1e-300));
        }
        return loss / static_cast<double>(n) +
               0.5 * cfg.l2_penalty * (rm.head_weights.squaredNorm() + (rm.full_retrain ? rm.features.hidden_weights.squaredNorm() : 0.0));
    };

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t len = std::min(batch, n - start);
            Eigen::MatrixXd g_w = Eigen::MatrixXd::Zero(p, m);
            Eigen::VectorXd g_b = Eigen::VectorXd::Zero(p);
            Eigen::MatrixXd g_a;
            Eigen::VectorXd g_a0;
            if (rm.full_retrain) {
                g_a = Eigen::MatrixXd::Zero(rm.features.hidden_dim(), rm.features.input_dim());
                g_a0 = Eigen::VectorXd::Zero(rm.features.hidden_dim());
            }
            for (std::size_t t = start; t < start + len; ++t) {
                const auto i = static_cast<Eigen::Index>(order[t]);
                Eigen::VectorXd z, pre, h, x;
                if (rm.full_retrain) {
                    x = train.features.row(i).transpose();
                    pre = rm.features.hidden_biases + rm.features.hidden_weights * x;
                    h = pre.unaryExpr([&](double v) { return activate(rm.features.hidden_activation, v); });
                    z = rm.map_hidden(h.transpose()).row(0).transpose();
                } else {
                    z = frozen.row(i).transpose();
                }
                Eigen::VectorXd delta =
                    apply_output_activation(Activation::softmax, rm.head_biases + rm.head_weights * z);
                delta[train.labels[order[t]]] -= 1.0;
                g_w.noalias() += delta * z.transpose();
                g_b += delta;
                if (rm.full_retrain) {
                    Eigen::VectorXd dh = map_backward(rm, h, rm.head_weights.transpose() * delta);
                    for (Eigen::Index j = 0; j < dh.size(); ++j) dh[j] *= activate_derivative(rm.features.hidden_activation, pre[j]);
                    g_a.noalias() += dh * x.transpose();
                    g_a0 += dh;
                }
            }
            const double step = lr / static_cast<double>(len);
            rm.head_weights -= step * g_w + lr * cfg.l2_penalty * rm.head_weights;
            rm.head_biases -= step * g_b;
            if (rm.full_retrain) {
                rm.features.hidden_weights -= step * g_a + lr * cfg.l2_penalty * rm.features.hidden_weights;
                rm.features.hidden_biases -= step * g_a0;
            }
        }
        const double loss = epoch_loss();
        if (!std::isfinite(loss)) throw DivergenceError(kModule, epoch, loss);
    }
}

ReducedModel finish(ReducedModel rm, const Dataset& train, const Dataset& test, int num_classes,
                    const TrainConfig& cfg) {
    fit_reduced(rm, train, num_classes, cfg);
    rm.train_accuracy = rm.accuracy(train);
    rm.test_accuracy = rm.accuracy(test);
    return rm;
}

void check_source(const NetworkModel& model, const Dataset& train) {
    model.validate();
    if (train.num_features() != model.input_dim()) throw ShapeError(kModule, "dataset does not match model inputs");
}

}  // namespace

ReducedModel build_reduced_model(const NetworkModel& model, const Dataset& train, const Dataset& test,
                                 const ClusterAssignment& mapping, const TrainConfig& head_cfg,
                                 const ReductionOptions& opts) {
    check_source(model, train);
    if (mapping.assignment.size() != static_cast<std::size_t>(model.hidden_dim())) {
        throw ShapeError(kModule, "cluster assignment does not match the model's hidden layer");
    }
    ReducedModel rm;
    rm.features = model;
    rm.kind = ReductionKind::cluster;
    rm.mapping = mapping;
    rm.source_neurons.resize(mapping.assignment.size());
    std::iota(rm.source_neurons.begin(), rm.source_neurons.end(), std::size_t{0});
    rm.full_retrain = opts.full_retrain;
    return finish(std::move(rm), train, test, static_cast<int>(model.output_dim()), head_cfg);
}

ReducedModel build_reduced_model(const NetworkModel& model, const Dataset& train, const Dataset& test,
                                 const PCAProjection& mapping, const TrainConfig& head_cfg,
                                 const ReductionOptions& opts) {
    check_source(model, train);
    if (mapping.input_dim() != model.hidden_dim()) throw ShapeError(kModule, "PCA input does not match the hidden layer");
    ReducedModel rm;
    rm.features = model;
    rm.kind = ReductionKind::pca;
    rm.mapping = mapping;
    rm.source_neurons.resize(static_cast<std::size_t>(model.hidden_dim()));
    std::iota(rm.source_neurons.begin(), rm.source_neurons.end(), std::size_t{0});
    rm.full_retrain = opts.full_retrain;
    return finish(std::move(rm), train, test, static_cast<int>(model.output_dim()), head_cfg);
}

ReducedModel build_cluster_submodel(const NetworkModel& model, const Dataset& train, const Dataset& test,
                                    const ClusterAssignment& asg, std::size_t cluster,
                                    const TrainConfig& head_cfg, const ReductionOptions& opts) {
    check_source(model, train);
    if (asg.assignment.size() != static_cast<std::size_t>(model.hidden_dim())) {
        throw ShapeError(kModule, "cluster assignment does not match the model's hidden layer");
    }
    if (cluster >= asg.clusters) throw InputError(kModule, "cluster id out of range");
    const auto members = asg.members(cluster);
    const auto size = static_cast<Eigen::Index>(members.size());

    ReducedModel rm;
    rm.kind = ReductionKind::cluster_subset;
    rm.source_neurons = members;
    rm.features.hidden_activation = model.hidden_activation;
    rm.features.output_activation = model.output_activation;
    rm.features.hidden_weights.resize(size, model.input_dim());
    rm.features.hidden_biases.resize(size);
    for (Eigen::Index r = 0; r < size; ++r) {
        const auto src = static_cast<Eigen::Index>(members[static_cast<std::size_t>(r)]);
        rm.features.hidden_weights.row(r) = model.hidden_weights.row(src);
        rm.features.hidden_biases[r] = model.hidden_biases[src];
    }
    rm.features.output_weights = Eigen::MatrixXd::Zero(model.output_dim(), size);
    rm.features.output_biases = Eigen::VectorXd::Zero(model.output_dim());

    ClusterAssignment identity;
    identity.clusters = members.size();
    identity.method = asg.method;
    identity.aggregation = Aggregation::mean;
    identity.assignment.resize(members.size());
    std::iota(identity.assignment.begin(), identity.assignment.end(), std::size_t{0});
    rm.mapping = identity;
    rm.full_retrain = opts.full_retrain;
    return finish(std::move(rm), train, test, static_cast<int>(model.output_dim()), head_cfg);
}

namespace {

using nlohmann::json;

json to_json_vector(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

json to_json_matrix(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(to_json_vector(m.row(r).transpose()));
    return out;
}

json assignment_doc(const ClusterAssignment& asg) {
    json doc;
    doc["method"] = to_string(asg.method);
    doc["aggregation"] = to_string(asg.aggregation);
    doc["clusters"] = asg.clusters;
    doc["assignment"] = asg.assignment;
    doc["sizes"] = asg.sizes();
    json merges = json::array();
    for (const auto& mg : asg.merges) merges.push_back({mg.left, mg.right, mg.height, mg.size});
    doc["merges"] = merges;
    if (asg.method == ClusterMethod::kmeans) {
        doc["inertia"] = asg.inertia;
        doc["inertia_history"] = asg.inertia_history;
        doc["iterations"] = asg.iterations;
    }
    return doc;
}

json projection_doc(const PCAProjection& p) {
    json doc;
    doc["components"] = p.output_dim();
    doc["standardized"] = p.standardized;
    doc["mean"] = to_json_vector(p.mean);
    doc["scale"] = to_json_vector(p.scale);
    doc["W"] = to_json_matrix(p.components);
    doc["eigenvalues"] = to_json_vector(p.eigenvalues);
    doc["all_eigenvalues"] = to_json_vector(p.all_eigenvalues);
    doc["explained_variance_ratio"] = to_json_vector(p.explained_variance_ratio);
    doc["cumulative_ratio"] = to_json_vector(p.cumulative_ratio);
    return doc;
}

}  // namespace

std::string cluster_assignment_json(const ClusterAssignment& asg) { return assignment_doc(asg).dump(2) + "\n"; }

std::string pca_projection_json(const PCAProjection& proj) { return projection_doc(proj).dump(2) + "\n"; }

std::string reduced_model_json(const ReducedModel& rm) {
    json doc;
    doc["kind"] = to_string(rm.kind);
    doc["full_retrain"] = rm.full_retrain;
    doc["source_neurons"] = rm.source_neurons;
    doc["hidden_activation"] = to_string(rm.features.hidden_activation);
    doc["A"] = to_json_matrix(rm.features.hidden_weights);
    doc["a0"] = to_json_vector(rm.features.hidden_biases);
    if (const auto* asg = std::get_if<ClusterAssignment>(&rm.mapping)) {
        doc["mapping"] = assignment_doc(*asg);
    } else {
        doc["mapping"] = projection_doc(std::get<PCAProjection>(rm.mapping));
    }
    doc["head_weights"] = to_json_matrix(rm.head_weights);
    doc["head_biases"] = to_json_vector(rm.head_biases);
    doc["head_parameters"] = rm.head_parameter_count();
    doc["trainable_parameters"] = rm.trainable_parameter_count();
    doc["total_parameters"] = rm.total_parameter_count();
    doc["train_accuracy"] = rm.train_accuracy;
    doc["test_accuracy"] = std::isnan(rm.test_accuracy) ? json(nullptr) : json(rm.test_accuracy);
    return doc.dump(2) + "\n";
}

}  // namespace annstat
