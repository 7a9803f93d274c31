#pragma once

#include "annstat/dataset.hpp"
#include "annstat/network.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace annstat {

enum class ClusterMethod { ward, kmeans };
enum class Aggregation { mean, centroid, sum, max };  // centroid == mean in row space

std::string to_string(ClusterMethod m);
std::string to_string(Aggregation a);
ClusterMethod cluster_method_from_string(const std::string& name);
Aggregation aggregation_from_string(const std::string& name);

// One agglomeration step. Leaves are 0..k-1; the cluster created by merge i
// gets id k + i (the usual linkage-matrix numbering).
struct Merge {
    std::size_t left = 0;
    std::size_t right = 0;
    double height = 0.0;
    std::size_t size = 0;
};

struct ClusterAssignment {
    std::size_t clusters = 0;             // m
    std::vector<std::size_t> assignment;  // per neuron, in [0, m); ids follow first appearance
    ClusterMethod method = ClusterMethod::ward;
    Aggregation aggregation = Aggregation::mean;
    std::vector<Merge> merges;            // ward: full dendrogram (k - 1 merges)
    double inertia = 0.0;                 // kmeans: final within-cluster sum of squares
    std::vector<double> inertia_history;  // kmeans: after each Lloyd iteration
    int iterations = 0;

    std::vector<std::size_t> members(std::size_t cluster) const;
    std::vector<std::size_t> sizes() const;
};

struct ClusterOptions {
    ClusterMethod method = ClusterMethod::ward;
    Aggregation aggregation = Aggregation::mean;
    std::uint64_t seed = 42;  // kmeans++ initialisation
    int max_iterations = 300;
};

/// Clusters the k neuron columns of the activation matrix (points in R^n).
/// ward: agglomerative, Ward criterion on Euclidean distance (Lance-Williams),
/// cut after k - m merges; ties merge the lowest-index pair first.
/// kmeans: seeded k-means++ then Lloyd iterations until the assignment stops
/// changing or max_iterations.
ClusterAssignment cluster_neurons(const Eigen::MatrixXd& activations, std::size_t m, const ClusterOptions& opts = {});
ClusterAssignment cluster_neurons(const ActivationMatrix& acts, std::size_t m, const ClusterOptions& opts = {});

// n x m matrix: column j aggregates the neuron columns of cluster j row by row.
Eigen::MatrixXd aggregate_clusters(const Eigen::MatrixXd& activations, const ClusterAssignment& asg);

// Linkage rows (left, right, height, size) for external dendrogram plotting.
std::string dendrogram_csv(const ClusterAssignment& asg);

struct PCAProjection {
    Eigen::VectorXd mean;                      // k
    Eigen::VectorXd scale;                     // k; all ones unless standardized
    Eigen::MatrixXd components;                // k x m, orthonormal columns
    Eigen::VectorXd eigenvalues;               // m, nonincreasing
    Eigen::VectorXd all_eigenvalues;           // k, nonincreasing
    Eigen::VectorXd explained_variance_ratio;  // m
    Eigen::VectorXd cumulative_ratio;          // m
    bool standardized = false;

    Eigen::Index input_dim() const { return components.rows(); }
    Eigen::Index output_dim() const { return components.cols(); }
};

/// Eigendecomposition of the sample covariance (n - 1 denominator) of the
/// centred (optionally standardized) columns. Each component is signed so its
/// largest-magnitude entry is positive.
PCAProjection pca_fit(const Eigen::MatrixXd& activations, std::size_t m, bool standardize = false);

// ((H - mean) / scale) * W
Eigen::MatrixXd pca_transform(const PCAProjection& proj, const Eigen::MatrixXd& activations);
// Z * W^T * scale + mean
Eigen::MatrixXd pca_inverse_transform(const PCAProjection& proj, const Eigen::MatrixXd& scores);

enum class ReductionKind { cluster, cluster_subset, pca };
std::string to_string(ReductionKind k);

/// extract_hidden -> map -> softmax head.
/// For cluster_subset the feature network keeps only the selected neurons
/// and the mapping is the identity over them.
struct ReducedModel {
    NetworkModel features;  // input -> hidden part; the output layer is unused
    ReductionKind kind = ReductionKind::cluster;
    std::variant<ClusterAssignment, PCAProjection> mapping;
    std::vector<std::size_t> source_neurons;  // neurons of the source model feeding the map
    Eigen::MatrixXd head_weights;             // p x m
    Eigen::VectorXd head_biases;              // p
    bool full_retrain = false;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;

    Eigen::Index reduced_dim() const { return head_weights.cols(); }
    std::size_t head_parameter_count() const;
    std::size_t hidden_parameter_count() const;
    std::size_t trainable_parameter_count() const;
    std::size_t total_parameter_count() const;

    Eigen::MatrixXd map_hidden(const Eigen::MatrixXd& hidden) const;
    Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& inputs) const;
    std::vector<int> predict(const Eigen::MatrixXd& inputs) const;
    double accuracy(const Dataset& data) const;
};

struct ReductionOptions {
    // Also retrain the input -> hidden weights (through the fixed mapping).
    bool full_retrain = false;
};

// Freezes the mapping (and, unless full_retrain, the input -> hidden weights)
// and fits a fresh softmax head with mini-batch SGD on the training rows.
// test_accuracy is NaN when `test` is empty.
ReducedModel build_reduced_model(const NetworkModel& model, const Dataset& train, const Dataset& test,
                                 const ClusterAssignment& mapping, const TrainConfig& head_cfg,
                                 const ReductionOptions& opts = {});
ReducedModel build_reduced_model(const NetworkModel& model, const Dataset& train, const Dataset& test,
                                 const PCAProjection& mapping, const TrainConfig& head_cfg,
                                 const ReductionOptions& opts = {});

// Model that keeps only the neurons of one cluster.
ReducedModel build_cluster_submodel(const NetworkModel& model, const Dataset& train, const Dataset& test,
                                    const ClusterAssignment& asg, std::size_t cluster,
                                    const TrainConfig& head_cfg, const ReductionOptions& opts = {});

std::string cluster_assignment_json(const ClusterAssignment& asg);
std::string pca_projection_json(const PCAProjection& proj);
std::string reduced_model_json(const ReducedModel& model);

}  // namespace annstat
