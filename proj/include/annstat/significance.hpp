#pragma once

#include "annstat/dataset.hpp"
#include "annstat/network.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace annstat {

/// A finite cover {f_1..f_C} of a function class, each member represented by
/// its evaluations on the n sample points (column c of `evaluations`).
struct CoverBasis {
    Eigen::MatrixXd evaluations;  // n x C
    double epsilon = 0.0;         // declared cover radius, metadata only

    Eigen::Index size() const { return evaluations.cols(); }
};

// Sigma_ij = (1/n) sum_s f_i(x_s) f_j(x_s), symmetrised and with negative
// eigenvalues clipped to zero.
Eigen::MatrixXd estimate_covariance(const CoverBasis& basis);

// T = functional(index of the maximal coordinate of the draw, draw, basis)
using NullFunctional = std::function<double(Eigen::Index, const Eigen::VectorXd&, const CoverBasis&)>;

enum class BuiltinFunctional { gaussian_max, basis_sq_mean };
std::string to_string(BuiltinFunctional f);
BuiltinFunctional builtin_functional_from_string(const std::string& name);

// gaussian_max:  T = max_i Z_i
// basis_sq_mean: T = (1/n) sum_s f_{h*}(x_s)^2
NullFunctional make_functional(BuiltinFunctional f);

struct NullDistribution {
    std::vector<double> samples;  // sorted ascending
    std::string functional;
    Eigen::MatrixXd covariance;

    std::size_t draws() const { return samples.size(); }
    // F^{-1}(alpha) = T_(ceil(alpha * m_N)) for alpha in (0, 1].
    double quantile(double alpha) const;
};

/// Draws m_N vectors Z ~ N(0, Sigma) (Cholesky, eigen fallback when Sigma is
/// singular), takes h* = argmax_i Z_i (lowest index on ties) and records
/// T = functional(h*, Z). Requires m_N >= 100.
NullDistribution gaussian_null(const CoverBasis& basis, std::size_t draws, const NullFunctional& functional,
                               const std::string& functional_name, std::uint64_t seed);

// d f / d x_j per sample row. With a softmax output the class gradients are
// weighted by the predicted probabilities; otherwise they are summed.
Eigen::VectorXd input_sensitivity(const NetworkModel& model, const Eigen::MatrixXd& inputs, Eigen::Index input);

// lambda_n = (1/n) sum_s (d f / d x_j (x_s))^2
double gradient_statistic(const NetworkModel& model, const Eigen::MatrixXd& inputs, Eigen::Index input);

inline constexpr const char* kGradientStatisticFormula =
    "lambda_n = (1/n) * sum_s (sum_c w_c(x_s) * d out_c / d x_j (x_s))^2, "
    "w_c = predicted probability for softmax outputs, 1 otherwise";

// Cover from copies of `model` whose weights carry N(0, epsilon^2) jitter;
// member c is the input sensitivity of copy c.
CoverBasis perturbed_weight_cover(const NetworkModel& model, const Eigen::MatrixXd& inputs, Eigen::Index input,
                                  double epsilon, std::size_t members, std::uint64_t seed);

// Cover from networks retrained on copies of `data` whose column `input` is
// randomly permuted (fits of the null world where the output ignores x_j).
CoverBasis permutation_cover(const Dataset& data, const Architecture& arch, const TrainConfig& cfg,
                             Eigen::Index input, std::size_t members, std::uint64_t seed);

enum class CoverKind { permutation, perturbed };
std::string to_string(CoverKind k);
CoverKind cover_kind_from_string(const std::string& name);

struct NullConfig {
    std::size_t draws = 10000;  // m_N
    std::size_t cover_size = 20;
    CoverKind cover = CoverKind::permutation;
    double epsilon = 0.1;          // perturbed cover jitter scale
    TrainConfig cover_training{};  // permutation cover fits
    BuiltinFunctional functional = BuiltinFunctional::basis_sq_mean;
    std::uint64_t seed = 42;
};

struct SignificanceDecision {
    double statistic = 0.0;
    double critical_value = 0.0;
    bool reject = false;  // statistic > critical_value
    double alpha = 0.05;
    Eigen::Index input_index = 0;
    NullDistribution null;
    std::string statistic_formula = kGradientStatisticFormula;
};

SignificanceDecision input_significance_test(const NetworkModel& model, const Dataset& data, Eigen::Index input,
                                             double alpha, const NullConfig& cfg);

// Lower-level form with a caller-supplied cover.
SignificanceDecision input_significance_test(const NetworkModel& model, const Dataset& data, Eigen::Index input,
                                             double alpha, const CoverBasis& cover, std::size_t draws,
                                             const NullFunctional& functional, const std::string& functional_name,
                                             std::uint64_t seed);

std::string null_distribution_csv(const NullDistribution& null);

}  // namespace annstat
