#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace annstat {

struct LogisticOptions {
    int max_iterations = 100;
    double gradient_tolerance = 1e-8;  // on max |X^T (y - p)|
    int max_step_halvings = 20;
    double jitter = 1e-8;              // ridge added only when the Newton solve fails
    double separation_norm = 1e4;
    bool add_intercept = true;
};

struct LogisticFit {
    Eigen::VectorXd coefficients;  // intercept first when present
    Eigen::MatrixXd covariance;    // inverse observed information
    double log_likelihood = 0.0;
    double null_log_likelihood = 0.0;
    std::size_t n_obs = 0;
    std::size_t df_model = 0;      // non-intercept slopes
    bool intercept = true;
    bool converged = false;
    bool separation = false;
    int iterations = 0;
    double max_abs_gradient = 0.0;
    std::vector<std::string> warnings;

    Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& features) const;
    Eigen::VectorXd predict_proba(const Eigen::MatrixXd& features) const;
    // 1 when the linear predictor is > 0, else 0.
    std::vector<int> predict(const Eigen::MatrixXd& features) const;
};

/// Bernoulli maximum likelihood by Newton-Raphson with step halving.
/// Labels must be 0/1 with both classes present and n > q + 1. Perfect or
/// quasi-complete separation leaves converged = false with a warning.
LogisticFit logistic_fit(const Eigen::MatrixXd& features, std::span<const int> labels, const LogisticOptions& opts = {});

struct FitStatistics {
    double pseudo_r2 = 0.0;  // McFadden
    double aic = 0.0;
    double bic = 0.0;
    double llr = 0.0;
    double llr_p_value = 1.0;
    double log_likelihood = 0.0;
    double null_log_likelihood = 0.0;
    std::size_t n_obs = 0;
    std::size_t df_model = 0;
    std::size_t df_residuals = 0;
};

// aic = 2(df+1) - 2LL, bic = (df+1) ln n - 2LL, pseudo_r2 = 1 - LL/LL_null,
// llr p-value from chi-square(df) on 2(LL - LL_null).
FitStatistics fit_statistics(double log_likelihood, double null_log_likelihood, std::size_t df_model,
                             std::size_t n_obs);
FitStatistics fit_statistics(const LogisticFit& fit);

struct CoefficientRow {
    std::string name;
    double coef = 0.0;
    double std_err = 0.0;
    double z = 0.0;
    double p_value = 1.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    bool defined = true;  // false when std_err is zero or not finite
    std::string note;
};

// Wald inference for one coefficient: z = coef / se, two-sided normal p,
// coef +/- z_{1 - alpha/2} * se.
CoefficientRow coefficient_row(double coef, double std_err, double level = 0.95, std::string name = {});
std::vector<CoefficientRow> coefficient_table(const LogisticFit& fit, double level = 0.95);

// Indices of rows whose p-value exceeds alpha (strictly).
std::vector<std::size_t> significance_screen(const std::vector<CoefficientRow>& table, double alpha = 0.05);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct ClassReport {
    std::vector<ClassMetrics> per_class;
    double accuracy = 0.0;
    ClassMetrics macro;
    ClassMetrics weighted;
    std::vector<std::string> notes;
};

// Metrics of classes with zero support or zero predictions are reported as 0
// with a note. num_classes < 0 infers max label + 1.
ClassReport classification_report(std::span<const int> y_true, std::span<const int> y_pred, int num_classes = -1);

// Support-weighted mean of `values`.
double weighted_average(std::span<const double> values, std::span<const std::size_t> supports);

std::string classification_report_csv(const ClassReport& report, const std::vector<std::string>& class_names = {});
std::string coefficient_table_csv(const std::vector<CoefficientRow>& table);
std::string fit_statistics_csv(const FitStatistics& stats);

struct SweepRow {
    std::size_t components = 0;
    double accuracy = 0.0;
    double explained_variance = 0.0;  // cumulative ratio at this many components
    bool converged = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::size_t best_components = 0;  // argmax accuracy, smallest m on ties
};

/// For each m in [m_first, m_last]: PCA fit on training rows only, transform
/// both sides, logistic fit, test accuracy.
SweepResult lr_pca_sweep(const Eigen::MatrixXd& train_features, std::span<const int> train_labels,
                         const Eigen::MatrixXd& test_features, std::span<const int> test_labels,
                         std::size_t m_first, std::size_t m_last, const LogisticOptions& opts = {});

struct SplitConfig {
    double test_fraction = 0.2;
    std::uint64_t seed = 42;
};

SweepResult lr_pca_sweep(const Eigen::MatrixXd& features, std::span<const int> labels, std::size_t m_first,
                         std::size_t m_last, const SplitConfig& split, const LogisticOptions& opts = {});

std::string sweep_csv(const SweepResult& sweep);

}  // namespace annstat
