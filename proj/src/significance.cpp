#include "annstat/significance.hpp"

#include "annstat/csv.hpp"
#include "annstat/error.hpp"
#include "annstat/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace annstat {

namespace {
constexpr const char* kModule = "significance";
}

Eigen::MatrixXd estimate_covariance(const CoverBasis& basis) {
    const auto n = basis.evaluations.rows();
    if (n < 2) throw InputError(kModule, "covariance needs at least two sample points");
    if (basis.size() < 1) throw InputError(kModule, "cover basis is empty");
    if (!basis.evaluations.allFinite()) throw InputError(kModule, "cover evaluations contain non-finite values");
    Eigen::MatrixXd sigma = basis.evaluations.transpose() * basis.evaluations / static_cast<double>(n);
    sigma = 0.5 * (sigma + sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    if (eig.info() != Eigen::Success) throw NumericError(kModule, "covariance eigendecomposition failed");
    if (eig.eigenvalues().minCoeff() < 0.0) {
        const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
        sigma = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
        sigma = 0.5 * (sigma + sigma.transpose());
    }
    return sigma;
}

std::string to_string(BuiltinFunctional f) {
    return f == BuiltinFunctional::gaussian_max ? "gaussian_max" : "basis_sq_mean";
}

BuiltinFunctional builtin_functional_from_string(const std::string& name) {
    if (name == "gaussian_max") return BuiltinFunctional::gaussian_max;
    if (name == "basis_sq_mean") return BuiltinFunctional::basis_sq_mean;
    throw ConfigError(kModule, "unknown functional '" + name + "'");
}

NullFunctional make_functional(BuiltinFunctional f) {
    if (f == BuiltinFunctional::gaussian_max) {
        return [](Eigen::Index best, const Eigen::VectorXd& z, const CoverBasis&) { return z[best]; };
    }
    return [](Eigen::Index best, const Eigen::VectorXd&, const CoverBasis& basis) {
        return basis.evaluations.col(best).squaredNorm() / static_cast<double>(basis.evaluations.rows());
    };
}

double NullDistribution::quantile(double alpha) const {
    if (samples.empty()) throw InputError(kModule, "null distribution is empty");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError(kModule, "quantile level must lie in (0, 1]");
    const double pos = std::ceil(alpha * static_cast<double>(samples.size()) - 1e-9);
    const auto idx = std::clamp<std::size_t>(static_cast<std::size_t>(pos), 1, samples.size());
    return samples[idx - 1];
}

NullDistribution gaussian_null(const CoverBasis& basis, std::size_t draws, const NullFunctional& functional,
                               const std::string& functional_name, std::uint64_t seed) {
    if (draws < 100) throw InputError(kModule, "null simulation needs m_N >= 100 draws");
    NullDistribution null;
    null.functional = functional_name;
    null.covariance = estimate_covariance(basis);
    const auto c = null.covariance.rows();

    Eigen::MatrixXd factor;
    Eigen::LLT<Eigen::MatrixXd> llt(null.covariance);
    if (llt.info() == Eigen::Success) {
        factor = llt.matrixL();
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(null.covariance);
        if (eig.info() != Eigen::Success) throw NumericError(kModule, "covariance eigendecomposition failed");
        const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
        if (eig.eigenvalues().minCoeff() < -1e-8 * scale) {
            throw NumericError(kModule, "covariance is not positive semidefinite");
        }
        factor = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }

    Rng rng(derive_seed(seed, "gaussian-null"));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd white(c);
    null.samples.reserve(draws);
    for (std::size_t w = 0; w < draws; ++w) {
        for (Eigen::Index i = 0; i < c; ++i) white[i] = normal(rng);
        const Eigen::VectorXd z = factor * white;
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < c; ++i) {
            if (z[i] > z[best]) best = i;
        }
        null.samples.push_back(functional(best, z, basis));
    }
    std::sort(null.samples.begin(), null.samples.end());
    return null;
}

Eigen::VectorXd input_sensitivity(const NetworkModel& model, const Eigen::MatrixXd& inputs, Eigen::Index input) {
    if (input < 0 || input >= model.input_dim()) throw InputError(kModule, "input index out of range");
    if (inputs.cols() != model.input_dim()) throw ShapeError(kModule, "inputs do not match the model");
    Eigen::VectorXd out(inputs.rows());
    for (Eigen::Index s = 0; s < inputs.rows(); ++s) {
        const Eigen::VectorXd x = inputs.row(s).transpose();
        const Eigen::VectorXd output = forward(model, x).output;
        double total = 0.0;
        for (Eigen::Index c = 0; c < model.output_dim(); ++c) {
            const double w = model.output_activation == Activation::softmax ? output[c] : 1.0;
            total += w * input_gradient(model, x, c)[input];
        }
        out[s] = total;
    }
    return out;
}

double gradient_statistic(const NetworkModel& model, const Eigen::MatrixXd& inputs, Eigen::Index input) {
    if (inputs.rows() == 0) throw InputError(kModule, "statistic needs at least one sample");
    return input_sensitivity(model, inputs, input).squaredNorm() / static_cast<double>(inputs.rows());
}

CoverBasis perturbed_weight_cover(const NetworkModel& model, const Eigen::MatrixXd& inputs, Eigen::Index input,
                                  double epsilon, std::size_t members, std::uint64_t seed) {
    if (members < 1) throw InputError(kModule, "cover needs at least one member");
    if (!(epsilon >= 0.0)) throw InputError(kModule, "epsilon must be >= 0");
    CoverBasis basis;
    basis.epsilon = epsilon;
    basis.evaluations.resize(inputs.rows(), static_cast<Eigen::Index>(members));
    for (std::size_t c = 0; c < members; ++c) {
        Rng rng(derive_seed(seed, "perturbed-cover", c));
        std::normal_distribution<double> jitter(0.0, epsilon > 0.0 ? epsilon : 1.0);
        auto noise = [&](double v) { return epsilon > 0.0 ? v + jitter(rng) : v; };
        NetworkModel copy = model;
        copy.hidden_weights = copy.hidden_weights.unaryExpr(noise);
        copy.hidden_biases = copy.hidden_biases.unaryExpr(noise);
        copy.output_weights = copy.output_weights.unaryExpr(noise);
        copy.output_biases = copy.output_biases.unaryExpr(noise);
        basis.evaluations.col(static_cast<Eigen::Index>(c)) = input_sensitivity(copy, inputs, input);
    }
    return basis;
}

CoverBasis permutation_cover(const Dataset& data, const Architecture& arch, const TrainConfig& cfg,
                             Eigen::Index input, std::size_t members, std::uint64_t seed) {
    if (members < 1) throw InputError(kModule, "cover needs at least one member");
    if (input < 0 || input >= data.num_features()) throw InputError(kModule, "input index out of range");
    CoverBasis basis;
    basis.evaluations.resize(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(members));
    std::vector<Eigen::Index> perm(data.size());
    for (std::size_t c = 0; c < members; ++c) {
        const std::uint64_t member_seed = derive_seed(seed, "permutation-cover", c);
        Rng rng(member_seed);
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        Dataset shuffled = data;
        for (std::size_t r = 0; r < data.size(); ++r) {
            shuffled.features(static_cast<Eigen::Index>(r), input) = data.features(perm[r], input);
        }
        TrainConfig member_cfg = cfg;
        member_cfg.seed = member_seed;
        const NetworkModel fitted = train(shuffled, arch, member_cfg);
        basis.evaluations.col(static_cast<Eigen::Index>(c)) = input_sensitivity(fitted, shuffled.features, input);
    }
    return basis;
}

std::string to_string(CoverKind k) { return k == CoverKind::permutation ? "permutation" : "perturbed"; }

CoverKind cover_kind_from_string(const std::string& name) {
    if (name == "permutation") return CoverKind::permutation;
    if (name == "perturbed") return CoverKind::perturbed;
    throw ConfigError(kModule, "unknown cover kind '" + name + "'");
}

SignificanceDecision input_significance_test(const NetworkModel& model, const Dataset& data, Eigen::Index input,
                                             double alpha, const CoverBasis& cover, std::size_t draws,
                                             const NullFunctional& functional, const std::string& functional_name,
                                             std::uint64_t seed) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError(kModule, "alpha must lie in (0, 1)");
    SignificanceDecision d;
    d.alpha = alpha;
    d.input_index = input;
    d.statistic = gradient_statistic(model, data.features, input);
    d.null = gaussian_null(cover, draws, functional, functional_name, seed);
    d.critical_value = d.null.quantile(1.0 - alpha);
    d.reject = d.statistic > d.critical_value;
    return d;
}

SignificanceDecision input_significance_test(const NetworkModel& model, const Dataset& data, Eigen::Index input,
                                             double alpha, const NullConfig& cfg) {
    model.validate();
    data.validate();
    if (input < 0 || input >= model.input_dim()) throw InputError(kModule, "input index out of range");
    const CoverBasis cover =
        cfg.cover == CoverKind::permutation
            ? permutation_cover(data, model.architecture(), cfg.cover_training, input, cfg.cover_size,
                                derive_seed(cfg.seed, "cover"))
            : perturbed_weight_cover(model, data.features, input, cfg.epsilon, cfg.cover_size,
                                     derive_seed(cfg.seed, "cover"));
    return input_significance_test(model, data, input, alpha, cover, cfg.draws, make_functional(cfg.functional),
                                   to_string(cfg.functional), derive_seed(cfg.seed, "null"));
}

std::string null_distribution_csv(const NullDistribution& null) {
    CsvTable csv;
    csv.header = {"rank", "T"};
    for (std::size_t i = 0; i < null.samples.size(); ++i) {
        csv.add_row({std::to_string(i + 1), format_double(null.samples[i])});
    }
    return csv.to_string();
}

}  // namespace annstat
