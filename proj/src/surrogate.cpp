#include "annstat/surrogate.hpp"

#include "annstat/csv.hpp"
#include "annstat/dataset.hpp"
#include "annstat/error.hpp"
#include "annstat/reduction.hpp"
#include "annstat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace annstat {

namespace {

constexpr const char* kModule = "surrogate";

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& x, bool intercept) {
    if (!intercept) return x;
    Eigen::MatrixXd d(x.rows(), x.cols() + 1);
    d.col(0).setOnes();
    d.rightCols(x.cols()) = x;
    return d;
}

double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - softplus(eta[i]);
    return ll;
}

// Solves H x = g; falls back to H + jitter I. Returns false if both fail.
bool newton_solve(const Eigen::MatrixXd& h, const Eigen::VectorXd& g, double jitter, Eigen::VectorXd& out) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        out = ldlt.solve(g);
        if (out.allFinite() && (h * out - g).norm() <= 1e-6 * (1.0 + g.norm())) return true;
    }
    Eigen::MatrixXd reg = h;
    reg.diagonal().array() += jitter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt2(reg);
    if (ldlt2.info() != Eigen::Success) return false;
    out = ldlt2.solve(g);
    return out.allFinite();
}

}  // namespace

Eigen::VectorXd LogisticFit::linear_predictor(const Eigen::MatrixXd& features) const {
    const Eigen::MatrixXd d = design_matrix(features, intercept);
    if (d.cols() != coefficients.size()) throw ShapeError(kModule, "feature count does not match the fit");
    return d * coefficients;
}

Eigen::VectorXd LogisticFit::predict_proba(const Eigen::MatrixXd& features) const {
    return linear_predictor(features).unaryExpr([](double v) { return sigmoid(v); });
}

std::vector<int> LogisticFit::predict(const Eigen::MatrixXd& features) const {
    const Eigen::VectorXd eta = linear_predictor(features);
    std::vector<int> out(static_cast<std::size_t>(eta.size()));
    for (Eigen::Index i = 0; i < eta.size(); ++i) out[static_cast<std::size_t>(i)] = eta[i] > 0.0 ? 1 : 0;
    return out;
}

LogisticFit logistic_fit(const Eigen::MatrixXd& features, std::span<const int> labels, const LogisticOptions& opts) {
    const auto n = static_cast<std::size_t>(features.rows());
    const auto q = static_cast<std::size_t>(features.cols());
    if (labels.size() != n) throw ShapeError(kModule, "label count does not match feature rows");
    if (!(n > q + 1)) throw InputError(kModule, "logistic fit needs n > q + 1 observations");
    if (!features.allFinite()) throw InputError(kModule, "features contain non-finite values");
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw InputError(kModule, "labels must be 0 or 1");
        y[static_cast<Eigen::Index>(i)] = labels[i];
        positives += static_cast<std::size_t>(labels[i]);
    }
    if (positives == 0 || positives == n) throw InputError(kModule, "labels must contain both classes");

    const Eigen::MatrixXd d = design_matrix(features, opts.add_intercept);
    LogisticFit fit;
    fit.intercept = opts.add_intercept;
    fit.n_obs = n;
    fit.df_model = q;
    fit.coefficients = Eigen::VectorXd::Zero(d.cols());
    const double ybar = static_cast<double>(positives) / static_cast<double>(n);
    fit.null_log_likelihood = static_cast<double>(n) * (ybar * std::log(ybar) + (1.0 - ybar) * std::log(1.0 - ybar));

    Eigen::VectorXd eta = d * fit.coefficients;
    double ll = log_likelihood(eta, y);
    Eigen::VectorXd prob, grad;
    auto refresh = [&] {
        prob = eta.unaryExpr([](double v) { return sigmoid(v); });
        grad = d.transpose() * (y - prob);
    };
    refresh();

    for (int iter = 1; iter <= opts.max_iterations; ++iter) {
        fit.max_abs_gradient = grad.cwiseAbs().maxCoeff();
        if (fit.max_abs_gradient < opts.gradient_tolerance) {
            fit.converged = true;
            break;
        }
        fit.iterations = iter;
        const Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
        const Eigen::MatrixXd hess = d.transpose() * w.asDiagonal() * d;
        Eigen::VectorXd step;
        if (!newton_solve(hess, grad, opts.jitter, step)) {
            fit.warnings.push_back("Newton system could not be solved at iteration " + std::to_string(iter));
            break;
        }
        double t = 1.0;
        Eigen::VectorXd beta = fit.coefficients + step;
        Eigen::VectorXd eta_new = d * beta;
        double ll_new = log_likelihood(eta_new, y);
        for (int h = 0; h < opts.max_step_halvings && !(ll_new >= ll); ++h) {
            t *= 0.5;
            beta = fit.coefficients + t * step;
            eta_new = d * beta;
            ll_new = log_likelihood(eta_new, y);
        }
        if (!(ll_new >= ll)) {
            fit.warnings.push_back("step halving failed to increase the log-likelihood at iteration " +
                                   std::to_string(iter));
            break;
        }
        fit.coefficients = beta;
        eta = eta_new;
        ll = ll_new;
        refresh();
        if (fit.coefficients.norm() > opts.separation_norm) {
            fit.separation = true;
            break;
        }
    }
    fit.max_abs_gradient = grad.cwiseAbs().maxCoeff();
    if (!fit.converged && fit.max_abs_gradient < opts.gradient_tolerance) fit.converged = true;
    if ((y - prob).cwiseAbs().maxCoeff() < 1e-6) fit.separation = true;
    if (fit.separation) {
        fit.converged = false;
        fit.warnings.push_back("perfect separation detected: maximum likelihood estimate does not exist");
    } else if (!fit.converged) {
        fit.warnings.push_back("Newton-Raphson did not converge");
    }
    fit.log_likelihood = ll;

    const Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
    Eigen::MatrixXd info = d.transpose() * w.asDiagonal() * d;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14) {
        info.diagonal().array() += opts.jitter;
        ldlt.compute(info);
        fit.warnings.push_back("information matrix is near singular; covariance uses a ridge of " +
                               format_double(opts.jitter));
    }
    fit.covariance = ldlt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
    fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose());
    return fit;
}

FitStatistics fit_statistics(double ll, double ll_null, std::size_t df_model, std::size_t n_obs) {
    FitStatistics s;
    s.log_likelihood = ll;
    s.null_log_likelihood = ll_null;
    s.n_obs = n_obs;
    s.df_model = df_model;
    s.df_residuals = n_obs > df_model + 1 ? n_obs - df_model - 1 : 0;
    const auto k = static_cast<double>(df_model + 1);
    s.aic = 2.0 * k - 2.0 * ll;
    s.bic = k * std::log(static_cast<double>(n_obs)) - 2.0 * ll;
    s.pseudo_r2 = ll_null != 0.0 ? 1.0 - ll / ll_null : 0.0;
    s.llr = 2.0 * (ll - ll_null);
    s.llr_p_value = df_model > 0 ? chisq_sf(s.llr, static_cast<double>(df_model)) : 1.0;
    return s;
}

FitStatistics fit_statistics(const LogisticFit& fit) {
    return fit_statistics(fit.log_likelihood, fit.null_log_likelihood, fit.df_model, fit.n_obs);
}

CoefficientRow coefficient_row(double coef, double std_err, double level, std::string name) {
    if (!(level > 0.0 && level < 1.0)) throw InputError(kModule, "confidence level must lie in (0, 1)");
    CoefficientRow row;
    row.name = std::move(name);
    row.coef = coef;
    row.std_err = std_err;
    if (!(std_err > 0.0) || !std::isfinite(std_err)) {
        row.defined = false;
        row.z = std::numeric_limits<double>::quiet_NaN();
        row.p_value = std::numeric_limits<double>::quiet_NaN();
        row.ci_lower = row.ci_upper = coef;
        row.note = "standard error is zero or undefined; z and p not defined";
        return row;
    }
    row.z = coef / std_err;
    row.p_value = std::min(1.0, 2.0 * normal_sf(std::abs(row.z)));
    const double crit = normal_quantile(1.0 - (1.0 - level) / 2.0);
    row.ci_lower = coef - crit * std_err;
    row.ci_upper = coef + crit * std_err;
    return row;
}

std::vector<CoefficientRow> coefficient_table(const LogisticFit& fit, double level) {
    std::vector<CoefficientRow> rows;
    for (Eigen::Index i = 0; i < fit.coefficients.size(); ++i) {
        const double var = fit.covariance(i, i);
        const Eigen::Index label = fit.intercept ? i : i + 1;
        rows.push_back(coefficient_row(fit.coefficients[i], var > 0.0 ? std::sqrt(var) : 0.0, level,
                                       "beta_" + std::to_string(label)));
    }
    return rows;
}

std::vector<std::size_t> significance_screen(const std::vector<CoefficientRow>& table, double alpha) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table[i].defined && table[i].p_value > alpha) out.push_back(i);
    }
    return out;
}

double weighted_average(std::span<const double> values, std::span<const std::size_t> supports) {
    if (values.size() != supports.size()) throw ShapeError(kModule, "values and supports differ in length");
    double total = 0.0, weight = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        total += values[i] * static_cast<double>(supports[i]);
        weight += static_cast<double>(supports[i]);
    }
    return weight > 0.0 ? total / weight : 0.0;
}

ClassReport classification_report(std::span<const int> y_true, std::span<const int> y_pred, int num_classes) {
    if (y_true.size() != y_pred.size()) throw ShapeError(kModule, "y_true and y_pred differ in length");
    if (y_true.empty()) throw InputError(kModule, "classification report needs at least one sample");
    int classes = num_classes;
    if (classes < 0) {
        classes = 0;
        for (std::size_t i = 0; i < y_true.size(); ++i) classes = std::max({classes, y_true[i] + 1, y_pred[i] + 1});
    }
    const auto c = static_cast<std::size_t>(classes);
    std::vector<std::size_t> tp(c, 0), fp(c, 0), fn(c, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i], p = y_pred[i];
        if (t < 0 || t >= classes || p < 0 || p >= classes) throw InputError(kModule, "label out of range");
        if (t == p) {
            ++tp[static_cast<std::size_t>(t)];
            ++correct;
        } else {
            ++fp[static_cast<std::size_t>(p)];
            ++fn[static_cast<std::size_t>(t)];
        }
    }
    ClassReport rep;
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(y_true.size());
    std::vector<double> prec, rec, f1;
    std::vector<std::size_t> support;
    for (std::size_t k = 0; k < c; ++k) {
        ClassMetrics m;
        m.support = tp[k] + fn[k];
        if (tp[k] + fp[k] > 0) {
            m.precision = static_cast<double>(tp[k]) / static_cast<double>(tp[k] + fp[k]);
        } else {
            rep.notes.push_back("class " + std::to_string(k) + " was never predicted; precision reported as 0");
        }
        if (m.support > 0) {
            m.recall = static_cast<double>(tp[k]) / static_cast<double>(m.support);
        } else {
            rep.notes.push_back("class " + std::to_string(k) + " is absent from y_true; recall reported as 0");
        }
        if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        rep.per_class.push_back(m);
        prec.push_back(m.precision);
        rec.push_back(m.recall);
        f1.push_back(m.f1);
        support.push_back(m.support);
    }
    const double cd = static_cast<double>(c);
    rep.macro = {std::accumulate(prec.begin(), prec.end(), 0.0) / cd, std::accumulate(rec.begin(), rec.end(), 0.0) / cd,
                 std::accumulate(f1.begin(), f1.end(), 0.0) / cd, y_true.size()};
    rep.weighted = {weighted_average(prec, support), weighted_average(rec, support), weighted_average(f1, support),
                    y_true.size()};
    return rep;
}

std::string classification_report_csv(const ClassReport& report, const std::vector<std::string>& class_names) {
    CsvTable csv;
    csv.header = {"class", "precision", "recall", "f1", "support"};
    auto add = [&](const std::string& name, const ClassMetrics& m) {
        csv.add_row({name, format_double(m.precision), format_double(m.recall), format_double(m.f1),
                     std::to_string(m.support)});
    };
    for (std::size_t k = 0; k < report.per_class.size(); ++k) {
        add(k < class_names.size() ? class_names[k] : std::to_string(k), report.per_class[k]);
    }
    csv.add_row({"accuracy", "", "", format_double(report.accuracy), std::to_string(report.macro.support)});
    add("macro avg", report.macro);
    add("weighted avg", report.weighted);
    return csv.to_string();
}

std::string coefficient_table_csv(const std::vector<CoefficientRow>& table) {
    CsvTable csv;
    csv.header = {"coefficient", "coef", "std_err", "z", "p_value", "ci_lower", "ci_upper", "note"};
    for (const auto& r : table) {
        csv.add_row({r.name, format_double(r.coef), format_double(r.std_err), format_double(r.z),
                     format_double(r.p_value), format_double(r.ci_lower), format_double(r.ci_upper), r.note});
    }
    return csv.to_string();
}

std::string fit_statistics_csv(const FitStatistics& s) {
    CsvTable csv;
    csv.header = {"pseudo_r2", "aic", "bic", "n_obs", "log_likelihood", "df_model", "ll_null", "df_residuals",
                  "llr_p_value"};
    csv.add_row({format_double(s.pseudo_r2), format_double(s.aic), format_double(s.bic), std::to_string(s.n_obs),
                 format_double(s.log_likelihood), std::to_string(s.df_model), format_double(s.null_log_likelihood),
                 std::to_string(s.df_residuals), format_double(s.llr_p_value)});
    return csv.to_string();
}

SweepResult lr_pca_sweep(const Eigen::MatrixXd& train_x, std::span<const int> train_y, const Eigen::MatrixXd& test_x,
                         std::span<const int> test_y, std::size_t m_first, std::size_t m_last,
                         const LogisticOptions& opts) {
    const auto q = static_cast<std::size_t>(train_x.cols());
    if (m_first < 1 || m_last > q || m_first > m_last) {
        throw InputError(kModule, "component range must satisfy 1 <= first <= last <= " + std::to_string(q));
    }
    if (test_x.cols() != train_x.cols()) throw ShapeError(kModule, "train and test feature counts differ");
    if (test_y.empty()) throw InputError(kModule, "sweep needs test rows");

    // One decomposition serves every m: the leading columns are shared.
    const PCAProjection full = pca_fit(train_x, m_last);
    SweepResult out;
    double best = -1.0;
    for (std::size_t m = m_first; m <= m_last; ++m) {
        PCAProjection proj = full;
        const auto mm = static_cast<Eigen::Index>(m);
        proj.components = full.components.leftCols(mm);
        const LogisticFit fit = logistic_fit(pca_transform(proj, train_x), train_y, opts);
        const auto pred = fit.predict(pca_transform(proj, test_x));
        std::size_t correct = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == test_y[i] ? 1 : 0;
        SweepRow row;
        row.components = m;
        row.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
        row.explained_variance = full.cumulative_ratio[mm - 1];
        row.converged = fit.converged;
        if (row.accuracy > best) {
            best = row.accuracy;
            out.best_components = m;
        }
        out.rows.push_back(row);
    }
    return out;
}

SweepResult lr_pca_sweep(const Eigen::MatrixXd& features, std::span<const int> labels, std::size_t m_first,
                         std::size_t m_last, const SplitConfig& split, const LogisticOptions& opts) {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw ShapeError(kModule, "label count does not match feature rows");
    }
    const auto idx = stratified_split(labels, 2, split.test_fraction, split.seed);
    auto take = [&](const std::vector<std::size_t>& rows, Eigen::MatrixXd& x, std::vector<int>& y) {
        x.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            x.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
            y.push_back(labels[rows[i]]);
        }
    };
    Eigen::MatrixXd tx, vx;
    std::vector<int> ty, vy;
    take(idx.train, tx, ty);
    take(idx.test, vx, vy);
    return lr_pca_sweep(tx, ty, vx, vy, m_first, m_last, opts);
}

std::string sweep_csv(const SweepResult& sweep) {
    CsvTable csv;
    csv.header = {"components", "accuracy", "explained_variance", "converged", "best"};
    for (const auto& r : sweep.rows) {
        csv.add_row({std::to_string(r.components), format_double(r.accuracy), format_double(r.explained_variance),
                     r.converged ? "1" : "0", r.components == sweep.best_components ? "1" : "0"});
    }
    return csv.to_string();
}

}  // namespace annstat
