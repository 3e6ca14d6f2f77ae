#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "snplss/common.hpp"

namespace snplss {

struct DesignMatrix {
    std::vector<std::string> names;
    Eigen::MatrixXd X;            // n x q, intercept column included by caller
    Eigen::VectorXd weights;      // empty = unweighted

    std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
    std::size_t q() const { return static_cast<std::size_t>(X.cols()); }

    void add_column(const std::string& name, std::span<const double> col) {
        if (X.cols() == 0) {
            X.resize(static_cast<long>(col.size()), 0);
        } else if (X.rows() == 0) {
            // Columns added before any data column (the intercept) are
            // constant; give them their rows now.
            X.conservativeResize(static_cast<long>(col.size()), Eigen::NoChange);
            X.setOnes();
        }
        if (static_cast<std::size_t>(X.rows()) != col.size())
            throw DataError("DesignMatrix: column length mismatch for " + name);
        X.conservativeResize(Eigen::NoChange, X.cols() + 1);
        for (long i = 0; i < X.rows(); ++i) X(i, X.cols() - 1) = col[static_cast<std::size_t>(i)];
        names.push_back(name);
    }

    // May be called before any data column; the row count is filled in when
    // the first data column arrives.
    void add_intercept() {
        std::vector<double> ones(n(), 1.0);
        add_column("(Intercept)", ones);
    }
};

struct RegressionFit {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd standard_errors;
    Eigen::VectorXd t_statistics;
    Eigen::VectorXd p_values;
    Eigen::VectorXd ci_lo, ci_hi;  // 95% CI
    long df_residual = 0;
    double sigma2 = 0.0;           // weighted RSS / (n - q)
    Eigen::VectorXd residuals;
    Eigen::VectorXd fitted;

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        throw DataError("RegressionFit: no term named " + name);
    }
};

inline double t_two_sided_p(double t, double df) {
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

inline double t_quantile_975(double df) {
    boost::math::students_t dist(df);
    return boost::math::quantile(dist, 0.975);
}

// Weighted least squares with classical inference: solve (X'WX)b = X'Wy,
// SE from sigma2*(X'WX)^-1 with sigma2 = weighted RSS/(n-q).
inline RegressionFit ols(const DesignMatrix& design, std::span<const double> y) {
    const std::size_t n = design.n(), q = design.q();
    if (y.size() != n) throw DataError("ols: response length mismatch");
    if (q >= n) throw DataError("ols: more parameters than observations");

    Eigen::VectorXd yv(n);
    for (std::size_t i = 0; i < n; ++i) yv(static_cast<long>(i)) = y[i];

    Eigen::VectorXd sw;  // sqrt of weights
    if (design.weights.size() != 0) {
        if (static_cast<std::size_t>(design.weights.size()) != n)
            throw DataError("ols: weight length mismatch");
        if ((design.weights.array() <= 0.0).any()) throw DataError("ols: weights must be > 0");
        sw = design.weights.array().sqrt();
    } else {
        sw = Eigen::VectorXd::Ones(static_cast<long>(n));
    }

    const Eigen::MatrixXd Xw = sw.asDiagonal() * design.X;
    const Eigen::VectorXd yw = sw.asDiagonal() * yv;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<long>(q)) {
        // name the columns past the numerical rank in pivot order
        std::string dep;
        const auto& perm = qr.colsPermutation().indices();
        for (long k = qr.rank(); k < static_cast<long>(q); ++k)
            dep += (dep.empty() ? "" : ", ") + design.names[static_cast<std::size_t>(perm(k))];
        throw DataError("ols: design matrix is rank deficient; dependent columns: " + dep);
    }

    RegressionFit fit;
    fit.names = design.names;
    fit.coefficients = qr.solve(yw);
    fit.fitted = design.X * fit.coefficients;
    fit.residuals = yv - fit.fitted;
    fit.df_residual = static_cast<long>(n - q);

    double rss = 0.0;
    for (long i = 0; i < static_cast<long>(n); ++i)
        rss += sw(i) * sw(i) * fit.residuals(i) * fit.residuals(i);
    fit.sigma2 = rss / static_cast<double>(fit.df_residual);

    const Eigen::MatrixXd xtx_inv =
        (Xw.transpose() * Xw).llt().solve(Eigen::MatrixXd::Identity(static_cast<long>(q),
                                                                    static_cast<long>(q)));
    fit.standard_errors.resize(static_cast<long>(q));
    fit.t_statistics.resize(static_cast<long>(q));
    fit.p_values.resize(static_cast<long>(q));
    fit.ci_lo.resize(static_cast<long>(q));
    fit.ci_hi.resize(static_cast<long>(q));
    const double tq = t_quantile_975(static_cast<double>(fit.df_residual));
    for (long j = 0; j < static_cast<long>(q); ++j) {
        fit.standard_errors(j) = std::sqrt(fit.sigma2 * xtx_inv(j, j));
        fit.t_statistics(j) = fit.coefficients(j) / fit.standard_errors(j);
        fit.p_values(j) = t_two_sided_p(fit.t_statistics(j), static_cast<double>(fit.df_residual));
        fit.ci_lo(j) = fit.coefficients(j) - tq * fit.standard_errors(j);
        fit.ci_hi(j) = fit.coefficients(j) + tq * fit.standard_errors(j);
    }
    return fit;
}

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

// Welch's unequal-variance two-sample t-test, two-sided.
inline TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2)
        throw DataError("two_sample_ttest: each group needs at least 2 observations");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double ma = mean(a), mb = mean(b);
    const double sa = sample_sd(a), sb = sample_sd(b);
    const double va = sa * sa / na, vb = sb * sb / nb;
    if (va + vb == 0.0) {
        if (ma == mb) return {0.0, na + nb - 2.0, 1.0};
        throw DataError("two_sample_ttest: zero variance in both groups with unequal means");
    }
    TTestResult res;
    res.t = (ma - mb) / std::sqrt(va + vb);
    res.df = (va + vb) * (va + vb) /
             (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    res.p = t_two_sided_p(res.t, res.df);
    return res;
}

struct LogisticFit {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    std::vector<double> propensity;
    int iterations = 0;
    bool converged = false;
};

// Maximum-likelihood logistic regression via IRLS. Convergence when the
// max |score| < 1e-8; declares separation when a coefficient passes 15.
inline LogisticFit logistic_propensity(const DesignMatrix& design,
                                       std::span<const double> treated) {
    const std::size_t n = design.n(), q = design.q();
    if (treated.size() != n) throw DataError("logistic_propensity: response length mismatch");
    bool any0 = false, any1 = false;
    for (double t : treated) {
        if (t == 0.0) any0 = true;
        else if (t == 1.0) any1 = true;
        else throw DataError("logistic_propensity: response must be 0/1");
    }
    if (!any0 || !any1) throw DataError("logistic_propensity: both classes must be present");

    Eigen::VectorXd yv(n);
    for (std::size_t i = 0; i < n; ++i) yv(static_cast<long>(i)) = treated[i];

    LogisticFit fit;
    fit.names = design.names;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<long>(q));
    for (int iter = 0; iter < 50; ++iter) {
        const Eigen::VectorXd eta = design.X * beta;
        const Eigen::VectorXd mu = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
        const Eigen::VectorXd score = design.X.transpose() * (yv - mu);
        fit.iterations = iter + 1;
        if (score.cwiseAbs().maxCoeff() < 1e-8) {
            fit.converged = true;
            break;
        }
        const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
        const Eigen::MatrixXd H = design.X.transpose() * w.asDiagonal() * design.X;
        const Eigen::VectorXd delta = H.ldlt().solve(score);
        if (!delta.allFinite())
            throw NumericError("logistic_propensity: singular information matrix");
        beta += delta;
        if (beta.cwiseAbs().maxCoeff() > 15.0)
            throw DataError("logistic_propensity: separation detected (coefficient diverging)");
    }
    fit.coefficients = beta;
    const Eigen::VectorXd eta = design.X * beta;
    fit.propensity.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        fit.propensity[i] = 1.0 / (1.0 + std::exp(-eta(static_cast<long>(i))));
    return fit;
}

// Type-7 quantile (linear interpolation of order statistics).
inline double quantile_type7(std::vector<double> v, double prob) {
    if (v.empty()) throw DataError("quantile_type7: empty vector");
    if (prob < 0.0 || prob > 1.0) throw ConfigError("quantile_type7: prob out of [0,1]");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * prob;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Kolmogorov-Smirnov statistic of a sample against Uniform(0,1).
inline double ks_uniform_statistic(std::vector<double> v) {
    if (v.empty()) throw DataError("ks_uniform_statistic: empty sample");
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double cdf = v[i];
        d = std::max(d, std::abs((static_cast<double>(i) + 1.0) / n - cdf));
        d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
    }
    return d;
}

// Critical value c(alpha)/sqrt(n) for the two-sided KS test.
inline double ks_critical_value(double alpha, std::size_t n) {
    return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

}  // namespace snplss
