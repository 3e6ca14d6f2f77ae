#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "snplss/common.hpp"
#include "snplss/gxe.hpp"
#include "snplss/model.hpp"
#include "snplss/rng.hpp"
#include "snplss/stats.hpp"

namespace snplss {

struct CalibrationResult {
    std::vector<double> p_values;
    double rejection_rate = 0.0;  // at alpha = 0.05
    double ks_statistic = 0.0;
    double mean_estimate = 0.0;
};

// Synthetic vPRS x E interaction data: standardized scores, binary exposure,
// unit-variance noise, optional planted interaction coefficient.
inline CalibrationResult interaction_calibration(std::size_t n, std::size_t replicates,
                                                 double planted_interaction,
                                                 std::uint64_t seed) {
    CalibrationResult res;
    double sum_est = 0.0;
    std::size_t rejected = 0;
    for (std::size_t rep = 0; rep < replicates; ++rep) {
        auto rng = make_rng(seed, Stream::generic, rep);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::vector<double> mprs(n), vprs(n), env(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            mprs[i] = gauss(rng);
            vprs[i] = gauss(rng);
            env[i] = unif(rng) < 0.5 ? 1.0 : 0.0;
        }
        const std::vector<double> vprs_std = standardize(vprs, vprs);
        for (std::size_t i = 0; i < n; ++i)
            y[i] = 1.0 * mprs[i] - 0.5 * env[i] + planted_interaction * vprs_std[i] * env[i] +
                   gauss(rng);
        const RegressionFit fit = gxe_interaction_test(y, mprs, vprs_std, env);
        const long idx = static_cast<long>(fit.index_of("vPRS:E"));
        res.p_values.push_back(fit.p_values(idx));
        sum_est += fit.coefficients(idx);
        if (fit.p_values(idx) < 0.05) ++rejected;
    }
    res.rejection_rate = static_cast<double>(rejected) / static_cast<double>(replicates);
    res.ks_statistic = ks_uniform_statistic(res.p_values);
    res.mean_estimate = sum_est / static_cast<double>(replicates);
    return res;
}

struct IptwSimResult {
    double mean_abs_bias_weighted = 0.0;
    double mean_abs_bias_unweighted = 0.0;
};

// Confounded two-arm trial: the confounder drives both treatment uptake and
// the outcome, so the unweighted contrast is biased and IPTW should fix it.
inline IptwSimResult iptw_confounding_sim(std::size_t n, std::size_t replicates,
                                          double true_effect, std::uint64_t seed) {
    IptwSimResult res;
    for (std::size_t rep = 0; rep < replicates; ++rep) {
        auto rng = make_rng(seed, Stream::generic, 1000000 + rep);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::vector<double> conf(n), treated(n), dy(n);
        for (std::size_t i = 0; i < n; ++i) {
            conf[i] = gauss(rng);
            const double ps = 1.0 / (1.0 + std::exp(-(-0.3 + 1.0 * conf[i])));
            treated[i] = unif(rng) < ps ? 1.0 : 0.0;
            dy[i] = true_effect * treated[i] + 1.0 * conf[i] + gauss(rng);
        }
        DesignMatrix pd;
        pd.add_intercept();
        pd.add_column("confounder", conf);
        const LogisticFit pfit = logistic_propensity(pd, treated);
        const std::vector<double> w = iptw_weights(pfit.propensity, treated);

        const RegressionFit unw = treatment_effect(dy, treated);
        const RegressionFit wtd = treatment_effect(dy, treated, {}, w);
        const long t = static_cast<long>(unw.index_of("treated"));
        res.mean_abs_bias_unweighted += std::abs(unw.coefficients(t) - true_effect);
        res.mean_abs_bias_weighted += std::abs(wtd.coefficients(t) - true_effect);
    }
    res.mean_abs_bias_unweighted /= static_cast<double>(replicates);
    res.mean_abs_bias_weighted /= static_cast<double>(replicates);
    return res;
}

// Randomized trial with a differential treatment effect across a binary
// subgroup; returns the fraction of replicates where the interaction is
// detected at alpha = 0.05.
inline double subgroup_power_sim(std::size_t n, std::size_t replicates, double effect_high,
                                 double effect_low, std::uint64_t seed) {
    std::size_t detected = 0;
    for (std::size_t rep = 0; rep < replicates; ++rep) {
        auto rng = make_rng(seed, Stream::generic, 2000000 + rep);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::vector<double> treated(n), subgroup(n), dy(n);
        for (std::size_t i = 0; i < n; ++i) {
            treated[i] = unif(rng) < 0.5 ? 1.0 : 0.0;
            subgroup[i] = i < n / 2 ? 1.0 : 0.0;
            const double eff = subgroup[i] != 0.0 ? effect_high : effect_low;
            dy[i] = eff * treated[i] + gauss(rng);
        }
        const RegressionFit fit = subgroup_interaction_test(dy, treated, subgroup);
        if (fit.p_values(static_cast<long>(fit.index_of("subgroup:treated"))) < 0.05) ++detected;
    }
    return static_cast<double>(detected) / static_cast<double>(replicates);
}

}  // namespace snplss
