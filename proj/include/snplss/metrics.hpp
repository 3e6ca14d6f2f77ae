#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "snplss/common.hpp"

namespace snplss {

struct EvalReport {
    double r2 = 0.0;
    double test_nll = 0.0;
    long n_selected_mu = 0;
    long n_selected_sigma = 0;
    long n_shared = 0;
    double tpr_mu = 0.0, tnr_mu = 0.0;
    double tpr_sigma = 0.0, tnr_sigma = 0.0;
    double sigma_corr = 0.0;      // on the sigma scale
    double sigma_corr_eta = 0.0;  // diagnostic, log-sigma scale
    double fit_seconds = 0.0;

    nlohmann::json to_json() const {
        return {{"r2", r2},
                {"test_nll", test_nll},
                {"n_selected_mu", n_selected_mu},
                {"n_selected_sigma", n_selected_sigma},
                {"n_shared", n_shared},
                {"tpr_mu", tpr_mu},
                {"tnr_mu", tnr_mu},
                {"tpr_sigma", tpr_sigma},
                {"tnr_sigma", tnr_sigma},
                {"sigma_corr", sigma_corr},
                {"sigma_corr_eta", sigma_corr_eta},
                {"fit_seconds", fit_seconds}};
    }

    static EvalReport from_json(const nlohmann::json& j) {
        EvalReport r;
        r.r2 = j.at("r2");
        r.test_nll = j.at("test_nll");
        r.n_selected_mu = j.at("n_selected_mu");
        r.n_selected_sigma = j.at("n_selected_sigma");
        r.n_shared = j.at("n_shared");
        r.tpr_mu = j.at("tpr_mu");
        r.tnr_mu = j.at("tnr_mu");
        r.tpr_sigma = j.at("tpr_sigma");
        r.tnr_sigma = j.at("tnr_sigma");
        r.sigma_corr = j.at("sigma_corr");
        r.sigma_corr_eta = j.at("sigma_corr_eta");
        r.fit_seconds = j.at("fit_seconds");
        return r;
    }

    static std::string tsv_header() {
        return "r2\ttest_nll\tn_selected_mu\tn_selected_sigma\tn_shared\ttpr_mu\ttnr_mu\t"
               "tpr_sigma\ttnr_sigma\tsigma_corr\tsigma_corr_eta\tfit_seconds";
    }

    std::string tsv_row() const {
        std::ostringstream ss;
        ss.precision(17);
        ss << r2 << '\t' << test_nll << '\t' << n_selected_mu << '\t' << n_selected_sigma << '\t'
           << n_shared << '\t' << tpr_mu << '\t' << tnr_mu << '\t' << tpr_sigma << '\t'
           << tnr_sigma << '\t' << sigma_corr << '\t' << sigma_corr_eta << '\t' << fit_seconds;
        return ss.str();
    }
};

// Squared Pearson correlation.
inline double r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
    if (sample_sd(y_true) <= 0.0 || sample_sd(y_pred) <= 0.0)
        throw DataError("r_squared: constant input vector");
    const double r = pearson(y_true, y_pred);
    return r * r;
}

// (TPR, TNR) of a selected-variant set against the truth set.
inline std::pair<double, double> selection_rates(const std::set<std::string>& selected,
                                                 const std::set<std::string>& truth,
                                                 std::size_t p) {
    if (truth.empty()) throw DataError("selection_rates: empty truth set (TPR undefined)");
    if (truth.size() > p || selected.size() > p)
        throw DataError("selection_rates: set larger than variant universe");
    std::size_t tp = 0;
    for (const auto& id : selected)
        if (truth.count(id)) ++tp;
    const std::size_t fp = selected.size() - tp;
    const std::size_t negatives = p - truth.size();
    const double tpr = static_cast<double>(tp) / static_cast<double>(truth.size());
    const double tnr = negatives == 0
                           ? 1.0
                           : static_cast<double>(negatives - fp) / static_cast<double>(negatives);
    return {tpr, tnr};
}

inline double sigma_correlation(std::span<const double> sigma_true,
                                std::span<const double> sigma_hat) {
    if (sample_sd(sigma_true) <= 0.0 || sample_sd(sigma_hat) <= 0.0)
        throw DataError("sigma_correlation: constant input vector");
    return pearson(sigma_true, sigma_hat);
}

}  // namespace snplss
