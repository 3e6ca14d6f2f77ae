#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "snplss/common.hpp"
#include "snplss/genotype.hpp"

namespace snplss {

enum class Param { mu, sigma };

inline const char* param_name(Param p) { return p == Param::mu ? "mu" : "sigma"; }

// eta = log(sigma) is clamped to this range inside predict so exp never
// overflows; sigma stays within [3e-7, 3e6].
constexpr double kEtaClampLo = -15.0;
constexpr double kEtaClampHi = 15.0;

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5*log(2*pi)

struct UpdateRecord {
    long iteration = 0;
    Param parameter = Param::mu;
    std::string variant_id;  // empty marks an intercept-only update
    double intercept_increment = 0.0;
    double slope_increment = 0.0;
    double step_length_used = 0.0;
};

struct Prediction {
    std::vector<double> mu;
    std::vector<double> sigma;
    std::vector<double> eta_sigma;
};

struct LssModel {
    double beta0_init = 0.0;   // iteration-0 intercepts
    double gamma0_init = 0.0;
    double beta0 = 0.0;        // intercepts at m_stop
    double gamma0 = 0.0;
    std::map<std::string, double> beta;   // mu sub-model, keyed by variant id
    std::map<std::string, double> gamma;  // sigma sub-model
    std::map<std::string, std::string> allele1;  // effect allele per variant
    std::vector<UpdateRecord> update_log;
    long m_stop = 0;
    std::vector<double> valid_loss_path;  // index = iteration (0 = intercept-only)
    std::string config_echo;              // JSON string of the fit configuration
};

struct CoefficientState {
    double beta0 = 0.0;
    double gamma0 = 0.0;
    std::map<std::string, double> beta;
    std::map<std::string, double> gamma;
};

// Replays the update log up to and including `iteration`.
inline CoefficientState coefficients_at(const LssModel& model, long iteration) {
    CoefficientState s;
    s.beta0 = model.beta0_init;
    s.gamma0 = model.gamma0_init;
    for (const auto& u : model.update_log) {
        if (u.iteration > iteration) break;
        double& intercept = (u.parameter == Param::mu) ? s.beta0 : s.gamma0;
        intercept += u.intercept_increment;
        if (!u.variant_id.empty()) {
            auto& coefs = (u.parameter == Param::mu) ? s.beta : s.gamma;
            coefs[u.variant_id] += u.slope_increment;
        }
    }
    return s;
}

namespace detail {

inline void add_scaled_columns(const GenotypeMatrix& g,
                               const std::map<std::string, double>& coefs,
                               std::vector<double>& acc) {
    std::vector<std::string> missing;
    for (const auto& [id, c] : coefs)
        if (!g.has_variant(id)) missing.push_back(id);
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        throw DataError("model variants absent from genotype matrix: " + list);
    }
    std::vector<double> col;
    for (const auto& [id, c] : coefs) {
        if (c == 0.0) continue;
        g.dosage_column(g.column_index(id), Imputation::mean, col);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += c * col[i];
    }
}

}  // namespace detail

inline Prediction predict(const LssModel& model, const GenotypeMatrix& g,
                          std::optional<long> at_iteration = std::nullopt) {
    const std::size_t n = g.n();
    Prediction pred;
    if (at_iteration.has_value()) {
        const CoefficientState s = coefficients_at(model, *at_iteration);
        pred.mu.assign(n, s.beta0);
        pred.eta_sigma.assign(n, s.gamma0);
        detail::add_scaled_columns(g, s.beta, pred.mu);
        detail::add_scaled_columns(g, s.gamma, pred.eta_sigma);
    } else {
        pred.mu.assign(n, model.beta0);
        pred.eta_sigma.assign(n, model.gamma0);
        detail::add_scaled_columns(g, model.beta, pred.mu);
        detail::add_scaled_columns(g, model.gamma, pred.eta_sigma);
    }
    pred.sigma.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        pred.eta_sigma[i] = std::clamp(pred.eta_sigma[i], kEtaClampLo, kEtaClampHi);
        pred.sigma[i] = std::exp(pred.eta_sigma[i]);
    }
    return pred;
}

// (mPRS, vPRS): mPRS is the mu linear predictor, vPRS the log-sigma one.
inline std::pair<std::vector<double>, std::vector<double>> score(const LssModel& model,
                                                                 const GenotypeMatrix& g) {
    Prediction pred = predict(model, g);
    return {std::move(pred.mu), std::move(pred.eta_sigma)};
}

// Mean per-observation Gaussian negative log-likelihood.
inline double nll_loss(std::span<const double> y, const Prediction& pred) {
    const std::size_t n = y.size();
    if (pred.mu.size() != n || pred.sigma.size() != n || pred.eta_sigma.size() != n)
        throw DataError("nll_loss: length mismatch");
    if (n == 0) throw DataError("nll_loss: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(y[i]) || !std::isfinite(pred.mu[i]) || !std::isfinite(pred.eta_sigma[i]))
            throw NumericError("nll_loss: non-finite input at index " + std::to_string(i));
        const double r = y[i] - pred.mu[i];
        total += kHalfLog2Pi + pred.eta_sigma[i] + r * r / (2.0 * pred.sigma[i] * pred.sigma[i]);
    }
    return total / static_cast<double>(n);
}

// Negative gradient of the NLL w.r.t. mu: (y - mu)/sigma^2.
inline std::vector<double> residual_mu(std::span<const double> y, const Prediction& pred) {
    const std::size_t n = y.size();
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i)
        r[i] = (y[i] - pred.mu[i]) / (pred.sigma[i] * pred.sigma[i]);
    return r;
}

// Negative gradient of the NLL w.r.t. eta = log(sigma): (y - mu)^2/sigma^2 - 1.
inline std::vector<double> residual_sigma(std::span<const double> y, const Prediction& pred) {
    const std::size_t n = y.size();
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = y[i] - pred.mu[i];
        r[i] = d * d / (pred.sigma[i] * pred.sigma[i]) - 1.0;
    }
    return r;
}

// (s - mean(reference)) / sd(reference), elementwise.
inline std::vector<double> standardize(std::span<const double> scores,
                                       std::span<const double> reference) {
    const double m = mean(reference);
    const double sd = sample_sd(reference);
    if (sd <= 0.0) throw DataError("standardize: reference has zero sample SD");
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - m) / sd;
    return out;
}

// --- coefficient TSV + JSON sidecar ------------------------------------

inline void export_coefficients(const LssModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    out.precision(17);
    out << "variant_id\tallele1\tbeta\tgamma\n";
    out << "(Intercept_mu)\t.\t" << model.beta0 << "\t0\n";
    out << "(Intercept_sigma)\t.\t0\t" << model.gamma0 << "\n";
    std::map<std::string, std::pair<double, double>> rows;
    for (const auto& [id, b] : model.beta) rows[id].first = b;
    for (const auto& [id, gcoef] : model.gamma) rows[id].second = gcoef;
    for (const auto& [id, bg] : rows) {
        auto it = model.allele1.find(id);
        out << id << '\t' << (it != model.allele1.end() ? it->second : ".") << '\t' << bg.first
            << '\t' << bg.second << '\n';
    }

    nlohmann::json side;
    side["m_stop"] = model.m_stop;
    side["beta0_init"] = model.beta0_init;
    side["gamma0_init"] = model.gamma0_init;
    side["validation_loss"] = model.valid_loss_path;
    if (!model.config_echo.empty())
        side["config"] = nlohmann::json::parse(model.config_echo);
    auto& log = side["update_log"] = nlohmann::json::array();
    for (const auto& u : model.update_log)
        log.push_back({{"m", u.iteration},
                       {"parameter", param_name(u.parameter)},
                       {"variant_id", u.variant_id},
                       {"intercept_increment", u.intercept_increment},
                       {"slope_increment", u.slope_increment},
                       {"step_length", u.step_length_used}});
    std::ofstream sout(path + ".json");
    if (!sout) throw FormatError("cannot open " + path + ".json for writing");
    sout << side.dump(1) << '\n';
}

inline LssModel import_coefficients(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    LssModel model;
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file");
    {
        auto h = detail::split_tab(line);
        if (h.size() != 4 || h[0] != "variant_id" || h[1] != "allele1" || h[2] != "beta" ||
            h[3] != "gamma")
            throw FormatError(path + ": expected header variant_id\tallele1\tbeta\tgamma");
    }
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = detail::split_tab(line);
        if (f.size() != 4) throw FormatError(path + ": malformed row '" + line + "'");
        double b, gcoef;
        try {
            b = std::stod(f[2]);
            gcoef = std::stod(f[3]);
        } catch (const std::exception&) {
            throw FormatError(path + ": non-numeric coefficient in row '" + line + "'");
        }
        if (row == 0) {
            if (f[0] != "(Intercept_mu)") throw FormatError(path + ": first row must be (Intercept_mu)");
            model.beta0 = b;
        } else if (row == 1) {
            if (f[0] != "(Intercept_sigma)")
                throw FormatError(path + ": second row must be (Intercept_sigma)");
            model.gamma0 = gcoef;
        } else {
            if (b != 0.0) model.beta[f[0]] = b;
            if (gcoef != 0.0) model.gamma[f[0]] = gcoef;
            model.allele1[f[0]] = f[1];
        }
        ++row;
    }
    if (row < 2) throw FormatError(path + ": missing intercept rows");

    std::ifstream sin(path + ".json");
    if (sin) {
        nlohmann::json side = nlohmann::json::parse(sin);
        model.m_stop = side.value("m_stop", 0l);
        model.beta0_init = side.value("beta0_init", 0.0);
        model.gamma0_init = side.value("gamma0_init", 0.0);
        if (side.contains("validation_loss"))
            model.valid_loss_path = side["validation_loss"].get<std::vector<double>>();
        if (side.contains("config")) model.config_echo = side["config"].dump();
        if (side.contains("update_log")) {
            for (const auto& ju : side["update_log"]) {
                UpdateRecord u;
                u.iteration = ju["m"].get<long>();
                u.parameter = ju["parameter"].get<std::string>() == "mu" ? Param::mu : Param::sigma;
                u.variant_id = ju["variant_id"].get<std::string>();
                u.intercept_increment = ju["intercept_increment"].get<double>();
                u.slope_increment = ju["slope_increment"].get<double>();
                u.step_length_used = ju["step_length"].get<double>();
                model.update_log.push_back(std::move(u));
            }
        }
    }
    return model;
}

}  // namespace snplss
