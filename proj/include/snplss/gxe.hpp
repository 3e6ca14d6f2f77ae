#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "snplss/common.hpp"
#include "snplss/stats.hpp"

namespace snplss {

// Named covariate columns passed alongside a test.
struct Covariates {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;

    std::size_t size() const { return names.size(); }

    void add(const std::string& name, std::vector<double> col) {
        names.push_back(name);
        columns.push_back(std::move(col));
    }

    std::optional<std::size_t> find(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        return std::nullopt;
    }
};

// Y ~ mPRS + vPRS + E + vPRS:E (+ covariates; robust mode adds vPRS:age and
// vPRS:sex). The vPRS:E row is the test of record.
inline RegressionFit gxe_interaction_test(std::span<const double> pheno,
                                          std::span<const double> mprs,
                                          std::span<const double> vprs_std,
                                          std::span<const double> env,
                                          const Covariates& covariates = {},
                                          bool robust = false) {
    const std::size_t n = pheno.size();
    if (mprs.size() != n || vprs_std.size() != n || env.size() != n)
        throw DataError("gxe_interaction_test: length mismatch");
    DesignMatrix d;
    d.add_intercept();
    d.add_column("mPRS", mprs);
    d.add_column("vPRS", vprs_std);
    d.add_column("E", env);
    std::vector<double> inter(n);
    for (std::size_t i = 0; i < n; ++i) inter[i] = vprs_std[i] * env[i];
    d.add_column("vPRS:E", inter);
    for (std::size_t c = 0; c < covariates.size(); ++c)
        d.add_column(covariates.names[c], covariates.columns[c]);
    if (robust) {
        for (const char* name : {"age", "sex"}) {
            auto idx = covariates.find(name);
            if (!idx)
                throw DataError(std::string("gxe_interaction_test: robust mode needs an '") +
                                name + "' covariate");
            std::vector<double> x(n);
            for (std::size_t i = 0; i < n; ++i) x[i] = vprs_std[i] * covariates.columns[*idx][i];
            d.add_column(std::string("vPRS:") + name, x);
        }
    }
    return ols(d, pheno);
}

// Quintile membership from type-7 cutpoints on the reference scores.
inline std::vector<int> quintile_assignment(std::span<const double> scores,
                                            std::span<const double> reference) {
    std::vector<double> ref(reference.begin(), reference.end());
    double cuts[4];
    for (int k = 0; k < 4; ++k) cuts[k] = quantile_type7(ref, 0.2 * (k + 1));
    std::vector<int> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        int q = 4;
        for (int k = 0; k < 4; ++k)
            if (scores[i] <= cuts[k]) {
                q = k;
                break;
            }
        out[i] = q;
    }
    return out;
}

struct QuintileEffect {
    int quintile = 0;  // 1-based
    std::size_t n = 0;
    double estimate = 0.0;
    double se = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    double p = 1.0;
};

// Within each vPRS quintile, fit pheno ~ E + covariates and report E's effect.
inline std::vector<QuintileEffect> quintile_effects(std::span<const double> pheno,
                                                    std::span<const double> env,
                                                    std::span<const double> vprs,
                                                    const Covariates& covariates = {}) {
    const std::size_t n = pheno.size();
    if (env.size() != n || vprs.size() != n) throw DataError("quintile_effects: length mismatch");
    const std::vector<int> q = quintile_assignment(vprs, vprs);
    std::vector<QuintileEffect> out;
    for (int g = 0; g < 5; ++g) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n; ++i)
            if (q[i] == g) rows.push_back(i);
        if (rows.empty())
            throw DataError("quintile_effects: empty quintile " + std::to_string(g + 1));
        std::vector<double> yv, ev;
        yv.reserve(rows.size());
        ev.reserve(rows.size());
        for (std::size_t i : rows) {
            yv.push_back(pheno[i]);
            ev.push_back(env[i]);
        }
        DesignMatrix d;
        d.add_intercept();
        d.add_column("E", ev);
        for (std::size_t c = 0; c < covariates.size(); ++c) {
            std::vector<double> col;
            col.reserve(rows.size());
            for (std::size_t i : rows) col.push_back(covariates.columns[c][i]);
            d.add_column(covariates.names[c], col);
        }
        const RegressionFit fit = ols(d, yv);
        const std::size_t e = fit.index_of("E");
        QuintileEffect qe;
        qe.quintile = g + 1;
        qe.n = rows.size();
        qe.estimate = fit.coefficients(static_cast<long>(e));
        qe.se = fit.standard_errors(static_cast<long>(e));
        qe.ci_lo = fit.ci_lo(static_cast<long>(e));
        qe.ci_hi = fit.ci_hi(static_cast<long>(e));
        qe.p = fit.p_values(static_cast<long>(e));
        out.push_back(qe);
    }
    return out;
}

// 1/ps for treated, 1/(1-ps) for controls; optional percentile truncation.
inline std::vector<double> iptw_weights(std::span<const double> propensity,
                                        std::span<const double> treated,
                                        std::optional<std::pair<double, double>> truncation =
                                            std::nullopt) {
    if (propensity.size() != treated.size()) throw DataError("iptw_weights: length mismatch");
    std::vector<double> ps(propensity.begin(), propensity.end());
    for (double v : ps)
        if (v <= 0.0 || v >= 1.0)
            throw DataError("iptw_weights: propensity must lie strictly in (0,1)");
    if (truncation) {
        std::vector<double> sorted(ps);
        const double lo = quantile_type7(sorted, truncation->first);
        const double hi = quantile_type7(sorted, truncation->second);
        for (double& v : ps) v = std::clamp(v, lo, hi);
    }
    std::vector<double> w(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i)
        w[i] = treated[i] != 0.0 ? 1.0 / ps[i] : 1.0 / (1.0 - ps[i]);
    return w;
}

// delta_y ~ treated + baseline covariates, weighted OLS. The treated
// coefficient is the treatment effect.
inline RegressionFit treatment_effect(std::span<const double> delta_y,
                                      std::span<const double> treated,
                                      const Covariates& baseline_covariates = {},
                                      std::span<const double> weights = {}) {
    const std::size_t n = delta_y.size();
    if (treated.size() != n) throw DataError("treatment_effect: length mismatch");
    DesignMatrix d;
    d.add_intercept();
    d.add_column("treated", treated);
    for (std::size_t c = 0; c < baseline_covariates.size(); ++c)
        d.add_column(baseline_covariates.names[c], baseline_covariates.columns[c]);
    if (!weights.empty()) {
        if (weights.size() != n) throw DataError("treatment_effect: weight length mismatch");
        d.weights.resize(static_cast<long>(n));
        for (std::size_t i = 0; i < n; ++i) d.weights(static_cast<long>(i)) = weights[i];
    }
    return ols(d, delta_y);
}

// Treatment model plus subgroup and subgroup:treated columns; the interaction
// row is the test of record.
inline RegressionFit subgroup_interaction_test(std::span<const double> delta_y,
                                               std::span<const double> treated,
                                               std::span<const double> subgroup,
                                               const Covariates& covariates = {},
                                               std::span<const double> weights = {}) {
    const std::size_t n = delta_y.size();
    if (treated.size() != n || subgroup.size() != n)
        throw DataError("subgroup_interaction_test: length mismatch");
    std::size_t cell[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < n; ++i) {
        const int t = treated[i] != 0.0 ? 1 : 0;
        const int s = subgroup[i] != 0.0 ? 1 : 0;
        ++cell[s][t];
    }
    for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 2; ++t)
            if (cell[s][t] == 0)
                throw DataError("subgroup_interaction_test: empty cell (subgroup=" +
                                std::to_string(s) + ", treated=" + std::to_string(t) + ")");
    DesignMatrix d;
    d.add_intercept();
    d.add_column("treated", treated);
    d.add_column("subgroup", subgroup);
    std::vector<double> inter(n);
    for (std::size_t i = 0; i < n; ++i) inter[i] = treated[i] * subgroup[i];
    d.add_column("subgroup:treated", inter);
    for (std::size_t c = 0; c < covariates.size(); ++c)
        d.add_column(covariates.names[c], covariates.columns[c]);
    if (!weights.empty()) {
        if (weights.size() != n) throw DataError("subgroup_interaction_test: weight length mismatch");
        d.weights.resize(static_cast<long>(n));
        for (std::size_t i = 0; i < n; ++i) d.weights(static_cast<long>(i)) = weights[i];
    }
    return ols(d, delta_y);
}

// --- cohort table + eligibility filtering -------------------------------

// Tabular cohort data: one string id column, numeric columns ("NA" -> NaN).
struct CohortTable {
    std::vector<std::string> ids;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;  // column-major

    std::size_t n() const { return ids.size(); }

    bool has(const std::string& name) const {
        for (const auto& c : columns)
            if (c == name) return true;
        return false;
    }

    const std::vector<double>& col(const std::string& name) const {
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c] == name) return data[c];
        throw DataError("cohort table: missing required column '" + name + "'");
    }

    CohortTable subset(const std::vector<std::size_t>& rows) const {
        CohortTable t;
        t.columns = columns;
        t.data.resize(data.size());
        for (std::size_t i : rows) {
            t.ids.push_back(ids[i]);
            for (std::size_t c = 0; c < data.size(); ++c) t.data[c].push_back(data[c][i]);
        }
        return t;
    }

    static CohortTable read_tsv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw FormatError("cannot open " + path);
        CohortTable t;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            auto h = detail2::split_tab(line);
            if (h.size() < 2) throw FormatError(path + ": header needs id plus one column");
            t.columns.assign(h.begin() + 1, h.end());
            break;
        }
        if (t.columns.empty()) throw FormatError(path + ": missing header");
        t.data.resize(t.columns.size());
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto f = detail2::split_tab(line);
            if (f.size() != t.columns.size() + 1)
                throw FormatError(path + ": ragged row '" + line + "'");
            t.ids.push_back(f[0]);
            for (std::size_t c = 0; c < t.columns.size(); ++c) {
                if (f[c + 1] == "NA") {
                    t.data[c].push_back(std::numeric_limits<double>::quiet_NaN());
                } else {
                    try {
                        t.data[c].push_back(std::stod(f[c + 1]));
                    } catch (const std::exception&) {
                        throw FormatError(path + ": non-numeric value '" + f[c + 1] + "'");
                    }
                }
            }
        }
        return t;
    }

private:
    struct detail2 {
        static std::vector<std::string> split_tab(const std::string& line) {
            std::vector<std::string> out;
            std::size_t start = 0;
            while (true) {
                const std::size_t pos = line.find('\t', start);
                if (pos == std::string::npos) {
                    out.push_back(line.substr(start));
                    break;
                }
                out.push_back(line.substr(start, pos - start));
                start = pos + 1;
            }
            return out;
        }
    };
};

// Parallel-group eligibility: baseline phenotype strictly above the
// threshold, not treated at baseline (optional), complete data at both
// visits. The treatment arm is the revisit flag.
inline std::vector<std::size_t> eligibility_filter(const CohortTable& table,
                                                   double pheno_threshold,
                                                   bool baseline_treated_excluded = true) {
    for (const char* name : {"pheno_0", "pheno_1", "treated_0", "treated_1"})
        if (!table.has(name))
            throw DataError(std::string("eligibility_filter: missing required column '") + name +
                            "'");
    const auto& p0 = table.col("pheno_0");
    const auto& p1 = table.col("pheno_1");
    const auto& t0 = table.col("treated_0");
    const auto& t1 = table.col("treated_1");
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < table.n(); ++i) {
        if (std::isnan(p0[i]) || std::isnan(p1[i]) || std::isnan(t0[i]) || std::isnan(t1[i]))
            continue;
        if (!(p0[i] > pheno_threshold)) continue;
        if (baseline_treated_excluded && t0[i] != 0.0) continue;
        rows.push_back(i);
    }
    return rows;
}

// --- result emission -----------------------------------------------------

inline void write_fit_tsv(const RegressionFit& fit, const std::string& path,
                          const std::string& comment_header = "") {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    out.precision(17);
    if (!comment_header.empty()) out << "# " << comment_header << '\n';
    out << "term\testimate\tse\tt\tp\tci_lo\tci_hi\n";
    for (std::size_t j = 0; j < fit.names.size(); ++j) {
        const long i = static_cast<long>(j);
        out << fit.names[j] << '\t' << fit.coefficients(i) << '\t' << fit.standard_errors(i)
            << '\t' << fit.t_statistics(i) << '\t' << fit.p_values(i) << '\t' << fit.ci_lo(i)
            << '\t' << fit.ci_hi(i) << '\n';
    }
}

inline nlohmann::json fit_to_json(const RegressionFit& fit) {
    nlohmann::json terms = nlohmann::json::array();
    for (std::size_t j = 0; j < fit.names.size(); ++j) {
        const long i = static_cast<long>(j);
        terms.push_back({{"term", fit.names[j]},
                         {"estimate", fit.coefficients(i)},
                         {"se", fit.standard_errors(i)},
                         {"t", fit.t_statistics(i)},
                         {"p", fit.p_values(i)},
                         {"ci_lo", fit.ci_lo(i)},
                         {"ci_hi", fit.ci_hi(i)}});
    }
    return {{"df_residual", fit.df_residual}, {"sigma2", fit.sigma2}, {"terms", terms}};
}

}  // namespace snplss
