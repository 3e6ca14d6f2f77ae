#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "snplss/common.hpp"
#include "snplss/genotype.hpp"
#include "snplss/rng.hpp"

namespace snplss {

enum class SplitLabel : std::uint8_t { train = 0, valid = 1, test = 2 };

struct GenotypeModel {
    enum class Kind { maf_uniform, from_matrix } kind = Kind::maf_uniform;
    double maf_low = 0.05;
    double maf_high = 0.5;
};

struct SimSpec {
    std::size_t n = 0;
    std::size_t p = 0;
    double h2 = 0.5;        // target heritability
    double sparsity = 0.01; // fraction of informative variants per parameter
    std::size_t repeats = 100;
    double split_train = 0.5, split_valid = 0.2, split_test = 0.3;
    std::uint64_t seed = 1;
    GenotypeModel genotype_model;

    std::size_t n_informative() const {
        return static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(p)));
    }

    void validate() const {
        if (n < 2 || p < 1) throw ConfigError("simulate: need n >= 2 and p >= 1");
        if (h2 <= 0.0 || h2 >= 1.0) throw ConfigError("simulate: h2 must be in (0,1)");
        if (sparsity <= 0.0 || sparsity > 1.0) throw ConfigError("simulate: sparsity must be in (0,1]");
        if (n_informative() < 1) throw ConfigError("simulate: sparsity*p < 1");
        if (repeats < 1) throw ConfigError("simulate: repeats must be >= 1");
        const double sum = split_train + split_valid + split_test;
        if (std::abs(sum - 1.0) > 1e-9)
            throw ConfigError("simulate: split fractions must sum to 1, got " + std::to_string(sum));
        if (split_train <= 0.0 || split_valid <= 0.0 || split_test <= 0.0)
            throw ConfigError("simulate: split fractions must be positive");
    }
};

struct SimulatedCohort {
    GenotypeMatrix matrix;
    std::map<std::string, double> true_beta;
    std::map<std::string, double> true_gamma;
    std::vector<double> mu_true;
    std::vector<double> sigma_true;
    std::vector<double> baseline_y;
    std::vector<double> longitudinal_y;  // row-major n x repeats, column 0 = baseline
    std::size_t repeats = 0;
    std::vector<SplitLabel> split_assignment;

    std::vector<std::size_t> indices(SplitLabel label) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < split_assignment.size(); ++i)
            if (split_assignment[i] == label) out.push_back(i);
        return out;
    }

    double longitudinal(std::size_t i, std::size_t r) const {
        return longitudinal_y[i * repeats + r];
    }
};

namespace detail {

// Partial Fisher-Yates: first k slots of a shuffled [0, n) range.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k,
                                               std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> d(i, n - 1);
        std::swap(idx[i], idx[d(rng)]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace detail

inline SimulatedCohort simulate(const SimSpec& spec,
                                const GenotypeMatrix* external = nullptr) {
    spec.validate();
    SimulatedCohort cohort;
    const std::size_t n = spec.n, p = spec.p;

    if (spec.genotype_model.kind == GenotypeModel::Kind::from_matrix) {
        if (external == nullptr) throw ConfigError("simulate: from_matrix requires a matrix");
        if (external->n() != n || external->p() != p)
            throw ConfigError("simulate: provided matrix does not match spec dimensions");
        cohort.matrix = *external;
    } else {
        std::vector<VariantMeta> variants(p);
        std::vector<SampleMeta> samples(n);
        for (std::size_t j = 0; j < p; ++j)
            variants[j] = {"1", "sim" + std::to_string(j + 1),
                           static_cast<long long>(j + 1), "A", "B"};
        for (std::size_t i = 0; i < n; ++i)
            samples[i] = {"F" + std::to_string(i + 1), "I" + std::to_string(i + 1)};
        std::vector<std::int8_t> dosages(n * p);
        for (std::size_t j = 0; j < p; ++j) {
            auto rng = make_rng(spec.seed, Stream::genotypes, j);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            const double maf = spec.genotype_model.maf_low +
                               (spec.genotype_model.maf_high - spec.genotype_model.maf_low) *
                                   unif(rng);
            for (std::size_t i = 0; i < n; ++i) {
                const int d = (unif(rng) < maf ? 1 : 0) + (unif(rng) < maf ? 1 : 0);
                dosages[j * n + i] = static_cast<std::int8_t>(d);
            }
        }
        cohort.matrix = GenotypeMatrix::from_dosages(std::move(variants), std::move(samples),
                                                     dosages);
    }

    const std::size_t k = spec.n_informative();
    const auto& variants = cohort.matrix.variants();
    std::vector<double> col;

    // sigma sub-model: coefficients uniform on (-0.25, 0.25), gamma0 = 0.
    // The drawn vector is rescaled so the realized spread of log(sigma)
    // matches its expected value under the uniform draw: with only a handful
    // of informative variants the raw draw occasionally lands near zero,
    // which would leave individual cohorts with no variance signal at all.
    {
        auto sel_rng = make_rng(spec.seed, Stream::sigma_select);
        auto coef_rng = make_rng(spec.seed, Stream::sigma_coeffs);
        std::uniform_real_distribution<double> unif(-0.25, 0.25);
        auto idx = detail::sample_indices(p, k, sel_rng);
        cohort.sigma_true.assign(n, 0.0);  // eta scale for now
        double target_var_eta = 0.0;       // E[gamma^2] * sum_j pop-var(g_j)
        for (std::size_t j : idx) {
            const double gcoef = unif(coef_rng);
            cohort.true_gamma[variants[j].variant_id] = gcoef;
            cohort.matrix.dosage_column(j, Imputation::mean, col);
            for (std::size_t i = 0; i < n; ++i) cohort.sigma_true[i] += gcoef * col[i];
            target_var_eta += (0.25 * 0.25 / 3.0) *
                              cohort.matrix.column_stats(j).center_ss / static_cast<double>(n);
        }
        const double eta_mean = mean(cohort.sigma_true);
        double realized_var_eta = 0.0;
        for (double e : cohort.sigma_true) realized_var_eta += (e - eta_mean) * (e - eta_mean);
        realized_var_eta /= static_cast<double>(n);
        if (realized_var_eta > 0.0 && target_var_eta > 0.0) {
            const double c = std::sqrt(target_var_eta / realized_var_eta);
            for (auto& [id, g] : cohort.true_gamma) g *= c;
            for (double& e : cohort.sigma_true) e *= c;
        }
        for (double& s : cohort.sigma_true) s = std::exp(s);
    }

    double sigma_bar2 = 0.0;
    for (double s : cohort.sigma_true) sigma_bar2 += s * s;
    sigma_bar2 /= static_cast<double>(n);

    // mu sub-model: effects drawn on the standardized-genotype scale, then
    // mapped back to dosage scale by dividing by each column's SD. The drawn
    // vector is rescaled so the realized heritability hits the target
    // exactly; with few informative variants the unnormalized draw is so
    // variable that individual cohorts can realize a fraction of the target.
    {
        auto sel_rng = make_rng(spec.seed, Stream::mu_select);
        auto coef_rng = make_rng(spec.seed, Stream::mu_coeffs);
        const double var = (sigma_bar2 / (1.0 - spec.h2)) * spec.h2 / static_cast<double>(k);
        std::normal_distribution<double> gauss(0.0, std::sqrt(var));
        auto idx = detail::sample_indices(p, k, sel_rng);
        cohort.mu_true.assign(n, 0.0);
        for (std::size_t j : idx) {
            const double sd = cohort.matrix.column_stats(j).sd;
            const double draw = gauss(coef_rng);
            const double beta = sd > 0.0 ? draw / sd : 0.0;
            cohort.true_beta[variants[j].variant_id] = beta;
            cohort.matrix.dosage_column(j, Imputation::mean, col);
            for (std::size_t i = 0; i < n; ++i) cohort.mu_true[i] += beta * col[i];
        }
        const double mu_mean = mean(cohort.mu_true);
        double realized_var_mu = 0.0;
        for (double m : cohort.mu_true) realized_var_mu += (m - mu_mean) * (m - mu_mean);
        realized_var_mu /= static_cast<double>(n);
        const double target_var_mu = sigma_bar2 * spec.h2 / (1.0 - spec.h2);
        if (realized_var_mu > 0.0) {
            const double c = std::sqrt(target_var_mu / realized_var_mu);
            for (auto& [id, b] : cohort.true_beta) b *= c;
            for (double& m : cohort.mu_true) m *= c;
        }
    }

    // longitudinal phenotypes; column 0 is the baseline draw
    cohort.repeats = spec.repeats;
    cohort.longitudinal_y.resize(n * spec.repeats);
    cohort.baseline_y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = make_rng(spec.seed, Stream::noise, i);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (std::size_t r = 0; r < spec.repeats; ++r)
            cohort.longitudinal_y[i * spec.repeats + r] =
                cohort.mu_true[i] + cohort.sigma_true[i] * gauss(rng);
        cohort.baseline_y[i] = cohort.longitudinal_y[i * spec.repeats];
    }

    // split assignment via uniform shuffle
    {
        auto rng = make_rng(spec.seed, Stream::split);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = n; i > 1; --i) {
            std::uniform_int_distribution<std::size_t> d(0, i - 1);
            std::swap(order[i - 1], order[d(rng)]);
        }
        const std::size_t n_train =
            static_cast<std::size_t>(std::llround(spec.split_train * static_cast<double>(n)));
        const std::size_t n_valid =
            static_cast<std::size_t>(std::llround(spec.split_valid * static_cast<double>(n)));
        cohort.split_assignment.assign(n, SplitLabel::test);
        for (std::size_t i = 0; i < n_train && i < n; ++i)
            cohort.split_assignment[order[i]] = SplitLabel::train;
        for (std::size_t i = n_train; i < n_train + n_valid && i < n; ++i)
            cohort.split_assignment[order[i]] = SplitLabel::valid;
    }
    return cohort;
}

// Var(mu_true) / (Var(mu_true) + mean(sigma_true^2)), population variance.
inline double realized_heritability(const SimulatedCohort& cohort) {
    const std::size_t n = cohort.mu_true.size();
    const double m = mean(cohort.mu_true);
    double var_mu = 0.0;
    for (double x : cohort.mu_true) var_mu += (x - m) * (x - m);
    var_mu /= static_cast<double>(n);
    double sigma_bar2 = 0.0;
    for (double s : cohort.sigma_true) sigma_bar2 += s * s;
    sigma_bar2 /= static_cast<double>(n);
    return var_mu / (var_mu + sigma_bar2);
}

// Per-individual sample SD over the first k longitudinal draws.
inline std::vector<double> benchmark_sigma_sd(const SimulatedCohort& cohort, std::size_t k) {
    if (k < 2) throw ConfigError("benchmark_sigma_sd: k must be >= 2");
    if (k > cohort.repeats) throw ConfigError("benchmark_sigma_sd: k exceeds available repeats");
    const std::size_t n = cohort.baseline_y.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::span<const double> row(&cohort.longitudinal_y[i * cohort.repeats], k);
        out[i] = sample_sd(row);
    }
    return out;
}

// --- cohort file emission ----------------------------------------------

inline void write_cohort(const SimulatedCohort& cohort, const std::string& prefix) {
    cohort.matrix.write_text(prefix + ".geno.tsv");

    std::ofstream ph(prefix + ".pheno.tsv");
    if (!ph) throw FormatError("cannot open " + prefix + ".pheno.tsv for writing");
    ph.precision(17);
    ph << "FID\tIID\tbaseline";
    for (std::size_t r = 1; r < cohort.repeats; ++r) ph << "\trepeat_" << r;
    ph << '\n';
    const auto& samples = cohort.matrix.samples();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ph << samples[i].family_id << '\t' << samples[i].individual_id;
        for (std::size_t r = 0; r < cohort.repeats; ++r) ph << '\t' << cohort.longitudinal(i, r);
        ph << '\n';
    }

    std::ofstream tr(prefix + ".truth.tsv");
    if (!tr) throw FormatError("cannot open " + prefix + ".truth.tsv for writing");
    tr.precision(17);
    tr << "variant_id\tbeta_true\tgamma_true\n";
    std::map<std::string, std::pair<double, double>> rows;
    for (const auto& [id, b] : cohort.true_beta) rows[id].first = b;
    for (const auto& [id, g] : cohort.true_gamma) rows[id].second = g;
    for (const auto& [id, bg] : rows) tr << id << '\t' << bg.first << '\t' << bg.second << '\n';

    std::ofstream sp(prefix + ".split.tsv");
    if (!sp) throw FormatError("cannot open " + prefix + ".split.tsv for writing");
    sp << "FID\tIID\tsplit\n";
    static const char* names[3] = {"train", "valid", "test"};
    for (std::size_t i = 0; i < samples.size(); ++i)
        sp << samples[i].family_id << '\t' << samples[i].individual_id << '\t'
           << names[static_cast<int>(cohort.split_assignment[i])] << '\n';
}

}  // namespace snplss
