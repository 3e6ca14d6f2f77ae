// Command-line front end: fit, score, simulate, evaluate and gxe subcommands.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "snplss/snplss.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string config_hash(const json& cfg) {
    const std::size_t h = std::hash<std::string>{}(cfg.dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016zx", h);
    return buf;
}

std::string table_header(const json& cfg) {
    return std::string("snplss ") + kVersion + " config=" + config_hash(cfg);
}

struct GenoArgs {
    std::string bed, bim, fam, text;

    void add_options(CLI::App* app, bool required = true) {
        app->add_option("--bed", bed, "PLINK .bed file");
        app->add_option("--bim", bim, "PLINK .bim file");
        app->add_option("--fam", fam, "PLINK .fam file");
        app->add_option("--text-geno", text, "text genotype matrix");
        (void)required;
    }

    snplss::GenotypeMatrix load() const {
        if (!text.empty()) return snplss::GenotypeMatrix::load_text(text);
        if (bed.empty() || bim.empty() || fam.empty())
            throw snplss::ConfigError("provide --text-geno or all of --bed/--bim/--fam");
        return snplss::GenotypeMatrix::load_plink(bed, bim, fam);
    }
};

// Phenotype TSV: FID IID <value columns...>
struct PhenoTable {
    std::vector<std::string> columns;
    std::map<std::pair<std::string, std::string>, std::vector<double>> rows;

    static PhenoTable read(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw snplss::FormatError("cannot open " + path);
        PhenoTable t;
        std::string line;
        if (!std::getline(in, line)) throw snplss::FormatError(path + ": empty file");
        auto h = snplss::detail::split_tab(line);
        if (h.size() < 3 || h[0] != "FID" || h[1] != "IID")
            throw snplss::FormatError(path + ": expected header FID\tIID\t<values...>");
        t.columns.assign(h.begin() + 2, h.end());
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto f = snplss::detail::split_tab(line);
            if (f.size() != h.size()) throw snplss::FormatError(path + ": ragged row");
            std::vector<double> vals;
            for (std::size_t c = 2; c < f.size(); ++c) vals.push_back(std::stod(f[c]));
            t.rows[{f[0], f[1]}] = std::move(vals);
        }
        return t;
    }

    std::size_t col_index(const std::string& name) const {
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c] == name) return c;
        throw snplss::DataError("phenotype file: missing column '" + name + "'");
    }

    std::vector<double> column_for(const std::vector<snplss::SampleMeta>& samples,
                                   const std::string& name) const {
        const std::size_t c = col_index(name);
        std::vector<double> out;
        out.reserve(samples.size());
        for (const auto& s : samples) {
            auto it = rows.find({s.family_id, s.individual_id});
            if (it == rows.end())
                throw snplss::DataError("phenotype file: no row for sample " + s.family_id + " " +
                                        s.individual_id);
            out.push_back(it->second[c]);
        }
        return out;
    }
};

std::map<std::pair<std::string, std::string>, std::string> read_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw snplss::FormatError("cannot open " + path);
    std::map<std::pair<std::string, std::string>, std::string> out;
    std::string line;
    if (!std::getline(in, line)) throw snplss::FormatError(path + ": empty file");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = snplss::detail::split_tab(line);
        if (f.size() != 3) throw snplss::FormatError(path + ": expected FID\tIID\tsplit rows");
        out[{f[0], f[1]}] = f[2];
    }
    return out;
}

std::set<std::pair<std::string, std::string>> read_id_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw snplss::FormatError("cannot open " + path);
    std::set<std::pair<std::string, std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = snplss::detail::split_ws(line);
        if (f.size() < 2) throw snplss::FormatError(path + ": id lines need FID IID");
        out.emplace(f[0], f[1]);
    }
    return out;
}

std::string output_dir_override(const std::string& given) {
    if (const char* env = std::getenv("SNPLSS_OUT_DIR"); env != nullptr && given.empty())
        return env;
    return given;
}

unsigned thread_override(unsigned given) {
    if (const char* env = std::getenv("SNPLSS_THREADS"))
        return static_cast<unsigned>(std::stoul(env));
    return given;
}

snplss::Covariates gather_covariates(const snplss::CohortTable& table,
                                     const std::vector<std::string>& names) {
    snplss::Covariates cov;
    for (const auto& name : names) cov.add(name, table.col(name));
    return cov;
}

// ---------------------------------------------------------------------------

int cmd_fit(const GenoArgs& geno_args, const std::string& pheno_path,
            const std::string& pheno_col, const std::string& split_path,
            const std::string& train_ids_path, const std::string& valid_ids_path,
            snplss::BoostConfig cfg, const std::string& out_dir_raw) {
    const std::string out_dir = output_dir_override(out_dir_raw);
    if (out_dir.empty()) throw snplss::ConfigError("--out directory is required");
    fs::create_directories(out_dir);

    const snplss::GenotypeMatrix all = geno_args.load();
    const PhenoTable pheno = PhenoTable::read(pheno_path);

    std::vector<std::size_t> train_rows, valid_rows;
    if (!split_path.empty()) {
        const auto split = read_split(split_path);
        for (std::size_t i = 0; i < all.n(); ++i) {
            const auto& s = all.samples()[i];
            auto it = split.find({s.family_id, s.individual_id});
            if (it == split.end()) continue;
            if (it->second == "train") train_rows.push_back(i);
            else if (it->second == "valid") valid_rows.push_back(i);
        }
    } else if (!train_ids_path.empty() && !valid_ids_path.empty()) {
        const auto train_ids = read_id_list(train_ids_path);
        const auto valid_ids = read_id_list(valid_ids_path);
        for (std::size_t i = 0; i < all.n(); ++i) {
            const auto& s = all.samples()[i];
            if (train_ids.count({s.family_id, s.individual_id})) train_rows.push_back(i);
            else if (valid_ids.count({s.family_id, s.individual_id})) valid_rows.push_back(i);
        }
    } else {
        throw snplss::ConfigError("provide --split or both --train-ids and --valid-ids");
    }
    if (train_rows.empty() || valid_rows.empty())
        throw snplss::DataError("empty training or validation set after id matching");

    const snplss::GenotypeMatrix train_g = all.subset_samples(train_rows);
    const snplss::GenotypeMatrix valid_g = all.subset_samples(valid_rows);
    const std::vector<double> y_train = pheno.column_for(train_g.samples(), pheno_col);
    const std::vector<double> y_valid = pheno.column_for(valid_g.samples(), pheno_col);

    const auto t0 = std::chrono::steady_clock::now();
    auto [model, trace] = snplss::fit(train_g, y_train, valid_g, y_valid, cfg);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json echo = cfg.echo();
    echo["pheno"] = pheno_path;
    echo["pheno_col"] = pheno_col;
    snplss::export_coefficients(model, out_dir + "/coefficients.tsv");
    snplss::write_trace_tsv(trace, out_dir + "/trace.tsv", table_header(echo));
    std::ofstream cj(out_dir + "/config.json");
    echo["fit_seconds"] = secs;
    echo["m_stop"] = model.m_stop;
    cj << echo.dump(1) << '\n';
    return 0;
}

int cmd_score(const std::string& model_path, const GenoArgs& geno_args,
              const std::string& reference_path, const std::string& out_path) {
    const snplss::LssModel model = snplss::import_coefficients(model_path);
    const snplss::GenotypeMatrix g = geno_args.load();
    auto [mprs, vprs] = snplss::score(model, g);

    std::vector<double> reference = vprs;
    if (!reference_path.empty()) {
        std::ifstream in(reference_path);
        if (!in) throw snplss::FormatError("cannot open " + reference_path);
        reference.clear();
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            auto f = snplss::detail::split_tab(line);
            reference.push_back(std::stod(f.back()));
        }
        if (reference.size() < 2) throw snplss::DataError("reference score file too small");
    }
    const std::vector<double> vprs_std = snplss::standardize(vprs, reference);

    std::ofstream out(out_path);
    if (!out) throw snplss::FormatError("cannot open " + out_path + " for writing");
    out.precision(17);
    out << "FID\tIID\tmPRS\tvPRS\tvPRS_std\n";
    for (std::size_t i = 0; i < g.n(); ++i)
        out << g.samples()[i].family_id << '\t' << g.samples()[i].individual_id << '\t' << mprs[i]
            << '\t' << vprs[i] << '\t' << vprs_std[i] << '\n';
    return 0;
}

int cmd_simulate(std::size_t n, std::size_t p, std::vector<double> h2s,
                 std::vector<double> sparsities, std::size_t repeats,
                 const std::vector<double>& split, std::uint64_t seed, double maf_low,
                 double maf_high, const std::string& out_prefix_raw) {
    const std::string out_prefix = output_dir_override(out_prefix_raw);
    if (out_prefix.empty()) throw snplss::ConfigError("--out prefix is required");
    if (split.size() != 3) throw snplss::ConfigError("--split needs three fractions");
    if (h2s.empty()) h2s = {0.5};
    if (sparsities.empty()) sparsities = {0.01};
    const bool grid = h2s.size() > 1 || sparsities.size() > 1;
    for (double h2 : h2s)
        for (double s : sparsities) {
            snplss::SimSpec spec;
            spec.n = n;
            spec.p = p;
            spec.h2 = h2;
            spec.sparsity = s;
            spec.repeats = repeats;
            spec.split_train = split[0];
            spec.split_valid = split[1];
            spec.split_test = split[2];
            spec.seed = seed;
            spec.genotype_model.maf_low = maf_low;
            spec.genotype_model.maf_high = maf_high;
            const snplss::SimulatedCohort cohort = snplss::simulate(spec);
            std::string prefix = out_prefix;
            if (grid) {
                std::ostringstream ss;
                ss << out_prefix << "_h2-" << h2 << "_s-" << s;
                prefix = ss.str();
            }
            if (const auto dir = fs::path(prefix).parent_path(); !dir.empty())
                fs::create_directories(dir);
            snplss::write_cohort(cohort, prefix);
        }
    return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& cohort_prefix,
                 const std::string& out_prefix) {
    const snplss::LssModel model = snplss::import_coefficients(model_path);
    const snplss::GenotypeMatrix g = snplss::GenotypeMatrix::load_text(cohort_prefix + ".geno.tsv");
    const PhenoTable pheno = PhenoTable::read(cohort_prefix + ".pheno.tsv");
    const auto split = read_split(cohort_prefix + ".split.tsv");

    // truth coefficients
    std::map<std::string, double> beta_true, gamma_true;
    {
        std::ifstream in(cohort_prefix + ".truth.tsv");
        if (!in)
            throw snplss::DataError("missing truth file " + cohort_prefix + ".truth.tsv");
        std::string line;
        std::getline(in, line);
        if (line != "variant_id\tbeta_true\tgamma_true")
            throw snplss::DataError(cohort_prefix + ".truth.tsv: unexpected schema");
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto f = snplss::detail::split_tab(line);
            if (f.size() != 3) throw snplss::FormatError("truth file: ragged row");
            if (const double b = std::stod(f[1]); b != 0.0) beta_true[f[0]] = b;
            if (const double ga = std::stod(f[2]); ga != 0.0) gamma_true[f[0]] = ga;
        }
    }

    std::vector<std::size_t> test_rows;
    for (std::size_t i = 0; i < g.n(); ++i) {
        const auto& s = g.samples()[i];
        auto it = split.find({s.family_id, s.individual_id});
        if (it != split.end() && it->second == "test") test_rows.push_back(i);
    }
    if (test_rows.empty()) throw snplss::DataError("no test rows in split file");
    const snplss::GenotypeMatrix test_g = g.subset_samples(test_rows);
    const std::vector<double> y_test = pheno.column_for(test_g.samples(), "baseline");

    const snplss::Prediction pred = snplss::predict(model, test_g);

    // true mu/sigma on the test set, replayed from the truth coefficients
    std::vector<double> sigma_true(test_g.n(), 0.0), mu_true(test_g.n(), 0.0), col;
    for (const auto& [id, ga] : gamma_true) {
        test_g.dosage_column(test_g.column_index(id), snplss::Imputation::mean, col);
        for (std::size_t i = 0; i < col.size(); ++i) sigma_true[i] += ga * col[i];
    }
    for (double& v : sigma_true) v = std::exp(v);
    for (const auto& [id, b] : beta_true) {
        test_g.dosage_column(test_g.column_index(id), snplss::Imputation::mean, col);
        for (std::size_t i = 0; i < col.size(); ++i) mu_true[i] += b * col[i];
    }

    snplss::EvalReport rep;
    rep.r2 = snplss::r_squared(y_test, pred.mu);
    rep.test_nll = snplss::nll_loss(y_test, pred);
    std::set<std::string> sel_mu, sel_sigma, truth_mu, truth_sigma;
    for (const auto& [id, v] : model.beta) sel_mu.insert(id);
    for (const auto& [id, v] : model.gamma) sel_sigma.insert(id);
    for (const auto& [id, v] : beta_true) truth_mu.insert(id);
    for (const auto& [id, v] : gamma_true) truth_sigma.insert(id);
    rep.n_selected_mu = static_cast<long>(sel_mu.size());
    rep.n_selected_sigma = static_cast<long>(sel_sigma.size());
    rep.n_shared = 0;
    for (const auto& id : sel_mu)
        if (sel_sigma.count(id)) ++rep.n_shared;
    std::tie(rep.tpr_mu, rep.tnr_mu) = snplss::selection_rates(sel_mu, truth_mu, g.p());
    std::tie(rep.tpr_sigma, rep.tnr_sigma) = snplss::selection_rates(sel_sigma, truth_sigma, g.p());
    rep.sigma_corr = snplss::sigma_correlation(sigma_true, pred.sigma);
    {
        std::vector<double> eta_true(sigma_true.size());
        for (std::size_t i = 0; i < sigma_true.size(); ++i) eta_true[i] = std::log(sigma_true[i]);
        rep.sigma_corr_eta = snplss::sigma_correlation(eta_true, pred.eta_sigma);
    }

    std::ofstream js(out_prefix + ".json");
    js << rep.to_json().dump(1) << '\n';

    // idempotent row append
    const std::string tsv_path = out_prefix + ".tsv";
    const std::string row = rep.tsv_row();
    bool present = false;
    if (fs::exists(tsv_path)) {
        std::ifstream in(tsv_path);
        std::string line;
        while (std::getline(in, line))
            if (line == row) present = true;
    } else {
        std::ofstream out(tsv_path);
        out << snplss::EvalReport::tsv_header() << '\n';
    }
    if (!present) {
        std::ofstream out(tsv_path, std::ios::app);
        out << row << '\n';
    }
    return 0;
}

int cmd_gxe(const std::string& mode, const std::string& data_path,
            const std::vector<std::string>& covariate_names,
            const std::vector<std::string>& confounder_names, bool robust, double threshold,
            double q_low, double q_high, std::size_t replicates, std::uint64_t seed,
            const std::string& out_prefix) {
    if (replicates > 0) {
        // Monte-Carlo calibration suites
        json out;
        const auto null_cal = snplss::interaction_calibration(2000, replicates, 0.0, seed);
        out["interaction_null"] = {{"rejection_rate", null_cal.rejection_rate},
                                   {"ks_statistic", null_cal.ks_statistic}};
        const auto rec = snplss::interaction_calibration(5000, std::min<std::size_t>(replicates, 50),
                                                         -0.088, seed + 1);
        out["interaction_recovery"] = {{"planted", -0.088}, {"mean_estimate", rec.mean_estimate}};
        const auto iptw = snplss::iptw_confounding_sim(2000, std::min<std::size_t>(replicates, 200),
                                                       -1.0, seed + 2);
        out["iptw_bias"] = {{"weighted", iptw.mean_abs_bias_weighted},
                            {"unweighted", iptw.mean_abs_bias_unweighted}};
        out["subgroup_power"] = snplss::subgroup_power_sim(
            1200, std::min<std::size_t>(replicates, 200), -1.0, -0.3, seed + 3);
        std::ofstream js(out_prefix + ".json");
        js << out.dump(1) << '\n';
        return 0;
    }

    const snplss::CohortTable table = snplss::CohortTable::read_tsv(data_path);
    const json cfg = {{"mode", mode}, {"data", data_path}};

    if (mode == "test") {
        const auto& pheno = table.col("pheno");
        const auto& mprs = table.col("mPRS");
        const auto& vprs = table.col("vPRS");
        const auto& env = table.col("E");
        const std::vector<double> vprs_std = snplss::standardize(vprs, vprs);
        const snplss::Covariates cov = gather_covariates(table, covariate_names);
        const snplss::RegressionFit fit =
            snplss::gxe_interaction_test(pheno, mprs, vprs_std, env, cov, robust);
        snplss::write_fit_tsv(fit, out_prefix + ".tsv", table_header(cfg));
        std::ofstream js(out_prefix + ".json");
        js << snplss::fit_to_json(fit).dump(1) << '\n';
        return 0;
    }

    if (mode == "quintiles") {
        const auto& pheno = table.col("pheno");
        const auto& env = table.col("E");
        const auto& vprs = table.col("vPRS");
        const snplss::Covariates cov = gather_covariates(table, covariate_names);
        const auto effects = snplss::quintile_effects(pheno, env, vprs, cov);
        std::ofstream out(out_prefix + ".tsv");
        out.precision(17);
        out << "# " << table_header(cfg) << '\n';
        out << "quintile\tn\testimate\tse\tci_lo\tci_hi\tp\n";
        for (const auto& e : effects)
            out << e.quintile << '\t' << e.n << '\t' << e.estimate << '\t' << e.se << '\t'
                << e.ci_lo << '\t' << e.ci_hi << '\t' << e.p << '\n';
        return 0;
    }

    if (mode == "self-controlled") {
        // starters at revisit: untreated at baseline, treated at revisit
        const auto rows = snplss::eligibility_filter(table, -std::numeric_limits<double>::infinity(),
                                                     true);
        const auto& t1 = table.col("treated_1");
        const auto& p0 = table.col("pheno_0");
        const auto& p1 = table.col("pheno_1");
        const auto& vprs_all = table.col("vPRS");
        std::vector<std::size_t> starters;
        for (std::size_t i : rows)
            if (t1[i] != 0.0) starters.push_back(i);
        if (starters.empty()) throw snplss::DataError("self-controlled: no eligible starters");
        const double cut_lo = snplss::quantile_type7(vprs_all, q_low);
        const double cut_hi = snplss::quantile_type7(vprs_all, q_high);
        std::vector<double> delta_high, delta_low;
        for (std::size_t i : starters) {
            if (vprs_all[i] > cut_hi) delta_high.push_back(p1[i] - p0[i]);
            else if (vprs_all[i] < cut_lo) delta_low.push_back(p1[i] - p0[i]);
        }
        const snplss::TTestResult tt = snplss::two_sample_ttest(delta_high, delta_low);
        json out = {{"n_high", delta_high.size()},
                    {"n_low", delta_low.size()},
                    {"mean_delta_high", snplss::mean(delta_high)},
                    {"mean_delta_low", snplss::mean(delta_low)},
                    {"t", tt.t},
                    {"df", tt.df},
                    {"p", tt.p}};
        std::ofstream js(out_prefix + ".json");
        js << out.dump(1) << '\n';
        return 0;
    }

    if (mode == "iptw") {
        const auto rows = snplss::eligibility_filter(table, threshold, true);
        if (rows.empty()) throw snplss::DataError("iptw: empty analysis set after eligibility");
        const snplss::CohortTable a = table.subset(rows);
        const auto& t1 = a.col("treated_1");
        const auto& p0 = a.col("pheno_0");
        const auto& p1 = a.col("pheno_1");
        std::vector<double> delta(a.n());
        for (std::size_t i = 0; i < a.n(); ++i) delta[i] = p1[i] - p0[i];

        snplss::DesignMatrix pd;
        pd.add_intercept();
        for (const auto& name : confounder_names) pd.add_column(name, a.col(name));
        const snplss::LogisticFit pfit = snplss::logistic_propensity(pd, t1);
        const std::vector<double> w = snplss::iptw_weights(pfit.propensity, t1);

        snplss::Covariates cov;
        cov.add("pheno_0", p0);
        for (const auto& name : covariate_names) cov.add(name, a.col(name));
        const snplss::RegressionFit overall = snplss::treatment_effect(delta, t1, cov, w);
        snplss::write_fit_tsv(overall, out_prefix + ".tsv", table_header(cfg));

        json out = {{"n", a.n()}, {"overall", snplss::fit_to_json(overall)}};
        {
            json jw = json::array();
            for (double v : w) jw.push_back(v);
            out["weights"] = jw;
        }
        if (a.has("vPRS")) {
            const auto& vprs = a.col("vPRS");
            const double cut_lo = snplss::quantile_type7(vprs, q_low);
            const double cut_hi = snplss::quantile_type7(vprs, q_high);
            std::vector<std::size_t> keep;
            std::vector<double> sub;
            for (std::size_t i = 0; i < a.n(); ++i) {
                if (vprs[i] > cut_hi) {
                    keep.push_back(i);
                    sub.push_back(1.0);
                } else if (vprs[i] < cut_lo) {
                    keep.push_back(i);
                    sub.push_back(0.0);
                }
            }
            std::vector<double> dly, trt, wts;
            snplss::Covariates scov;
            for (std::size_t c = 0; c < cov.size(); ++c) scov.add(cov.names[c], {});
            for (std::size_t i : keep) {
                dly.push_back(delta[i]);
                trt.push_back(t1[i]);
                wts.push_back(w[i]);
                for (std::size_t c = 0; c < cov.size(); ++c)
                    scov.columns[c].push_back(cov.columns[c][i]);
            }
            const snplss::RegressionFit inter =
                snplss::subgroup_interaction_test(dly, trt, sub, scov, wts);
            out["subgroup_interaction"] = snplss::fit_to_json(inter);
        }
        std::ofstream js(out_prefix + ".json");
        js << out.dump(1) << '\n';
        return 0;
    }

    throw snplss::ConfigError("unknown gxe mode '" + mode + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse polygenic location-scale models via batch-wise gradient boosting"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit mPRS and vPRS models");
    GenoArgs fit_geno;
    fit_geno.add_options(fit_cmd);
    std::string fit_pheno, fit_pheno_col = "baseline", fit_split, fit_train_ids, fit_valid_ids,
                fit_out;
    snplss::BoostConfig cfg;
    std::string step_mode = "adaptive";
    fit_cmd->add_option("--pheno", fit_pheno, "phenotype TSV (FID IID values...)")->required();
    fit_cmd->add_option("--pheno-col", fit_pheno_col, "phenotype column name");
    fit_cmd->add_option("--split", fit_split, "split TSV (FID IID split)");
    fit_cmd->add_option("--train-ids", fit_train_ids, "training id list");
    fit_cmd->add_option("--valid-ids", fit_valid_ids, "validation id list");
    fit_cmd->add_option("--out", fit_out, "output directory")->required();
    fit_cmd->add_option("--p-batch", cfg.p_batch, "batch size");
    fit_cmd->add_option("--m-batch", cfg.m_batch, "max iterations per batch");
    fit_cmd->add_option("--b-max", cfg.b_max, "max batches");
    fit_cmd->add_option("--b-stop", cfg.b_stop, "outer stopping lag");
    fit_cmd->add_option("--step-mode", step_mode, "fixed or adaptive");
    fit_cmd->add_option("--nu", cfg.nu, "fixed step length");
    fit_cmd->add_option("--lambda", cfg.lambda, "adaptive shrinkage");
    fit_cmd->add_option("--nu-sigma", cfg.nu_sigma, "adaptive sigma step");
    bool no_sigma = false;
    fit_cmd->add_flag("--no-sigma-model", no_sigma, "mean-only fit");
    fit_cmd->add_option("--threads", cfg.threads, "worker threads for screening");

    // score
    auto* score_cmd = app.add_subcommand("score", "compute mPRS/vPRS for a cohort");
    GenoArgs score_geno;
    score_geno.add_options(score_cmd);
    std::string score_model, score_ref, score_out;
    score_cmd->add_option("--model", score_model, "coefficient TSV")->required();
    score_cmd->add_option("--reference-scores", score_ref, "reference score TSV for vPRS_std");
    score_cmd->add_option("--out", score_out, "output scores TSV")->required();

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic cohort");
    std::size_t sim_n = 1000, sim_p = 500, sim_repeats = 100;
    std::vector<double> sim_h2, sim_s, sim_split = {0.5, 0.2, 0.3};
    std::uint64_t sim_seed = 1;
    double maf_low = 0.05, maf_high = 0.5;
    std::string sim_out;
    sim_cmd->add_option("--n", sim_n, "sample count");
    sim_cmd->add_option("--p", sim_p, "variant count");
    sim_cmd->add_option("--h2", sim_h2, "heritability value(s)");
    sim_cmd->add_option("--sparsity", sim_s, "sparsity value(s)");
    sim_cmd->add_option("--repeats", sim_repeats, "longitudinal repeats");
    sim_cmd->add_option("--split", sim_split, "train/valid/test fractions")->expected(3);
    sim_cmd->add_option("--seed", sim_seed, "RNG seed");
    sim_cmd->add_option("--maf-low", maf_low, "MAF lower bound");
    sim_cmd->add_option("--maf-high", maf_high, "MAF upper bound");
    sim_cmd->add_option("--out", sim_out, "output prefix")->required();

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a model on a simulated cohort");
    std::string eval_model, eval_cohort, eval_out;
    eval_cmd->add_option("--model", eval_model, "coefficient TSV")->required();
    eval_cmd->add_option("--cohort", eval_cohort, "cohort prefix")->required();
    eval_cmd->add_option("--out", eval_out, "output prefix")->required();

    // gxe
    auto* gxe_cmd = app.add_subcommand("gxe", "gene-environment analyses");
    std::string gxe_mode, gxe_data, gxe_out;
    std::vector<std::string> gxe_cov, gxe_conf;
    bool gxe_robust = false;
    double gxe_threshold = 3.36, gxe_qlow = 0.25, gxe_qhigh = 0.75;
    std::size_t gxe_reps = 0;
    std::uint64_t gxe_seed = 1;
    gxe_cmd->add_option("mode", gxe_mode, "test|quintiles|self-controlled|iptw")->required();
    gxe_cmd->add_option("--data", gxe_data, "cohort table TSV");
    gxe_cmd->add_option("--covariates", gxe_cov, "covariate column names");
    gxe_cmd->add_option("--confounders", gxe_conf, "propensity model columns");
    gxe_cmd->add_flag("--robust", gxe_robust, "add vPRS:age and vPRS:sex terms");
    gxe_cmd->add_option("--threshold", gxe_threshold, "baseline eligibility threshold");
    gxe_cmd->add_option("--q-low", gxe_qlow, "low quantile for subgrouping");
    gxe_cmd->add_option("--q-high", gxe_qhigh, "high quantile for subgrouping");
    gxe_cmd->add_option("--replicates", gxe_reps, "run the Monte-Carlo calibration suites");
    gxe_cmd->add_option("--seed", gxe_seed, "RNG seed for calibration");
    gxe_cmd->add_option("--out", gxe_out, "output prefix")->required();

    try {
        app.parse(argc, argv);
        if (fit_cmd->parsed()) {
            if (step_mode == "fixed") cfg.step_mode = snplss::StepMode::fixed;
            else if (step_mode == "adaptive") cfg.step_mode = snplss::StepMode::adaptive;
            else throw snplss::ConfigError("--step-mode must be fixed or adaptive");
            cfg.sigma_model_enabled = !no_sigma;
            cfg.threads = thread_override(cfg.threads);
            return cmd_fit(fit_geno, fit_pheno, fit_pheno_col, fit_split, fit_train_ids,
                           fit_valid_ids, cfg, fit_out);
        }
        if (score_cmd->parsed()) return cmd_score(score_model, score_geno, score_ref, score_out);
        if (sim_cmd->parsed())
            return cmd_simulate(sim_n, sim_p, sim_h2, sim_s, sim_repeats, sim_split, sim_seed,
                                maf_low, maf_high, sim_out);
        if (eval_cmd->parsed()) return cmd_evaluate(eval_model, eval_cohort, eval_out);
        if (gxe_cmd->parsed())
            return cmd_gxe(gxe_mode, gxe_data, gxe_cov, gxe_conf, gxe_robust, gxe_threshold,
                           gxe_qlow, gxe_qhigh, gxe_reps, gxe_seed, gxe_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const snplss::ConfigError& e) {
        std::cerr << "CONFIG_ERROR: " << e.what() << '\n';
        return 2;
    } catch (const snplss::FormatError& e) {
        std::cerr << "FORMAT_ERROR: " << e.what() << '\n';
        return 3;
    } catch (const snplss::DataError& e) {
        std::cerr << "DATA_ERROR: " << e.what() << '\n';
        return 3;
    } catch (const snplss::NumericError& e) {
        std::cerr << "NUMERIC_ERROR: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "ERROR: " << e.what() << '\n';
        return 1;
    }
}
