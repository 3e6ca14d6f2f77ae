#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "snplss/common.hpp"
#include "snplss/genotype.hpp"
#include "snplss/model.hpp"

namespace snplss {

enum class StepMode { fixed, adaptive };

struct BoostConfig {
    std::size_t p_batch = 1000;
    long m_batch = 1000;       // max boosting iterations per batch
    int b_max = 50;            // max number of batches
    int b_stop = 2;            // outer stopping lag
    StepMode step_mode = StepMode::adaptive;
    double nu = 0.1;           // fixed step length
    double lambda = 0.1;       // adaptive-mode shrinkage for the mu step
    double nu_sigma = 0.05;    // adaptive-mode sigma step (limiting value)
    bool sigma_model_enabled = true;  // false: mean-only boosting
    unsigned threads = 1;

    void validate(std::size_t p) const {
        if (p_batch < 1) throw ConfigError("p_batch must be >= 1");
        if (p_batch > p)
            throw ConfigError("p_batch (" + std::to_string(p_batch) + ") exceeds variant count (" +
                              std::to_string(p) + ")");
        if (m_batch < 1) throw ConfigError("m_batch must be >= 1");
        if (b_max < 1) throw ConfigError("b_max must be >= 1");
        if (b_stop < 1) throw ConfigError("b_stop must be >= 1");
        if (nu <= 0.0) throw ConfigError("nu must be > 0");
        if (lambda <= 0.0) throw ConfigError("lambda must be > 0");
        if (nu_sigma <= 0.0) throw ConfigError("nu_sigma must be > 0");
    }

    nlohmann::json echo() const {
        return {{"p_batch", p_batch},
                {"m_batch", m_batch},
                {"b_max", b_max},
                {"b_stop", b_stop},
                {"step_mode", step_mode == StepMode::fixed ? "fixed" : "adaptive"},
                {"nu", nu},
                {"lambda", lambda},
                {"nu_sigma", nu_sigma},
                {"sigma_model_enabled", sigma_model_enabled},
                {"threads", threads}};
    }
};

struct Batch {
    Param parameter = Param::mu;
    std::vector<std::size_t> variant_indices;  // ascending
    double c_stop = 0.0;  // highest |corr| outside the batch at build time
    bool early_stop_flag = false;
};

struct IterationRecord {
    long m = 0;
    Param parameter = Param::mu;
    bool updated = false;      // false: skipped (early-stop flag)
    std::string variant_id;    // empty when skipped
    double train_loss = 0.0;
    double valid_loss = 0.0;
};

struct BatchRecord {
    int k = 0;
    double c_stop_mu = 0.0;
    double c_stop_sigma = 0.0;
    long first_iteration = 0;
    long last_iteration = 0;
    std::string termination;  // "m_batch", "both_flags", "outer_stall", "b_max"
};

struct FitTrace {
    std::vector<IterationRecord> iterations;     // one per sub-update
    std::vector<double> valid_loss_by_iter;      // index = iteration, [0] = intercept-only
    std::vector<double> train_loss_by_iter;
    std::vector<BatchRecord> batches;
};

// Earliest iteration attaining the minimum validation loss.
inline long select_m_stop(const std::vector<double>& valid_loss_by_iter) {
    if (valid_loss_by_iter.empty()) throw DataError("select_m_stop: empty trace");
    std::size_t best = 0;
    for (std::size_t i = 1; i < valid_loss_by_iter.size(); ++i)
        if (valid_loss_by_iter[i] < valid_loss_by_iter[best]) best = i;
    return static_cast<long>(best);
}

// Screening: the p_batch variants with highest |corr(residual, g_j)|, ties
// broken toward the lower variant index; c_stop is the best |corr| left out.
inline Batch build_batch(const GenotypeMatrix& g, std::span<const double> residual,
                         std::size_t p_batch, Param parameter, unsigned threads = 1) {
    const std::size_t p = g.p();
    if (p_batch > p) throw ConfigError("build_batch: p_batch exceeds p");
    const double rm = mean(residual);
    double rcss = 0.0;
    for (double r : residual) rcss += (r - rm) * (r - rm);

    std::vector<double> abs_corr(p);
    parallel_for(p, threads, [&](std::size_t j) {
        abs_corr[j] = std::abs(g.column_correlation(j, residual, rm, rcss));
    });

    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), 0);
    auto better = [&](std::size_t a, std::size_t b) {
        if (abs_corr[a] != abs_corr[b]) return abs_corr[a] > abs_corr[b];
        return a < b;
    };
    if (p_batch < p)
        std::nth_element(order.begin(), order.begin() + static_cast<long>(p_batch), order.end(),
                         better);

    Batch batch;
    batch.parameter = parameter;
    batch.variant_indices.assign(order.begin(), order.begin() + static_cast<long>(p_batch));
    std::sort(batch.variant_indices.begin(), batch.variant_indices.end());
    batch.c_stop = 0.0;
    for (std::size_t k = p_batch; k < p; ++k)
        batch.c_stop = std::max(batch.c_stop, abs_corr[order[k]]);
    return batch;
}

// Adaptive step length for the mu update: lambda * sum(h^2) / sum(h^2/sigma^2)
// with h_i = b0 + b1*g_i. Returns lambda when h is identically zero.
inline double adaptive_step_mu(double b0, double b1, std::span<const double> g_col,
                               std::span<const double> sigma_hat, double lambda) {
    if (g_col.size() != sigma_hat.size()) throw DataError("adaptive_step_mu: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g_col.size(); ++i) {
        const double h = b0 + b1 * g_col[i];
        num += h * h;
        den += h * h / (sigma_hat[i] * sigma_hat[i]);
    }
    if (num == 0.0 || den == 0.0) return lambda;
    return lambda * num / den;
}

namespace detail {

// Dense imputed copies of the batch columns plus their moments, so the inner
// loop never touches packed storage.
struct BatchColumns {
    std::vector<std::size_t> indices;
    std::vector<double> data;  // column-major, p_batch x n
    std::vector<double> col_mean;
    std::vector<double> col_css;
    std::size_t n = 0;

    void load(const GenotypeMatrix& g, const std::vector<std::size_t>& cols) {
        indices = cols;
        n = g.n();
        data.resize(cols.size() * n);
        col_mean.resize(cols.size());
        col_css.resize(cols.size());
        std::vector<double> buf;
        for (std::size_t k = 0; k < cols.size(); ++k) {
            g.dosage_column(cols[k], Imputation::mean, buf);
            std::copy(buf.begin(), buf.end(), data.begin() + static_cast<long>(k * n));
            const ColStats& s = g.column_stats(cols[k]);
            col_mean[k] = s.mean;
            col_css[k] = s.center_ss;
        }
    }

    std::span<const double> column(std::size_t k) const { return {&data[k * n], n}; }
};

struct FitState {
    std::span<const double> y;
    std::vector<double> mu, eta, sigma;

    void init(std::span<const double> y_, double beta0, double gamma0) {
        y = y_;
        mu.assign(y.size(), beta0);
        eta.assign(y.size(), gamma0);
        refresh_sigma();
    }

    void refresh_sigma() {
        sigma.resize(eta.size());
        for (std::size_t i = 0; i < eta.size(); ++i)
            sigma[i] = std::exp(std::clamp(eta[i], kEtaClampLo, kEtaClampHi));
    }

    double loss() const {
        double total = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = y[i] - mu[i];
            const double e = std::clamp(eta[i], kEtaClampLo, kEtaClampHi);
            total += kHalfLog2Pi + e + r * r / (2.0 * sigma[i] * sigma[i]);
        }
        return total / static_cast<double>(y.size());
    }

    void residual(Param param, std::vector<double>& out) const {
        out.resize(y.size());
        if (param == Param::mu) {
            for (std::size_t i = 0; i < y.size(); ++i)
                out[i] = (y[i] - mu[i]) / (sigma[i] * sigma[i]);
        } else {
            for (std::size_t i = 0; i < y.size(); ++i) {
                const double d = y[i] - mu[i];
                out[i] = d * d / (sigma[i] * sigma[i]) - 1.0;
            }
        }
    }
};

}  // namespace detail

// Batch-wise cyclical gradient boosting for the Gaussian location-scale model.
inline std::pair<LssModel, FitTrace> fit(const GenotypeMatrix& train_g,
                                         std::span<const double> y_train,
                                         const GenotypeMatrix& valid_g,
                                         std::span<const double> y_valid,
                                         const BoostConfig& cfg) {
    cfg.validate(train_g.p());
    const std::size_t n = train_g.n();
    if (y_train.size() != n) throw DataError("fit: training phenotype length mismatch");
    if (n < 10) throw DataError("fit: need at least 10 training samples");
    if (valid_g.n() == 0 || y_valid.size() != valid_g.n())
        throw DataError("fit: validation set empty or phenotype length mismatch");
    if (train_g.p() != valid_g.p())
        throw DataError("fit: train and validation variant counts differ");
    for (std::size_t j = 0; j < train_g.p(); ++j)
        if (train_g.variants()[j].variant_id != valid_g.variants()[j].variant_id)
            throw DataError("fit: train/validation variant mismatch at column " + std::to_string(j));

    const double y_sd = sample_sd(y_train);
    if (y_sd <= 0.0) throw DataError("fit: phenotype has zero sample SD");

    LssModel model;
    model.beta0_init = mean(y_train);
    model.gamma0_init = std::log(y_sd);
    model.config_echo = cfg.echo().dump();

    detail::FitState tr, va;
    tr.init(y_train, model.beta0_init, model.gamma0_init);
    va.init(y_valid, model.beta0_init, model.gamma0_init);

    FitTrace trace;
    trace.valid_loss_by_iter.push_back(va.loss());
    trace.train_loss_by_iter.push_back(tr.loss());

    std::vector<double> r_mu, r_sigma, valid_col;
    tr.residual(Param::mu, r_mu);
    tr.residual(Param::sigma, r_sigma);

    long m = 0;
    double best_batch_loss = trace.valid_loss_by_iter[0];
    int stall = 0;
    bool outer_done = false;

    // One cyclical sub-step for one parameter; returns false when the
    // early-stop flag got set (no update happened).
    auto sub_step = [&](Param param, Batch& batch, const detail::BatchColumns& cols,
                        std::vector<double>& resid) -> IterationRecord {
        IterationRecord rec;
        rec.m = m;
        rec.parameter = param;
        if (batch.early_stop_flag) {
            tr.residual(param, resid);
            rec.updated = false;
            return rec;
        }
        const double rm = mean(resid);
        double rcss = 0.0;
        for (double r : resid) rcss += (r - rm) * (r - rm);

        // within-batch screening on the current residual
        std::size_t best_k = 0;
        double best_abs = -1.0;
        for (std::size_t k = 0; k < cols.indices.size(); ++k) {
            if (cols.col_css[k] <= 0.0 || rcss <= 0.0) continue;
            auto col = cols.column(k);
            double dot = 0.0;
            for (std::size_t i = 0; i < cols.n; ++i) dot += col[i] * resid[i];
            const double cov = dot - static_cast<double>(cols.n) * cols.col_mean[k] * rm;
            const double c = std::abs(cov / std::sqrt(cols.col_css[k] * rcss));
            if (c > best_abs) {  // ties keep the lower variant index (ascending order)
                best_abs = c;
                best_k = k;
            }
        }
        if (best_abs < batch.c_stop) {
            batch.early_stop_flag = true;
            tr.residual(param, resid);
            rec.updated = false;
            return rec;
        }

        // least-squares base learner E(r) = b0 + b1 * g
        auto col = cols.column(best_k);
        double sgr = 0.0;
        for (std::size_t i = 0; i < cols.n; ++i)
            sgr += (col[i] - cols.col_mean[best_k]) * (resid[i] - rm);
        const double b1 = (cols.col_css[best_k] > 0.0) ? sgr / cols.col_css[best_k] : 0.0;
        const double b0 = rm - b1 * cols.col_mean[best_k];

        double step;
        if (cfg.step_mode == StepMode::fixed) {
            step = cfg.nu;
        } else if (param == Param::mu) {
            step = adaptive_step_mu(b0, b1, col, tr.sigma, cfg.lambda);
        } else {
            step = cfg.nu_sigma;
        }

        const std::size_t jvar = cols.indices[best_k];
        const std::string& vid = train_g.variants()[jvar].variant_id;

        UpdateRecord u;
        u.iteration = m;
        u.parameter = param;
        u.variant_id = vid;
        u.intercept_increment = step * b0;
        u.slope_increment = step * b1;
        u.step_length_used = step;
        model.update_log.push_back(u);

        auto& tr_pred = (param == Param::mu) ? tr.mu : tr.eta;
        for (std::size_t i = 0; i < cols.n; ++i)
            tr_pred[i] += u.intercept_increment + u.slope_increment * col[i];
        valid_g.dosage_column(valid_g.column_index(vid), Imputation::mean, valid_col);
        auto& va_pred = (param == Param::mu) ? va.mu : va.eta;
        for (std::size_t i = 0; i < va_pred.size(); ++i)
            va_pred[i] += u.intercept_increment + u.slope_increment * valid_col[i];
        if (param == Param::sigma) {
            tr.refresh_sigma();
            va.refresh_sigma();
        }
        tr.residual(param, resid);
        rec.updated = true;
        rec.variant_id = vid;
        return rec;
    };

    for (int k = 1; k <= cfg.b_max && !outer_done; ++k) {
        Batch batch_mu = build_batch(train_g, r_mu, cfg.p_batch, Param::mu, cfg.threads);
        detail::BatchColumns cols_mu;
        cols_mu.load(train_g, batch_mu.variant_indices);

        Batch batch_sigma;
        detail::BatchColumns cols_sigma;
        if (cfg.sigma_model_enabled) {
            batch_sigma = build_batch(train_g, r_sigma, cfg.p_batch, Param::sigma, cfg.threads);
            cols_sigma.load(train_g, batch_sigma.variant_indices);
        } else {
            batch_sigma.parameter = Param::sigma;
            batch_sigma.early_stop_flag = true;
        }

        BatchRecord brec;
        brec.k = k;
        brec.c_stop_mu = batch_mu.c_stop;
        brec.c_stop_sigma = batch_sigma.c_stop;
        brec.first_iteration = m + 1;
        brec.termination = "m_batch";

        double batch_min_loss = std::numeric_limits<double>::infinity();
        for (long l = 1; l <= cfg.m_batch; ++l) {
            if (batch_mu.early_stop_flag && batch_sigma.early_stop_flag) {
                brec.termination = "both_flags";
                break;
            }
            ++m;
            IterationRecord rec_mu = sub_step(Param::mu, batch_mu, cols_mu, r_mu);
            rec_mu.train_loss = tr.loss();
            rec_mu.valid_loss = va.loss();
            trace.iterations.push_back(rec_mu);
            if (cfg.sigma_model_enabled) {
                IterationRecord rec_sigma = sub_step(Param::sigma, batch_sigma, cols_sigma, r_sigma);
                rec_sigma.train_loss = tr.loss();
                rec_sigma.valid_loss = va.loss();
                trace.iterations.push_back(rec_sigma);
            } else {
                tr.residual(Param::sigma, r_sigma);
            }
            trace.train_loss_by_iter.push_back(tr.loss());
            trace.valid_loss_by_iter.push_back(va.loss());
            batch_min_loss = std::min(batch_min_loss, trace.valid_loss_by_iter.back());
        }
        brec.last_iteration = m;

        if (batch_min_loss < best_batch_loss) {
            best_batch_loss = batch_min_loss;
            stall = 0;
        } else {
            ++stall;
        }
        if (stall >= cfg.b_stop) {
            brec.termination += "+outer_stall";
            outer_done = true;
        } else if (k == cfg.b_max) {
            brec.termination += "+b_max";
            outer_done = true;
        }
        trace.batches.push_back(brec);
    }

    model.m_stop = select_m_stop(trace.valid_loss_by_iter);
    model.valid_loss_path = trace.valid_loss_by_iter;
    const CoefficientState final_state = coefficients_at(model, model.m_stop);
    model.beta0 = final_state.beta0;
    model.gamma0 = final_state.gamma0;
    model.beta = final_state.beta;
    model.gamma = final_state.gamma;
    // drop coefficients that cancelled back to exactly zero
    std::erase_if(model.beta, [](const auto& kv) { return kv.second == 0.0; });
    std::erase_if(model.gamma, [](const auto& kv) { return kv.second == 0.0; });
    for (const auto& [id, c] : model.beta)
        model.allele1[id] = train_g.variants()[train_g.column_index(id)].allele1;
    for (const auto& [id, c] : model.gamma)
        model.allele1[id] = train_g.variants()[train_g.column_index(id)].allele1;
    return {std::move(model), std::move(trace)};
}

inline void write_trace_tsv(const FitTrace& trace, const std::string& path,
                            const std::string& comment_header = "") {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    out.precision(17);
    if (!comment_header.empty()) out << "# " << comment_header << '\n';
    out << "iteration\tparameter\tvariant\ttrain_loss\tvalid_loss\n";
    for (const auto& r : trace.iterations)
        out << r.m << '\t' << param_name(r.parameter) << '\t'
            << (r.updated ? r.variant_id : std::string("(skipped)")) << '\t' << r.train_loss
            << '\t' << r.valid_loss << '\n';
}

}  // namespace snplss
