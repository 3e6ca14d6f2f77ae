#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "snplss/snplss.hpp"

using namespace snplss;

namespace {

SimSpec desk_spec(std::uint64_t seed, double h2 = 0.5, double sparsity = 0.01,
                  std::size_t n = 1000, std::size_t p = 500) {
    SimSpec s;
    s.n = n;
    s.p = p;
    s.h2 = h2;
    s.sparsity = sparsity;
    s.repeats = 20;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("spec validation") {
    SimSpec s = desk_spec(1);
    REQUIRE_NOTHROW(s.validate());
    s.h2 = 1.0;
    REQUIRE_THROWS_AS(s.validate(), ConfigError);
    s = desk_spec(1);
    s.sparsity = 0.0001;  // 0.05 variants -> rounds to zero informative
    REQUIRE_THROWS_AS(s.validate(), ConfigError);
    s = desk_spec(1);
    s.split_train = 0.9;  // splits no longer sum to 1
    REQUIRE_THROWS_AS(s.validate(), ConfigError);
    s = desk_spec(1);
    REQUIRE(s.n_informative() == 5);
}

TEST_CASE("coefficient variance arithmetic") {
    // h2=0.5, sigma_bar^2=1, s*p=10 -> variance (1/0.5)*0.5/10 = 0.1 per
    // informative variant on the standardized-genotype scale
    const double h2 = 0.5, sigma_bar2 = 1.0;
    const double k = 10.0;
    const double var = (sigma_bar2 / (1.0 - h2)) * h2 / k;
    REQUIRE(var == Catch::Approx(0.1));
}

TEST_CASE("simulate is deterministic and structurally sound") {
    const SimSpec s = desk_spec(42);
    const SimulatedCohort a = simulate(s);
    const SimulatedCohort b = simulate(s);

    REQUIRE(a.matrix.n() == s.n);
    REQUIRE(a.matrix.p() == s.p);
    REQUIRE(a.baseline_y == b.baseline_y);
    REQUIRE(a.longitudinal_y == b.longitudinal_y);
    REQUIRE(a.true_beta == b.true_beta);
    REQUIRE(a.true_gamma == b.true_gamma);
    REQUIRE(a.split_assignment == b.split_assignment);
    for (std::size_t j = 0; j < s.p; ++j)
        for (std::size_t i = 0; i < s.n; ++i) REQUIRE(a.matrix.code(j, i) == b.matrix.code(j, i));

    // informative counts
    REQUIRE(a.true_beta.size() == s.n_informative());
    REQUIRE(a.true_gamma.size() == s.n_informative());

    // gamma effects carry the normalized eta spread: the population SD of
    // log(sigma_true) equals sqrt(E[gamma^2] * sum_j pop-var(g_j)) exactly
    {
        double target_var = 0.0;
        for (const auto& [id, g] : a.true_gamma) {
            const auto j = a.matrix.column_index(id);
            target_var += (0.25 * 0.25 / 3.0) * a.matrix.column_stats(j).center_ss /
                          static_cast<double>(s.n);
        }
        std::vector<double> eta(s.n);
        for (std::size_t i = 0; i < s.n; ++i) eta[i] = std::log(a.sigma_true[i]);
        const double em = std::accumulate(eta.begin(), eta.end(), 0.0) / static_cast<double>(s.n);
        double realized = 0.0;
        for (double e : eta) realized += (e - em) * (e - em);
        realized /= static_cast<double>(s.n);
        REQUIRE(realized == Catch::Approx(target_var).epsilon(1e-9));
    }

    // baseline is the first longitudinal column
    for (std::size_t i = 0; i < s.n; ++i) REQUIRE(a.baseline_y[i] == a.longitudinal(i, 0));

    // split sizes at the requested fractions
    REQUIRE(a.indices(SplitLabel::train).size() == 500);
    REQUIRE(a.indices(SplitLabel::valid).size() == 200);
    REQUIRE(a.indices(SplitLabel::test).size() == 300);

    // different seeds give different phenotypes
    const SimulatedCohort c = simulate(desk_spec(43));
    REQUIRE(a.baseline_y != c.baseline_y);
}

TEST_CASE("sigma_true follows the planted log-linear model") {
    const SimSpec s = desk_spec(7);
    const SimulatedCohort c = simulate(s);
    std::vector<double> col;
    for (std::size_t i : {std::size_t{0}, std::size_t{13}, std::size_t{999}}) {
        double eta = 0.0;
        for (const auto& [id, g] : c.true_gamma) {
            c.matrix.dosage_column(c.matrix.column_index(id), Imputation::mean, col);
            eta += g * col[i];
        }
        REQUIRE(c.sigma_true[i] == Catch::Approx(std::exp(eta)).margin(1e-12));
    }
    // mu_true likewise
    for (std::size_t i : {std::size_t{1}, std::size_t{500}}) {
        double mu = 0.0;
        for (const auto& [id, b] : c.true_beta) {
            c.matrix.dosage_column(c.matrix.column_index(id), Imputation::mean, col);
            mu += b * col[i];
        }
        REQUIRE(c.mu_true[i] == Catch::Approx(mu).margin(1e-12));
    }
}

TEST_CASE("realized heritability tracks the target") {
    SECTION("worked example") {
        // all sigma_i = 1 and Var(mu) = 1 gives h2 = 1/(1+1) = 0.5
        SimulatedCohort c;
        c.mu_true = {0.0, 2.0};  // population variance 1
        c.sigma_true = {1.0, 1.0};
        REQUIRE(realized_heritability(c) == Catch::Approx(0.5));

        c.mu_true = {1.0, 1.0};  // constant mean
        REQUIRE(realized_heritability(c) == Catch::Approx(0.0));
    }
    SECTION("Monte-Carlo: h2 = 0.7 desk-scale grid") {
        double total = 0.0;
        const int seeds = 20;
        for (int s = 0; s < seeds; ++s) {
            const double r = realized_heritability(simulate(desk_spec(100 + s, 0.7, 0.01, 2000, 2000)));
            REQUIRE(r == Catch::Approx(0.7).epsilon(1e-9));  // exact by normalization
            total += r;
        }
        REQUIRE(total / seeds == Catch::Approx(0.7).margin(0.1));
    }
    SECTION("Monte-Carlo: h2 = 0.1") {
        double total = 0.0;
        const int seeds = 20;
        for (int s = 0; s < seeds; ++s)
            total += realized_heritability(simulate(desk_spec(200 + s, 0.1, 0.01, 2000, 2000)));
        REQUIRE(total / seeds == Catch::Approx(0.1).margin(0.05));
    }
}

TEST_CASE("benchmark longitudinal SD estimator") {
    SECTION("worked examples") {
        SimulatedCohort c;
        c.repeats = 2;
        c.longitudinal_y = {1.0, 3.0};  // one individual, repeats [1,3]
        c.baseline_y = {1.0};
        c.sigma_true = {1.0};
        REQUIRE(benchmark_sigma_sd(c, 2)[0] == Catch::Approx(std::sqrt(2.0)));

        c.longitudinal_y = {2.0, 2.0};
        REQUIRE(benchmark_sigma_sd(c, 2)[0] == 0.0);

        REQUIRE_THROWS_AS(benchmark_sigma_sd(c, 1), ConfigError);
        REQUIRE_THROWS_AS(benchmark_sigma_sd(c, 3), ConfigError);
    }
    SECTION("correlation with sigma_true improves with k") {
        // seed-averaged corr(benchmark_k, sigma_true) should rise with k
        const std::vector<std::size_t> ks{2, 5, 10, 20};
        std::vector<double> avg(ks.size(), 0.0);
        const int seeds = 20;
        for (int s = 0; s < seeds; ++s) {
            SimSpec spec = desk_spec(300 + s, 0.3, 0.02, 800, 300);
            spec.repeats = 20;
            const SimulatedCohort c = simulate(spec);
            for (std::size_t t = 0; t < ks.size(); ++t) {
                const auto est = benchmark_sigma_sd(c, ks[t]);
                avg[t] += pearson(est, c.sigma_true) / seeds;
            }
        }
        for (std::size_t t = 1; t < ks.size(); ++t) REQUIRE(avg[t] > avg[t - 1]);
        REQUIRE(avg.back() > 0.5);
    }
}

TEST_CASE("cohort files round trip through the text formats") {
    const auto dir = std::filesystem::temp_directory_path() / "snplss_sim_test";
    std::filesystem::create_directories(dir);
    SimSpec s = desk_spec(11, 0.4, 0.02, 60, 50);
    s.repeats = 3;
    const SimulatedCohort c = simulate(s);
    const std::string prefix = (dir / "cohort").string();
    write_cohort(c, prefix);

    const auto g = GenotypeMatrix::load_text(prefix + ".geno.tsv");
    REQUIRE(g.n() == 60);
    REQUIRE(g.p() == 50);
    for (std::size_t j = 0; j < g.p(); ++j)
        for (std::size_t i = 0; i < g.n(); ++i) REQUIRE(g.code(j, i) == c.matrix.code(j, i));

    std::ifstream truth(prefix + ".truth.tsv");
    std::string line;
    REQUIRE(std::getline(truth, line));
    REQUIRE(line == "variant_id\tbeta_true\tgamma_true");
    std::size_t nonzero_beta = 0;
    while (std::getline(truth, line)) {
        const auto f = snplss::detail::split_tab(line);
        REQUIRE(f.size() == 3);
        if (std::stod(f[1]) != 0.0) ++nonzero_beta;
    }
    REQUIRE(nonzero_beta == c.true_beta.size());
}

TEST_CASE("simulation from an external genotype matrix") {
    const SimSpec base = desk_spec(5, 0.5, 0.02, 200, 100);
    const SimulatedCohort first = simulate(base);

    SimSpec reuse = base;
    reuse.seed = 6;
    reuse.genotype_model.kind = GenotypeModel::Kind::from_matrix;
    const SimulatedCohort second = simulate(reuse, &first.matrix);
    for (std::size_t j = 0; j < 100; ++j)
        for (std::size_t i = 0; i < 200; ++i)
            REQUIRE(second.matrix.code(j, i) == first.matrix.code(j, i));
    REQUIRE(second.baseline_y != first.baseline_y);

    SimSpec bad = reuse;
    bad.n = 199;
    REQUIRE_THROWS_AS(simulate(bad, &first.matrix), ConfigError);
    REQUIRE_THROWS_AS(simulate(reuse, nullptr), ConfigError);
}
