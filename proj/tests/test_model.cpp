#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "snplss/snplss.hpp"

using namespace snplss;

namespace {

Prediction make_pred(std::vector<double> mu, std::vector<double> eta) {
    Prediction p;
    p.mu = std::move(mu);
    p.eta_sigma = std::move(eta);
    p.sigma.resize(p.eta_sigma.size());
    for (std::size_t i = 0; i < p.sigma.size(); ++i) p.sigma[i] = std::exp(p.eta_sigma[i]);
    return p;
}

double nll_point(double y, double mu, double eta) {
    std::vector<double> yy{y};
    return nll_loss(yy, make_pred({mu}, {eta}));
}

GenotypeMatrix tiny_matrix() {
    std::vector<VariantMeta> v{{"1", "v1", 1, "A", "G"}, {"1", "v2", 2, "C", "T"}};
    std::vector<SampleMeta> s{{"F1", "I1"}, {"F2", "I2"}, {"F3", "I3"}};
    // variant-major: v1 = [2,1,0], v2 = [0,2,1]
    return GenotypeMatrix::from_dosages(v, s, {2, 1, 0, 0, 2, 1});
}

}  // namespace

TEST_CASE("nll_loss reference points") {
    REQUIRE(nll_point(0, 0, 0) == Catch::Approx(0.918939).margin(1e-6));
    REQUIRE(nll_point(1, 0, 0) == Catch::Approx(1.418939).margin(1e-6));
    REQUIRE(nll_point(0, 0, 1) == Catch::Approx(1.918939).margin(1e-6));
    // averaging across observations
    Prediction p = make_pred({0, 0}, {0, 0});
    std::vector<double> y{0, 1};
    REQUIRE(nll_loss(y, p) == Catch::Approx(0.5 * (0.918939 + 1.418939)).margin(1e-6));
}

TEST_CASE("nll_loss rejects bad input") {
    Prediction p = make_pred({0}, {0});
    std::vector<double> bad{std::numeric_limits<double>::quiet_NaN()};
    REQUIRE_THROWS_AS(nll_loss(bad, p), NumericError);
    std::vector<double> none{};
    Prediction empty;
    REQUIRE_THROWS_AS(nll_loss(none, empty), DataError);
    std::vector<double> two{0, 1};
    REQUIRE_THROWS_AS(nll_loss(two, p), DataError);
}

TEST_CASE("residuals reference points") {
    {
        Prediction p = make_pred({1}, {0});
        std::vector<double> y{2};
        REQUIRE(residual_mu(y, p)[0] == Catch::Approx(1.0));
        REQUIRE(residual_sigma(y, p)[0] == Catch::Approx(0.0));
    }
    {
        Prediction p = make_pred({1}, {std::log(2.0)});
        std::vector<double> y{2};
        REQUIRE(residual_mu(y, p)[0] == Catch::Approx(0.25));
    }
    {
        Prediction p = make_pred({1}, {0});
        std::vector<double> y{3};
        REQUIRE(residual_sigma(y, p)[0] == Catch::Approx(3.0));
    }
}

TEST_CASE("residuals are the negative NLL gradients (finite differences)") {
    std::mt19937 rng(2024);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> eta_dist(-1.5, 1.5);
    const double h = 1e-6;
    for (int trial = 0; trial < 1000; ++trial) {
        const double y = 3.0 * gauss(rng);
        const double mu = 2.0 * gauss(rng);
        const double eta = eta_dist(rng);

        const double dmu = (nll_point(y, mu + h, eta) - nll_point(y, mu - h, eta)) / (2 * h);
        const double deta = (nll_point(y, mu, eta + h) - nll_point(y, mu, eta - h)) / (2 * h);

        std::vector<double> yy{y};
        const Prediction p = make_pred({mu}, {eta});
        const double rm = residual_mu(yy, p)[0];
        const double rs = residual_sigma(yy, p)[0];

        const double tol_m = 1e-6 * std::max(1.0, std::abs(rm));
        const double tol_s = 1e-6 * std::max(1.0, std::abs(rs));
        REQUIRE(std::abs(rm - (-dmu)) < tol_m);
        REQUIRE(std::abs(rs - (-deta)) < tol_s);
    }
}

TEST_CASE("predict on sparse coefficient maps") {
    const GenotypeMatrix g = tiny_matrix();

    SECTION("beta0=1, beta[v1]=0.5") {
        LssModel m;
        m.beta0 = 1.0;
        m.beta["v1"] = 0.5;
        const Prediction p = predict(m, g);
        REQUIRE(p.mu[0] == Catch::Approx(2.0));  // 1 + 0.5*2
        REQUIRE(p.mu[1] == Catch::Approx(1.5));
        REQUIRE(p.mu[2] == Catch::Approx(1.0));
        // gamma empty, gamma0 = 0 -> sigma == 1 everywhere
        for (double s : p.sigma) REQUIRE(s == Catch::Approx(1.0));
    }
    SECTION("unknown variant raises a data error naming it") {
        LssModel m;
        m.beta["ghost"] = 1.0;
        REQUIRE_THROWS_WITH(predict(m, g), Catch::Matchers::ContainsSubstring("ghost"));
    }
    SECTION("eta is clamped before exponentiation") {
        LssModel m;
        m.gamma0 = 40.0;
        const Prediction p = predict(m, g);
        for (double e : p.eta_sigma) REQUIRE(e == kEtaClampHi);
        for (double s : p.sigma) REQUIRE(s == Catch::Approx(std::exp(15.0)));
    }
}

TEST_CASE("score equals predict's linear predictors bit-for-bit") {
    const GenotypeMatrix g = tiny_matrix();
    LssModel m;
    m.beta0 = 0.3;
    m.gamma0 = -0.1;
    m.beta["v1"] = 0.25;
    m.gamma["v2"] = 0.4;
    const Prediction p = predict(m, g);
    const auto [mprs, vprs] = score(m, g);
    REQUIRE(mprs == p.mu);
    REQUIRE(vprs == p.eta_sigma);
}

TEST_CASE("coefficients_at replays the update log") {
    LssModel m;
    m.beta0_init = 1.0;
    m.gamma0_init = 0.2;
    m.update_log = {
        {1, Param::mu, "v1", 0.1, 0.5, 0.1},
        {2, Param::sigma, "v2", -0.05, 0.2, 0.05},
        {3, Param::mu, "v1", 0.0, 0.25, 0.1},
    };
    m.m_stop = 3;
    m.beta0 = 1.1;
    m.gamma0 = 0.15;
    m.beta = {{"v1", 0.75}};
    m.gamma = {{"v2", 0.2}};

    const CoefficientState s2 = coefficients_at(m, 2);
    REQUIRE(s2.beta0 == Catch::Approx(1.1));
    REQUIRE(s2.beta.at("v1") == Catch::Approx(0.5));
    REQUIRE(s2.gamma.at("v2") == Catch::Approx(0.2));

    // at m_stop the replay equals the stored sparse maps
    const GenotypeMatrix g = tiny_matrix();
    const Prediction direct = predict(m, g);
    const Prediction replay = predict(m, g, m.m_stop);
    for (std::size_t i = 0; i < g.n(); ++i) {
        REQUIRE(replay.mu[i] == Catch::Approx(direct.mu[i]).margin(1e-12));
        REQUIRE(replay.sigma[i] == Catch::Approx(direct.sigma[i]).margin(1e-12));
    }
}

TEST_CASE("standardize") {
    std::vector<double> s{0, 2};
    const auto out = standardize(s, s);
    REQUIRE(out[0] == Catch::Approx(-1.0 / std::sqrt(2.0)));
    REQUIRE(out[1] == Catch::Approx(1.0 / std::sqrt(2.0)));

    std::mt19937 rng(5);
    std::normal_distribution<double> gauss(3.0, 2.5);
    std::vector<double> r(40);
    for (auto& v : r) v = gauss(rng);
    const auto z = standardize(r, r);
    REQUIRE(mean(z) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(sample_sd(z) == Catch::Approx(1.0).margin(1e-12));

    std::vector<double> flat{5, 5, 5};
    REQUIRE_THROWS_AS(standardize(flat, flat), DataError);
}

TEST_CASE("coefficient export/import round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "snplss_model_test";
    std::filesystem::create_directories(dir);

    SECTION("fitted-looking model") {
        LssModel m;
        m.beta0_init = 0.5;
        m.gamma0_init = -0.25;
        m.beta0 = 0.725;
        m.gamma0 = -0.2;
        m.beta = {{"v1", 0.123456789012345}, {"v3", -1e-8}};
        m.gamma = {{"v2", 0.5}, {"v1", 0.001}};
        m.allele1 = {{"v1", "A"}, {"v2", "C"}, {"v3", "G"}};
        m.m_stop = 7;
        m.valid_loss_path = {1.5, 1.4, 1.35};
        m.update_log = {{1, Param::mu, "v1", 0.01, 0.1, 0.1}};
        m.config_echo = R"({"nu":0.1})";

        const auto path = (dir / "model.tsv").string();
        export_coefficients(m, path);
        const LssModel r = import_coefficients(path);
        REQUIRE(r.beta0 == m.beta0);
        REQUIRE(r.gamma0 == m.gamma0);
        REQUIRE(r.beta == m.beta);
        REQUIRE(r.gamma == m.gamma);
        REQUIRE(r.allele1 == m.allele1);
        REQUIRE(r.m_stop == 7);
        REQUIRE(r.valid_loss_path == m.valid_loss_path);
        REQUIRE(r.update_log.size() == 1);
        REQUIRE(r.update_log[0].slope_increment == 0.1);
    }
    SECTION("intercept-only model") {
        LssModel m;
        m.beta0 = 2.0;
        m.gamma0 = 0.5;
        const auto path = (dir / "empty.tsv").string();
        export_coefficients(m, path);
        const LssModel r = import_coefficients(path);
        REQUIRE(r.beta.empty());
        REQUIRE(r.gamma.empty());
        REQUIRE(r.beta0 == 2.0);
        REQUIRE(r.gamma0 == 0.5);
    }
    SECTION("malformed files") {
        const auto bad = (dir / "bad.tsv").string();
        {
            std::ofstream out(bad);
            out << "variant_id\tallele1\tbeta\n";  // missing gamma column
        }
        REQUIRE_THROWS_AS(import_coefficients(bad), FormatError);
        {
            std::ofstream out(bad);
            out << "variant_id\tallele1\tbeta\tgamma\n(Intercept_mu)\t.\tx\t0\n";
        }
        REQUIRE_THROWS_AS(import_coefficients(bad), FormatError);
        REQUIRE_THROWS_AS(import_coefficients((dir / "missing.tsv").string()), FormatError);
    }
}

TEST_CASE("constant model NLL is minimized at the sample moments") {
    // For mu = const, eta = const, the NLL is minimized at mu = mean(y) and
    // eta = log of the MLE standard deviation. Check on a grid.
    std::mt19937 rng(99);
    std::normal_distribution<double> gauss(1.0, 2.0);
    std::vector<double> y(200);
    for (auto& v : y) v = gauss(rng);

    const double m = mean(y);
    double ss = 0.0;
    for (double v : y) ss += (v - m) * (v - m);
    const double eta_mle = 0.5 * std::log(ss / static_cast<double>(y.size()));

    auto loss_at = [&](double mu, double eta) {
        Prediction p = make_pred(std::vector<double>(y.size(), mu),
                                 std::vector<double>(y.size(), eta));
        return nll_loss(y, p);
    };
    const double best = loss_at(m, eta_mle);
    for (double dmu : {-0.2, -0.05, 0.05, 0.2})
        for (double deta : {-0.2, -0.05, 0.05, 0.2})
            REQUIRE(loss_at(m + dmu, eta_mle + deta) > best);
}
