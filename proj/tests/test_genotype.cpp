#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "snplss/snplss.hpp"

using snplss::GenotypeMatrix;
using snplss::Imputation;
using snplss::SampleMeta;
using snplss::VariantMeta;

namespace {

std::vector<VariantMeta> make_variants(std::size_t p) {
    std::vector<VariantMeta> v(p);
    for (std::size_t j = 0; j < p; ++j)
        v[j] = {"1", "v" + std::to_string(j + 1), static_cast<long long>(j + 1), "A", "G"};
    return v;
}

std::vector<SampleMeta> make_samples(std::size_t n) {
    std::vector<SampleMeta> s(n);
    for (std::size_t i = 0; i < n; ++i)
        s[i] = {"F" + std::to_string(i + 1), "I" + std::to_string(i + 1)};
    return s;
}

std::filesystem::path temp_dir() {
    auto d = std::filesystem::temp_directory_path() / "snplss_geno_test";
    std::filesystem::create_directories(d);
    return d;
}

// Write a one-variant .bed/.bim/.fam trio whose payload is the given bytes.
void write_plink_trio(const std::filesystem::path& dir, const std::string& stem,
                      std::size_t n_samples, const std::vector<std::uint8_t>& payload,
                      std::uint8_t magic1 = 0x6C, std::uint8_t magic2 = 0x1B,
                      std::uint8_t mode = 0x01) {
    {
        std::ofstream bed(dir / (stem + ".bed"), std::ios::binary);
        const std::uint8_t header[3] = {magic1, magic2, mode};
        bed.write(reinterpret_cast<const char*>(header), 3);
        bed.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size()));
    }
    {
        std::ofstream bim(dir / (stem + ".bim"));
        bim << "1\trs1\t0\t100\tA\tG\n";
    }
    {
        std::ofstream fam(dir / (stem + ".fam"));
        for (std::size_t i = 0; i < n_samples; ++i)
            fam << "F" << i + 1 << "\tI" << i + 1 << "\t0\t0\t0\t-9\n";
    }
}

GenotypeMatrix load_trio(const std::filesystem::path& dir, const std::string& stem) {
    return GenotypeMatrix::load_plink((dir / (stem + ".bed")).string(),
                                      (dir / (stem + ".bim")).string(),
                                      (dir / (stem + ".fam")).string());
}

// Brute-force Pearson correlation against the mean-imputed column.
double naive_column_corr(const GenotypeMatrix& g, std::size_t j,
                         const std::vector<double>& target) {
    std::vector<double> col = g.dosage_column(j, Imputation::mean);
    return snplss::pearson(col, target);
}

GenotypeMatrix random_matrix(std::size_t n, std::size_t p, unsigned seed,
                             double missing_rate = 0.1) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> dos(0, 2);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::int8_t> d(n * p);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < n; ++i)
            d[j * n + i] = unif(rng) < missing_rate ? std::int8_t{-1}
                                                    : static_cast<std::int8_t>(dos(rng));
    // keep at least one non-missing, non-constant entry pattern per column
    for (std::size_t j = 0; j < p; ++j) {
        d[j * n + 0] = 0;
        d[j * n + 1] = 2;
    }
    return GenotypeMatrix::from_dosages(make_variants(p), make_samples(n), d);
}

}  // namespace

TEST_CASE("bed byte decoding matches a reference decoder") {
    const auto dir = temp_dir();

    SECTION("byte 0x00 decodes to four dosage-2 calls") {
        write_plink_trio(dir, "b00", 4, {0x00});
        const auto g = load_trio(dir, "b00");
        for (std::size_t i = 0; i < 4; ++i) REQUIRE(g.dosage(0, i) == 2.0);
    }
    SECTION("byte 0x55 decodes to four missing calls") {
        write_plink_trio(dir, "b55", 4, {0x55});
        const auto g = load_trio(dir, "b55");
        for (std::size_t i = 0; i < 4; ++i) REQUIRE(std::isnan(g.dosage(0, i)));
    }
    SECTION("byte 0xFF decodes to four dosage-0 calls") {
        write_plink_trio(dir, "bff", 4, {0xFF});
        const auto g = load_trio(dir, "bff");
        for (std::size_t i = 0; i < 4; ++i) REQUIRE(g.dosage(0, i) == 0.0);
    }
    SECTION("mixed byte, low-order bit pair first") {
        // 0x1B = 00 01 10 11: sample0 <- 11 -> 0, sample1 <- 10 -> 1,
        // sample2 <- 01 -> missing, sample3 <- 00 -> 2
        write_plink_trio(dir, "b1b", 4, {0x1B});
        const auto g = load_trio(dir, "b1b");
        REQUIRE(g.dosage(0, 0) == 0.0);
        REQUIRE(g.dosage(0, 1) == 1.0);
        REQUIRE(std::isnan(g.dosage(0, 2)));
        REQUIRE(g.dosage(0, 3) == 2.0);
    }
}

TEST_CASE("committed 50x20 fixture matches the reference dosage table") {
    const std::string fx = SNPLSS_FIXTURE_DIR;
    const auto g = GenotypeMatrix::load_plink(fx + "/ref50x20.bed", fx + "/ref50x20.bim",
                                              fx + "/ref50x20.fam");
    REQUIRE(g.n() == 50);
    REQUIRE(g.p() == 20);
    REQUIRE(g.variants()[0].variant_id == "rs1");
    REQUIRE(g.samples()[49].individual_id == "I50");

    std::ifstream ref(fx + "/ref50x20.dosages.tsv");
    REQUIRE(ref.good());
    std::string line;
    for (std::size_t j = 0; j < 20; ++j) {
        REQUIRE(std::getline(ref, line));
        std::istringstream ss(line);
        std::string tok;
        for (std::size_t i = 0; i < 50; ++i) {
            ss >> tok;
            const double d = g.dosage(j, i);
            if (tok == "NA") {
                REQUIRE(std::isnan(d));
            } else {
                REQUIRE(d == std::stod(tok));
            }
        }
    }
}

TEST_CASE("plink loader rejects malformed files") {
    const auto dir = temp_dir();
    write_plink_trio(dir, "badmagic", 4, {0x00}, 0x6C, 0x1C);
    REQUIRE_THROWS_AS(load_trio(dir, "badmagic"), snplss::FormatError);

    write_plink_trio(dir, "badmode", 4, {0x00}, 0x6C, 0x1B, 0x00);
    REQUIRE_THROWS_AS(load_trio(dir, "badmode"), snplss::FormatError);

    write_plink_trio(dir, "badsize", 4, {0x00, 0x00});  // one variant needs 1 byte
    REQUIRE_THROWS_AS(load_trio(dir, "badsize"), snplss::FormatError);

    // duplicate variant id
    write_plink_trio(dir, "dupid", 4, {0x00, 0x00});
    {
        std::ofstream bim(dir / "dupid.bim");
        bim << "1\trs1\t0\t100\tA\tG\n1\trs1\t0\t200\tA\tG\n";
    }
    REQUIRE_THROWS_AS(load_trio(dir, "dupid"), snplss::DataError);
}

TEST_CASE("mean imputation and column stats") {
    // column [0, 1, 2, missing]
    const auto g = GenotypeMatrix::from_dosages(make_variants(1), make_samples(4),
                                                {0, 1, 2, -1});
    const auto col = g.dosage_column(0, Imputation::mean);
    REQUIRE(col == std::vector<double>{0.0, 1.0, 2.0, 1.0});

    const auto& st = g.column_stats(0);
    REQUIRE(st.mean == Catch::Approx(1.0));
    REQUIRE(st.missing == 1);
    REQUIRE(st.center_ss == Catch::Approx(2.0));  // (0-1)^2 + 0 + (2-1)^2 + 0
    REQUIRE(st.sd == Catch::Approx(std::sqrt(2.0 / 3.0)));

    // identity when nothing is missing
    const auto g2 = GenotypeMatrix::from_dosages(make_variants(1), make_samples(4),
                                                 {2, 2, 2, 2});
    REQUIRE(g2.dosage_column(0, Imputation::mean) == std::vector<double>{2, 2, 2, 2});

    // no imputation preserves the missing marker
    const auto raw = g.dosage_column(0, Imputation::none);
    REQUIRE(std::isnan(raw[3]));
    REQUIRE(raw[0] == 0.0);

    // all-missing column: mean imputation cannot proceed
    const auto g3 = GenotypeMatrix::from_dosages(make_variants(1), make_samples(4),
                                                 {-1, -1, -1, -1});
    REQUIRE_THROWS_AS(g3.dosage_column(0, Imputation::mean), snplss::DataError);
}

TEST_CASE("column correlation fast path equals brute-force Pearson") {
    SECTION("self-correlation is 1, constant column gives 0") {
        const auto g = GenotypeMatrix::from_dosages(make_variants(2), make_samples(4),
                                                    {0, 1, 2, 1, /*constant*/ 1, 1, 1, 1});
        const auto col = g.dosage_column(0, Imputation::mean);
        REQUIRE(g.column_correlation(0, col) == Catch::Approx(1.0));
        REQUIRE(g.column_correlation(1, col) == 0.0);
    }
    SECTION("random 6x3 matrix matches the naive two-pass formula") {
        const auto g = random_matrix(6, 3, 42);
        std::mt19937 rng(7);
        std::normal_distribution<double> gauss;
        std::vector<double> target(6);
        for (auto& t : target) t = gauss(rng);
        for (std::size_t j = 0; j < 3; ++j)
            REQUIRE(g.column_correlation(j, target) ==
                    Catch::Approx(naive_column_corr(g, j, target)).margin(1e-12));
    }
    SECTION("larger random matrices with missing data") {
        for (unsigned seed : {1u, 2u, 3u}) {
            const auto g = random_matrix(37, 11, seed, 0.2);
            std::mt19937 rng(seed + 100);
            std::normal_distribution<double> gauss;
            std::vector<double> target(37);
            for (auto& t : target) t = gauss(rng);
            for (std::size_t j = 0; j < g.p(); ++j)
                REQUIRE(g.column_correlation(j, target) ==
                        Catch::Approx(naive_column_corr(g, j, target)).margin(1e-12));
        }
    }
    SECTION("correlation is invariant to affine shifts of the target") {
        const auto g = random_matrix(25, 4, 9);
        std::vector<double> target(25), shifted(25);
        std::mt19937 rng(11);
        std::normal_distribution<double> gauss;
        for (std::size_t i = 0; i < 25; ++i) {
            target[i] = gauss(rng);
            shifted[i] = 3.0 * target[i] - 7.5;
        }
        for (std::size_t j = 0; j < 4; ++j)
            REQUIRE(g.column_correlation(j, target) ==
                    Catch::Approx(g.column_correlation(j, shifted)).margin(1e-12));
    }
}

TEST_CASE("text format round trips") {
    const auto dir = temp_dir();
    SECTION("3x2 matrix with one missing value") {
        const auto g = GenotypeMatrix::from_dosages(make_variants(2), make_samples(3),
                                                    {0, 1, -1, 2, 2, 0});
        const auto path = (dir / "rt.tsv").string();
        g.write_text(path);
        const auto h = GenotypeMatrix::load_text(path);
        REQUIRE(h.n() == 3);
        REQUIRE(h.p() == 2);
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t i = 0; i < 3; ++i) REQUIRE(h.code(j, i) == g.code(j, i));
        REQUIRE(h.variants()[1].variant_id == "v2");
        REQUIRE(h.samples()[2].family_id == "F3");
    }
    SECTION("random matrices round trip exactly") {
        for (unsigned seed : {5u, 6u}) {
            const auto g = random_matrix(19, 7, seed, 0.15);
            const auto path = (dir / ("rt" + std::to_string(seed) + ".tsv")).string();
            g.write_text(path);
            const auto h = GenotypeMatrix::load_text(path);
            for (std::size_t j = 0; j < g.p(); ++j)
                for (std::size_t i = 0; i < g.n(); ++i) REQUIRE(h.code(j, i) == g.code(j, i));
        }
    }
    SECTION("error paths") {
        const auto empty = (dir / "empty.tsv").string();
        std::ofstream(empty).close();
        REQUIRE_THROWS_AS(GenotypeMatrix::load_text(empty), snplss::FormatError);

        const auto bad = (dir / "bad.tsv").string();
        {
            std::ofstream out(bad);
            out << "FID\tIID\tv1\nF1\tI1\t3\n";  // dosage out of range
        }
        REQUIRE_THROWS_AS(GenotypeMatrix::load_text(bad), snplss::FormatError);

        const auto ragged = (dir / "ragged.tsv").string();
        {
            std::ofstream out(ragged);
            out << "FID\tIID\tv1\tv2\nF1\tI1\t1\n";
        }
        REQUIRE_THROWS_AS(GenotypeMatrix::load_text(ragged), snplss::FormatError);
    }
}

TEST_CASE("variant filtering and subsetting") {
    // v1 fine; v2 mostly missing; v3 rare (maf below threshold)
    const auto g = GenotypeMatrix::from_dosages(
        make_variants(3), make_samples(8),
        {0, 1, 2, 1, 0, 1, 2, 1, -1, -1, -1, -1, -1, -1, -1, 1, 0, 0, 0, 0, 0, 0, 0, 1});
    const auto f = g.filter_variants(0.5, 0.10);
    REQUIRE(f.p() == 1);
    REQUIRE(f.variants()[0].variant_id == "v1");

    const auto sub = g.subset_samples({0, 2, 4});
    REQUIRE(sub.n() == 3);
    REQUIRE(sub.dosage(0, 1) == 2.0);
    REQUIRE(sub.samples()[1].individual_id == "I3");

    const auto subv = g.subset_variants({2, 0});
    REQUIRE(subv.p() == 2);
    REQUIRE(subv.variants()[0].variant_id == "v3");
    REQUIRE(subv.dosage(1, 2) == g.dosage(0, 2));

    REQUIRE(g.has_variant("v2"));
    REQUIRE_FALSE(g.has_variant("nope"));
    REQUIRE(g.column_index("v3") == 2);
    REQUIRE_THROWS_AS(g.column_index("nope"), snplss::DataError);
}

TEST_CASE("column stats are identical across copies and repeated access") {
    const auto g = random_matrix(30, 5, 21);
    const auto copy = g;
    for (std::size_t j = 0; j < 5; ++j) {
        REQUIRE(g.column_stats(j).mean == copy.column_stats(j).mean);
        REQUIRE(g.column_stats(j).center_ss == copy.column_stats(j).center_ss);
    }
}
