#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "snplss/common.hpp"

namespace snplss {

struct VariantMeta {
    std::string chromosome;
    std::string variant_id;
    long long position = 0;  // base pairs
    std::string allele1;
    std::string allele2;
};

struct SampleMeta {
    std::string family_id;
    std::string individual_id;
};

enum class Imputation { none, mean };

struct ColStats {
    double mean = 0.0;     // over non-missing entries
    double sd = 0.0;       // sample SD (n-1) of the mean-imputed column
    double center_ss = 0.0;  // centered sum of squares of the imputed column
    std::size_t missing = 0;
};

// n x p dosage matrix in variant-major 2-bit packed storage (the .bed code
// layout: 00 -> dosage 2 of allele1, 10 -> 1, 11 -> 0, 01 -> missing).
// Immutable after construction; column statistics are cached on first use.
class GenotypeMatrix {
public:
    static constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

    GenotypeMatrix() = default;

    // dosages: variant-major, n*p entries, -1 for missing.
    static GenotypeMatrix from_dosages(std::vector<VariantMeta> variants,
                                       std::vector<SampleMeta> samples,
                                       const std::vector<std::int8_t>& dosages) {
        GenotypeMatrix m;
        m.init_meta(std::move(variants), std::move(samples));
        if (dosages.size() != m.n_ * m.p_)
            throw DataError("from_dosages: dosage length mismatch");
        m.packed_.assign(m.bytes_per_variant_ * m.p_, 0);
        for (std::size_t j = 0; j < m.p_; ++j)
            for (std::size_t i = 0; i < m.n_; ++i) {
                const std::int8_t d = dosages[j * m.n_ + i];
                std::uint8_t code;
                switch (d) {
                    case 0: code = 3; break;
                    case 1: code = 2; break;
                    case 2: code = 0; break;
                    case -1: code = 1; break;
                    default: throw DataError("from_dosages: dosage out of range");
                }
                m.set_code(j, i, code);
            }
        return m;
    }

    std::size_t n() const { return n_; }
    std::size_t p() const { return p_; }
    const std::vector<VariantMeta>& variants() const { return variants_; }
    const std::vector<SampleMeta>& samples() const { return samples_; }

    // Raw 2-bit code for (variant j, sample i).
    std::uint8_t code(std::size_t j, std::size_t i) const {
        return (packed_[j * bytes_per_variant_ + i / 4] >> (2 * (i % 4))) & 3u;
    }

    // Decoded dosage; NaN for missing.
    double dosage(std::size_t j, std::size_t i) const {
        static constexpr double lut[4] = {2.0, kMissing, 1.0, 0.0};
        return lut[code(j, i)];
    }

    std::size_t column_index(const std::string& variant_id) const {
        auto it = id_index_.find(variant_id);
        if (it == id_index_.end())
            throw DataError("unknown variant id: " + variant_id);
        return it->second;
    }

    bool has_variant(const std::string& variant_id) const {
        return id_index_.count(variant_id) > 0;
    }

    const ColStats& column_stats(std::size_t j) const {
        ensure_stats();
        return cache_->stats[j];
    }

    void dosage_column(std::size_t j, Imputation imp, std::vector<double>& out) const {
        if (j >= p_) throw DataError("dosage_column: column index out of range");
        out.resize(n_);
        double fill = kMissing;
        if (imp == Imputation::mean) {
            const ColStats& s = column_stats(j);
            if (s.missing == n_)
                throw DataError("dosage_column: column " + variants_[j].variant_id +
                                " entirely missing, cannot mean-impute");
            fill = s.mean;
        }
        for (std::size_t i = 0; i < n_; ++i) {
            const double d = dosage(j, i);
            out[i] = std::isnan(d) ? fill : d;
        }
    }

    std::vector<double> dosage_column(std::size_t j, Imputation imp = Imputation::mean) const {
        std::vector<double> out;
        dosage_column(j, imp, out);
        return out;
    }

    // Pearson correlation of the mean-imputed column with a target vector.
    // Zero-variance column or target yields 0. Fast path used by screening:
    // pass the target's precomputed mean and centered sum of squares.
    double column_correlation(std::size_t j, std::span<const double> target,
                              double t_mean, double t_css) const {
        if (target.size() != n_) throw DataError("column_correlation: length mismatch");
        if (n_ < 2) throw DataError("column_correlation: need at least 2 samples");
        const ColStats& s = column_stats(j);
        if (s.missing == n_) return 0.0;
        if (s.center_ss <= 0.0 || t_css <= 0.0) return 0.0;
        // sum over samples of imputed_dosage * target
        double s2 = 0.0, s1 = 0.0, smiss = 0.0;
        const std::uint8_t* bytes = &packed_[j * bytes_per_variant_];
        for (std::size_t i = 0; i < n_; ++i) {
            const std::uint8_t c = (bytes[i / 4] >> (2 * (i % 4))) & 3u;
            const double t = target[i];
            switch (c) {
                case 0: s2 += t; break;
                case 2: s1 += t; break;
                case 1: smiss += t; break;
                default: break;
            }
        }
        const double dot = 2.0 * s2 + s1 + s.mean * smiss;
        const double cov = dot - static_cast<double>(n_) * s.mean * t_mean;
        return cov / std::sqrt(s.center_ss * t_css);
    }

    double column_correlation(std::size_t j, std::span<const double> target) const {
        if (target.size() != n_) throw DataError("column_correlation: length mismatch");
        if (n_ < 2) throw DataError("column_correlation: need at least 2 samples");
        const double tm = mean(target);
        double css = 0.0;
        for (double t : target) css += (t - tm) * (t - tm);
        return column_correlation(j, target, tm, css);
    }

    // Keep variants with genotyping rate >= min_rate and MAF >= min_maf.
    GenotypeMatrix filter_variants(double min_genotyping_rate, double min_maf) const {
        std::vector<std::size_t> keep;
        for (std::size_t j = 0; j < p_; ++j) {
            const ColStats& s = column_stats(j);
            const double rate = 1.0 - static_cast<double>(s.missing) / static_cast<double>(n_);
            if (rate < min_genotyping_rate) continue;
            if (s.missing == n_) continue;
            const double af = s.mean / 2.0;
            const double maf = std::min(af, 1.0 - af);
            if (maf < min_maf) continue;
            keep.push_back(j);
        }
        return subset_variants(keep);
    }

    GenotypeMatrix subset_variants(const std::vector<std::size_t>& cols) const {
        GenotypeMatrix m;
        std::vector<VariantMeta> vm;
        vm.reserve(cols.size());
        for (std::size_t j : cols) vm.push_back(variants_[j]);
        m.init_meta(std::move(vm), samples_);
        m.packed_.resize(m.bytes_per_variant_ * m.p_);
        for (std::size_t k = 0; k < cols.size(); ++k)
            std::copy_n(&packed_[cols[k] * bytes_per_variant_], bytes_per_variant_,
                        &m.packed_[k * m.bytes_per_variant_]);
        return m;
    }

    GenotypeMatrix subset_samples(const std::vector<std::size_t>& rows) const {
        GenotypeMatrix m;
        std::vector<SampleMeta> sm;
        sm.reserve(rows.size());
        for (std::size_t i : rows) sm.push_back(samples_[i]);
        m.init_meta(variants_, std::move(sm));
        m.packed_.assign(m.bytes_per_variant_ * m.p_, 0);
        for (std::size_t j = 0; j < p_; ++j)
            for (std::size_t k = 0; k < rows.size(); ++k)
                m.set_code(j, k, code(j, rows[k]));
        return m;
    }

    static GenotypeMatrix load_plink(const std::string& bed_path,
                                     const std::string& bim_path,
                                     const std::string& fam_path);
    static GenotypeMatrix load_text(const std::string& path);
    void write_text(const std::string& path) const;

private:
    void init_meta(std::vector<VariantMeta> variants, std::vector<SampleMeta> samples) {
        variants_ = std::move(variants);
        samples_ = std::move(samples);
        n_ = samples_.size();
        p_ = variants_.size();
        bytes_per_variant_ = (n_ + 3) / 4;
        id_index_.clear();
        id_index_.reserve(p_);
        for (std::size_t j = 0; j < p_; ++j) {
            const auto& id = variants_[j].variant_id;
            if (id.empty()) throw DataError("variant id empty at column " + std::to_string(j));
            if (!id_index_.emplace(id, j).second)
                throw DataError("duplicate variant id: " + id);
        }
    }

    void set_code(std::size_t j, std::size_t i, std::uint8_t code) {
        std::uint8_t& b = packed_[j * bytes_per_variant_ + i / 4];
        const unsigned shift = 2 * (i % 4);
        b = static_cast<std::uint8_t>((b & ~(3u << shift)) | (code << shift));
    }

    void ensure_stats() const {
        std::call_once(cache_->once, [this] {
            auto& stats_ = cache_->stats;
            stats_.resize(p_);
            for (std::size_t j = 0; j < p_; ++j) {
                std::size_t miss = 0, c2 = 0, c1 = 0;
                for (std::size_t i = 0; i < n_; ++i) {
                    switch (code(j, i)) {
                        case 0: ++c2; break;
                        case 2: ++c1; break;
                        case 1: ++miss; break;
                        default: break;
                    }
                }
                ColStats s;
                s.missing = miss;
                const std::size_t obs = n_ - miss;
                if (obs > 0) {
                    s.mean = (2.0 * c2 + c1) / static_cast<double>(obs);
                    // imputed entries sit at the mean, contributing zero
                    const std::size_t c0 = obs - c2 - c1;
                    s.center_ss = c2 * (2.0 - s.mean) * (2.0 - s.mean) +
                                  c1 * (1.0 - s.mean) * (1.0 - s.mean) +
                                  c0 * s.mean * s.mean;
                    if (n_ > 1)
                        s.sd = std::sqrt(s.center_ss / static_cast<double>(n_ - 1));
                }
                stats_[j] = s;
            }
        });
    }

    std::size_t n_ = 0, p_ = 0, bytes_per_variant_ = 0;
    std::vector<std::uint8_t> packed_;
    std::vector<VariantMeta> variants_;
    std::vector<SampleMeta> samples_;
    std::unordered_map<std::string, std::size_t> id_index_;

    // Shared between copies; safe because the matrix is immutable and the
    // computed stats are a pure function of the packed data.
    struct StatsCache {
        std::once_flag once;
        std::vector<ColStats> stats;
    };
    mutable std::shared_ptr<StatsCache> cache_ = std::make_shared<StatsCache>();
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

inline std::vector<std::string> split_tab(const std::string& line) {
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

}  // namespace detail

inline GenotypeMatrix GenotypeMatrix::load_plink(const std::string& bed_path,
                                                 const std::string& bim_path,
                                                 const std::string& fam_path) {
    std::ifstream fam(fam_path);
    if (!fam) throw FormatError("cannot open " + fam_path);
    std::vector<SampleMeta> samples;
    std::string line;
    while (std::getline(fam, line)) {
        if (line.empty()) continue;
        auto f = detail::split_ws(line);
        if (f.size() < 2) throw FormatError(fam_path + ": line with fewer than 2 columns");
        samples.push_back({f[0], f[1]});
    }

    std::ifstream bim(bim_path);
    if (!bim) throw FormatError("cannot open " + bim_path);
    std::vector<VariantMeta> variants;
    while (std::getline(bim, line)) {
        if (line.empty()) continue;
        auto f = detail::split_ws(line);
        if (f.size() < 6) throw FormatError(bim_path + ": line with fewer than 6 columns");
        VariantMeta v;
        v.chromosome = f[0];
        v.variant_id = f[1];
        v.position = std::stoll(f[3]);
        if (v.position < 0) throw FormatError(bim_path + ": negative position for " + v.variant_id);
        v.allele1 = f[4];
        v.allele2 = f[5];
        variants.push_back(std::move(v));
    }

    GenotypeMatrix m;
    m.init_meta(std::move(variants), std::move(samples));

    std::ifstream bed(bed_path, std::ios::binary);
    if (!bed) throw FormatError("cannot open " + bed_path);
    bed.seekg(0, std::ios::end);
    const std::uint64_t size = static_cast<std::uint64_t>(bed.tellg());
    bed.seekg(0);
    unsigned char header[3] = {0, 0, 0};
    bed.read(reinterpret_cast<char*>(header), 3);
    if (!bed || header[0] != 0x6C || header[1] != 0x1B)
        throw FormatError(bed_path + ": bad magic bytes " + std::to_string(header[0]) + " " +
                          std::to_string(header[1]) + " (expected 108 27)");
    if (header[2] != 0x01)
        throw FormatError(bed_path + ": unsupported mode byte " + std::to_string(header[2]) +
                          " (only variant-major mode 1 supported)");
    const std::uint64_t expected = 3ull + static_cast<std::uint64_t>(m.p_) * m.bytes_per_variant_;
    if (size != expected)
        throw FormatError(bed_path + ": truncated or oversized file, got " + std::to_string(size) +
                          " bytes, expected " + std::to_string(expected));
    m.packed_.resize(m.bytes_per_variant_ * m.p_);
    bed.read(reinterpret_cast<char*>(m.packed_.data()),
             static_cast<std::streamsize>(m.packed_.size()));
    if (!bed) throw FormatError(bed_path + ": read failure");
    return m;
}

// Text fixture format: optional "#variant <id> <chrom> <pos> <a1> <a2>" lines,
// then a tab-separated header FID IID <variant ids...>, one row per sample,
// "NA" for missing.
inline void GenotypeMatrix::write_text(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    for (const auto& v : variants_)
        out << "#variant\t" << v.variant_id << '\t' << v.chromosome << '\t' << v.position << '\t'
            << v.allele1 << '\t' << v.allele2 << '\n';
    out << "FID\tIID";
    for (const auto& v : variants_) out << '\t' << v.variant_id;
    out << '\n';
    for (std::size_t i = 0; i < n_; ++i) {
        out << samples_[i].family_id << '\t' << samples_[i].individual_id;
        for (std::size_t j = 0; j < p_; ++j) {
            const double d = dosage(j, i);
            if (std::isnan(d))
                out << "\tNA";
            else
                out << '\t' << static_cast<int>(d);
        }
        out << '\n';
    }
}

inline GenotypeMatrix GenotypeMatrix::load_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    std::unordered_map<std::string, VariantMeta> meta;
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (line.rfind("#variant\t", 0) == 0) {
            auto f = detail::split_tab(line);
            if (f.size() != 6) throw FormatError(path + ": malformed #variant line");
            VariantMeta v{f[2], f[1], std::stoll(f[3]), f[4], f[5]};
            meta[v.variant_id] = std::move(v);
            continue;
        }
        if (line.empty()) continue;
        header = detail::split_tab(line);
        break;
    }
    if (header.size() < 2 || header[0] != "FID" || header[1] != "IID")
        throw FormatError(path + ": expected header starting with FID\tIID");
    const std::size_t p = header.size() - 2;

    std::vector<VariantMeta> variants;
    variants.reserve(p);
    for (std::size_t j = 0; j < p; ++j) {
        const std::string& id = header[j + 2];
        auto it = meta.find(id);
        if (it != meta.end()) {
            variants.push_back(it->second);
        } else {
            variants.push_back({"1", id, static_cast<long long>(j + 1), "A", "B"});
        }
    }

    std::vector<SampleMeta> samples;
    std::vector<std::int8_t> rows;  // sample-major while reading
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = detail::split_tab(line);
        if (f.size() != p + 2)
            throw FormatError(path + ": ragged row for sample " +
                              (f.size() >= 2 ? f[1] : std::string("?")) + ", got " +
                              std::to_string(f.size()) + " fields, expected " +
                              std::to_string(p + 2));
        samples.push_back({f[0], f[1]});
        for (std::size_t j = 0; j < p; ++j) {
            const std::string& tok = f[j + 2];
            if (tok == "NA") {
                rows.push_back(-1);
            } else if (tok == "0" || tok == "1" || tok == "2") {
                rows.push_back(static_cast<std::int8_t>(tok[0] - '0'));
            } else {
                throw FormatError(path + ": invalid dosage '" + tok + "' (expected 0, 1, 2 or NA)");
            }
        }
    }
    if (samples.empty()) throw FormatError(path + ": no sample rows");

    // transpose to variant-major
    const std::size_t n = samples.size();
    std::vector<std::int8_t> dosages(n * p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) dosages[j * n + i] = rows[i * p + j];
    return from_dosages(std::move(variants), std::move(samples), dosages);
}

}  // namespace snplss
