#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "ratekit/errors.hpp"

namespace ratekit {

/// One policy: exposure share of a year, claim status, and the categorical
/// risk-factor levels, aligned with the factor order of the loading schema.
struct PolicyRecord {
    double exposure = 1.0;
    bool claim_occurred = false;
    long claim_count = 0;
    double aggregate_loss = 0.0;
    std::vector<std::string> factor_levels;
};

/// Column mapping for delimiter-separated input. An empty claim_count name
/// means the file has no count column; the count is then inferred from the
/// claim indicator.
struct CsvSchema {
    std::string exposure = "exposure";
    std::string claim_indicator = "clm";
    std::string claim_count = "numclaims";
    std::string aggregate_loss = "claimcst0";
    std::vector<std::string> factors;
    char delimiter = ',';
};

struct LoadResult {
    std::vector<PolicyRecord> records;
    std::vector<std::string> factor_names;
    struct Reject {
        std::size_t row;  // 1-based data row number (header excluded)
        std::string reason;
    };
    std::vector<Reject> rejects;
};

struct FactorLevels {
    std::string name;
    std::vector<std::string> levels;
    std::string reference;
};

/// Ordered list of factors with their level sets and reference levels.
struct FactorSpec {
    std::vector<FactorLevels> factors;

    void validate() const {
        if (factors.empty()) throw ValidationError("factor spec is empty");
        for (const auto& f : factors) {
            if (f.levels.empty())
                throw ValidationError("factor '" + f.name + "' has no levels");
            for (std::size_t i = 0; i < f.levels.size(); ++i)
                for (std::size_t j = i + 1; j < f.levels.size(); ++j)
                    if (f.levels[i] == f.levels[j])
                        throw ValidationError("factor '" + f.name +
                                              "' repeats level '" + f.levels[i] + "'");
            if (std::find(f.levels.begin(), f.levels.end(), f.reference) == f.levels.end())
                throw ValidationError("factor '" + f.name + "': reference level '" +
                                      f.reference + "' not among its levels");
        }
    }

    /// 1 + sum over factors of (levels - 1).
    std::size_t column_count() const {
        std::size_t n = 1;
        for (const auto& f : factors) n += f.levels.size() - 1;
        return n;
    }
};

/// Dummy-coded covariates: intercept column of ones, then one indicator per
/// non-reference level, factors and levels in spec order.
struct DesignMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> column_names;
    FactorSpec spec;

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

struct TariffClass {
    std::vector<std::string> levels;
    std::string label;
    Eigen::RowVectorXd design_row;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') { field += '"'; ++i; }
                else quoted = false;
            } else field += c;
        } else if (c == '"') {
            quoted = true;
        } else if (c == delim) {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& s, const char* what, std::size_t row) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(std::string("row ") + std::to_string(row) + ": cannot parse " +
                         what + " from '" + s + "'");
    }
}

} // namespace detail

/// Reads delimiter-separated policies. Parse and schema problems throw;
/// exposure outside (0,1] throws a validation error naming the row; rows
/// breaking the claim/loss consistency invariant are excluded and reported
/// in the result's reject list.
inline LoadResult load_policies(std::istream& in, const CsvSchema& schema) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("input has no header row");
    const auto header = detail::split_csv_line(line, schema.delimiter);

    auto column_of = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (detail::trim(header[i]) == name) return i;
        throw SchemaError("column '" + name + "' not found in header");
    };

    const std::size_t col_exposure = column_of(schema.exposure);
    const std::size_t col_clm = column_of(schema.claim_indicator);
    const bool has_count = !schema.claim_count.empty();
    const std::size_t col_count = has_count ? column_of(schema.claim_count) : 0;
    const std::size_t col_loss = column_of(schema.aggregate_loss);
    std::vector<std::size_t> col_factors;
    col_factors.reserve(schema.factors.size());
    for (const auto& f : schema.factors) col_factors.push_back(column_of(f));

    LoadResult result;
    result.factor_names = schema.factors;

    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line, schema.delimiter);
        if (fields.size() != header.size())
            throw ParseError("row " + std::to_string(row) + ": expected " +
                             std::to_string(header.size()) + " fields, found " +
                             std::to_string(fields.size()));

        PolicyRecord rec;
        rec.exposure = detail::parse_double(detail::trim(fields[col_exposure]), "exposure", row);
        rec.aggregate_loss =
            detail::parse_double(detail::trim(fields[col_loss]), "aggregate loss", row);
        const double clm = detail::parse_double(detail::trim(fields[col_clm]),
                                                "claim indicator", row);
        rec.claim_occurred = clm != 0.0;
        if (has_count) {
            const double cnt =
                detail::parse_double(detail::trim(fields[col_count]), "claim count", row);
            if (cnt < 0.0)
                throw ParseError("row " + std::to_string(row) + ": negative claim count");
            rec.claim_count = static_cast<long>(cnt);
        } else {
            rec.claim_count = rec.claim_occurred ? 1 : 0;
        }
        rec.factor_levels.reserve(col_factors.size());
        for (std::size_t c : col_factors) rec.factor_levels.push_back(detail::trim(fields[c]));

        if (!(rec.exposure > 0.0 && rec.exposure <= 1.0))
            throw ValidationError("row " + std::to_string(row) + ": exposure " +
                                  std::to_string(rec.exposure) + " outside (0,1]");
        if (rec.aggregate_loss < 0.0)
            throw ValidationError("row " + std::to_string(row) + ": negative aggregate loss");
        if (rec.aggregate_loss > 0.0 && !rec.claim_occurred) {
            result.rejects.push_back({row, "positive loss but no claim recorded"});
            continue;
        }
        if (!rec.claim_occurred && rec.claim_count > 0) {
            result.rejects.push_back({row, "claim count positive but indicator zero"});
            continue;
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

/// Distinct levels of one factor column, sorted, for building a spec from data.
inline std::vector<std::string> infer_levels(const std::vector<PolicyRecord>& records,
                                             std::size_t factor_index) {
    std::vector<std::string> levels;
    for (const auto& r : records) {
        const auto& lv = r.factor_levels.at(factor_index);
        if (std::find(levels.begin(), levels.end(), lv) == levels.end()) levels.push_back(lv);
    }
    std::sort(levels.begin(), levels.end());
    return levels;
}

/// Design row for one level combination at the spec's column layout.
inline Eigen::RowVectorXd encode_row(const FactorSpec& spec,
                                     const std::vector<std::string>& levels) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(
        static_cast<Eigen::Index>(spec.column_count()));
    row(0) = 1.0;
    Eigen::Index col = 1;
    for (std::size_t f = 0; f < spec.factors.size(); ++f) {
        const auto& fac = spec.factors[f];
        const std::string& lv = levels.at(f);
        bool seen = false;
        for (const auto& cand : fac.levels) {
            if (cand == fac.reference) { if (cand == lv) seen = true; continue; }
            if (cand == lv) { row(col) = 1.0; seen = true; }
            ++col;
        }
        if (!seen)
            throw EncodingError("factor '" + fac.name + "': unseen level '" + lv + "'");
    }
    return row;
}

inline DesignMatrix encode_design(const std::vector<PolicyRecord>& records,
                                  const FactorSpec& spec) {
    spec.validate();
    DesignMatrix dm;
    dm.spec = spec;
    dm.column_names.push_back("(Intercept)");
    for (const auto& f : spec.factors)
        for (const auto& lv : f.levels)
            if (lv != f.reference) dm.column_names.push_back(f.name + "_" + lv);

    dm.values.resize(static_cast<Eigen::Index>(records.size()),
                     static_cast<Eigen::Index>(spec.column_count()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            dm.values.row(static_cast<Eigen::Index>(i)) =
                encode_row(spec, records[i].factor_levels);
        } catch (const EncodingError& e) {
            throw EncodingError(std::string(e.what()) + " (row " + std::to_string(i + 1) + ")");
        }
    }
    return dm;
}

/// Inverse of encode_row: recovers the level labels from an indicator row.
inline std::vector<std::string> decode_design_row(const FactorSpec& spec,
                                                  const Eigen::RowVectorXd& row) {
    std::vector<std::string> levels;
    Eigen::Index col = 1;
    for (const auto& fac : spec.factors) {
        std::string chosen = fac.reference;
        for (const auto& cand : fac.levels) {
            if (cand == fac.reference) continue;
            if (row(col) != 0.0) chosen = cand;
            ++col;
        }
        levels.push_back(chosen);
    }
    return levels;
}

/// Row subset of a design matrix, preserving layout metadata.
inline DesignMatrix subset_design(const DesignMatrix& dm, const std::vector<std::size_t>& idx) {
    DesignMatrix out;
    out.column_names = dm.column_names;
    out.spec = dm.spec;
    out.values.resize(static_cast<Eigen::Index>(idx.size()), dm.values.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        out.values.row(static_cast<Eigen::Index>(i)) =
            dm.values.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

/// Cartesian product of factor levels in spec order, last factor fastest.
/// Labels concatenate the level labels ("Class_" + joined levels), and each
/// class carries its exposure-one design row.
inline std::vector<TariffClass> enumerate_tariff_classes(const FactorSpec& spec) {
    spec.validate();
    std::vector<TariffClass> classes;
    std::vector<std::size_t> idx(spec.factors.size(), 0);
    for (;;) {
        TariffClass tc;
        std::string joined;
        for (std::size_t f = 0; f < spec.factors.size(); ++f) {
            tc.levels.push_back(spec.factors[f].levels[idx[f]]);
            joined += spec.factors[f].levels[idx[f]];
        }
        tc.label = "Class_" + joined;
        tc.design_row = encode_row(spec, tc.levels);
        classes.push_back(std::move(tc));

        std::size_t f = spec.factors.size();
        for (;;) {
            --f;
            if (++idx[f] < spec.factors[f].levels.size()) break;
            idx[f] = 0;
            if (f == 0) return classes;
        }
    }
}

} // namespace ratekit
