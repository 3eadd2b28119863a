#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "persreg/error.hpp"

namespace persreg {

enum class ColumnKind { continuous, categorical };

inline const char* to_string(ColumnKind kind) {
    return kind == ColumnKind::continuous ? "continuous" : "categorical";
}

inline ColumnKind column_kind_from_string(const std::string& s) {
    if (s == "continuous") return ColumnKind::continuous;
    if (s == "categorical") return ColumnKind::categorical;
    throw ValidationError("unknown covariate kind '" + s + "' (expected continuous|categorical)");
}

/// A single covariate value: a real for continuous columns, an opaque label otherwise.
using CovariateValue = std::variant<double, std::string>;
using CovariateRow = std::vector<CovariateValue>;

/// One column of the covariate table. Only the storage matching `kind` is populated.
struct CovariateColumn {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
    std::vector<double> numbers;
    std::vector<std::string> labels;

    std::size_t size() const {
        return kind == ColumnKind::continuous ? numbers.size() : labels.size();
    }

    CovariateValue at(std::size_t row) const {
        if (kind == ColumnKind::continuous) return numbers.at(row);
        return labels.at(row);
    }

    static CovariateColumn continuous(std::string name, std::vector<double> values) {
        return {std::move(name), ColumnKind::continuous, std::move(values), {}};
    }
    static CovariateColumn categorical(std::string name, std::vector<std::string> values) {
        return {std::move(name), ColumnKind::categorical, {}, std::move(values)};
    }

    bool operator==(const CovariateColumn&) const = default;
};

/// Column-major covariate table U (n rows, k columns).
class CovariateTable {
public:
    CovariateTable() = default;
    explicit CovariateTable(std::vector<CovariateColumn> columns) : columns_(std::move(columns)) {
        for (const auto& c : columns_) {
            detail::require(c.size() == rows(), "covariate column '" + c.name + "' has " +
                                                    std::to_string(c.size()) + " rows, expected " +
                                                    std::to_string(rows()));
        }
    }

    std::size_t rows() const { return columns_.empty() ? 0 : columns_.front().size(); }
    std::size_t cols() const { return columns_.size(); }

    const CovariateColumn& column(std::size_t l) const { return columns_.at(l); }
    const std::vector<CovariateColumn>& columns() const { return columns_; }

    CovariateRow row(std::size_t i) const {
        CovariateRow out;
        out.reserve(cols());
        for (const auto& c : columns_) out.push_back(c.at(i));
        return out;
    }

    std::vector<ColumnKind> schema() const {
        std::vector<ColumnKind> kinds;
        for (const auto& c : columns_) kinds.push_back(c.kind);
        return kinds;
    }

    /// Rows selected by index, in the given order.
    CovariateTable select_rows(const std::vector<Eigen::Index>& ids) const {
        std::vector<CovariateColumn> out;
        for (const auto& c : columns_) {
            CovariateColumn sub{c.name, c.kind, {}, {}};
            for (auto i : ids) {
                if (c.kind == ColumnKind::continuous)
                    sub.numbers.push_back(c.numbers.at(static_cast<std::size_t>(i)));
                else
                    sub.labels.push_back(c.labels.at(static_cast<std::size_t>(i)));
            }
            out.push_back(std::move(sub));
        }
        return CovariateTable(std::move(out));
    }

    bool operator==(const CovariateTable&) const = default;

private:
    std::vector<CovariateColumn> columns_;
};

/// Nonnegative weights phi of the learned covariate distance.
struct MetricWeights {
    Eigen::VectorXd phi;

    static MetricWeights ones(Eigen::Index k) { return {Eigen::VectorXd::Ones(k)}; }
    Eigen::Index size() const { return phi.size(); }
};

} // namespace persreg
