#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "persreg/core_model.hpp"
#include "persreg/covariates.hpp"
#include "persreg/error.hpp"

namespace persreg {

/// Per-covariate base metric d_l.
struct FeatureMetric {
    enum class Kind { absolute_difference, discrete };
    Kind kind = Kind::absolute_difference;

    static FeatureMetric for_column(ColumnKind c) {
        return {c == ColumnKind::continuous ? Kind::absolute_difference : Kind::discrete};
    }
    bool operator==(const FeatureMetric&) const = default;
};

inline std::vector<FeatureMetric> metrics_for(const std::vector<ColumnKind>& schema) {
    std::vector<FeatureMetric> out;
    out.reserve(schema.size());
    for (auto c : schema) out.push_back(FeatureMetric::for_column(c));
    return out;
}

inline double feature_distance(const FeatureMetric& m, const CovariateValue& a, const CovariateValue& b) {
    if (m.kind == FeatureMetric::Kind::absolute_difference) {
        const double* x = std::get_if<double>(&a);
        const double* y = std::get_if<double>(&b);
        if (!x || !y) throw ValidationError("absolute_difference metric applied to a categorical value");
        return std::abs(*x - *y);
    }
    const std::string* x = std::get_if<std::string>(&a);
    const std::string* y = std::get_if<std::string>(&b);
    if (!x || !y) throw ValidationError("discrete metric applied to a continuous value");
    return *x == *y ? 0.0 : 1.0;
}

/// Per-covariate pairwise distances d_l(U^(i)_l, U^(j)_l), computed once per fit.
class DistanceCache {
public:
    DistanceCache() = default;
    explicit DistanceCache(std::vector<Eigen::MatrixXd> per_feature) : d_(std::move(per_feature)) {}

    Index features() const { return static_cast<Index>(d_.size()); }
    Index samples() const { return d_.empty() ? 0 : d_.front().rows(); }

    double operator()(Index l, Index i, Index j) const { return d_[static_cast<std::size_t>(l)](i, j); }
    const Eigen::MatrixXd& feature(Index l) const { return d_.at(static_cast<std::size_t>(l)); }

private:
    std::vector<Eigen::MatrixXd> d_;
};

namespace detail {
inline double rho_unchecked(const MetricWeights& w, const DistanceCache& cache, Index i, Index j) {
    double acc = 0.0;
    for (Index l = 0; l < w.size(); ++l) acc += w.phi(l) * cache(l, i, j);
    return acc;
}
} // namespace detail

inline DistanceCache precompute_cache(const CovariateTable& U, const std::vector<FeatureMetric>& metrics) {
    detail::require(metrics.size() == U.cols(), "metric schema has " + std::to_string(metrics.size()) +
                                                    " entries for " + std::to_string(U.cols()) +
                                                    " covariate columns");
    const auto n = static_cast<Index>(U.rows());
    std::vector<Eigen::MatrixXd> out;
    out.reserve(U.cols());
    for (std::size_t l = 0; l < U.cols(); ++l) {
        const auto& col = U.column(l);
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
        if (metrics[l].kind == FeatureMetric::Kind::absolute_difference) {
            detail::require(col.kind == ColumnKind::continuous,
                            "column " + std::to_string(l) + " is categorical but uses absolute_difference");
            for (Index i = 0; i < n; ++i) {
                if (!std::isfinite(col.numbers[static_cast<std::size_t>(i)])) {
                    throw ValidationError("covariate '" + col.name + "' is not finite at row " +
                                          std::to_string(i));
                }
            }
            for (Index i = 0; i < n; ++i) {
                for (Index j = i + 1; j < n; ++j) {
                    const double v = std::abs(col.numbers[static_cast<std::size_t>(i)] -
                                              col.numbers[static_cast<std::size_t>(j)]);
                    d(i, j) = v;
                    d(j, i) = v;
                }
            }
        } else {
            detail::require(col.kind == ColumnKind::categorical,
                            "column " + std::to_string(l) + " is continuous but uses the discrete metric");
            for (Index i = 0; i < n; ++i) {
                for (Index j = i + 1; j < n; ++j) {
                    const double v = col.labels[static_cast<std::size_t>(i)] ==
                                             col.labels[static_cast<std::size_t>(j)]
                                         ? 0.0
                                         : 1.0;
                    d(i, j) = v;
                    d(j, i) = v;
                }
            }
        }
        out.push_back(std::move(d));
    }
    return DistanceCache(std::move(out));
}

inline DistanceCache precompute_cache(const Dataset& data, const std::vector<FeatureMetric>& metrics) {
    return precompute_cache(data.U, metrics);
}

/// rho_phi between training samples i and j, read from the cache.
inline double rho_phi(const MetricWeights& w, const DistanceCache& cache, Index i, Index j) {
    detail::require(w.size() == cache.features(), "phi length does not match the number of covariates");
    return detail::rho_unchecked(w, cache, i, j);
}

/// rho_phi between two raw covariate rows.
inline double rho_phi(const MetricWeights& w, const std::vector<FeatureMetric>& metrics,
                      const CovariateRow& u, const CovariateRow& v) {
    detail::require(static_cast<std::size_t>(w.size()) == metrics.size() && u.size() == metrics.size() &&
                        v.size() == metrics.size(),
                    "rho_phi: phi, metric schema and covariate rows must have equal length");
    double acc = 0.0;
    for (std::size_t l = 0; l < metrics.size(); ++l)
        acc += w.phi(static_cast<Index>(l)) * feature_distance(metrics[l], u[l], v[l]);
    return acc;
}

/// rho_phi between training row i of a table and an external row u.
inline double rho_phi(const MetricWeights& w, const CovariateTable& table, Index i, const CovariateRow& u) {
    detail::require(static_cast<std::size_t>(w.size()) == table.cols() && u.size() == table.cols(),
                    "rho_phi: phi, table and covariate row must have equal width");
    double acc = 0.0;
    for (std::size_t l = 0; l < table.cols(); ++l) {
        const auto& col = table.column(l);
        const auto row = static_cast<std::size_t>(i);
        double d;
        if (col.kind == ColumnKind::continuous) {
            const double* x = std::get_if<double>(&u[l]);
            if (!x) throw ValidationError("covariate " + std::to_string(l) + " must be continuous");
            d = std::abs(col.numbers[row] - *x);
        } else {
            const std::string* x = std::get_if<std::string>(&u[l]);
            if (!x) throw ValidationError("covariate " + std::to_string(l) + " must be categorical");
            d = col.labels[row] == *x ? 0.0 : 1.0;
        }
        acc += w.phi(static_cast<Index>(l)) * d;
    }
    return acc;
}

/// ||Z^(i) - Z^(j)||^2, accumulated over latent coordinates in order.
inline double squared_distance(const Eigen::MatrixXd& Z, Index i, Index j) {
    double acc = 0.0;
    for (Index d = 0; d < Z.rows(); ++d) {
        const double diff = Z(d, i) - Z(d, j);
        acc += diff * diff;
    }
    return acc;
}

/// Neighbor ball B_r(i) for every sample, each sorted ascending.
using NeighborSets = std::vector<std::vector<Index>>;

namespace detail {

inline NeighborSets neighbor_sets_scan(const Eigen::MatrixXd& Z, double r) {
    const Index n = Z.cols();
    NeighborSets out(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            if (squared_distance(Z, i, j) < r) {
                out[static_cast<std::size_t>(i)].push_back(j);
                out[static_cast<std::size_t>(j)].push_back(i);
            }
        }
    }
    return out;
}

} // namespace detail

/// Uniform-grid index over the columns of Z with cell side slightly above sqrt(r),
/// so every pair closer than sqrt(r) lies in the same or an adjacent cell.
class LoadingGrid {
public:
    static constexpr Index max_dims = 8;
    static constexpr Index min_points = 64;

    LoadingGrid(const Eigen::MatrixXd& Z, double r)
        : Z_(Z), r_(r), side_(std::sqrt(r) * (1.0 + 1e-9)), origin_(Z.rowwise().minCoeff()) {
        const Eigen::VectorXd span = Z.rowwise().maxCoeff() - origin_;
        usable_ = Z.rows() <= max_dims && Z.cols() >= min_points && side_ > 0.0 && std::isfinite(side_) &&
                  (span.array() / side_ < 1e12).all();
        if (!usable_) return;
        cells_.reserve(static_cast<std::size_t>(Z.cols()));
        for (Index i = 0; i < Z.cols(); ++i) cells_[cell_of(i)].push_back(i);
    }

    bool usable() const { return usable_; }

    /// Indices j != i with ||Z^(i) - Z^(j)||^2 < r, ascending.
    std::vector<Index> query(Index i) const {
        std::vector<Index> hits;
        const Key home = cell_of(i);
        const auto dims = static_cast<std::size_t>(Z_.rows());
        std::array<int, max_dims> offset;
        offset.fill(-1);
        Key probe{};
        while (true) {
            for (std::size_t d = 0; d < dims; ++d) probe[d] = home[d] + offset[d];
            if (auto it = cells_.find(probe); it != cells_.end()) {
                for (Index j : it->second) {
                    if (j != i && squared_distance(Z_, i, j) < r_) hits.push_back(j);
                }
            }
            std::size_t d = 0;
            while (d < dims && offset[d] == 1) offset[d++] = -1;
            if (d == dims) break;
            ++offset[d];
        }
        std::sort(hits.begin(), hits.end());
        return hits;
    }

private:
    using Key = std::array<std::int64_t, max_dims>;

    struct KeyHash {
        std::size_t operator()(const Key& key) const noexcept {
            std::uint64_t h = 1469598103934665603ull;
            for (auto v : key) h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ull;
            return static_cast<std::size_t>(h);
        }
    };

    Key cell_of(Index i) const {
        Key key{};
        for (Index d = 0; d < Z_.rows(); ++d)
            key[static_cast<std::size_t>(d)] = static_cast<std::int64_t>(std::floor((Z_(d, i) - origin_(d)) / side_));
        return key;
    }

    const Eigen::MatrixXd& Z_;
    double r_;
    double side_;
    Eigen::VectorXd origin_;
    bool usable_ = false;
    std::unordered_map<Key, std::vector<Index>, KeyHash> cells_;
};

/// B_r(i) = { j != i : ||Z^(i) - Z^(j)||^2 < r } for every i.
inline NeighborSets neighbor_sets(const Eigen::MatrixXd& Z, double r) {
    if (!(r > 0.0)) throw ValidationError("neighbor radius must be > 0");
    LoadingGrid grid(Z, r);
    if (!grid.usable()) return detail::neighbor_sets_scan(Z, r);
    NeighborSets out(static_cast<std::size_t>(Z.cols()));
    for (Index i = 0; i < Z.cols(); ++i) out[static_cast<std::size_t>(i)] = grid.query(i);
    return out;
}

inline double mean_neighbor_count(const NeighborSets& sets) {
    if (sets.empty()) return 0.0;
    std::size_t total = 0;
    for (const auto& s : sets) total += s.size();
    return static_cast<double>(total) / static_cast<double>(sets.size());
}

/// Radius giving roughly `target_avg` neighbors per sample: the m-th smallest
/// squared pairwise distance, m = ceil(target_avg * n / 2), nudged upward.
inline double auto_radius(const Eigen::MatrixXd& Z, double target_avg) {
    const Index n = Z.cols();
    if (n < 2) throw ValidationError("auto radius needs at least two samples");
    detail::require(target_avg > 0.0 && target_avg <= static_cast<double>(n - 1),
                    "target neighbor count must lie in (0, n-1]");
    std::vector<double> dists(static_cast<std::size_t>(n * (n - 1) / 2));
    const Index q = Z.rows();
    const double* base = Z.data();
    std::size_t at = 0;
    for (Index i = 0; i < n; ++i) {
        const double* zi = base + i * q;
        for (Index j = i + 1; j < n; ++j) {
            const double* zj = base + j * q;
            double acc = 0.0;
            for (Index d = 0; d < q; ++d) {
                const double diff = zi[d] - zj[d];
                acc += diff * diff;
            }
            dists[at++] = acc;
        }
    }
    auto m = static_cast<std::size_t>(std::ceil(target_avg * static_cast<double>(n) / 2.0));
    m = std::clamp<std::size_t>(m, 1, dists.size());
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(m - 1), dists.end());
    const double d = dists[m - 1];
    return d + 1e-12 * std::max(d, 1.0);
}

} // namespace persreg
