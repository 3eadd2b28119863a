#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "persreg/persreg.hpp"

namespace testing_support {

using persreg::Index;

struct Rng {
    std::mt19937_64 engine;
    explicit Rng(std::uint64_t seed) : engine(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine); }
    Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(engine); }

    Eigen::MatrixXd normal_matrix(Index r, Index c) {
        Eigen::MatrixXd m(r, c);
        for (Index j = 0; j < c; ++j)
            for (Index i = 0; i < r; ++i) m(i, j) = normal();
        return m;
    }
    Eigen::VectorXd normal_vector(Index n) { return normal_matrix(n, 1).col(0); }
    Eigen::VectorXd uniform_vector(Index n, double lo, double hi) {
        Eigen::VectorXd v(n);
        for (Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
        return v;
    }
};

/// Mixed continuous/categorical covariates; every third column is categorical.
inline persreg::CovariateTable random_covariates(Rng& rng, Index n, Index k, bool with_categorical = true) {
    std::vector<persreg::CovariateColumn> cols;
    for (Index l = 0; l < k; ++l) {
        const std::string name = "u" + std::to_string(l);
        if (with_categorical && l % 3 == 2) {
            std::vector<std::string> labels;
            for (Index i = 0; i < n; ++i) labels.push_back(std::string(1, static_cast<char>('A' + rng.integer(0, 3))));
            cols.push_back(persreg::CovariateColumn::categorical(name, labels));
        } else {
            std::vector<double> vals;
            for (Index i = 0; i < n; ++i) vals.push_back(rng.uniform(-2.0, 2.0));
            cols.push_back(persreg::CovariateColumn::continuous(name, vals));
        }
    }
    return persreg::CovariateTable(std::move(cols));
}

inline persreg::Dataset random_dataset(Rng& rng, Index n, Index p, Index k,
                                       persreg::Task task = persreg::Task::regression) {
    persreg::Dataset d;
    d.X = rng.normal_matrix(n, p);
    d.Y.resize(n);
    for (Index i = 0; i < n; ++i) d.Y(i) = task == persreg::Task::regression ? rng.normal() : double(rng.integer(0, 1));
    d.U = random_covariates(rng, n, k);
    d.task = task;
    return d;
}

/// Plain O(n^2) radius neighborhoods, written independently of the library.
inline persreg::NeighborSets brute_neighbors(const Eigen::MatrixXd& Z, double r) {
    const Index n = Z.cols();
    persreg::NeighborSets sets(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            double s = 0.0;
            for (Index d = 0; d < Z.rows(); ++d) s += (Z(d, i) - Z(d, j)) * (Z(d, i) - Z(d, j));
            if (s < r) sets[static_cast<std::size_t>(i)].push_back(j);
        }
    return sets;
}

/// Weighted covariate distance computed straight from the table.
inline double brute_rho(const Eigen::VectorXd& phi, const persreg::CovariateTable& U, Index i, Index j) {
    double acc = 0.0;
    for (std::size_t l = 0; l < U.cols(); ++l) {
        const auto& c = U.column(l);
        double d;
        if (c.kind == persreg::ColumnKind::continuous)
            d = std::abs(c.numbers[static_cast<std::size_t>(i)] - c.numbers[static_cast<std::size_t>(j)]);
        else
            d = c.labels[static_cast<std::size_t>(i)] == c.labels[static_cast<std::size_t>(j)] ? 0.0 : 1.0;
        acc += phi(static_cast<Index>(l)) * d;
    }
    return acc;
}

/// Central difference of f along every coordinate of x.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h = 1e-6) {
    Eigen::VectorXd g(x.size());
    for (Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd a = x, b = x;
        const double step = h * std::max(1.0, std::abs(x(i)));
        a(i) += step;
        b(i) -= step;
        g(i) = (f(a) - f(b)) / (2.0 * step);
    }
    return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double scale = std::max(a.norm(), b.norm());
    return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

inline Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
    return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

inline Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, Index rows, Index cols) {
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

/// A fresh, empty directory under the system temp directory.
inline std::string scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("persreg_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

} // namespace testing_support
