#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "persreg/core_model.hpp"
#include "persreg/covariates.hpp"
#include "persreg/error.hpp"

namespace persreg {

/// Generator draws: theta_j = 1{U_{c_j} > a_j} + b_j sin(U_{c_j}).
struct GeneratorParams {
    Eigen::VectorXd a;
    Eigen::VectorXd b;
    std::vector<Index> c; // 0-based covariate index per predictor
};

struct SyntheticInstance {
    Dataset dataset;
    Eigen::MatrixXd omega_true; // p x n
    GeneratorParams params;
    std::uint64_t seed = 0;
};

struct SimulationOptions {
    double noise_std = 0.1;
    /// Rescale each X row to unit l1 norm before forming Y.
    bool l1_normalize_rows = false;
};

inline double true_coefficient(double u, double a, double b) { return (u > a ? 1.0 : 0.0) + b * std::sin(u); }

inline SyntheticInstance generate(Index n, Index p, Index K, std::uint64_t seed, const SimulationOptions& opts = {}) {
    detail::require(n >= 1 && p >= 1 && K >= 1, "simulation needs n, p, K >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    std::uniform_int_distribution<Index> pick(0, K - 1);
    std::normal_distribution<double> gauss(0.0, 1.0);

    SyntheticInstance inst;
    inst.seed = seed;
    auto& gp = inst.params;
    gp.a.resize(p);
    gp.b.resize(p);
    for (Index j = 0; j < p; ++j) gp.a(j) = unit(rng);
    for (Index j = 0; j < p; ++j) gp.b(j) = unit(rng);
    for (Index j = 0; j < p; ++j) gp.c.push_back(pick(rng));

    Eigen::MatrixXd X(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) X(i, j) = sym(rng);
    Eigen::MatrixXd U(n, K);
    for (Index i = 0; i < n; ++i)
        for (Index l = 0; l < K; ++l) U(i, l) = unit(rng);
    Eigen::VectorXd noise(n);
    for (Index i = 0; i < n; ++i) noise(i) = opts.noise_std * gauss(rng);

    if (opts.l1_normalize_rows) {
        for (Index i = 0; i < n; ++i) {
            const double s = X.row(i).lpNorm<1>();
            if (s > 0.0) X.row(i) /= s;
        }
    }

    inst.omega_true.resize(p, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j)
            inst.omega_true(j, i) = true_coefficient(U(i, gp.c[static_cast<std::size_t>(j)]), gp.a(j), gp.b(j));

    Dataset& d = inst.dataset;
    d.X = X;
    d.Y.resize(n);
    for (Index i = 0; i < n; ++i) d.Y(i) = X.row(i).dot(inst.omega_true.col(i)) + noise(i);
    std::vector<CovariateColumn> cols;
    for (Index l = 0; l < K; ++l) {
        std::vector<double> v(U.col(l).data(), U.col(l).data() + n);
        cols.push_back(CovariateColumn::continuous("u" + std::to_string(l), std::move(v)));
    }
    d.U = CovariateTable(std::move(cols));
    d.task = Task::regression;
    return inst;
}

struct Split {
    std::vector<Index> train;
    std::vector<Index> test;
};

/// Seeded shuffle; the first ceil(train_fraction * n) indices train, the rest test.
/// Both parts are returned in ascending order.
inline Split train_test_split(Index n, std::uint64_t seed, double train_fraction = 0.8) {
    detail::require(n >= 1, "cannot split an empty dataset");
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dull);
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(idx[i - 1], idx[pick(rng)]);
    }
    const auto cut = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n)));
    Split s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

struct RecoveryMetrics {
    double recovery = 0.0; // Frobenius norm of omega_hat - omega_true
    double r2 = 0.0;       // squared Pearson correlation
    double mse = 0.0;
    bool r2_degenerate = false; // a constant input forced r2 = 0
};

inline double squared_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b, bool* degenerate = nullptr) {
    detail::require(a.size() == b.size() && a.size() >= 1, "correlation needs equal, nonzero lengths");
    const Eigen::ArrayXd da = a.array() - a.mean();
    const Eigen::ArrayXd db = b.array() - b.mean();
    const double saa = (da * da).sum();
    const double sbb = (db * db).sum();
    if (saa == 0.0 || sbb == 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    const double sab = (da * db).sum();
    return sab * sab / (saa * sbb);
}

inline double mean_squared_error(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    detail::require(pred.size() == truth.size() && pred.size() >= 1, "mse needs equal, nonzero lengths");
    return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

inline RecoveryMetrics evaluate_recovery(const Eigen::MatrixXd& omega_hat, const Eigen::MatrixXd& omega_true,
                                         const Eigen::VectorXd& y_pred, const Eigen::VectorXd& y_true) {
    detail::require(omega_hat.rows() == omega_true.rows() && omega_hat.cols() == omega_true.cols(),
                    "estimated and true parameter matrices differ in shape");
    RecoveryMetrics m;
    m.recovery = (omega_hat - omega_true).norm();
    m.r2 = squared_correlation(y_pred, y_true, &m.r2_degenerate);
    m.mse = mean_squared_error(y_pred, y_true);
    return m;
}

/// Area under the ROC curve via the rank-sum statistic; tied scores get average ranks.
inline double auroc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
    detail::require(scores.size() == labels.size(), "auroc: scores and labels differ in length");
    const auto n = static_cast<std::size_t>(scores.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores(static_cast<Index>(a)) < scores(static_cast<Index>(b));
    });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores(static_cast<Index>(order[j + 1])) == scores(static_cast<Index>(order[i]))) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
        i = j + 1;
    }
    double pos = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = labels(static_cast<Index>(i));
        detail::require(y == 0.0 || y == 1.0, "auroc labels must be 0 or 1");
        if (y == 1.0) {
            pos += 1.0;
            rank_sum += rank[i];
        }
    }
    const double neg = static_cast<double>(n) - pos;
    detail::require(pos > 0.0 && neg > 0.0, "auroc needs both positive and negative labels");
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

inline double accuracy(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels, double threshold = 0.5) {
    detail::require(scores.size() == labels.size() && scores.size() >= 1, "accuracy: length mismatch");
    Index hits = 0;
    for (Index i = 0; i < scores.size(); ++i) hits += ((scores(i) >= threshold ? 1.0 : 0.0) == labels(i)) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(scores.size());
}

} // namespace persreg
