#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "persreg/core_model.hpp"
#include "persreg/covariate_metric.hpp"
#include "persreg/error.hpp"
#include "persreg/objective.hpp"

namespace persreg {

struct Prediction {
    Eigen::VectorXd theta;
    double y_hat = 0.0;
    std::vector<Index> neighbor_ids;
    std::vector<double> neighbor_dists;
};

namespace detail {
inline void check_row_schema(const TrainedModel& model, const CovariateRow& u) {
    require(u.size() == model.train_U.cols(), "covariate row has " + std::to_string(u.size()) +
                                                  " entries, model expects " + std::to_string(model.train_U.cols()));
    for (std::size_t l = 0; l < u.size(); ++l) {
        const bool is_real = std::holds_alternative<double>(u[l]);
        const bool want_real = model.train_U.column(l).kind == ColumnKind::continuous;
        require(is_real == want_real, "covariate " + std::to_string(l) + " does not match the model schema");
    }
}
} // namespace detail

/// Training indices ordered nearest-first by rho_phi(u, U^(i)); ties by index.
inline std::vector<Index> rank_neighbors(const TrainedModel& model, const CovariateRow& u,
                                         std::vector<double>* dists_out = nullptr) {
    detail::check_row_schema(model, u);
    const auto n = static_cast<Index>(model.train_U.rows());
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)] = rho_phi(model.phi, model.train_U, i, u);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)];
    });
    if (dists_out) {
        dists_out->clear();
        for (auto i : order) dists_out->push_back(dist[static_cast<std::size_t>(i)]);
    }
    return order;
}

/// Assembles a test-time model from a precomputed Omega (p x n). Only u selects neighbors.
inline Prediction predict_point(const TrainedModel& model, const Eigen::MatrixXd& omega,
                                const Eigen::Ref<const Eigen::VectorXd>& x, const CovariateRow& u) {
    detail::require(x.size() == model.p(), "predictor row has " + std::to_string(x.size()) +
                                               " entries, model expects " + std::to_string(model.p()));
    detail::require(model.hyper.k_n >= 1, "k_n must be >= 1");
    std::vector<double> dists;
    const std::vector<Index> order = rank_neighbors(model, u, &dists);
    const auto take = static_cast<std::size_t>(std::min<Index>(model.hyper.k_n, model.n()));

    Prediction out;
    out.neighbor_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    out.neighbor_dists.assign(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(take));
    out.theta = mean_of_columns(omega, out.neighbor_ids);
    const double eta = x.dot(out.theta);
    out.y_hat = model.task == Task::regression ? eta : sigmoid(eta);
    return out;
}

inline Prediction predict_point(const TrainedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                                const CovariateRow& u) {
    return predict_point(model, assemble_omega(model.factorization), x, u);
}

inline std::vector<Prediction> predict_batch(const TrainedModel& model, const Eigen::MatrixXd& X,
                                             const CovariateTable& U) {
    detail::require(static_cast<Index>(U.rows()) == X.rows(), "test X and U row counts differ");
    const Eigen::MatrixXd omega = assemble_omega(model.factorization);
    std::vector<Prediction> out;
    out.reserve(static_cast<std::size_t>(X.rows()));
    for (Index i = 0; i < X.rows(); ++i) out.push_back(predict_point(model, omega, X.row(i).transpose(), U.row(i)));
    return out;
}

} // namespace persreg
