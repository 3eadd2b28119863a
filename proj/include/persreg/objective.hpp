#pragma once

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "persreg/core_model.hpp"
#include "persreg/covariate_metric.hpp"
#include "persreg/error.hpp"

namespace persreg {

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

namespace detail {
inline void check_label(double y, Task task) {
    if (task == Task::classification && y != 0.0 && y != 1.0)
        throw ValidationError("classification label must be 0 or 1, got " + std::to_string(y));
}
} // namespace detail

/// Squared error for regression, logistic log-loss (y in {0,1}) for classification.
inline double predictive_loss(const Eigen::Ref<const Eigen::VectorXd>& x, double y,
                              const Eigen::Ref<const Eigen::VectorXd>& theta, Task task) {
    detail::require(x.size() == theta.size(), "predictive_loss: x and theta lengths differ");
    detail::check_label(y, task);
    const double eta = x.dot(theta);
    if (task == Task::regression) {
        const double r = y - eta;
        return r * r;
    }
    // -[y log s + (1-y) log(1-s)] = softplus(eta) - y * eta
    return softplus(eta) - y * eta;
}

inline Eigen::VectorXd loss_subgradient(const Eigen::Ref<const Eigen::VectorXd>& x, double y,
                                        const Eigen::Ref<const Eigen::VectorXd>& theta, Task task) {
    detail::require(x.size() == theta.size(), "loss_subgradient: x and theta lengths differ");
    detail::check_label(y, task);
    const double eta = x.dot(theta);
    if (task == Task::regression) return -2.0 * (y - eta) * x;
    return (sigmoid(eta) - y) * x;
}

struct L1Term {
    double value;
    Eigen::VectorXd subgrad;
};

/// lambda * ||theta||_1 with the subgradient that is exactly zero at theta_j == 0.
inline L1Term l1_term(const Eigen::Ref<const Eigen::VectorXd>& theta, double lambda) {
    detail::require(lambda >= 0.0, "lambda must be >= 0");
    L1Term out{lambda * theta.lpNorm<1>(), Eigen::VectorXd::Zero(theta.size())};
    for (Index j = 0; j < theta.size(); ++j) {
        if (theta(j) > 0.0)
            out.subgrad(j) = lambda;
        else if (theta(j) < 0.0)
            out.subgrad(j) = -lambda;
    }
    return out;
}

namespace detail {
inline void check_dmr_shapes(const Eigen::MatrixXd& Z, const MetricWeights& w, const DistanceCache& cache,
                             const NeighborSets& sets) {
    require(w.size() == cache.features(), "phi length does not match the distance cache");
    require(cache.samples() == Z.cols(), "distance cache size does not match the number of samples");
    require(static_cast<Index>(sets.size()) == Z.cols(), "neighbor sets do not match the number of samples");
}
} // namespace detail

/// Per-sample distance-matching penalty
///   D^(i) = gamma/2 * sum_{j in B(i)} (rho_ij - ||Z^(i) - Z^(j)||^2)^2.
inline Eigen::VectorXd dmr_value(const Eigen::MatrixXd& Z, const MetricWeights& w, const DistanceCache& cache,
                                 const NeighborSets& sets, double gamma) {
    detail::check_dmr_shapes(Z, w, cache, sets);
    const Index n = Z.cols();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (Index i = 0; i < n; ++i) {
        double acc = 0.0;
        for (Index j : sets[static_cast<std::size_t>(i)]) {
            const double mismatch = detail::rho_unchecked(w, cache, i, j) - squared_distance(Z, i, j);
            acc += mismatch * mismatch;
        }
        out(i) = 0.5 * gamma * acc;
    }
    return out;
}

struct DmrGradients {
    Eigen::MatrixXd grad_z;   // q x n
    Eigen::VectorXd grad_phi; // k
};

/// Gradients of sum_i D^(i) with the neighbor sets held fixed.
///
/// Every ordered pair (i, j in B(i)) adds -2 gamma (rho_ij - s_ij) Delta_ij to column i
/// and the mirrored term to column j, so symmetric membership doubles each pair.
inline DmrGradients dmr_gradients(const Eigen::MatrixXd& Z, const MetricWeights& w, const DistanceCache& cache,
                                  const NeighborSets& sets, double gamma) {
    detail::check_dmr_shapes(Z, w, cache, sets);
    const Index n = Z.cols();
    const Index k = w.size();
    DmrGradients out{Eigen::MatrixXd::Zero(Z.rows(), n), Eigen::VectorXd::Zero(k)};
    if (gamma == 0.0) return out;
    for (Index i = 0; i < n; ++i) {
        for (Index j : sets[static_cast<std::size_t>(i)]) {
            const double mismatch = detail::rho_unchecked(w, cache, i, j) - squared_distance(Z, i, j);
            const double coef = -2.0 * gamma * mismatch;
            for (Index d = 0; d < Z.rows(); ++d) {
                const double delta = Z(d, i) - Z(d, j);
                out.grad_z(d, i) += coef * delta;
                out.grad_z(d, j) -= coef * delta;
            }
            for (Index l = 0; l < k; ++l) out.grad_phi(l) += gamma * mismatch * cache(l, i, j);
        }
    }
    return out;
}

/// Composite objective value and the partials the optimizer consumes.
struct GradientBundle {
    Eigen::MatrixXd grad_z;   // q x n
    Eigen::MatrixXd grad_q;   // q x p
    Eigen::VectorXd grad_phi; // k
    double value = 0.0;
    /// Per-sample d(loss + l1)/d theta^(i), p x n. Kept for the optimizer's diagnostics.
    Eigen::MatrixXd grad_theta;
};

inline GradientBundle composite_objective(const Factorization& f, const MetricWeights& w, const Dataset& data,
                                          const DistanceCache& cache, const NeighborSets& sets,
                                          const HyperParams& hyper) {
    f.validate();
    const Index n = f.n();
    detail::require(data.n() == n, "dataset rows do not match the factorization");
    detail::require(data.p() == f.p(), "dataset predictors do not match the dictionary");

    GradientBundle out;
    out.grad_theta.resize(f.p(), n);
    const Eigen::MatrixXd omega = assemble_omega(f);
    const Eigen::MatrixXd Xt = data.X.transpose();
    const double lambda = hyper.lambda;
    double value = 0.0;
    // Same arithmetic as predictive_loss / loss_subgradient / l1_term, fused to avoid temporaries.
    for (Index i = 0; i < n; ++i) {
        const auto theta = omega.col(i);
        const auto x = Xt.col(i);
        const double y = data.Y(i);
        detail::check_label(y, data.task);
        const double eta = x.dot(theta);
        double loss, coef;
        if (data.task == Task::regression) {
            const double r = y - eta;
            loss = r * r;
            coef = -2.0 * r;
        } else {
            loss = softplus(eta) - y * eta;
            coef = sigmoid(eta) - y;
        }
        auto g = out.grad_theta.col(i);
        g = coef * x;
        for (Index j = 0; j < f.p(); ++j) {
            if (theta(j) > 0.0)
                g(j) += lambda;
            else if (theta(j) < 0.0)
                g(j) -= lambda;
        }
        if (!std::isfinite(loss) || !g.allFinite())
            throw NumericalError("non-finite loss or gradient at sample " + std::to_string(i));
        value += loss + lambda * theta.lpNorm<1>();
    }

    const Eigen::VectorXd dmr = dmr_value(f.Z, w, cache, sets, hyper.gamma);
    DmrGradients dg = dmr_gradients(f.Z, w, cache, sets, hyper.gamma);
    for (Index i = 0; i < n; ++i) {
        if (!std::isfinite(dmr(i)))
            throw NumericalError("non-finite distance-matching term at sample " + std::to_string(i));
        value += dmr(i);
    }
    const Eigen::VectorXd phi_dev = w.phi - Eigen::VectorXd::Ones(w.size());
    value += hyper.upsilon * phi_dev.squaredNorm();

    out.value = value;
    out.grad_z = f.Q * out.grad_theta + dg.grad_z;
    // The distance-matching term depends on Z and phi only, so it adds nothing here.
    out.grad_q = f.Z * out.grad_theta.transpose();
    out.grad_phi = dg.grad_phi + 2.0 * hyper.upsilon * phi_dev;
    if (!std::isfinite(out.value) || !out.grad_z.allFinite() || !out.grad_q.allFinite() ||
        !out.grad_phi.allFinite())
        throw NumericalError("composite objective produced non-finite values");
    return out;
}

} // namespace persreg
