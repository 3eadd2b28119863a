#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "persreg/core_model.hpp"
#include "persreg/error.hpp"
#include "persreg/objective.hpp"

namespace persreg {

/// Elastic-net population estimator settings. The fitted objective is
///   (1/n) sum_i loss_i(theta) + l2 ||theta||_2^2 + l1 ||theta||_1.
struct ElasticNetConfig {
    double l1 = 1e-1;
    double l2 = 1e-5;
    Index max_iters = 200000;
    double rel_tol = 1e-10;
    Task fit_task = Task::regression;

    /// l1 tied to the personalized lambda, with a small ridge for conditioning.
    static ElasticNetConfig matching(const HyperParams& hyper, Task task) {
        ElasticNetConfig cfg;
        cfg.l1 = hyper.lambda;
        cfg.l2 = 1e-4 * hyper.lambda;
        cfg.fit_task = task;
        return cfg;
    }

    void validate() const {
        detail::require(l1 >= 0.0 && l2 >= 0.0, "elastic net penalties must be >= 0");
        detail::require(max_iters >= 1, "elastic net needs max_iters >= 1");
        detail::require(rel_tol > 0.0, "elastic net rel_tol must be > 0");
    }
};

/// Smooth part (mean loss + ridge) of the elastic-net objective.
inline double population_smooth_value(const Dataset& data, const ElasticNetConfig& cfg,
                                      const Eigen::VectorXd& theta) {
    const Eigen::VectorXd eta = data.X * theta;
    double acc = 0.0;
    for (Index i = 0; i < data.n(); ++i) {
        if (cfg.fit_task == Task::regression) {
            const double r = data.Y(i) - eta(i);
            acc += r * r;
        } else {
            acc += softplus(eta(i)) - data.Y(i) * eta(i);
        }
    }
    return acc / static_cast<double>(data.n()) + cfg.l2 * theta.squaredNorm();
}

inline Eigen::VectorXd population_smooth_gradient(const Dataset& data, const ElasticNetConfig& cfg,
                                                  const Eigen::VectorXd& theta) {
    const Eigen::VectorXd eta = data.X * theta;
    Eigen::VectorXd resid(data.n());
    for (Index i = 0; i < data.n(); ++i) {
        resid(i) = cfg.fit_task == Task::regression ? -2.0 * (data.Y(i) - eta(i)) : sigmoid(eta(i)) - data.Y(i);
    }
    return data.X.transpose() * resid / static_cast<double>(data.n()) + 2.0 * cfg.l2 * theta;
}

inline double population_objective(const Dataset& data, const ElasticNetConfig& cfg, const Eigen::VectorXd& theta) {
    return population_smooth_value(data, cfg, theta) + cfg.l1 * theta.lpNorm<1>();
}

/// Infinity-norm distance of zero from the subdifferential of the objective at theta.
inline double stationarity_residual(const Eigen::VectorXd& smooth_grad, const Eigen::VectorXd& theta, double l1) {
    double worst = 0.0;
    for (Index j = 0; j < theta.size(); ++j) {
        double r;
        if (theta(j) > 0.0)
            r = std::abs(smooth_grad(j) + l1);
        else if (theta(j) < 0.0)
            r = std::abs(smooth_grad(j) - l1);
        else
            r = std::max(0.0, std::abs(smooth_grad(j)) - l1);
        worst = std::max(worst, r);
    }
    return worst;
}

inline Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
    return v.unaryExpr([t](double a) { return a > t ? a - t : (a < -t ? a + t : 0.0); });
}

/// Proximal gradient descent from zero with a halving line search. When `history`
/// is given it receives the objective after every iteration.
inline Eigen::VectorXd fit_population(const Dataset& data, const ElasticNetConfig& cfg,
                                      std::vector<double>* history = nullptr) {
    data.validate();
    cfg.validate();
    detail::require(cfg.fit_task == data.task, "elastic net task does not match the dataset task");

    // Step that always satisfies the descent test in exact arithmetic; the line
    // search never goes below it, so roundoff cannot stall the iteration.
    const double curvature = data.task == Task::regression ? 2.0 : 0.25;
    const double lipschitz =
        curvature * data.X.squaredNorm() / static_cast<double>(data.n()) + 2.0 * cfg.l2;
    const double min_step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(data.p());
    double step = min_step;
    double smooth = population_smooth_value(data, cfg, theta);
    Eigen::VectorXd grad = population_smooth_gradient(data, cfg, theta);
    double residual = stationarity_residual(grad, theta, cfg.l1);

    for (Index it = 0; it < cfg.max_iters && residual > cfg.rel_tol; ++it) {
        step *= 2.0;
        Eigen::VectorXd next;
        double next_smooth;
        while (true) {
            next = soft_threshold(theta - step * grad, step * cfg.l1);
            next_smooth = population_smooth_value(data, cfg, next);
            const Eigen::VectorXd d = next - theta;
            if (step <= min_step || next_smooth <= smooth + grad.dot(d) + d.squaredNorm() / (2.0 * step)) break;
            step = std::max(0.5 * step, min_step);
        }
        theta = std::move(next);
        smooth = next_smooth;
        grad = population_smooth_gradient(data, cfg, theta);
        residual = stationarity_residual(grad, theta, cfg.l1);
        if (history) history->push_back(smooth + cfg.l1 * theta.lpNorm<1>());
        if (!theta.allFinite()) throw NumericalError("elastic net iterate became non-finite");
    }
    if (residual > cfg.rel_tol) {
        throw ConvergenceError("elastic net did not converge (residual " + std::to_string(residual) + ")", theta,
                               residual);
    }
    return theta;
}

inline double predict_population(const Eigen::VectorXd& theta, const Eigen::Ref<const Eigen::VectorXd>& x, Task task) {
    detail::require(theta.size() == x.size(), "predict_population: theta and x lengths differ");
    const double eta = x.dot(theta);
    return task == Task::regression ? eta : sigmoid(eta);
}

} // namespace persreg
