#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "persreg/core_model.hpp"
#include "persreg/covariate_metric.hpp"
#include "persreg/error.hpp"
#include "persreg/objective.hpp"
#include "persreg/population.hpp"

namespace persreg {

/// Optimizer state between iterations. alpha is always alpha0 * decay^t.
struct TrainState {
    Factorization factorization;
    MetricWeights phi;
    Eigen::VectorXd theta_pop;
    Index t = 0;
    double alpha = 0.0;
    double objective = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
};

/// Diagnostics of one step; the center-of-mass fields feed the drift checks.
struct StepInfo {
    Index t = 0;
    double alpha = 0.0;
    double objective = 0.0;
    double radius = 0.0;
    double mean_neighbors = 0.0;
    double com_step = 0.0;  // ||com_{t+1} - com_t||_inf
    double com_drift = 0.0; // ||com_{t+1} - theta_pop||_inf
};

inline double learning_rate(const HyperParams& hyper, Index t) {
    return hyper.alpha0 * std::pow(hyper.decay, static_cast<double>(t));
}

/// Bound on a single center-of-mass move, alpha_t (lambda + 1).
inline double com_step_bound(const HyperParams& hyper, Index t) {
    return learning_rate(hyper, t) * (hyper.lambda + 1.0);
}

/// Cumulative drift bound after tau steps, alpha0 (lambda + 1) (1 - c^tau) / (1 - c).
inline double com_drift_bound(const HyperParams& hyper, Index tau) {
    return hyper.alpha0 * (hyper.lambda + 1.0) * (1.0 - std::pow(hyper.decay, static_cast<double>(tau))) /
           (1.0 - hyper.decay);
}

/// Best rank-q factorization Q^T Z of omega via a thin SVD: Q^T holds the
/// leading left singular vectors, Z the scaled right singular vectors.
inline Factorization factorize(const Eigen::MatrixXd& omega, Index q) {
    detail::require(q >= 1 && q <= std::min(omega.rows(), omega.cols()),
                    "latent dimension q=" + std::to_string(q) + " exceeds min(p, n)");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(omega, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Factorization f;
    f.Q = svd.matrixU().leftCols(q).transpose();
    f.Z = svd.singularValues().head(q).asDiagonal() * svd.matrixV().leftCols(q).transpose();
    return f;
}

/// Seeded initialization: theta^(i) = theta_pop + eps * g_i, factorized to rank q;
/// phi = 1, t = 0, alpha = alpha0.
inline TrainState initialize(const Dataset& data, const HyperParams& hyper, const Eigen::VectorXd& theta_pop) {
    hyper.validate();
    detail::require(theta_pop.size() == data.p(), "theta_pop length does not match p");
    detail::require(hyper.q <= std::min(data.p(), data.n()),
                    "latent dimension q=" + std::to_string(hyper.q) + " exceeds min(p, n)");
    std::mt19937_64 rng(hyper.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd omega(data.p(), data.n());
    for (Index i = 0; i < data.n(); ++i)
        for (Index j = 0; j < data.p(); ++j) omega(j, i) = theta_pop(j) + hyper.init_noise * gauss(rng);

    TrainState s;
    s.factorization = factorize(omega, hyper.q);
    s.phi = MetricWeights::ones(data.k());
    s.theta_pop = theta_pop;
    s.t = 0;
    s.alpha = hyper.alpha0;
    return s;
}

/// Neighbor sets for the current loadings, resolving an automatic radius.
inline NeighborSets current_neighbors(const Eigen::MatrixXd& Z, const RadiusRule& rule, double* radius_out = nullptr) {
    const Index n = Z.cols();
    double r = rule.value;
    if (rule.automatic) {
        if (n < 2) {
            if (radius_out) *radius_out = 0.0;
            return NeighborSets(static_cast<std::size_t>(n));
        }
        r = auto_radius(Z, std::min(rule.value, static_cast<double>(n - 1)));
    }
    if (radius_out) *radius_out = r;
    return neighbor_sets(Z, r);
}

/// One Jacobi-style pass: all partials at the snapshot, then phi, Z and Q updates.
inline TrainState train_step(const TrainState& state, const Dataset& data, const DistanceCache& cache,
                             const HyperParams& hyper, StepInfo* info = nullptr) {
    const Factorization& snap = state.factorization;
    double radius = 0.0;
    const NeighborSets sets = current_neighbors(snap.Z, hyper.radius, &radius);
    GradientBundle g;
    try {
        g = composite_objective(snap, state.phi, data, cache, sets, hyper);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at iteration " + std::to_string(state.t));
    }
    const double alpha = learning_rate(hyper, state.t);

    TrainState next = state;
    next.objective = g.value;
    next.phi.phi = (state.phi.phi - alpha * g.grad_phi).cwiseMax(0.0);

    const Eigen::MatrixXd omega = assemble_omega(snap);
    for (Index i = 0; i < snap.n(); ++i) {
        const double dist = (omega.col(i) - state.theta_pop).lpNorm<Eigen::Infinity>();
        const double rate = alpha / std::max(hyper.rate_floor, dist);
        next.factorization.Z.col(i) -= rate * g.grad_z.col(i);
    }
    next.factorization.Q -= alpha * g.grad_q;
    next.t = state.t + 1;
    next.alpha = learning_rate(hyper, next.t);

    if (!next.factorization.Z.allFinite() || !next.factorization.Q.allFinite() || !next.phi.phi.allFinite())
        throw NumericalError("non-finite update at iteration " + std::to_string(state.t));

    if (info) {
        const Eigen::VectorXd before = center_of_mass(snap);
        const Eigen::VectorXd after = center_of_mass(next.factorization);
        info->t = state.t;
        info->alpha = alpha;
        info->objective = g.value;
        info->radius = radius;
        info->mean_neighbors = mean_neighbor_count(sets);
        info->com_step = (after - before).lpNorm<Eigen::Infinity>();
        info->com_drift = (after - state.theta_pop).lpNorm<Eigen::Infinity>();
    }
    return next;
}

struct FitOptions {
    /// Population estimator settings; defaults to ElasticNetConfig::matching(hyper, task).
    std::optional<ElasticNetConfig> population;
    /// Use this anchor instead of fitting the population model.
    std::optional<Eigen::VectorXd> theta_pop;
    /// Called after every step.
    std::function<void(const StepInfo&)> on_step;
};

struct FitResult {
    TrainedModel model;
    Index iterations = 0;
    bool converged = false;
    double objective = std::numeric_limits<double>::quiet_NaN();
};

inline TrainedModel to_model(const TrainState& s, const Dataset& data, const HyperParams& hyper) {
    TrainedModel m;
    m.factorization = s.factorization;
    m.phi = s.phi;
    m.theta_pop = s.theta_pop;
    m.train_U = data.U;
    m.task = data.task;
    m.hyper = hyper;
    return m;
}

inline FitResult fit(const Dataset& data, const HyperParams& hyper, const FitOptions& opts = {}) {
    data.validate();
    hyper.validate();
    Eigen::VectorXd theta_pop;
    if (opts.theta_pop) {
        theta_pop = *opts.theta_pop;
    } else {
        theta_pop = fit_population(data, opts.population.value_or(ElasticNetConfig::matching(hyper, data.task)));
    }
    TrainState state = initialize(data, hyper, theta_pop);
    const DistanceCache cache = precompute_cache(data, metrics_for(data.U.schema()));

    double previous = std::numeric_limits<double>::quiet_NaN();
    while (state.t < hyper.max_iters) {
        StepInfo info;
        state = train_step(state, data, cache, hyper, &info);
        if (opts.on_step) opts.on_step(info);
        if (std::isfinite(previous) &&
            std::abs(state.objective - previous) <= hyper.rel_tol * std::max(1.0, std::abs(previous))) {
            state.converged = true;
            break;
        }
        previous = state.objective;
    }
    return {to_model(state, data, hyper), state.t, state.converged, state.objective};
}

} // namespace persreg
