#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "persreg/covariates.hpp"
#include "persreg/error.hpp"

namespace persreg {

using Index = Eigen::Index;

enum class Task { regression, classification };

inline const char* to_string(Task t) {
    return t == Task::regression ? "regression" : "classification";
}

inline Task task_from_string(const std::string& s) {
    if (s == "regression") return Task::regression;
    if (s == "classification") return Task::classification;
    throw ValidationError("unknown task '" + s + "' (expected regression|classification)");
}

/// Training data: predictors X (n x p), responses Y (n) and covariates U (n x k).
struct Dataset {
    Eigen::MatrixXd X;
    Eigen::VectorXd Y;
    CovariateTable U;
    Task task = Task::regression;

    Index n() const { return X.rows(); }
    Index p() const { return X.cols(); }
    Index k() const { return static_cast<Index>(U.cols()); }

    void validate() const {
        detail::require(n() >= 1, "dataset has no rows");
        detail::require(p() >= 1, "dataset has no predictor columns");
        detail::require(k() >= 1, "dataset has no covariate columns");
        detail::require(Y.size() == n(), "Y has " + std::to_string(Y.size()) + " entries, X has " +
                                             std::to_string(n()) + " rows");
        detail::require(static_cast<Index>(U.rows()) == n(),
                        "U has " + std::to_string(U.rows()) + " rows, X has " + std::to_string(n()));
        for (Index i = 0; i < n(); ++i) {
            for (Index j = 0; j < p(); ++j) {
                if (!std::isfinite(X(i, j)))
                    throw ValidationError("X(" + std::to_string(i) + "," + std::to_string(j) + ") is not finite");
            }
            if (!std::isfinite(Y(i))) throw ValidationError("Y(" + std::to_string(i) + ") is not finite");
            if (task == Task::classification && Y(i) != 0.0 && Y(i) != 1.0)
                throw ValidationError("classification response Y(" + std::to_string(i) + ") not in {0,1}");
        }
    }

    Dataset select_rows(const std::vector<Index>& ids) const {
        Dataset out;
        out.X.resize(static_cast<Index>(ids.size()), p());
        out.Y.resize(static_cast<Index>(ids.size()));
        for (std::size_t r = 0; r < ids.size(); ++r) {
            out.X.row(static_cast<Index>(r)) = X.row(ids[r]);
            out.Y(static_cast<Index>(r)) = Y(ids[r]);
        }
        out.U = U.select_rows(ids);
        out.task = task;
        return out;
    }
};

/// Low-rank factorization of the personalized parameters: Omega = Q^T Z.
///
/// Z is q x n (column i holds the loadings of sample i), Q is q x p.
/// Omega itself is never stored; use assemble_omega().
struct Factorization {
    Eigen::MatrixXd Z;
    Eigen::MatrixXd Q;

    Index q() const { return Z.rows(); }
    Index n() const { return Z.cols(); }
    Index p() const { return Q.cols(); }

    void validate() const {
        detail::require(Z.rows() == Q.rows(), "Z has " + std::to_string(Z.rows()) +
                                                  " rows but Q has " + std::to_string(Q.rows()));
        detail::require(q() >= 1, "latent dimension must be at least 1");
        detail::require(Z.allFinite() && Q.allFinite(), "factorization contains non-finite entries");
    }
};

/// Neighbor-ball radius rule: either a fixed squared-distance threshold or a
/// target average neighbor count re-solved from the current loadings.
struct RadiusRule {
    bool automatic = true;
    double value = 10.0;  // radius when fixed, target neighbor count when automatic

    static RadiusRule fixed(double r) { return {false, r}; }
    static RadiusRule target_neighbors(double avg) { return {true, avg}; }
    bool operator==(const RadiusRule&) const = default;
};

struct HyperParams {
    double lambda = 1e-1;  // l1 strength
    double gamma = 1e5;    // distance-matching strength
    double upsilon = 1e-2; // pull of phi towards 1
    Index q = 2;
    RadiusRule radius = RadiusRule::target_neighbors(10.0);
    double alpha0 = 1e-4;
    double decay = 1.0 - 1e-4;
    double init_noise = 1e-4;
    double rate_floor = 1e-3;
    Index k_n = 3;
    Index max_iters = 5000;
    double rel_tol = 1e-6;
    std::uint64_t seed = 0;

    void validate() const {
        detail::require(lambda >= 0.0, "lambda must be >= 0");
        detail::require(gamma >= 0.0, "gamma must be >= 0");
        detail::require(upsilon >= 0.0, "upsilon must be >= 0");
        detail::require(q >= 1, "q must be >= 1");
        detail::require(radius.value > 0.0, radius.automatic ? "target neighbor count must be > 0"
                                                             : "radius must be > 0");
        detail::require(alpha0 > 0.0, "alpha0 must be > 0");
        detail::require(decay > 0.0 && decay < 1.0, "decay must lie in (0,1)");
        detail::require(init_noise > 0.0, "init_noise must be > 0");
        detail::require(rate_floor > 0.0, "rate_floor must be > 0");
        detail::require(k_n >= 1, "k_n must be >= 1");
        detail::require(max_iters >= 0, "max_iters must be >= 0");
        detail::require(rel_tol > 0.0, "rel_tol must be > 0");
    }

    bool operator==(const HyperParams&) const = default;
};

/// Everything needed to assemble test-time models.
struct TrainedModel {
    Factorization factorization;
    MetricWeights phi;
    Eigen::VectorXd theta_pop;
    CovariateTable train_U;
    Task task = Task::regression;
    HyperParams hyper;

    Index n() const { return factorization.n(); }
    Index p() const { return factorization.p(); }

    void validate() const {
        factorization.validate();
        detail::require(phi.size() == static_cast<Index>(train_U.cols()),
                        "phi length does not match the number of covariate columns");
        detail::require(factorization.n() == static_cast<Index>(train_U.rows()),
                        "factorization column count does not match training covariate rows");
        detail::require(theta_pop.size() == factorization.p(), "theta_pop length does not match p");
        detail::require((phi.phi.array() >= 0.0).all(), "phi must be nonnegative");
    }
};

/// Omega = Q^T Z (p x n); column i is the model of sample i.
inline Eigen::MatrixXd assemble_omega(const Factorization& f) {
    detail::require(f.Z.rows() == f.Q.rows(), "Z and Q disagree on the latent dimension");
    return f.Q.transpose() * f.Z;
}

/// Theta of a single sample, Q^T Z^(i).
inline Eigen::VectorXd sample_theta(const Factorization& f, Index i) {
    return f.Q.transpose() * f.Z.col(i);
}

/// Rescales every column of Q to unit Euclidean norm; Z is left untouched.
inline Factorization normalize_dictionary(const Factorization& f) {
    Factorization out = f;
    for (Index j = 0; j < out.Q.cols(); ++j) {
        const double norm = out.Q.col(j).norm();
        if (norm == 0.0) throw ValidationError("dictionary column " + std::to_string(j) + " is zero");
        out.Q.col(j) /= norm;
    }
    return out;
}

/// Mean of the selected columns, summed in ascending column order.
inline Eigen::VectorXd mean_of_columns(const Eigen::MatrixXd& m, std::vector<Index> ids) {
    detail::require(!ids.empty(), "cannot average an empty column set");
    std::sort(ids.begin(), ids.end());
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m.rows());
    for (auto i : ids) acc += m.col(i);
    return acc / static_cast<double>(ids.size());
}

/// (1/n) sum_i Q^T Z^(i).
inline Eigen::VectorXd center_of_mass(const Factorization& f) {
    const Eigen::MatrixXd omega = assemble_omega(f);
    detail::require(omega.cols() >= 1, "center of mass of an empty factorization");
    std::vector<Index> all(static_cast<std::size_t>(omega.cols()));
    for (Index i = 0; i < omega.cols(); ++i) all[static_cast<std::size_t>(i)] = i;
    return mean_of_columns(omega, std::move(all));
}

} // namespace persreg
