#pragma once

// Learning the effective vectorized diffusion operator from a state
// trajectory. States X (N x T) are stacked column-major into x = vec(X),
// so matrix dynamics -L*X become (I_T kron -L) * x. The learner iterates
// the per-pair rule
//
//   xhat = exp(Lambda) * x(t),   eps = x(t+1) - xhat,
//   Lambda += gamma * eps * x(t)^T
//
// sweeping consecutive pairs in time order until every pair's residual is
// below the threshold. The final sweep's residuals feed the process-noise
// estimate of the Kalman predictor.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "netdiff/dynamics.hpp"
#include "netdiff/multinet.hpp"

namespace netdiff {

/// Column-major stacking: all nodes' topic 1, then topic 2, ...
Eigen::VectorXd vectorize(const StateMatrix& x);
StateMatrix devectorize(const Eigen::VectorXd& v, int nodes, int topics);

enum class StructureMode { full, kron_constrained };

struct LambdaEstimate {
    Eigen::MatrixXd matrix;  // NT x NT
    StructureMode structure_mode = StructureMode::full;
    int nodes = 0;
    int topics = 0;

    int dim() const { return nodes * topics; }
};

/// I_T kron (-L) from an assembled supra-Laplacian (exact block copy).
LambdaEstimate initial_lambda(const SupraLaplacian& laplacian, int topics,
                              StructureMode mode = StructureMode::full);

/// Average the T diagonal N x N blocks and zero everything else, mapping
/// any matrix to the nearest I_T kron B form. Idempotent on structured input.
Eigen::MatrixXd project_kron_blocks(const Eigen::MatrixXd& m, int nodes, int topics);

bool is_kron_structured(const Eigen::MatrixXd& m, int nodes, int topics, double tol = 1e-12);

struct LearnConfig {
    double gamma = 1e-3;        // scaling gain of the update rule
    double eta = 0.0;           // convergence threshold; <= 0 resolves to 1e-4*sqrt(NT)
    int max_iters = 500;        // maximum sweeps over the pair list
    int divergence_patience = 5;
};

struct LearnResult {
    LambdaEstimate lambda;
    std::vector<double> sweep_residuals;           // mean ||eps||_2 per sweep
    std::vector<Eigen::VectorXd> final_residuals;  // per-pair eps of the last sweep
    int sweeps = 0;
    bool converged = false;
    double final_gamma = 0.0;  // after any divergence-guard halving
};

/// Requires unit-spaced timestamps (the update rule assumes step 1).
/// The divergence guard halves gamma after `divergence_patience` consecutive
/// sweeps of increasing residual and aborts if gamma underflows below 1e-12.
LearnResult learn_lambda(const Trajectory& trajectory, const LambdaEstimate& lambda0,
                         const LearnConfig& config = {});

/// Empirical covariance of the residual vectors, symmetrized, with a
/// 1e-9 ridge for positive definiteness.
Eigen::MatrixXd residual_covariance(std::span<const Eigen::VectorXd> residuals);

}  // namespace netdiff
