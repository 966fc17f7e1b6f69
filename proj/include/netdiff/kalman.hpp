#pragma once

// Discrete Kalman predictor over the vectorized states. The transition is
// F = I + Lambda (unit-step discretization of the learned operator); a
// diagonal indicator mask selects which nodes are observed, with every
// topic of an observed node visible. Updates run in the reduced space of
// observed coordinates so the innovation covariance stays well conditioned;
// this is algebraically the full indicator-operator update restricted to
// its nonzero rows.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "netdiff/operator_learning.hpp"

namespace netdiff {

struct ObservationMask {
    std::vector<int> observed;  // sorted unique global node indices, 0-based
    int nodes = 0;
    int topics = 0;

    /// Validates, sorts and dedups the node list.
    static ObservationMask of(std::vector<int> observed_nodes, int nodes, int topics);

    int observed_count() const { return static_cast<int>(observed.size()); }
    int observed_dim() const { return observed_count() * topics; }  // m = T * |observed|

    /// Vec-space indices of the observed coordinates, ascending: node i's
    /// topic k lives at k*N + i.
    std::vector<int> observed_coordinates() const;

    /// S * x: restriction of a full state vector to observed coordinates.
    Eigen::VectorXd select(const Eigen::VectorXd& x) const;

    Eigen::MatrixXd h() const;         // N x N diagonal 0/1 indicator
    Eigen::MatrixXd script_h() const;  // NT x NT, I_T kron H
};

struct NoiseCov {
    Eigen::MatrixXd q;  // NT x NT process noise, symmetric PSD
    Eigen::MatrixXd r;  // m x m observation noise, symmetric PD

    void validate(int nt, int m) const;
};

// Mean/covariance pair carried through the filter; `x`/`p` hold the prior
// before an update and the posterior after one.
struct KalmanState {
    Eigen::VectorXd x;
    Eigen::MatrixXd p;
    Eigen::MatrixXd f;  // I + Lambda
};

Eigen::MatrixXd make_transition(const LambdaEstimate& lambda_hat);

/// Measurement update with observation y over the masked coordinates.
/// Throws NumericalError when the innovation covariance is numerically
/// singular (condition above 1e12). An empty mask returns the state as is.
KalmanState kalman_update(const KalmanState& state, const Eigen::VectorXd& y,
                          const ObservationMask& mask, const NoiseCov& noise);

/// Time propagation x <- F x, P <- F P F^T + Q.
KalmanState kalman_predict(const KalmanState& state, const NoiseCov& noise);

struct FilterStep {
    Eigen::VectorXd x_post;       // xhat_{t|t}
    Eigen::VectorXd x_pred_next;  // xhat_{t+1|t}
    Eigen::MatrixXd p_post;
    Eigen::MatrixXd p_pred_next;
};

/// Alternate update/predict over an observation series. (x0, p0) is the
/// prior for the first observation.
std::vector<FilterStep> run_filter(const LambdaEstimate& lambda_hat, const Eigen::VectorXd& x0,
                                   const Eigen::MatrixXd& p0, const ObservationMask& mask,
                                   const NoiseCov& noise,
                                   std::span<const Eigen::VectorXd> observations);

}  // namespace netdiff
