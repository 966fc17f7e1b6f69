#pragma once

// Closed- and open-system diffusion on an assembled supra-Laplacian:
// matrix-exponential drift prediction, Euler-Maruyama simulation of the
// Ornstein-Uhlenbeck system dX = -L X dt + Sigma dB, and recovery of
// unknown diffusion constants from a pair of observed states.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "netdiff/multinet.hpp"

namespace netdiff {

// N_total x T matrix; row i holds node i's T-dimensional topic state.
using StateMatrix = Eigen::MatrixXd;

// Per-node, per-topic noise scales (entries >= 0). Row i is node i's
// sigma vector; the Brownian increments are drawn inside simulate_ou.
struct NoiseSpec {
    Eigen::MatrixXd sigma;
};

struct Trajectory {
    std::vector<double> timestamps;    // strictly increasing
    std::vector<StateMatrix> states;   // one per timestamp, shared dimensions
    std::vector<std::string> warnings; // non-fatal diagnostics from the producer

    int length() const { return static_cast<int>(states.size()); }
    int nodes() const { return states.empty() ? 0 : static_cast<int>(states.front().rows()); }
    int topics() const { return states.empty() ? 0 : static_cast<int>(states.front().cols()); }
    void validate() const;
};

/// exp(t*A). Symmetric matrices go through an eigendecomposition; the
/// general path is Pade approximation with scaling and squaring.
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a, double t);

/// exp(t*A) * V without forming exp(t*A): Taylor series applied over
/// substeps of 1-norm at most one. Much cheaper than matrix_exp when V
/// has few columns.
Eigen::MatrixXd matrix_exp_apply(const Eigen::MatrixXd& a, double t, const Eigen::MatrixXd& v);

/// Drift-only point prediction exp(-L*dt) * X0. dt = 0 returns X0 exactly.
StateMatrix predict_drift(const Eigen::MatrixXd& laplacian, const StateMatrix& x0, double dt);
StateMatrix predict_drift(const SupraLaplacian& laplacian, const StateMatrix& x0, double dt);

struct OuOptions {
    bool exact_drift = false;  // step with exp(-L*dt) instead of I - dt*L
    double t0 = 0.0;           // timestamp of the initial state
};

/// Euler-Maruyama recursion X <- X - dt*L*X + sqrt(dt)*(sigma o G) with
/// i.i.d. standard-normal G, deterministic per seed. A step size that
/// amplifies (spectral radius of I - dt*L above 1, symmetric L) is recorded
/// as a warning on the trajectory, not an error.
Trajectory simulate_ou(const Eigen::MatrixXd& laplacian, const StateMatrix& x0,
                       const NoiseSpec& noise, double dt, int steps, std::uint64_t seed,
                       const OuOptions& options = {});
Trajectory simulate_ou(const SupraLaplacian& laplacian, const StateMatrix& x0,
                       const NoiseSpec& noise, double dt, int steps, std::uint64_t seed,
                       const OuOptions& options = {});

// Which diffusion constants of a network are free during fitting.
struct UnknownConstant {
    enum class Kind { intra, inter };
    Kind kind = Kind::intra;
    int layer = 0;          // intra: layer id
    int from = 0, to = 0;   // inter: the stored coupling's layer pair

    static UnknownConstant intra_of(int layer_id) { return {Kind::intra, layer_id, 0, 0}; }
    static UnknownConstant inter_of(int from, int to) { return {Kind::inter, 0, from, to}; }
};

struct FitOptions {
    double d_max = 10.0;    // search interval is [0, d_max] per constant
    double rel_tol = 1e-6;  // stop when a full pass improves less than this
    int max_passes = 200;
};

struct DiffusionFit {
    std::vector<double> constants;  // one per unknown, in input order
    Eigen::MatrixXd sigma_hat;      // per-entry |residual| / sqrt(dt)
    double residual = 0.0;          // final Frobenius drift residual
    bool improved = false;          // false: search could not beat the initial guess
};

/// Minimize ||X(t1) - exp(-L(D)*dt) * X(t0)||_F over the unknown constants
/// by coordinate-wise golden-section search; the noise matrix is estimated
/// afterwards from the residual.
DiffusionFit fit_diffusion_constants(const MultilayerNetwork& network,
                                     std::span<const UnknownConstant> unknowns,
                                     const StateMatrix& x_t0, const StateMatrix& x_t1, double dt,
                                     const FitOptions& options = {});

}  // namespace netdiff
