#include "netdiff/kalman.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "netdiff/errors.hpp"

namespace netdiff {

ObservationMask ObservationMask::of(std::vector<int> observed_nodes, int nodes, int topics) {
    if (nodes < 1 || topics < 1)
        throw ValidationError("ObservationMask: nodes and topics must be >= 1");
    std::sort(observed_nodes.begin(), observed_nodes.end());
    observed_nodes.erase(std::unique(observed_nodes.begin(), observed_nodes.end()),
                         observed_nodes.end());
    for (int i : observed_nodes)
        if (i < 0 || i >= nodes)
            throw ValidationError("ObservationMask: node index " + std::to_string(i) +
                                  " out of range");
    ObservationMask mask;
    mask.observed = std::move(observed_nodes);
    mask.nodes = nodes;
    mask.topics = topics;
    return mask;
}

std::vector<int> ObservationMask::observed_coordinates() const {
    std::vector<int> coords;
    coords.reserve(observed_dim());
    for (int k = 0; k < topics; ++k)
        for (int i : observed) coords.push_back(k * nodes + i);
    return coords;
}

Eigen::VectorXd ObservationMask::select(const Eigen::VectorXd& x) const {
    if (x.size() != static_cast<Eigen::Index>(nodes) * topics)
        throw ValidationError("ObservationMask::select: state length mismatch");
    const auto coords = observed_coordinates();
    Eigen::VectorXd y(coords.size());
    for (std::size_t k = 0; k < coords.size(); ++k) y[k] = x[coords[k]];
    return y;
}

Eigen::MatrixXd ObservationMask::h() const {
    Eigen::MatrixXd ind = Eigen::MatrixXd::Zero(nodes, nodes);
    for (int i : observed) ind(i, i) = 1.0;
    return ind;
}

Eigen::MatrixXd ObservationMask::script_h() const {
    const Eigen::Index nt = static_cast<Eigen::Index>(nodes) * topics;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nt, nt);
    const Eigen::MatrixXd ind = h();
    for (int k = 0; k < topics; ++k) out.block(k * nodes, k * nodes, nodes, nodes) = ind;
    return out;
}

void NoiseCov::validate(int nt, int m) const {
    if (q.rows() != nt || q.cols() != nt)
        throw ValidationError("NoiseCov: Q must be " + std::to_string(nt) + "x" +
                              std::to_string(nt));
    if (r.rows() != m || r.cols() != m)
        throw ValidationError("NoiseCov: R must be " + std::to_string(m) + "x" + std::to_string(m));
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw ValidationError("NoiseCov: Q not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eq(q, Eigen::EigenvaluesOnly);
    if (eq.eigenvalues().minCoeff() < -1e-9)
        throw ValidationError("NoiseCov: Q has eigenvalue below -1e-9");
    if (m > 0) {
        if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw ValidationError("NoiseCov: R not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> er(r, Eigen::EigenvaluesOnly);
        if (er.eigenvalues().minCoeff() < 1e-12)
            throw ValidationError("NoiseCov: R must be positive definite (eigenvalues >= 1e-12)");
    }
}

Eigen::MatrixXd make_transition(const LambdaEstimate& lambda_hat) {
    if (!lambda_hat.matrix.allFinite())
        throw ValidationError("make_transition: Lambda has non-finite entries");
    if (lambda_hat.matrix.rows() != lambda_hat.matrix.cols())
        throw ValidationError("make_transition: Lambda must be square");
    return Eigen::MatrixXd::Identity(lambda_hat.matrix.rows(), lambda_hat.matrix.cols()) +
           lambda_hat.matrix;
}

KalmanState kalman_update(const KalmanState& state, const Eigen::VectorXd& y,
                          const ObservationMask& mask, const NoiseCov& noise) {
    const int m = mask.observed_dim();
    if (y.size() != m)
        throw ValidationError("kalman_update: observation length " + std::to_string(y.size()) +
                              " does not match mask (" + std::to_string(m) + ")");
    if (m == 0) return state;
    if (state.x.size() != static_cast<Eigen::Index>(mask.nodes) * mask.topics)
        throw ValidationError("kalman_update: state length does not match mask dimensions");

    const auto coords = mask.observed_coordinates();
    const Eigen::MatrixXd p_rows = state.p(coords, Eigen::all);        // S P, m x NT
    const Eigen::MatrixXd innov_cov = noise.r + p_rows(Eigen::all, coords);  // R_e

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(innov_cov);
    if (eig.info() != Eigen::Success)
        throw NumericalError("kalman_update: eigendecomposition of R_e failed");
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (lo <= 0.0 || hi / lo > 1e12) {
        std::ostringstream os;
        os << "kalman_update: innovation covariance R_e is numerically singular (condition ";
        if (lo <= 0.0)
            os << "infinite";
        else
            os << hi / lo;
        os << "); increase the observation noise R";
        throw NumericalError(os.str());
    }
    const Eigen::MatrixXd innov_cov_inv =
        eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
        eig.eigenvectors().transpose();

    const Eigen::MatrixXd gain = p_rows.transpose() * innov_cov_inv;  // P S^T R_e^-1, NT x m
    const Eigen::VectorXd innovation = y - mask.select(state.x);

    KalmanState post;
    post.f = state.f;
    post.x = state.x + gain * innovation;
    post.p = state.p - gain * p_rows;
    post.p = 0.5 * (post.p + post.p.transpose()).eval();
    return post;
}

KalmanState kalman_predict(const KalmanState& state, const NoiseCov& noise) {
    if (state.f.rows() != state.x.size() || noise.q.rows() != state.x.size())
        throw ValidationError("kalman_predict: dimension mismatch");
    KalmanState next;
    next.f = state.f;
    next.x = state.f * state.x;
    next.p = state.f * state.p * state.f.transpose() + noise.q;
    next.p = 0.5 * (next.p + next.p.transpose()).eval();
    if (!next.x.allFinite() || !next.p.allFinite())
        throw NumericalError("kalman_predict: propagation produced non-finite values");
    return next;
}

std::vector<FilterStep> run_filter(const LambdaEstimate& lambda_hat, const Eigen::VectorXd& x0,
                                   const Eigen::MatrixXd& p0, const ObservationMask& mask,
                                   const NoiseCov& noise,
                                   std::span<const Eigen::VectorXd> observations) {
    const Eigen::Index nt = lambda_hat.matrix.rows();
    if (x0.size() != nt || p0.rows() != nt || p0.cols() != nt)
        throw ValidationError("run_filter: x0/P0 do not match Lambda dimensions");
    if (static_cast<Eigen::Index>(mask.nodes) * mask.topics != nt)
        throw ValidationError("run_filter: mask does not match Lambda dimensions");
    noise.validate(static_cast<int>(nt), mask.observed_dim());

    KalmanState state;
    state.x = x0;
    state.p = p0;
    state.f = make_transition(lambda_hat);

    std::vector<FilterStep> steps;
    steps.reserve(observations.size());
    for (const auto& y : observations) {
        const KalmanState post = kalman_update(state, y, mask, noise);
        const KalmanState next = kalman_predict(post, noise);
        steps.push_back({post.x, next.x, post.p, next.p});
        state = next;
    }
    return steps;
}

}  // namespace netdiff
