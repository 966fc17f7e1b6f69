#include "netdiff/operator_learning.hpp"

#include <cmath>
#include <sstream>

#include "netdiff/errors.hpp"

namespace netdiff {

Eigen::VectorXd vectorize(const StateMatrix& x) {
    return Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
}

StateMatrix devectorize(const Eigen::VectorXd& v, int nodes, int topics) {
    if (nodes < 1 || topics < 1 || v.size() != static_cast<Eigen::Index>(nodes) * topics) {
        std::ostringstream os;
        os << "devectorize: vector of length " << v.size() << " is not " << nodes << "*" << topics;
        throw ValidationError(os.str());
    }
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), nodes, topics);
}

LambdaEstimate initial_lambda(const SupraLaplacian& laplacian, int topics, StructureMode mode) {
    if (topics < 1) throw ValidationError("initial_lambda: topics must be >= 1");
    const int n = laplacian.total_nodes();
    LambdaEstimate est;
    est.nodes = n;
    est.topics = topics;
    est.structure_mode = mode;
    est.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n) * topics,
                                       static_cast<Eigen::Index>(n) * topics);
    for (int k = 0; k < topics; ++k)
        est.matrix.block(k * n, k * n, n, n) = -laplacian.matrix;
    return est;
}

Eigen::MatrixXd project_kron_blocks(const Eigen::MatrixXd& m, int nodes, int topics) {
    if (m.rows() != m.cols() || m.rows() != static_cast<Eigen::Index>(nodes) * topics)
        throw ValidationError("project_kron_blocks: matrix does not match nodes*topics");
    Eigen::MatrixXd mean_block = Eigen::MatrixXd::Zero(nodes, nodes);
    for (int k = 0; k < topics; ++k) mean_block += m.block(k * nodes, k * nodes, nodes, nodes);
    mean_block /= topics;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    for (int k = 0; k < topics; ++k) out.block(k * nodes, k * nodes, nodes, nodes) = mean_block;
    return out;
}

bool is_kron_structured(const Eigen::MatrixXd& m, int nodes, int topics, double tol) {
    if (m.rows() != m.cols() || m.rows() != static_cast<Eigen::Index>(nodes) * topics) return false;
    const Eigen::MatrixXd first = m.block(0, 0, nodes, nodes);
    for (int k = 0; k < topics; ++k)
        for (int l = 0; l < topics; ++l) {
            const Eigen::MatrixXd block = m.block(k * nodes, l * nodes, nodes, nodes);
            const Eigen::MatrixXd expected =
                (k == l) ? first : Eigen::MatrixXd::Zero(nodes, nodes);
            if ((block - expected).cwiseAbs().maxCoeff() > tol) return false;
        }
    return true;
}

LearnResult learn_lambda(const Trajectory& trajectory, const LambdaEstimate& lambda0,
                         const LearnConfig& config) {
    trajectory.validate();
    if (trajectory.length() < 2)
        throw ValidationError("learn_lambda: trajectory needs at least 2 timestamps");
    for (int k = 1; k < trajectory.length(); ++k)
        if (std::abs(trajectory.timestamps[k] - trajectory.timestamps[k - 1] - 1.0) > 1e-9)
            throw ValidationError("learn_lambda: timestamps must be unit-spaced");
    const int n = trajectory.nodes();
    const int t_dim = trajectory.topics();
    const Eigen::Index nt = static_cast<Eigen::Index>(n) * t_dim;
    if (lambda0.matrix.rows() != nt || lambda0.matrix.cols() != nt)
        throw ValidationError("learn_lambda: lambda0 does not match trajectory dimensions");
    if (!lambda0.matrix.allFinite())
        throw ValidationError("learn_lambda: lambda0 has non-finite entries");
    if (!(config.gamma > 0.0)) throw ValidationError("learn_lambda: gamma must be > 0");
    if (config.max_iters < 1) throw ValidationError("learn_lambda: max_iters must be >= 1");

    const double eta = config.eta > 0.0 ? config.eta : 1e-4 * std::sqrt(static_cast<double>(nt));
    const int pairs = trajectory.length() - 1;

    std::vector<Eigen::VectorXd> x(trajectory.length());
    for (int k = 0; k < trajectory.length(); ++k) x[k] = vectorize(trajectory.states[k]);

    LearnResult result;
    result.lambda = lambda0;
    result.lambda.nodes = n;
    result.lambda.topics = t_dim;
    Eigen::MatrixXd& lam = result.lambda.matrix;
    const bool constrained = lambda0.structure_mode == StructureMode::kron_constrained;

    double gamma = config.gamma;
    int rising_streak = 0;

    for (int sweep = 0; sweep < config.max_iters; ++sweep) {
        bool all_below = true;
        double norm_sum = 0.0;
        result.final_residuals.clear();
        result.final_residuals.reserve(pairs);
        for (int p = 0; p < pairs; ++p) {
            const Eigen::VectorXd eps = x[p + 1] - matrix_exp_apply(lam, 1.0, x[p]);
            if (!eps.allFinite())
                throw NumericalError(
                    "learn_lambda: residual overflowed to non-finite values; "
                    "reduce gamma");
            const double norm = eps.norm();
            norm_sum += norm;
            if (norm >= eta) all_below = false;
            lam.noalias() += gamma * eps * x[p].transpose();
            if (!lam.allFinite())
                throw NumericalError(
                    "learn_lambda: operator overflowed to non-finite values; "
                    "reduce gamma");
            if (constrained) lam = project_kron_blocks(lam, n, t_dim);
            result.final_residuals.push_back(eps);
        }
        result.sweep_residuals.push_back(norm_sum / pairs);
        result.sweeps = sweep + 1;
        if (all_below) {
            result.converged = true;
            break;
        }
        const std::size_t s = result.sweep_residuals.size();
        if (s >= 2 && result.sweep_residuals[s - 1] > result.sweep_residuals[s - 2]) {
            if (++rising_streak >= config.divergence_patience) {
                gamma *= 0.5;
                rising_streak = 0;
                if (gamma < 1e-12) {
                    std::ostringstream os;
                    os << "learn_lambda: diverged; gamma underflowed below 1e-12 after repeated "
                          "halving (last sweep mean residual "
                       << result.sweep_residuals.back() << ")";
                    throw NumericalError(os.str());
                }
            }
        } else {
            rising_streak = 0;
        }
    }
    result.final_gamma = gamma;
    return result;
}

Eigen::MatrixXd residual_covariance(std::span<const Eigen::VectorXd> residuals) {
    if (residuals.size() < 2)
        throw ValidationError("residual_covariance: need at least 2 residual vectors");
    const Eigen::Index dim = residuals.front().size();
    for (const auto& r : residuals)
        if (r.size() != dim)
            throw ValidationError("residual_covariance: residuals must share dimensions");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& r : residuals) mean += r;
    mean /= static_cast<double>(residuals.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& r : residuals) {
        const Eigen::VectorXd centered = r - mean;
        cov.noalias() += centered * centered.transpose();
    }
    cov /= static_cast<double>(residuals.size() - 1);
    cov = 0.5 * (cov + cov.transpose()).eval();
    cov.diagonal().array() += 1e-9;
    return cov;
}

}  // namespace netdiff
