#include "netdiff/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "netdiff/errors.hpp"
#include "netdiff/random.hpp"

namespace netdiff {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) throw ValidationError(std::string(what) + ": non-finite entries");
}

bool exactly_symmetric(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (a(i, j) != a(j, i)) return false;
    return true;
}

Eigen::MatrixXd expm_symmetric(const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    if (eig.info() != Eigen::Success)
        throw NumericalError("matrix_exp: symmetric eigendecomposition failed");
    return eig.eigenvectors() * eig.eigenvalues().array().exp().matrix().asDiagonal() *
           eig.eigenvectors().transpose();
}

// Pade approximation with scaling and squaring (Higham 2005 coefficients).
Eigen::MatrixXd expm_pade(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
    const double norm = a.cwiseAbs().colwise().sum().maxCoeff();  // 1-norm

    Eigen::MatrixXd u, v;
    int squarings = 0;

    const auto solve_and_square = [&](int s) {
        Eigen::MatrixXd r = (v - u).partialPivLu().solve(v + u);
        for (int k = 0; k < s; ++k) r = r * r;
        return r;
    };

    if (norm <= 1.495585217958292e-2) {
        static const double b[] = {120.0, 60.0, 12.0, 1.0};
        const Eigen::MatrixXd a2 = a * a;
        u = a * (b[3] * a2 + b[1] * identity);
        v = b[2] * a2 + b[0] * identity;
    } else if (norm <= 2.539398330063230e-1) {
        static const double b[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
        const Eigen::MatrixXd a2 = a * a;
        const Eigen::MatrixXd a4 = a2 * a2;
        u = a * (b[5] * a4 + b[3] * a2 + b[1] * identity);
        v = b[4] * a4 + b[2] * a2 + b[0] * identity;
    } else if (norm <= 9.504178996162932e-1) {
        static const double b[] = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                   25200.0,    1512.0,    56.0,      1.0};
        const Eigen::MatrixXd a2 = a * a;
        const Eigen::MatrixXd a4 = a2 * a2;
        const Eigen::MatrixXd a6 = a4 * a2;
        u = a * (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * identity);
        v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * identity;
    } else if (norm <= 2.097847961257068) {
        static const double b[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                                   30270240.0,    2162160.0,    110880.0,     3960.0,
                                   90.0,          1.0};
        const Eigen::MatrixXd a2 = a * a;
        const Eigen::MatrixXd a4 = a2 * a2;
        const Eigen::MatrixXd a6 = a4 * a2;
        const Eigen::MatrixXd a8 = a6 * a2;
        u = a * (b[9] * a8 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * identity);
        v = b[8] * a8 + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * identity;
    } else {
        static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
        const double theta13 = 5.371920351148152;
        squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta13))));
        const Eigen::MatrixXd scaled = a / std::ldexp(1.0, squarings);
        const Eigen::MatrixXd a2 = scaled * scaled;
        const Eigen::MatrixXd a4 = a2 * a2;
        const Eigen::MatrixXd a6 = a4 * a2;
        u = scaled * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                      b[3] * a2 + b[1] * identity);
        v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 +
            b[0] * identity;
    }
    return solve_and_square(squarings);
}

}  // namespace

void Trajectory::validate() const {
    if (states.empty() || timestamps.size() != states.size())
        throw ValidationError("trajectory: timestamps and states must be non-empty and aligned");
    for (std::size_t k = 1; k < timestamps.size(); ++k)
        if (!(timestamps[k] > timestamps[k - 1]))
            throw ValidationError("trajectory: timestamps must be strictly increasing");
    const auto rows = states.front().rows();
    const auto cols = states.front().cols();
    if (rows < 1 || cols < 1) throw ValidationError("trajectory: states must be non-empty matrices");
    for (const auto& s : states) {
        if (s.rows() != rows || s.cols() != cols)
            throw ValidationError("trajectory: all states must share dimensions");
        require_finite(s, "trajectory state");
    }
}

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a, double t) {
    if (a.rows() < 1 || a.rows() != a.cols())
        throw ValidationError("matrix_exp: matrix must be square and non-empty");
    require_finite(a, "matrix_exp");
    if (!std::isfinite(t)) throw ValidationError("matrix_exp: t must be finite");

    const Eigen::MatrixXd scaled = t * a;
    if (t == 0.0 || scaled.cwiseAbs().maxCoeff() == 0.0)
        return Eigen::MatrixXd::Identity(a.rows(), a.cols());
    if (exactly_symmetric(scaled)) return expm_symmetric(scaled);
    return expm_pade(scaled);
}

Eigen::MatrixXd matrix_exp_apply(const Eigen::MatrixXd& a, double t, const Eigen::MatrixXd& v) {
    if (a.rows() < 1 || a.rows() != a.cols())
        throw ValidationError("matrix_exp_apply: matrix must be square and non-empty");
    if (a.cols() != v.rows())
        throw ValidationError("matrix_exp_apply: operand rows do not match the matrix");
    require_finite(a, "matrix_exp_apply");
    require_finite(v, "matrix_exp_apply operand");
    if (!std::isfinite(t)) throw ValidationError("matrix_exp_apply: t must be finite");

    const double norm = std::abs(t) * a.cwiseAbs().colwise().sum().maxCoeff();
    if (t == 0.0 || norm == 0.0) return v;

    const int substeps = static_cast<int>(std::min(1e6, std::ceil(norm)));
    const double h = t / substeps;
    Eigen::MatrixXd y = v;
    Eigen::MatrixXd term;
    for (int s = 0; s < substeps; ++s) {
        term = y;
        for (int k = 1; k <= 64; ++k) {
            term = (h / k) * (a * term);
            y += term;
            if (term.cwiseAbs().maxCoeff() <=
                std::numeric_limits<double>::epsilon() * y.cwiseAbs().maxCoeff())
                break;
        }
    }
    return y;
}

StateMatrix predict_drift(const Eigen::MatrixXd& laplacian, const StateMatrix& x0, double dt) {
    if (laplacian.rows() != laplacian.cols() || laplacian.rows() != x0.rows()) {
        std::ostringstream os;
        os << "predict_drift: L is " << laplacian.rows() << "x" << laplacian.cols()
           << " but states have " << x0.rows() << " rows";
        throw ValidationError(os.str());
    }
    if (!(dt >= 0.0)) throw ValidationError("predict_drift: dt must be >= 0");
    require_finite(x0, "predict_drift states");
    if (dt == 0.0) return x0;
    return matrix_exp(laplacian, -dt) * x0;
}

StateMatrix predict_drift(const SupraLaplacian& laplacian, const StateMatrix& x0, double dt) {
    return predict_drift(laplacian.matrix, x0, dt);
}

Trajectory simulate_ou(const Eigen::MatrixXd& laplacian, const StateMatrix& x0,
                       const NoiseSpec& noise, double dt, int steps, std::uint64_t seed,
                       const OuOptions& options) {
    if (laplacian.rows() != laplacian.cols() || laplacian.rows() != x0.rows())
        throw ValidationError("simulate_ou: dimension mismatch between L and states");
    if (noise.sigma.rows() != x0.rows() || noise.sigma.cols() != x0.cols())
        throw ValidationError("simulate_ou: sigma must match state dimensions");
    if (!noise.sigma.allFinite() || noise.sigma.minCoeff() < 0.0)
        throw ValidationError("simulate_ou: sigma entries must be finite and >= 0");
    if (!(dt > 0.0)) throw ValidationError("simulate_ou: dt must be > 0");
    if (steps < 1) throw ValidationError("simulate_ou: steps must be >= 1");
    require_finite(x0, "simulate_ou states");

    Trajectory traj;
    traj.timestamps.reserve(steps + 1);
    traj.states.reserve(steps + 1);

    if (!options.exact_drift && exactly_symmetric(laplacian)) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian);
        const double rho = (1.0 - dt * eig.eigenvalues().array()).abs().maxCoeff();
        if (rho > 1.0 + 1e-12) {
            std::ostringstream os;
            os << "Euler step amplifies: spectral radius of I - dt*L is " << rho
               << "; reduce dt or enable exact_drift";
            traj.warnings.push_back(os.str());
        }
    }

    Eigen::MatrixXd stepper;
    if (options.exact_drift) stepper = matrix_exp(laplacian, -dt);

    auto rng = make_rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double root_dt = std::sqrt(dt);
    const int n = static_cast<int>(x0.rows());
    const int t_dim = static_cast<int>(x0.cols());

    StateMatrix x = x0;
    traj.timestamps.push_back(options.t0);
    traj.states.push_back(x);
    StateMatrix shock(n, t_dim);
    for (int k = 1; k <= steps; ++k) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < t_dim; ++j) shock(i, j) = gauss(rng);
        if (options.exact_drift)
            x = stepper * x + root_dt * noise.sigma.cwiseProduct(shock);
        else
            x = x - dt * (laplacian * x) + root_dt * noise.sigma.cwiseProduct(shock);
        traj.timestamps.push_back(options.t0 + k * dt);
        traj.states.push_back(x);
    }
    return traj;
}

Trajectory simulate_ou(const SupraLaplacian& laplacian, const StateMatrix& x0,
                       const NoiseSpec& noise, double dt, int steps, std::uint64_t seed,
                       const OuOptions& options) {
    return simulate_ou(laplacian.matrix, x0, noise, dt, steps, seed, options);
}

namespace {

double* constant_slot(MultilayerNetwork& net, const UnknownConstant& u) {
    if (u.kind == UnknownConstant::Kind::intra) {
        for (auto& l : net.layers)
            if (l.layer_id == u.layer) return &l.diffusion_constant;
        throw ValidationError("fit_diffusion_constants: unknown refers to nonexistent layer " +
                              std::to_string(u.layer));
    }
    for (auto& c : net.couplings)
        if (c.from_layer == u.from && c.to_layer == u.to) return &c.diffusion_constant;
    throw ValidationError("fit_diffusion_constants: unknown refers to nonexistent coupling (" +
                          std::to_string(u.from) + "," + std::to_string(u.to) + ")");
}

double golden_section(const std::function<double(double)>& f, double lo, double hi,
                      double* best_value) {
    constexpr double invphi = 0.6180339887498949;
    double x1 = hi - invphi * (hi - lo);
    double x2 = lo + invphi * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    for (int iter = 0; iter < 200 && (hi - lo) > 1e-10; ++iter) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = f(x2);
        }
    }
    const double mid = 0.5 * (lo + hi);
    *best_value = f(mid);
    return mid;
}

}  // namespace

DiffusionFit fit_diffusion_constants(const MultilayerNetwork& network,
                                     std::span<const UnknownConstant> unknowns,
                                     const StateMatrix& x_t0, const StateMatrix& x_t1, double dt,
                                     const FitOptions& options) {
    if (unknowns.empty()) throw ValidationError("fit_diffusion_constants: no unknown constants");
    if (!(dt > 0.0)) throw ValidationError("fit_diffusion_constants: dt must be > 0");
    if (x_t0.rows() != x_t1.rows() || x_t0.cols() != x_t1.cols())
        throw ValidationError("fit_diffusion_constants: state matrices must share dimensions");
    if (x_t0.rows() != network.total_nodes())
        throw ValidationError("fit_diffusion_constants: states do not match network size");

    MultilayerNetwork work = network;
    std::vector<double*> slots;
    slots.reserve(unknowns.size());
    for (const auto& u : unknowns) slots.push_back(constant_slot(work, u));

    const auto objective = [&]() {
        return (x_t1 - predict_drift(assemble_supra(work), x_t0, dt)).norm();
    };

    std::vector<double> initial(slots.size());
    for (std::size_t k = 0; k < slots.size(); ++k) initial[k] = *slots[k];

    const double g0 = objective();
    double g_best = g0;
    for (int pass = 0; pass < options.max_passes; ++pass) {
        const double g_before = g_best;
        for (std::size_t k = 0; k < slots.size(); ++k) {
            const double saved = *slots[k];
            double candidate_value = 0.0;
            const double candidate = golden_section(
                [&](double d) {
                    *slots[k] = d;
                    return objective();
                },
                0.0, options.d_max, &candidate_value);
            if (candidate_value < g_best) {
                *slots[k] = candidate;
                g_best = candidate_value;
            } else {
                *slots[k] = saved;
            }
        }
        if (g_before - g_best < options.rel_tol * std::max(g_before, 1e-30)) break;
    }

    DiffusionFit fit;
    fit.improved = g_best < g0;
    if (!fit.improved) {
        for (std::size_t k = 0; k < slots.size(); ++k) *slots[k] = initial[k];
        g_best = g0;
    }
    fit.constants.resize(slots.size());
    for (std::size_t k = 0; k < slots.size(); ++k) fit.constants[k] = *slots[k];
    const StateMatrix residual = x_t1 - predict_drift(assemble_supra(work), x_t0, dt);
    fit.sigma_hat = residual.cwiseAbs() / std::sqrt(dt);
    fit.residual = g_best;
    return fit;
}

}  // namespace netdiff
