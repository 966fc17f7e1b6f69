#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "netdiff/dynamics.hpp"
#include "netdiff/errors.hpp"
#include "netdiff/multinet.hpp"
#include "netdiff/operator_learning.hpp"
#include "test_helpers.hpp"

using namespace netdiff;

namespace {

StateMatrix random_states(std::mt19937_64& rng, int nodes, int topics) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    StateMatrix x(nodes, topics);
    for (int i = 0; i < nodes; ++i)
        for (int j = 0; j < topics; ++j) x(i, j) = u(rng);
    return x;
}

/// Noiseless unit-spaced trajectory driven by exp(-L) on a small network.
Trajectory drift_trajectory(const SupraLaplacian& supra, const StateMatrix& x0, int steps) {
    NoiseSpec noise{Eigen::MatrixXd::Zero(x0.rows(), x0.cols())};
    return simulate_ou(supra, x0, noise, 1.0, steps, 1, {.exact_drift = true});
}

double mean_one_step_error(const Trajectory& traj, const Eigen::MatrixXd& lam) {
    double sum = 0.0;
    for (int p = 0; p + 1 < traj.length(); ++p) {
        const Eigen::VectorXd x = vectorize(traj.states[p]);
        const Eigen::VectorXd next = vectorize(traj.states[p + 1]);
        sum += (next - matrix_exp_apply(lam, 1.0, x)).norm();
    }
    return sum / (traj.length() - 1);
}

}  // namespace

TEST_CASE("vectorization stacks columns: node i topic k lands at k*N + i") {
    std::mt19937_64 rng(21);
    const StateMatrix x = random_states(rng, 5, 3);
    const Eigen::VectorXd v = vectorize(x);
    REQUIRE(v.size() == 15);
    for (int i = 0; i < 5; ++i)
        for (int k = 0; k < 3; ++k) CHECK(v(k * 5 + i) == x(i, k));
    CHECK((devectorize(v, 5, 3) - x).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS((void)devectorize(v, 4, 3), ValidationError);
}

TEST_CASE("matrix dynamics commute with vectorization through the Kronecker lift") {
    std::mt19937_64 rng(22);
    const int n = 4, t_dim = 3;
    Eigen::MatrixXd a(n, n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = u(rng);
    const StateMatrix x = random_states(rng, n, t_dim);

    const Eigen::MatrixXd lifted =
        testutil::kron(Eigen::MatrixXd::Identity(t_dim, t_dim), a);
    const Eigen::VectorXd via_lift = lifted * vectorize(x);
    const Eigen::VectorXd via_matrix = vectorize(a * x);
    CHECK((via_lift - via_matrix).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("initial operator is the blockwise negative Laplacian") {
    std::mt19937_64 rng(23);
    const auto supra = assemble_supra(testutil::random_network(rng, 2, 4));
    const int n = supra.total_nodes();
    const auto est = initial_lambda(supra, 3);

    REQUIRE(est.matrix.rows() == 3 * n);
    CHECK(est.nodes == n);
    CHECK(est.topics == 3);
    for (int k = 0; k < 3; ++k)
        CHECK((est.matrix.block(k * n, k * n, n, n) + supra.matrix).cwiseAbs().maxCoeff() == 0.0);
    CHECK(is_kron_structured(est.matrix, n, 3));

    const Eigen::MatrixXd oracle =
        testutil::kron(Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd(-supra.matrix));
    CHECK((est.matrix - oracle).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS((void)initial_lambda(supra, 0), ValidationError);
}

TEST_CASE("block projection averages the diagonal and is idempotent") {
    Eigen::MatrixXd m(4, 4);
    m << 1.0, 2.0, 9.0, 9.0,
         3.0, 4.0, 9.0, 9.0,
         9.0, 9.0, 5.0, 6.0,
         9.0, 9.0, 7.0, 8.0;
    Eigen::MatrixXd expected(4, 4);
    expected << 3.0, 4.0, 0.0, 0.0,
                5.0, 6.0, 0.0, 0.0,
                0.0, 0.0, 3.0, 4.0,
                0.0, 0.0, 5.0, 6.0;

    const Eigen::MatrixXd p = project_kron_blocks(m, 2, 2);
    CHECK((p - expected).cwiseAbs().maxCoeff() == 0.0);
    CHECK((project_kron_blocks(p, 2, 2) - p).cwiseAbs().maxCoeff() == 0.0);
    CHECK(is_kron_structured(p, 2, 2));
    CHECK_FALSE(is_kron_structured(m, 2, 2));
    CHECK_THROWS_AS((void)project_kron_blocks(m, 3, 2), ValidationError);
}

TEST_CASE("learning from the exact operator converges in one sweep") {
    std::mt19937_64 rng(24);
    const auto supra = assemble_supra(testutil::random_network(rng, 2, 2));
    const auto traj = drift_trajectory(supra, random_states(rng, 4, 2), 10);

    const auto result = learn_lambda(traj, initial_lambda(supra, 2), {.gamma = 1e-3});
    CHECK(result.converged);
    CHECK(result.sweeps == 1);
    CHECK(result.final_gamma == 1e-3);
    CHECK(static_cast<int>(result.final_residuals.size()) == traj.length() - 1);
}

TEST_CASE("a perturbed operator is corrected to 1% one-step error") {
    std::mt19937_64 rng(25);
    const auto net = testutil::random_network(rng, 2, 2);  // 4 nodes total
    const auto supra = assemble_supra(net);
    const auto traj = drift_trajectory(supra, random_states(rng, 4, 2), 30);

    auto lambda0 = initial_lambda(supra, 2);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    for (Eigen::Index i = 0; i < lambda0.matrix.rows(); ++i)
        for (Eigen::Index j = 0; j < lambda0.matrix.cols(); ++j)
            lambda0.matrix(i, j) += jitter(rng);

    const double initial_error = mean_one_step_error(traj, lambda0.matrix);
    REQUIRE(initial_error > 1e-3);  // the perturbation must actually hurt

    LearnConfig config;
    config.gamma = 0.05;
    config.eta = 1e-12;  // run on error reduction, not the threshold
    config.max_iters = 500;
    const auto result = learn_lambda(traj, lambda0, config);

    const double final_error = mean_one_step_error(traj, result.lambda.matrix);
    CHECK(result.sweeps <= 500);
    CHECK(final_error <= 0.01 * initial_error);
}

TEST_CASE("constrained learning keeps the operator block-structured") {
    std::mt19937_64 rng(26);
    auto supra = assemble_supra(testutil::random_network(rng, 2, 2));
    // Slow the mixing so the trajectory keeps exciting every mode instead
    // of collapsing to consensus within a step or two.
    supra.matrix *= 0.5 / supra.matrix.cwiseAbs().colwise().sum().maxCoeff();
    const auto traj = drift_trajectory(supra, random_states(rng, 4, 3), 12);

    auto lambda0 = initial_lambda(supra, 3, StructureMode::kron_constrained);
    lambda0.matrix *= 0.5;  // substantial mismatch
    const double before = mean_one_step_error(traj, lambda0.matrix);
    const auto result = learn_lambda(traj, lambda0, {.gamma = 0.02, .max_iters = 50});

    CHECK(result.lambda.structure_mode == StructureMode::kron_constrained);
    CHECK(is_kron_structured(result.lambda.matrix, 4, 3, 1e-10));
    CHECK(mean_one_step_error(traj, result.lambda.matrix) < before);
}

TEST_CASE("the divergence guard halves the gain until learning stabilizes") {
    // Constant scalar state x == 1, true operator 0. The update map is
    // lambda <- lambda + gamma * (1 - exp(lambda)), stable only below
    // gamma = 2: at 2.5 the residual grows every sweep until the guard
    // halves the gain, after which the iteration contracts.
    Trajectory traj;
    traj.timestamps = {0.0, 1.0};
    traj.states = {Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1)};
    LambdaEstimate lambda0;
    lambda0.nodes = 1;
    lambda0.topics = 1;
    lambda0.matrix = Eigen::MatrixXd::Constant(1, 1, 0.1);

    LearnConfig config;
    config.gamma = 2.5;
    config.max_iters = 500;
    config.divergence_patience = 3;
    const auto result = learn_lambda(traj, lambda0, config);
    CHECK(result.converged);
    CHECK(result.final_gamma < 2.5);
    CHECK(std::abs(result.lambda.matrix(0, 0)) < 1e-3);
}

TEST_CASE("a hopeless gain raises a numerical error instead of looping") {
    std::mt19937_64 rng(27);
    const auto supra = assemble_supra(testutil::random_network(rng, 2, 2));
    const auto traj = drift_trajectory(supra, random_states(rng, 4, 2), 10);
    auto lambda0 = initial_lambda(supra, 2);
    lambda0.matrix *= 0.5;

    CHECK_THROWS_AS((void)learn_lambda(traj, lambda0, {.gamma = 1e6, .max_iters = 5000}),
                    NumericalError);
}

TEST_CASE("learning validates trajectory spacing and dimensions") {
    std::mt19937_64 rng(28);
    const auto supra = assemble_supra(testutil::random_network(rng, 2, 2));
    auto traj = drift_trajectory(supra, random_states(rng, 4, 2), 5);
    const auto lambda0 = initial_lambda(supra, 2);

    SUBCASE("non-unit spacing") {
        traj.timestamps[2] = 1.5;
        CHECK_THROWS_AS((void)learn_lambda(traj, lambda0), ValidationError);
    }
    SUBCASE("wrong operator dimensions") {
        CHECK_THROWS_AS((void)learn_lambda(traj, initial_lambda(supra, 3)), ValidationError);
    }
    SUBCASE("too short") {
        traj.timestamps.resize(1);
        traj.states.resize(1);
        CHECK_THROWS_AS((void)learn_lambda(traj, lambda0), ValidationError);
    }
    SUBCASE("bad gain") {
        CHECK_THROWS_AS((void)learn_lambda(traj, lambda0, {.gamma = 0.0}), ValidationError);
    }
}

TEST_CASE("residual covariance matches the hand formula plus ridge") {
    std::vector<Eigen::VectorXd> residuals(2, Eigen::VectorXd(2));
    residuals[0] << 1.0, 0.0;
    residuals[1] << -1.0, 0.0;

    const Eigen::MatrixXd cov = residual_covariance(residuals);
    CHECK(std::abs(cov(0, 0) - (2.0 + 1e-9)) < 1e-15);
    CHECK(std::abs(cov(1, 1) - 1e-9) < 1e-15);
    CHECK(cov(0, 1) == 0.0);
    CHECK(cov(1, 0) == 0.0);

    CHECK_THROWS_AS((void)residual_covariance(std::vector<Eigen::VectorXd>{residuals[0]}),
                    ValidationError);
    residuals[1] = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS((void)residual_covariance(residuals), ValidationError);
}

TEST_CASE("residual covariance of scattered vectors is symmetric PSD") {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Eigen::VectorXd> residuals;
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd r(5);
        for (int i = 0; i < 5; ++i) r(i) = gauss(rng);
        residuals.push_back(r);
    }
    const Eigen::MatrixXd cov = residual_covariance(residuals);
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
}
