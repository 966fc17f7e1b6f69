#pragma once

// Shared fixtures and independent oracles for the test suite. The oracles
// deliberately use different constructions than the library (Kronecker
// sums over selector matrices, plain Taylor series) so agreement is
// meaningful.

#include <Eigen/Dense>
#include <atomic>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "netdiff/multinet.hpp"

namespace testutil {

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// M x M selector with a single 1 at (row, col), both 0-based.
inline Eigen::MatrixXd selector(int m, int row, int col) {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(m, m);
    e(row, col) = 1.0;
    return e;
}

/// Plain 30-term Taylor series for exp(A); accurate to ~1e-12 only while
/// the 1-norm of A stays below about 3.
inline Eigen::MatrixXd taylor_exp(const Eigen::MatrixXd& a, int terms = 30) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    Eigen::MatrixXd power = sum;
    for (int k = 1; k <= terms; ++k) {
        power = (power * a) / static_cast<double>(k);
        sum += power;
    }
    return sum;
}

/// Supra-Laplacian via the Kronecker selector-matrix construction for
/// equal layer sizes: intra terms on the diagonal selectors, inter-layer
/// degree and adjacency terms per directed coupling. Assumes every layer
/// has n nodes.
inline Eigen::MatrixXd kron_supra_oracle(const netdiff::MultilayerNetwork& net) {
    const int m = net.layer_count();
    const int n = net.layers.front().node_count;
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(m * n, m * n);
    for (int a = 0; a < m; ++a) {
        const auto& layer = net.layers[a];
        const Eigen::MatrixXd degree = layer.adjacency.rowwise().sum().asDiagonal();
        total += kron(selector(m, a, a),
                      layer.diffusion_constant * (degree - layer.adjacency));
    }
    // Each coupling contributes its stored direction; the reverse direction
    // with the same constant is implied unless stored explicitly.
    std::set<std::pair<int, int>> stored;
    for (const auto& c : net.couplings) stored.insert({c.from_layer, c.to_layer});
    auto add_direction = [&](int a, int b, const Eigen::MatrixXd& w, double d) {
        const Eigen::MatrixXd k_ab = w.rowwise().sum().asDiagonal();
        total += d * (kron(selector(m, a - 1, a - 1), k_ab) - kron(selector(m, a - 1, b - 1), w));
    };
    for (const auto& c : net.couplings) {
        add_direction(c.from_layer, c.to_layer, c.weights, c.diffusion_constant);
        if (!stored.count({c.to_layer, c.from_layer}))
            add_direction(c.to_layer, c.from_layer, c.weights.transpose(), c.diffusion_constant);
    }
    return total;
}

/// Random connected multiplex network with equal layer sizes and positive
/// random weights; intended for property tests.
inline netdiff::MultilayerNetwork random_network(std::mt19937_64& rng, int layers, int nodes,
                                                 double edge_prob = 0.6) {
    std::uniform_real_distribution<double> weight(0.5, 1.5);
    std::uniform_real_distribution<double> constant(0.1, 2.0);
    std::bernoulli_distribution edge(edge_prob);
    netdiff::MultilayerNetwork net;
    for (int a = 0; a < layers; ++a) {
        netdiff::LayerSpec layer;
        layer.layer_id = a + 1;
        layer.node_count = nodes;
        layer.adjacency = Eigen::MatrixXd::Zero(nodes, nodes);
        for (int i = 0; i < nodes; ++i)
            for (int j = i + 1; j < nodes; ++j)
                if (edge(rng)) layer.adjacency(i, j) = layer.adjacency(j, i) = weight(rng);
        // Ring fallback keeps each layer connected regardless of the draw.
        for (int i = 0; i + 1 < nodes; ++i)
            if (layer.adjacency(i, i + 1) == 0.0)
                layer.adjacency(i, i + 1) = layer.adjacency(i + 1, i) = weight(rng);
        layer.diffusion_constant = constant(rng);
        net.layers.push_back(std::move(layer));
    }
    for (int a = 0; a < layers; ++a)
        for (int b = a + 1; b < layers; ++b) {
            netdiff::InterCoupling c;
            c.from_layer = a + 1;
            c.to_layer = b + 1;
            c.weights = Eigen::MatrixXd::Zero(nodes, nodes);
            for (int i = 0; i < nodes; ++i) c.weights(i, i) = weight(rng);
            c.diffusion_constant = constant(rng);
            net.couplings.push_back(std::move(c));
        }
    return net;
}

/// Unique scratch directory under the system temp dir, removed on
/// destruction.
class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        const auto base = std::filesystem::temp_directory_path();
        path_ = base / ("netdiff_test_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

}  // namespace testutil
