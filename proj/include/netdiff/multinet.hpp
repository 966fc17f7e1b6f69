#pragma once

// Interconnected multilayer networks and their supra-Laplacian.
//
// A network is an ordered list of layers (weighted undirected graphs, each
// with its own diffusion constant) plus inter-layer couplings (nonnegative
// weight matrices between two layers, with their own constants). Flattening
// the whole structure into one graph of N_total nodes, layer-major, gives
// the supra-Laplacian
//
//   L = L_intra + L_inter
//
// where L_intra is the block-diagonal direct sum of D^(a) * (K^(a) - W^(a))
// and L_inter adds, per directed coupling (a,b), the inter-layer degree
// D^(a,b) * K^(a,b) on the (a,a) diagonal block and subtracts
// D^(a,b) * W^(a,b) on the (a,b) off-diagonal block. Every row of L sums
// to zero; for symmetric couplings L is symmetric positive semidefinite.

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace netdiff {

struct LayerSpec {
    int layer_id = 0;            // 1-based, contiguous 1..M in network order
    int node_count = 0;
    Eigen::MatrixXd adjacency;   // symmetric, zero diagonal, weights >= 0
    double diffusion_constant = 1.0;
};

// Directed coupling from `from_layer` to `to_layer`. If the reverse
// direction is not stored it is implied as the transpose with the same
// constant; if both directions are stored their weights must be mutual
// transposes (the constants may differ).
struct InterCoupling {
    int from_layer = 0;
    int to_layer = 0;
    Eigen::MatrixXd weights;     // N_from x N_to, entries >= 0
    double diffusion_constant = 1.0;
};

struct MultilayerNetwork {
    std::vector<LayerSpec> layers;
    std::vector<InterCoupling> couplings;

    int layer_count() const { return static_cast<int>(layers.size()); }
    int total_nodes() const;
    const LayerSpec& layer(int layer_id) const;

    /// Throws ValidationError naming the offending layer/entry on any
    /// violated invariant (asymmetry, negative weight, bad ids, ...).
    void validate() const;
};

// Assembled operator plus the layer-major index map.
struct SupraLaplacian {
    Eigen::MatrixXd matrix;
    std::vector<int> layer_offsets;  // offset of each layer's first node
    std::vector<int> layer_sizes;

    int total_nodes() const { return static_cast<int>(matrix.rows()); }

    /// Global index of node `local` (0-based) in layer `layer_id` (1-based).
    int node_index(int layer_id, int local) const;

    /// Inverse lookup: global index -> (layer_id, local).
    std::pair<int, int> locate(int global) const;
};

/// D^(a) * (K - W) for one layer, K = diag(row sums of W). Rows sum to zero.
Eigen::MatrixXd build_intra_laplacian(const LayerSpec& layer);

/// Block assembly of the full supra-Laplacian. Validates the network first.
SupraLaplacian assemble_supra(const MultilayerNetwork& network);

/// Layer-major global index without assembling the operator.
int node_index(const MultilayerNetwork& network, int layer_id, int local);

}  // namespace netdiff
