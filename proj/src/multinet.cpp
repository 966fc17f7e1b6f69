#include "netdiff/multinet.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "netdiff/errors.hpp"

namespace netdiff {

namespace {

bool finite(double v) { return std::isfinite(v); }

std::string layer_tag(int id) {
    std::ostringstream os;
    os << "layer " << id;
    return os.str();
}

std::string coupling_tag(const InterCoupling& c) {
    std::ostringstream os;
    os << "coupling (" << c.from_layer << "," << c.to_layer << ")";
    return os.str();
}

void validate_layer(const LayerSpec& layer) {
    if (layer.node_count <= 0)
        throw ValidationError(layer_tag(layer.layer_id) + ": node_count must be positive");
    const auto& a = layer.adjacency;
    if (a.rows() != layer.node_count || a.cols() != layer.node_count) {
        std::ostringstream os;
        os << layer_tag(layer.layer_id) << ": adjacency is " << a.rows() << "x" << a.cols()
           << ", expected " << layer.node_count << "x" << layer.node_count;
        throw ValidationError(os.str());
    }
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) {
            const double w = a(i, j);
            if (!finite(w) || w < 0.0) {
                std::ostringstream os;
                os << layer_tag(layer.layer_id) << ": adjacency(" << i << "," << j << ")=" << w
                   << " must be finite and >= 0";
                throw ValidationError(os.str());
            }
            if (i == j && w != 0.0) {
                std::ostringstream os;
                os << layer_tag(layer.layer_id) << ": adjacency(" << i << "," << i << ")=" << w
                   << " (self-loops not allowed)";
                throw ValidationError(os.str());
            }
            if (j > i && a(i, j) != a(j, i)) {
                std::ostringstream os;
                os << layer_tag(layer.layer_id) << ": adjacency(" << i << "," << j << ")=" << a(i, j)
                   << " != adjacency(" << j << "," << i << ")=" << a(j, i) << " (must be symmetric)";
                throw ValidationError(os.str());
            }
        }
    }
    if (!finite(layer.diffusion_constant) || layer.diffusion_constant < 0.0)
        throw ValidationError(layer_tag(layer.layer_id) + ": diffusion_constant must be finite and >= 0");
}

}  // namespace

int MultilayerNetwork::total_nodes() const {
    int n = 0;
    for (const auto& l : layers) n += l.node_count;
    return n;
}

const LayerSpec& MultilayerNetwork::layer(int layer_id) const {
    for (const auto& l : layers)
        if (l.layer_id == layer_id) return l;
    throw ValidationError("no layer with id " + std::to_string(layer_id));
}

void MultilayerNetwork::validate() const {
    if (layers.empty()) throw ValidationError("at least one layer required");
    for (int k = 0; k < layer_count(); ++k) {
        if (layers[k].layer_id != k + 1) {
            std::ostringstream os;
            os << "layer ids must be 1.." << layer_count() << " in order; position " << k
               << " has id " << layers[k].layer_id;
            throw ValidationError(os.str());
        }
        validate_layer(layers[k]);
    }

    std::map<std::pair<int, int>, const InterCoupling*> directed;
    for (const auto& c : couplings) {
        if (c.from_layer == c.to_layer)
            throw ValidationError(coupling_tag(c) + ": from_layer must differ from to_layer");
        if (c.from_layer < 1 || c.from_layer > layer_count() || c.to_layer < 1 ||
            c.to_layer > layer_count())
            throw ValidationError(coupling_tag(c) + ": references a nonexistent layer");
        const int nf = layers[c.from_layer - 1].node_count;
        const int nt = layers[c.to_layer - 1].node_count;
        if (c.weights.rows() != nf || c.weights.cols() != nt) {
            std::ostringstream os;
            os << coupling_tag(c) << ": weights are " << c.weights.rows() << "x" << c.weights.cols()
               << ", expected " << nf << "x" << nt;
            throw ValidationError(os.str());
        }
        for (int i = 0; i < c.weights.rows(); ++i)
            for (int j = 0; j < c.weights.cols(); ++j) {
                const double w = c.weights(i, j);
                if (!finite(w) || w < 0.0) {
                    std::ostringstream os;
                    os << coupling_tag(c) << ": weights(" << i << "," << j << ")=" << w
                       << " must be finite and >= 0";
                    throw ValidationError(os.str());
                }
            }
        if (!finite(c.diffusion_constant) || c.diffusion_constant < 0.0)
            throw ValidationError(coupling_tag(c) + ": diffusion_constant must be finite and >= 0");
        auto key = std::make_pair(c.from_layer, c.to_layer);
        if (directed.count(key))
            throw ValidationError(coupling_tag(c) + ": duplicate coupling for this layer pair");
        directed[key] = &c;
    }
    // Stored reverse directions must be exact transposes.
    for (const auto& [key, c] : directed) {
        auto rev = directed.find(std::make_pair(key.second, key.first));
        if (rev == directed.end()) continue;
        const Eigen::MatrixXd diff = rev->second->weights - c->weights.transpose();
        if (diff.cwiseAbs().maxCoeff() != 0.0) {
            std::ostringstream os;
            os << coupling_tag(*rev->second) << ": weights must equal the transpose of "
               << coupling_tag(*c) << " weights";
            throw ValidationError(os.str());
        }
    }
}

Eigen::MatrixXd build_intra_laplacian(const LayerSpec& layer) {
    validate_layer(layer);
    const Eigen::VectorXd degrees = layer.adjacency.rowwise().sum();
    Eigen::MatrixXd lap = -layer.adjacency;
    lap.diagonal() += degrees;
    return layer.diffusion_constant * lap;
}

int SupraLaplacian::node_index(int layer_id, int local) const {
    const int m = static_cast<int>(layer_sizes.size());
    if (layer_id < 1 || layer_id > m)
        throw ValidationError("node_index: layer " + std::to_string(layer_id) + " out of range");
    if (local < 0 || local >= layer_sizes[layer_id - 1])
        throw ValidationError("node_index: local index " + std::to_string(local) +
                              " out of range for layer " + std::to_string(layer_id));
    return layer_offsets[layer_id - 1] + local;
}

std::pair<int, int> SupraLaplacian::locate(int global) const {
    if (global < 0 || global >= total_nodes())
        throw ValidationError("locate: global index " + std::to_string(global) + " out of range");
    int layer = static_cast<int>(layer_offsets.size());
    while (layer > 1 && layer_offsets[layer - 1] > global) --layer;
    return {layer, global - layer_offsets[layer - 1]};
}

SupraLaplacian assemble_supra(const MultilayerNetwork& network) {
    network.validate();

    SupraLaplacian result;
    const int m = network.layer_count();
    result.layer_sizes.resize(m);
    result.layer_offsets.resize(m);
    int total = 0;
    for (int k = 0; k < m; ++k) {
        result.layer_sizes[k] = network.layers[k].node_count;
        result.layer_offsets[k] = total;
        total += network.layers[k].node_count;
    }
    result.matrix = Eigen::MatrixXd::Zero(total, total);

    for (int k = 0; k < m; ++k) {
        const int off = result.layer_offsets[k];
        const int n = result.layer_sizes[k];
        result.matrix.block(off, off, n, n) = build_intra_laplacian(network.layers[k]);
    }

    // Directed couplings: stored ones plus implied transposes for pairs
    // stored one-directionally.
    struct Directed {
        int from, to;
        Eigen::MatrixXd weights;
        double d;
    };
    std::map<std::pair<int, int>, Directed> directed;
    for (const auto& c : network.couplings)
        directed[{c.from_layer, c.to_layer}] = {c.from_layer, c.to_layer, c.weights,
                                                c.diffusion_constant};
    for (const auto& c : network.couplings) {
        auto rev_key = std::make_pair(c.to_layer, c.from_layer);
        if (!directed.count(rev_key))
            directed[rev_key] = {c.to_layer, c.from_layer, c.weights.transpose(),
                                 c.diffusion_constant};
    }

    for (const auto& [key, c] : directed) {
        const int off_a = result.layer_offsets[c.from - 1];
        const int n_a = result.layer_sizes[c.from - 1];
        const int off_b = result.layer_offsets[c.to - 1];
        const int n_b = result.layer_sizes[c.to - 1];
        const Eigen::VectorXd inter_degree = c.weights.rowwise().sum();
        result.matrix.block(off_a, off_a, n_a, n_a).diagonal() += c.d * inter_degree;
        result.matrix.block(off_a, off_b, n_a, n_b) -= c.d * c.weights;
    }
    return result;
}

int node_index(const MultilayerNetwork& network, int layer_id, int local) {
    if (layer_id < 1 || layer_id > network.layer_count())
        throw ValidationError("node_index: layer " + std::to_string(layer_id) + " out of range");
    int off = 0;
    for (int k = 0; k < layer_id - 1; ++k) off += network.layers[k].node_count;
    if (local < 0 || local >= network.layers[layer_id - 1].node_count)
        throw ValidationError("node_index: local index " + std::to_string(local) +
                              " out of range for layer " + std::to_string(layer_id));
    return off + local;
}

}  // namespace netdiff
