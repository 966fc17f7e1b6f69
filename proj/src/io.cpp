#include "netdiff/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "netdiff/errors.hpp"

namespace netdiff::io {

namespace {

std::ifstream open_for_reading(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return in;
}

std::ofstream open_for_writing(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

double parse_double(const std::string& text, const std::string& where) {
    const char* first = text.data();
    const char* last = first + text.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw ValidationError("cannot parse \"" + text + "\" as a number (" + where + ")");
    return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string::size_type start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

int require_int(const Json& v, const std::string& path) {
    if (!v.is_number_integer())
        throw ValidationError(path + " must be an integer");
    return v.get<int>();
}

double require_number(const Json& v, const std::string& path) {
    if (!v.is_number())
        throw ValidationError(path + " must be a number");
    return v.get<double>();
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void expect_object(const Json& v, const std::string& path) {
    if (!v.is_object())
        throw ValidationError(path + " must be a JSON object");
}

void expect_keys(const Json& obj, const std::string& path,
                 std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                known = true;
                break;
            }
        if (!known)
            throw ValidationError("unknown key \"" + item.key() + "\" at " + path);
    }
}

const Json& require_key(const Json& obj, const std::string& path, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end())
        throw ValidationError("missing key \"" + std::string(key) + "\" at " + path);
    return *it;
}

Json read_json_file(const std::filesystem::path& path) {
    auto in = open_for_reading(path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& value) {
    auto out = open_for_writing(path);
    out << value.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

MultilayerNetwork read_network(const std::filesystem::path& path) {
    const Json root = read_json_file(path);
    expect_object(root, "top level");
    expect_keys(root, "top level", {"layers", "couplings"});

    const Json& layers = require_key(root, "top level", "layers");
    if (!layers.is_array() || layers.empty())
        throw ValidationError("at least one layer required");

    MultilayerNetwork net;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const std::string lp = "layers[" + std::to_string(k) + "]";
        const Json& item = layers[k];
        expect_object(item, lp);
        expect_keys(item, lp, {"id", "n", "edges", "d"});
        LayerSpec layer;
        layer.layer_id = require_int(require_key(item, lp, "id"), lp + ".id");
        layer.node_count = require_int(require_key(item, lp, "n"), lp + ".n");
        if (layer.node_count < 1)
            throw ValidationError(lp + ".n must be positive");
        layer.diffusion_constant = require_number(require_key(item, lp, "d"), lp + ".d");
        layer.adjacency = Eigen::MatrixXd::Zero(layer.node_count, layer.node_count);

        const Json& edges = require_key(item, lp, "edges");
        if (!edges.is_array())
            throw ValidationError(lp + ".edges must be an array");
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const std::string ep = lp + ".edges[" + std::to_string(e) + "]";
            const Json& edge = edges[e];
            if (!edge.is_array() || edge.size() != 3)
                throw ValidationError(ep + " must be [i, j, w]");
            const int i = require_int(edge[0], ep + "[0]");
            const int j = require_int(edge[1], ep + "[1]");
            const double w = require_number(edge[2], ep + "[2]");
            if (i < 1 || i > layer.node_count || j < 1 || j > layer.node_count)
                throw ValidationError(ep + ": node index out of range 1.." +
                                      std::to_string(layer.node_count));
            if (i == j) throw ValidationError(ep + ": self-loops are not allowed");
            if (layer.adjacency(i - 1, j - 1) != 0.0)
                throw ValidationError(ep + ": duplicate edge (" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
            layer.adjacency(i - 1, j - 1) = layer.adjacency(j - 1, i - 1) = w;
        }
        net.layers.push_back(std::move(layer));
    }

    if (root.contains("couplings")) {
        const Json& couplings = root["couplings"];
        if (!couplings.is_array())
            throw ValidationError("couplings must be an array");
        for (std::size_t k = 0; k < couplings.size(); ++k) {
            const std::string cp = "couplings[" + std::to_string(k) + "]";
            const Json& item = couplings[k];
            expect_object(item, cp);
            expect_keys(item, cp, {"from", "to", "edges", "d"});
            InterCoupling c;
            c.from_layer = require_int(require_key(item, cp, "from"), cp + ".from");
            c.to_layer = require_int(require_key(item, cp, "to"), cp + ".to");
            c.diffusion_constant = require_number(require_key(item, cp, "d"), cp + ".d");
            const auto layer_nodes = [&](int id, const std::string& where) {
                if (id < 1 || id > net.layer_count())
                    throw ValidationError(where + ": no layer with id " + std::to_string(id));
                return net.layers[id - 1].node_count;
            };
            const int n_from = layer_nodes(c.from_layer, cp + ".from");
            const int n_to = layer_nodes(c.to_layer, cp + ".to");
            c.weights = Eigen::MatrixXd::Zero(n_from, n_to);

            const Json& edges = require_key(item, cp, "edges");
            if (!edges.is_array())
                throw ValidationError(cp + ".edges must be an array");
            for (std::size_t e = 0; e < edges.size(); ++e) {
                const std::string ep = cp + ".edges[" + std::to_string(e) + "]";
                const Json& edge = edges[e];
                if (!edge.is_array() || edge.size() != 3)
                    throw ValidationError(ep + " must be [i, j, w]");
                const int i = require_int(edge[0], ep + "[0]");
                const int j = require_int(edge[1], ep + "[1]");
                const double w = require_number(edge[2], ep + "[2]");
                if (i < 1 || i > n_from)
                    throw ValidationError(ep + ": from-node index out of range 1.." +
                                          std::to_string(n_from));
                if (j < 1 || j > n_to)
                    throw ValidationError(ep + ": to-node index out of range 1.." +
                                          std::to_string(n_to));
                if (c.weights(i - 1, j - 1) != 0.0)
                    throw ValidationError(ep + ": duplicate coupling edge (" + std::to_string(i) +
                                          "," + std::to_string(j) + ")");
                c.weights(i - 1, j - 1) = w;
            }
            net.couplings.push_back(std::move(c));
        }
    }

    net.validate();
    return net;
}

void write_network(const std::filesystem::path& path, const MultilayerNetwork& network) {
    Json root = Json::object();
    root["layers"] = Json::array();
    for (const auto& layer : network.layers) {
        Json item = Json::object();
        item["id"] = layer.layer_id;
        item["n"] = layer.node_count;
        Json edges = Json::array();
        for (int i = 0; i < layer.adjacency.rows(); ++i)
            for (int j = i + 1; j < layer.adjacency.cols(); ++j)
                if (layer.adjacency(i, j) != 0.0)
                    edges.push_back({i + 1, j + 1, layer.adjacency(i, j)});
        item["edges"] = std::move(edges);
        item["d"] = layer.diffusion_constant;
        root["layers"].push_back(std::move(item));
    }
    root["couplings"] = Json::array();
    for (const auto& c : network.couplings) {
        Json item = Json::object();
        item["from"] = c.from_layer;
        item["to"] = c.to_layer;
        Json edges = Json::array();
        for (int i = 0; i < c.weights.rows(); ++i)
            for (int j = 0; j < c.weights.cols(); ++j)
                if (c.weights(i, j) != 0.0) edges.push_back({i + 1, j + 1, c.weights(i, j)});
        item["edges"] = std::move(edges);
        item["d"] = c.diffusion_constant;
        root["couplings"].push_back(std::move(item));
    }
    write_json_file(path, root);
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    auto out = open_for_writing(path);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
    auto in = open_for_reading(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        std::vector<double> row;
        for (const auto& field : split_csv_line(line))
            row.push_back(parse_double(field, path.string() + " line " + std::to_string(lineno)));
        if (!rows.empty() && row.size() != rows.front().size())
            throw ValidationError(path.string() + " line " + std::to_string(lineno) +
                                  ": inconsistent column count");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(path.string() + ": empty matrix file");
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

void write_index_map(const std::filesystem::path& path, const SupraLaplacian& laplacian) {
    Json root = Json::object();
    root["total_nodes"] = laplacian.total_nodes();
    root["layers"] = Json::array();
    for (std::size_t k = 0; k < laplacian.layer_sizes.size(); ++k) {
        Json item = Json::object();
        item["id"] = static_cast<int>(k) + 1;
        item["n"] = laplacian.layer_sizes[k];
        item["first_index"] = laplacian.layer_offsets[k] + 1;
        root["layers"].push_back(std::move(item));
    }
    Json nodes = Json::array();
    for (int g = 0; g < laplacian.total_nodes(); ++g) {
        const auto [layer_id, local] = laplacian.locate(g);
        nodes.push_back({g + 1, layer_id, local + 1});
    }
    root["nodes"] = std::move(nodes);  // [global, layer, local], all 1-based
    write_json_file(path, root);
}

void write_states_csv(const std::filesystem::path& path, const Trajectory& trajectory) {
    trajectory.validate();
    auto out = open_for_writing(path);
    out << "t,node";
    for (int k = 1; k <= trajectory.topics(); ++k) out << ",topic_" << k;
    out << '\n';
    for (int s = 0; s < trajectory.length(); ++s) {
        const std::string t = format_double(trajectory.timestamps[s]);
        const StateMatrix& x = trajectory.states[s];
        for (int i = 0; i < x.rows(); ++i) {
            out << t << ',' << (i + 1);
            for (int k = 0; k < x.cols(); ++k) out << ',' << format_double(x(i, k));
            out << '\n';
        }
    }
    if (!out) throw IoError("failed writing " + path.string());
}

Trajectory read_states_csv(const std::filesystem::path& path) {
    auto in = open_for_reading(path);
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError(path.string() + ": empty states file");
    line = strip_cr(line);
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "t" || header[1] != "node")
        throw ValidationError(path.string() + ": header must be t,node,topic_1,...");
    const int topics = static_cast<int>(header.size()) - 2;
    for (int k = 0; k < topics; ++k)
        if (header[k + 2] != "topic_" + std::to_string(k + 1))
            throw ValidationError(path.string() + ": unexpected header column \"" + header[k + 2] +
                                  "\"");

    struct Row {
        double t;
        int node;
        std::vector<double> values;
    };
    std::vector<Row> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        const std::string where = path.string() + " line " + std::to_string(lineno);
        if (fields.size() != header.size())
            throw ValidationError(where + ": expected " + std::to_string(header.size()) +
                                  " fields");
        Row row;
        row.t = parse_double(fields[0], where);
        const double node = parse_double(fields[1], where);
        row.node = static_cast<int>(node);
        if (row.node < 1 || static_cast<double>(row.node) != node)
            throw ValidationError(where + ": node must be a positive integer");
        for (int k = 0; k < topics; ++k) row.values.push_back(parse_double(fields[k + 2], where));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(path.string() + ": no state rows");

    // Infer the node count from the first timestamp block.
    int nodes = 0;
    while (nodes < static_cast<int>(rows.size()) && rows[nodes].t == rows[0].t) ++nodes;
    if (static_cast<std::size_t>(rows.size()) % nodes != 0)
        throw ValidationError(path.string() + ": row count is not a multiple of the node count");

    Trajectory trajectory;
    const int n_steps = static_cast<int>(rows.size()) / nodes;
    for (int s = 0; s < n_steps; ++s) {
        const Row& first = rows[static_cast<std::size_t>(s) * nodes];
        StateMatrix x(nodes, topics);
        for (int i = 0; i < nodes; ++i) {
            const Row& row = rows[static_cast<std::size_t>(s) * nodes + i];
            if (row.t != first.t)
                throw ValidationError(path.string() + ": timestamp block for t=" +
                                      format_double(first.t) + " has fewer than " +
                                      std::to_string(nodes) + " nodes");
            if (row.node != i + 1)
                throw ValidationError(path.string() + ": nodes must appear in order 1..N per "
                                      "timestamp (got node " + std::to_string(row.node) +
                                      " where " + std::to_string(i + 1) + " expected)");
            for (int k = 0; k < topics; ++k) x(i, k) = row.values[k];
        }
        trajectory.timestamps.push_back(first.t);
        trajectory.states.push_back(std::move(x));
    }
    trajectory.validate();
    return trajectory;
}

void write_lambda(const std::filesystem::path& csv_path,
                  const std::filesystem::path& sidecar_path, const LearnResult& result) {
    write_matrix_csv(csv_path, result.lambda.matrix);
    Json meta = Json::object();
    meta["n"] = result.lambda.nodes;
    meta["t_dim"] = result.lambda.topics;
    meta["structure_mode"] =
        result.lambda.structure_mode == StructureMode::full ? "full" : "kron_constrained";
    meta["sweeps"] = result.sweeps;
    meta["final_residual"] =
        result.sweep_residuals.empty() ? 0.0 : result.sweep_residuals.back();
    write_json_file(sidecar_path, meta);
}

LambdaEstimate read_lambda(const std::filesystem::path& csv_path,
                           const std::filesystem::path& sidecar_path) {
    const Json meta = read_json_file(sidecar_path);
    expect_object(meta, "top level");
    expect_keys(meta, "top level", {"n", "t_dim", "structure_mode", "sweeps", "final_residual"});
    LambdaEstimate lambda;
    lambda.nodes = require_int(require_key(meta, "top level", "n"), "n");
    lambda.topics = require_int(require_key(meta, "top level", "t_dim"), "t_dim");
    const std::string mode =
        require_key(meta, "top level", "structure_mode").get<std::string>();
    if (mode == "full")
        lambda.structure_mode = StructureMode::full;
    else if (mode == "kron_constrained")
        lambda.structure_mode = StructureMode::kron_constrained;
    else
        throw ValidationError("structure_mode must be \"full\" or \"kron_constrained\"");
    lambda.matrix = read_matrix_csv(csv_path);
    const Eigen::Index nt = static_cast<Eigen::Index>(lambda.nodes) * lambda.topics;
    if (lambda.matrix.rows() != nt || lambda.matrix.cols() != nt)
        throw ValidationError(csv_path.string() + ": matrix is " +
                              std::to_string(lambda.matrix.rows()) + "x" +
                              std::to_string(lambda.matrix.cols()) + " but the sidecar says " +
                              std::to_string(nt) + "x" + std::to_string(nt));
    return lambda;
}

void write_mask(const std::filesystem::path& path, const ObservationMask& mask) {
    Json nodes = Json::array();
    for (int i : mask.observed) nodes.push_back(i + 1);
    write_json_file(path, nodes);
}

std::vector<int> read_mask_nodes(const std::filesystem::path& path) {
    const Json root = read_json_file(path);
    if (!root.is_array())
        throw ValidationError(path.string() + ": mask file must be a JSON array of node indices");
    std::vector<int> nodes;
    for (std::size_t k = 0; k < root.size(); ++k) {
        const int v = require_int(root[k], "[" + std::to_string(k) + "]");
        if (v < 1)
            throw ValidationError("[" + std::to_string(k) + "]: node indices are 1-based");
        nodes.push_back(v - 1);
    }
    return nodes;
}

void write_filter_csv(const std::filesystem::path& path, std::span<const FilterStep> steps,
                      int nodes, int topics, double t_first) {
    auto out = open_for_writing(path);
    out << "t,node,topic,xhat_post,xhat_pred_next\n";
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const std::string t = format_double(t_first + static_cast<double>(s));
        const StateMatrix post = devectorize(steps[s].x_post, nodes, topics);
        const StateMatrix pred = devectorize(steps[s].x_pred_next, nodes, topics);
        for (int i = 0; i < nodes; ++i)
            for (int k = 0; k < topics; ++k)
                out << t << ',' << (i + 1) << ',' << (k + 1) << ','
                    << format_double(post(i, k)) << ',' << format_double(pred(i, k)) << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

void write_errors_csv(const std::filesystem::path& path, const AggregateResult& aggregate) {
    auto out = open_for_writing(path);
    out << "predictor,step,error_all,error_unobserved\n";
    if (aggregate.runs.empty()) return;
    const auto& first = aggregate.runs.front();
    for (const auto& table : first.tables) {
        const int n_steps = static_cast<int>(table.error_all.size());
        for (int s = 0; s < n_steps; ++s) {
            double sum_all = 0.0, sum_unobs = 0.0;
            for (const auto& run : aggregate.runs) {
                const auto& t = run.table(table.predictor);
                sum_all += t.error_all[s];
                sum_unobs += t.error_unobserved[s];
            }
            const double n = static_cast<double>(aggregate.runs.size());
            out << table.predictor << ',' << (s + 1) << ',' << format_double(sum_all / n) << ','
                << format_double(sum_unobs / n) << '\n';
        }
    }
    if (!out) throw IoError("failed writing " + path.string());
}

void write_summary_json(const std::filesystem::path& path, const AggregateResult& aggregate,
                        const Json& config_echo, int replications) {
    Json root = Json::object();
    root["config"] = config_echo;
    root["replications"] = replications;
    if (!aggregate.runs.empty()) {
        root["train_count"] = aggregate.runs.front().train_count;
        root["test_count"] = aggregate.runs.front().test_count;
    }
    Json all = Json::object();
    for (const auto& [name, value] : aggregate.mean_error_all) all[name] = value;
    root["mean_error_all"] = std::move(all);
    Json unobs = Json::object();
    for (const auto& [name, value] : aggregate.mean_error_unobserved) unobs[name] = value;
    root["mean_error_unobserved"] = std::move(unobs);
    write_json_file(path, root);
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
    Json root = Json::object();
    root["subcommand"] = manifest.subcommand;
    root["tool_version"] = kToolVersion;
    if (manifest.seed)
        root["seed"] = *manifest.seed;
    else
        root["seed"] = nullptr;
    root["config"] = manifest.resolved_config;
    root["inputs"] = manifest.inputs;
    root["outputs"] = manifest.outputs;
    root["duration_seconds"] = manifest.duration_seconds;
    write_json_file(path, root);
}

}  // namespace netdiff::io
