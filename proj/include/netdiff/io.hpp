#pragma once

// File formats shared by the command-line tools: strict network JSON,
// full-precision CSV for matrices and state series, the learned-operator
// pair (matrix CSV plus JSON sidecar), observation masks, filter output
// and experiment reports. Indices are 1-based in files, 0-based in memory.

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "netdiff/dynamics.hpp"
#include "netdiff/experiment.hpp"
#include "netdiff/kalman.hpp"
#include "netdiff/multinet.hpp"
#include "netdiff/operator_learning.hpp"

namespace netdiff::io {

inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::ordered_json;

/// printf "%.17g": enough digits that reading the text recovers the
/// exact double.
std::string format_double(double v);

// Strict-parsing helpers. Violations throw ValidationError naming the
// JSON path of the offender (e.g. "layers[2].edges[0]").
void expect_object(const Json& v, const std::string& path);
void expect_keys(const Json& obj, const std::string& path,
                 std::initializer_list<const char*> allowed);
const Json& require_key(const Json& obj, const std::string& path, const char* key);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& value);

MultilayerNetwork read_network(const std::filesystem::path& path);
void write_network(const std::filesystem::path& path, const MultilayerNetwork& network);

// Dense matrices: one CSV line per row, no header.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

/// Layer-major global index table of an assembled operator.
void write_index_map(const std::filesystem::path& path, const SupraLaplacian& laplacian);

// State series: header t,node,topic_1..topic_T, one row per
// (timestamp, node), nodes in global order.
void write_states_csv(const std::filesystem::path& path, const Trajectory& trajectory);
Trajectory read_states_csv(const std::filesystem::path& path);

void write_lambda(const std::filesystem::path& csv_path,
                  const std::filesystem::path& sidecar_path, const LearnResult& result);
LambdaEstimate read_lambda(const std::filesystem::path& csv_path,
                           const std::filesystem::path& sidecar_path);

void write_mask(const std::filesystem::path& path, const ObservationMask& mask);
/// Returns 0-based node indices (files store 1-based).
std::vector<int> read_mask_nodes(const std::filesystem::path& path);

/// Header t,node,topic,xhat_post,xhat_pred_next; unit-spaced timestamps
/// starting at t_first.
void write_filter_csv(const std::filesystem::path& path, std::span<const FilterStep> steps,
                      int nodes, int topics, double t_first);

/// Header predictor,step,error_all,error_unobserved; one row per predictor
/// and test step, errors averaged over replications.
void write_errors_csv(const std::filesystem::path& path, const AggregateResult& aggregate);

void write_summary_json(const std::filesystem::path& path, const AggregateResult& aggregate,
                        const Json& config_echo, int replications);

struct RunManifest {
    std::string subcommand;
    Json resolved_config;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double duration_seconds = 0.0;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

}  // namespace netdiff::io
