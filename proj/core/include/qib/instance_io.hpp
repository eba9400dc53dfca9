#pragma once

#include <json.hpp>
#include <string>

#include "qib/graph.hpp"
#include "qib/model.hpp"

namespace qib {

/// A solver result in original coordinates, as written to solution files.
struct Solution {
    std::string status = "infeasible";  ///< "solution" or "infeasible"
    Eigen::VectorXd x;
    Eigen::VectorXi z;
    double objective = 0.0;
    /// Largest violation among mixed-integer rows (0 when status=infeasible).
    double max_mixed_infeasibility = 0.0;
    /// Whether every combinatorial row holds exactly.
    bool combinatorial_feasible = false;
    /// Detailed feasibility report (per-row slacks, guarantee bound, ...).
    nlohmann::json report;
};

/// Rounds to `digits` significant decimal digits; used for all numeric output.
double round_significant(double value, int digits = 12);

Problem instance_from_json(const nlohmann::json& j);
nlohmann::json instance_to_json(const Problem& problem);
/// Parses an instance file.  The result is *not* validated; run
/// validate_problem before using it.  Throws InvalidData on malformed input.
Problem load_instance(const std::string& path);
void save_instance(const std::string& path, const Problem& problem);

Solution solution_from_json(const nlohmann::json& j);
nlohmann::json solution_to_json(const Solution& solution);
Solution load_solution(const std::string& path);
void save_solution(const std::string& path, const Solution& solution);

/// Decomposition files store the rooted form (children lists + root).  The
/// loader reconstructs the undirected tree; designations are recomputed by
/// normalize_decomposition, so they are optional on input.
TreeDecomposition decomposition_from_json(const nlohmann::json& j);
nlohmann::json decomposition_to_json(const RootedBinaryDecomposition& rbd);
/// Serializes an unrooted decomposition; each edge is oriented from its first
/// endpoint, so loading restores the same shape.
nlohmann::json decomposition_to_json(const TreeDecomposition& td);
TreeDecomposition load_decomposition(const std::string& path);
void save_decomposition(const std::string& path, const RootedBinaryDecomposition& rbd);
void save_decomposition(const std::string& path, const TreeDecomposition& td);

}  // namespace qib
