#include "qib/instance_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace qib {

namespace {

using nlohmann::json;

json read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidData("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidData(path + ": " + e.what());
    }
}

void write_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw InvalidData("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw InvalidData("write to " + path + " failed");
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    Eigen::Index k = 0;
    for (const auto& entry : j) v[k++] = entry.get<double>();
    return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json j = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) j.push_back(v[k]);
    return j;
}

QuadForm form_from_json(const json& j) {
    QuadForm f;
    if (j.contains("quad")) {
        for (const auto& entry : j.at("quad")) {
            BlockQuad bq;
            bq.block = entry.at("block").get<Index>();
            const auto& rows = entry.at("matrix");
            const auto dim = static_cast<Eigen::Index>(rows.size());
            bq.matrix.resize(dim, dim);
            for (Eigen::Index a = 0; a < dim; ++a) {
                const auto& row = rows[static_cast<std::size_t>(a)];
                if (static_cast<Eigen::Index>(row.size()) != dim)
                    throw InvalidData("quadratic matrix is not square");
                for (Eigen::Index b = 0; b < dim; ++b)
                    bq.matrix(a, b) = row[static_cast<std::size_t>(b)].get<double>();
            }
            f.quad.push_back(std::move(bq));
        }
    }
    if (j.contains("diag")) f.diag = vector_from_json(j.at("diag"));
    if (j.contains("linear")) f.linear = vector_from_json(j.at("linear"));
    if (j.contains("indicator")) f.indicator = vector_from_json(j.at("indicator"));
    return f;
}

json form_to_json(const QuadForm& f) {
    json j = json::object();
    if (!f.quad.empty()) {
        json quad = json::array();
        for (const auto& bq : f.quad) {
            json rows = json::array();
            for (Eigen::Index a = 0; a < bq.matrix.rows(); ++a) {
                json row = json::array();
                for (Eigen::Index b = 0; b < bq.matrix.cols(); ++b) row.push_back(bq.matrix(a, b));
                rows.push_back(std::move(row));
            }
            quad.push_back({{"block", bq.block}, {"matrix", std::move(rows)}});
        }
        j["quad"] = std::move(quad);
    }
    auto maybe = [&](const char* name, const Eigen::VectorXd& v) {
        if (v.size() > 0 && v.cwiseAbs().maxCoeff() != 0.0) j[name] = vector_to_json(v);
    };
    maybe("diag", f.diag);
    maybe("linear", f.linear);
    maybe("indicator", f.indicator);
    return j;
}

}  // namespace

double round_significant(double value, int digits) {
    if (value == 0.0 || !std::isfinite(value)) return value == 0.0 ? 0.0 : value;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*e", digits - 1, value);
    return std::strtod(buf, nullptr);
}

Problem instance_from_json(const json& j) {
    try {
        Problem p;
        for (const auto& entry : j.at("variables")) {
            Variable v;
            v.id = entry.at("id").get<Index>();
            v.lower = entry.at("lower").get<double>();
            v.upper = entry.at("upper").get<double>();
            v.block = entry.at("block").get<Index>();
            p.variables.push_back(v);
        }
        for (const auto& entry : j.at("blocks")) {
            Block b;
            b.id = entry.at("id").get<Index>();
            b.variables = entry.at("variables").get<std::vector<Index>>();
            p.blocks.push_back(std::move(b));
        }
        p.objective = form_from_json(j.value("objective", json::object()));
        for (const auto& entry : j.value("constraints", json::array())) {
            Constraint c;
            const std::string kind = entry.at("kind").get<std::string>();
            if (kind == "mixed-integer")
                c.kind = ConstraintKind::MixedInteger;
            else if (kind == "combinatorial")
                c.kind = ConstraintKind::Combinatorial;
            else
                throw InvalidData("unknown constraint kind '" + kind + "'");
            const std::string sense = entry.value("sense", "<=");
            if (sense == "<=")
                c.sense = ConstraintSense::LessEqual;
            else if (sense == "=")
                c.sense = ConstraintSense::Equal;
            else
                throw InvalidData("unknown constraint sense '" + sense + "'");
            c.rhs = entry.at("rhs").get<double>();
            c.form = form_from_json(entry);
            p.constraints.push_back(std::move(c));
        }
        return p;
    } catch (const json::exception& e) {
        throw InvalidData(std::string("malformed instance: ") + e.what());
    }
}

json instance_to_json(const Problem& p) {
    json j;
    j["variables"] = json::array();
    for (const auto& v : p.variables)
        j["variables"].push_back(
            {{"id", v.id}, {"lower", v.lower}, {"upper", v.upper}, {"block", v.block}});
    j["blocks"] = json::array();
    for (const auto& b : p.blocks)
        j["blocks"].push_back({{"id", b.id}, {"variables", b.variables}});
    j["objective"] = form_to_json(p.objective);
    j["constraints"] = json::array();
    for (const auto& c : p.constraints) {
        json entry = form_to_json(c.form);
        entry["kind"] = c.kind == ConstraintKind::MixedInteger ? "mixed-integer" : "combinatorial";
        entry["sense"] = c.sense == ConstraintSense::LessEqual ? "<=" : "=";
        entry["rhs"] = c.rhs;
        j["constraints"].push_back(std::move(entry));
    }
    return j;
}

Problem load_instance(const std::string& path) { return instance_from_json(read_file(path)); }

void save_instance(const std::string& path, const Problem& p) { write_file(path, instance_to_json(p)); }

Solution solution_from_json(const json& j) {
    try {
        Solution s;
        s.status = j.at("status").get<std::string>();
        if (j.contains("x")) s.x = vector_from_json(j.at("x"));
        if (j.contains("z")) {
            const auto z = j.at("z").get<std::vector<int>>();
            s.z.resize(static_cast<Eigen::Index>(z.size()));
            for (std::size_t i = 0; i < z.size(); ++i) s.z[static_cast<Eigen::Index>(i)] = z[i];
        }
        s.objective = j.value("objective", 0.0);
        s.max_mixed_infeasibility = j.value("max_mixed_infeasibility", 0.0);
        s.combinatorial_feasible = j.value("combinatorial_feasible", false);
        if (j.contains("report")) s.report = j.at("report");
        return s;
    } catch (const json::exception& e) {
        throw InvalidData(std::string("malformed solution: ") + e.what());
    }
}

json solution_to_json(const Solution& s) {
    json j;
    j["status"] = s.status;
    json x = json::array();
    for (Eigen::Index k = 0; k < s.x.size(); ++k) x.push_back(round_significant(s.x[k]));
    j["x"] = std::move(x);
    json z = json::array();
    for (Eigen::Index k = 0; k < s.z.size(); ++k) z.push_back(s.z[k]);
    j["z"] = std::move(z);
    j["objective"] = round_significant(s.objective);
    j["max_mixed_infeasibility"] = round_significant(s.max_mixed_infeasibility);
    j["combinatorial_feasible"] = s.combinatorial_feasible;
    if (!s.report.is_null()) j["report"] = s.report;
    return j;
}

Solution load_solution(const std::string& path) { return solution_from_json(read_file(path)); }

void save_solution(const std::string& path, const Solution& s) { write_file(path, solution_to_json(s)); }

TreeDecomposition decomposition_from_json(const json& j) {
    try {
        TreeDecomposition td;
        for (const auto& entry : j.at("nodes")) {
            DecompositionNode node;
            node.id = entry.at("id").get<Index>();
            node.bag = entry.at("bag").get<std::vector<Index>>();
            td.nodes.push_back(std::move(node));
        }
        for (const auto& entry : j.at("nodes")) {
            const Index id = entry.at("id").get<Index>();
            for (const Index child : entry.value("children", std::vector<Index>{}))
                td.edges.emplace_back(id, child);
        }
        return td;
    } catch (const json::exception& e) {
        throw InvalidData(std::string("malformed decomposition: ") + e.what());
    }
}

json decomposition_to_json(const RootedBinaryDecomposition& rbd) {
    json j;
    j["nodes"] = json::array();
    for (const auto& node : rbd.nodes) {
        json entry;
        entry["id"] = node.id;
        entry["bag"] = node.bag;
        entry["children"] = node.children;
        j["nodes"].push_back(std::move(entry));
    }
    j["root"] = rbd.root;
    json designated = json::object();
    for (std::size_t i = 0; i < rbd.designated_leaf.size(); ++i)
        designated[std::to_string(i)] = rbd.designated_leaf[i];
    j["designated"] = std::move(designated);
    j["width"] = rbd.width;
    return j;
}

json decomposition_to_json(const TreeDecomposition& td) {
    std::vector<std::vector<Index>> children(td.nodes.size());
    for (const auto& [u, v] : td.edges) children[static_cast<std::size_t>(u)].push_back(v);
    json j;
    j["nodes"] = json::array();
    for (const auto& node : td.nodes) {
        json entry;
        entry["id"] = node.id;
        entry["bag"] = node.bag;
        entry["children"] = children[static_cast<std::size_t>(node.id)];
        j["nodes"].push_back(std::move(entry));
    }
    j["width"] = width(td);
    return j;
}

TreeDecomposition load_decomposition(const std::string& path) {
    return decomposition_from_json(read_file(path));
}

void save_decomposition(const std::string& path, const RootedBinaryDecomposition& rbd) {
    write_file(path, decomposition_to_json(rbd));
}

void save_decomposition(const std::string& path, const TreeDecomposition& td) {
    write_file(path, decomposition_to_json(td));
}

}  // namespace qib
