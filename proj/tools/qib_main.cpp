// Command-line front end: solve / check / oracle / decompose / gen.
//
// Exit codes: 0 success (solve: solution found; check: audit passed),
// 2 negative verdict (solve/oracle: infeasible; check: audit failed),
// 1 error (bad input, missing file, size guard, numerical failure).

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qib/gen.hpp"
#include "qib/instance_io.hpp"
#include "qib/pipeline.hpp"
#include "qib/verify.hpp"

namespace {

using qib::Index;

struct EpsilonFlags {
    double value = 0.0;
    int denominator = 0;

    qib::Epsilon resolve() const {
        if (denominator > 0) return qib::Epsilon::from_denominator(denominator);
        if (value > 0.0) return qib::Epsilon::from_value(value);
        return qib::Epsilon::from_denominator(10);
    }
};

void add_epsilon_flags(CLI::App* cmd, EpsilonFlags& eps) {
    auto* v = cmd->add_option("--epsilon", eps.value, "discretization step in (0,1]")
                  ->check(CLI::Range(1e-9, 1.0));
    cmd->add_option("--epsilon-denominator", eps.denominator,
                    "denominator q for the exact step 1/q (default 10)")
        ->check(CLI::PositiveNumber)
        ->excludes(v);
}

void emit_solution(const qib::Solution& solution, const std::string& out_path) {
    if (out_path.empty())
        std::cout << qib::solution_to_json(solution).dump(2) << '\n';
    else
        qib::save_solution(out_path, solution);
}

Eigen::VectorXd json_vector(const nlohmann::json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    Eigen::Index k = 0;
    for (const auto& entry : j) v[k++] = entry.get<double>();
    return v;
}

Eigen::MatrixXd json_matrix(const nlohmann::json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return {};
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index a = 0; a < rows; ++a) {
        const auto& row = j.at(static_cast<std::size_t>(a));
        if (static_cast<Eigen::Index>(row.size()) != cols)
            throw qib::InvalidData("matrix rows have unequal lengths");
        for (Eigen::Index b = 0; b < cols; ++b) m(a, b) = row.at(static_cast<std::size_t>(b)).get<double>();
    }
    return m;
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw qib::InvalidData("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw qib::InvalidData(path + ": " + e.what());
    }
}

/// Deterministic uniforms built on the fixed mt19937_64 stream.
double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

void write_generated(const qib::GeneratedInstance& gi, const std::string& out,
                     const std::string& td_out) {
    qib::save_instance(out, gi.problem);
    if (!td_out.empty()) qib::save_decomposition(td_out, gi.decomposition);
    std::cout << "instance: " << out << "  (" << gi.problem.num_variables() << " variables, "
              << gi.problem.num_blocks() << " blocks, " << gi.problem.num_constraints()
              << " constraints)\n";
    if (!td_out.empty())
        std::cout << "decomposition: " << td_out << "  (width " << qib::width(gi.decomposition)
                  << ")\n";
    if (gi.objective_offset != 0.0) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.12g", gi.objective_offset);
        std::cout << "objective offset: " << buf << '\n';
    }
}

qib::PortfolioData random_portfolio(Index n, Index h, Index r, long long cap, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    qib::PortfolioData d;
    d.lambda.resize(h);
    for (Eigen::Index i = 0; i < h; ++i) d.lambda[i] = uniform(rng, 0.5, 2.0);
    d.v.resize(h, n);
    for (Eigen::Index a = 0; a < h; ++a)
        for (Eigen::Index b = 0; b < n; ++b) d.v(a, b) = uniform(rng, -1.0, 1.0);
    d.d.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) d.d[i] = uniform(rng, 0.0, 1.0);
    d.mu.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) d.mu[i] = uniform(rng, 0.0, 1.0);
    d.A.resize(r, n);
    d.b.resize(r);
    for (Eigen::Index a = 0; a < r; ++a) {
        double sum = 0.0;
        for (Eigen::Index b = 0; b < n; ++b) {
            d.A(a, b) = uniform(rng, 0.0, 1.0);
            sum += d.A(a, b);
        }
        d.b[a] = 0.6 * sum;
    }
    d.u = Eigen::VectorXd::Ones(n);
    d.cap = cap > 0 ? cap : (n + 1) / 2;
    d.u_minus = Eigen::VectorXd::Ones(n);
    d.cap_plus = d.cap;
    d.cap_minus = d.cap;
    return d;
}

qib::BandedData random_banded(Index n, int k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    qib::BandedData d;
    d.bandwidth = k;
    d.Q = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j <= std::min<Eigen::Index>(i + k, n - 1); ++j) {
            const double q = uniform(rng, -0.5, 0.5);
            d.Q(i, j) = q;
            d.Q(j, i) = q;
        }
    for (Eigen::Index i = 0; i < n; ++i) {
        double offdiag = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) offdiag += std::abs(d.Q(i, j));
        d.Q(i, i) = offdiag + uniform(rng, 0.5, 1.5);
    }
    d.c.resize(n);
    d.d.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) d.c[i] = uniform(rng, -1.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) d.d[i] = uniform(rng, 0.0, 0.5);
    return d;
}

qib::PortfolioData portfolio_from_file(const std::string& path) {
    const nlohmann::json j = load_json(path);
    qib::PortfolioData d;
    d.lambda = json_vector(j.value("lambda", nlohmann::json::array()));
    if (j.contains("v")) d.v = json_matrix(j.at("v"));
    d.d = json_vector(j.at("d"));
    d.mu = json_vector(j.at("mu"));
    if (j.contains("A")) d.A = json_matrix(j.at("A"));
    d.b = json_vector(j.value("b", nlohmann::json::array()));
    d.u = json_vector(j.at("u"));
    d.cap = j.at("cap").get<long long>();
    if (j.contains("u_minus")) d.u_minus = json_vector(j.at("u_minus"));
    if (j.contains("A_minus")) d.A_minus = json_matrix(j.at("A_minus"));
    d.cap_plus = j.value("cap_plus", d.cap);
    d.cap_minus = j.value("cap_minus", d.cap);
    return d;
}

qib::BandedData banded_from_file(const std::string& path) {
    const nlohmann::json j = load_json(path);
    qib::BandedData d;
    d.Q = json_matrix(j.at("Q"));
    d.c = json_vector(j.at("c"));
    d.d = json_vector(j.at("d"));
    d.bandwidth = j.at("bandwidth").get<int>();
    return d;
}

int run_solve(const std::string& instance_path, const EpsilonFlags& eps,
              const std::string& td_path, const std::string& out_path, int threads, bool trace) {
    qib::RunConfig cfg;
    cfg.eps = eps.resolve();
    cfg.tol = qib::tolerances_from_env();
    cfg.threads = threads;
    cfg.trace = trace;
    if (!td_path.empty()) cfg.decomposition = qib::load_decomposition(td_path);
    const qib::Problem problem = qib::load_instance(instance_path);
    const qib::PipelineResult res = qib::run_pipeline(problem, cfg);
    emit_solution(res.solution, out_path);
    return res.solution.status == "solution" ? 0 : 2;
}

int run_check(const std::string& instance_path, const std::string& solution_path,
              const EpsilonFlags& eps) {
    const qib::Tolerances tol = qib::tolerances_from_env();
    const qib::Problem problem = qib::validate_problem(qib::load_instance(instance_path), tol);
    const qib::Solution solution = qib::load_solution(solution_path);
    if (solution.status != "solution") {
        std::cout << "{\n  \"status\": \"" << solution.status << "\",\n  \"note\": "
                  << "\"nothing to audit\"\n}\n";
        return 0;
    }
    // Default to the step the solution was produced with, when recorded.
    qib::Epsilon step = eps.resolve();
    if (eps.denominator == 0 && eps.value == 0.0 && solution.report.contains("epsilon"))
        step = qib::Epsilon::from_value(solution.report["epsilon"].get<double>());
    const qib::AuditResult audit = qib::audit_point(problem, solution.x, solution.z, step, tol);
    nlohmann::json j = audit.report;
    j["pass"] = audit.pass;
    std::cout << j.dump(2) << '\n';
    return audit.pass ? 0 : 2;
}

int run_oracle(const std::string& instance_path, const std::string& out_path, int threads,
               bool stop_at_first) {
    const qib::Tolerances tol = qib::tolerances_from_env();
    const qib::Problem problem = qib::validate_problem(qib::load_instance(instance_path), tol);
    qib::OracleOptions opts;
    opts.tol = tol;
    opts.threads = threads;
    opts.stop_at_first_feasible = stop_at_first;
    const qib::OracleResult res = qib::oracle_solve(problem, opts);
    qib::Solution solution;
    if (res.status == qib::OracleStatus::Optimal) {
        solution.status = "solution";
        solution.x = res.x;
        solution.z = res.z;
        solution.objective = res.value;
        const qib::CheckReport rep =
            qib::check_solution(problem, res.x, res.z, qib::Epsilon::from_denominator(10), tol);
        solution.max_mixed_infeasibility = rep.max_mixed_infeasibility;
        solution.combinatorial_feasible = rep.combinatorial_feasible;
    }
    solution.report["patterns_examined"] = res.patterns_examined;
    solution.report["continuous_solves"] = res.continuous_solves;
    emit_solution(solution, out_path);
    return solution.status == "solution" ? 0 : 2;
}

int run_decompose(const std::string& instance_path, const std::string& out_path) {
    const qib::Tolerances tol = qib::tolerances_from_env();
    const qib::Problem problem = qib::validate_problem(qib::load_instance(instance_path), tol);
    const qib::IntersectionGraph graph = qib::build_intersection_graph(problem);
    const qib::TreeDecomposition td = qib::tree_decomposition(graph);
    if (out_path.empty())
        std::cout << qib::decomposition_to_json(td).dump(2) << '\n';
    else
        qib::save_decomposition(out_path, td);
    std::cerr << "width " << qib::width(td) << ", " << td.nodes.size() << " bags\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"solver for convex quadratic problems with block indicators"};
    app.require_subcommand(1);

    // --- solve ---
    std::string instance_path, td_path, out_path, solution_path, data_path, td_out;
    EpsilonFlags eps;
    int threads = 1;
    bool trace = false, stop_at_first = false;

    auto* solve = app.add_subcommand("solve", "run the discretized dynamic program");
    solve->add_option("instance", instance_path, "instance file")->required();
    add_epsilon_flags(solve, eps);
    solve->add_option("--td", td_path, "decomposition file (bags over instance rows)");
    solve->add_option("--out", out_path, "solution file (default: stdout)");
    solve->add_option("--threads", threads, "worker threads for block profiling")
        ->check(CLI::PositiveNumber);
    solve->add_flag("--trace", trace, "attach table statistics to the report");

    auto* check = app.add_subcommand("check", "audit a solution file against an instance");
    check->add_option("instance", instance_path, "instance file")->required();
    check->add_option("solution", solution_path, "solution file")->required();
    add_epsilon_flags(check, eps);

    auto* oracle = app.add_subcommand("oracle", "exact enumeration over indicator patterns");
    oracle->add_option("instance", instance_path, "instance file")->required();
    oracle->add_option("--out", out_path, "solution file (default: stdout)");
    oracle->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    oracle->add_flag("--stop-at-first", stop_at_first, "return the first feasible pattern");

    auto* decompose = app.add_subcommand("decompose", "build a tree decomposition (min-fill)");
    decompose->add_option("instance", instance_path, "instance file")->required();
    decompose->add_option("--out", out_path, "decomposition file (default: stdout)");

    // --- gen ---
    auto* gen = app.add_subcommand("gen", "emit benchmark instances");
    gen->require_subcommand(1);
    std::vector<long long> avec;
    long long a0 = 0, cap = 0, cap_plus = -1, cap_minus = -1;
    std::vector<double> dvec;
    Index gn = 4, gh = 1, gr = 1;
    int gk = 1;
    std::uint64_t seed = 1;
    bool longshort = false;

    auto add_gen_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", out_path, "instance file")->required();
        cmd->add_option("--td-out", td_out, "companion decomposition file");
    };

    auto* gw3 = gen->add_subcommand("w3", "subset-sum staircase feasibility reduction");
    gw3->add_option("--a", avec, "elements (each > 1)")->required()->delimiter(',');
    gw3->add_option("--a0", a0, "target sum")->required();
    add_gen_common(gw3);

    auto* g2row = gen->add_subcommand("2row", "two-equality-row subset reduction");
    g2row->add_option("--a", avec, "elements (each >= 1)")->required()->delimiter(',');
    g2row->add_option("--a0", a0, "target sum")->required();
    g2row->add_option("--select", cap, "subset size / cardinality cap")->required();
    g2row->add_option("--dvec", dvec, "objective weights (default all-ones)")->delimiter(',');
    add_gen_common(g2row);

    auto* gport = gen->add_subcommand("portfolio", "factor-model portfolio with cardinality");
    gport->add_option("--data", data_path, "data file: lambda, v, d, mu, A, b, u, cap");
    gport->add_option("--assets", gn, "random mode: number of assets");
    gport->add_option("--factors", gh, "random mode: number of factors");
    gport->add_option("--rows", gr, "random mode: number of budget rows");
    gport->add_option("--cap", cap, "cardinality cap (random mode)");
    gport->add_option("--seed", seed, "random mode seed");
    gport->add_flag("--longshort", longshort, "emit the signed-parts variant");
    gport->add_option("--cap-plus", cap_plus, "positive-part cap (longshort)");
    gport->add_option("--cap-minus", cap_minus, "negative-part cap (longshort)");
    add_gen_common(gport);

    auto* gband = gen->add_subcommand("banded", "banded-objective reformulation");
    gband->add_option("--data", data_path, "data file: Q, c, d, bandwidth");
    gband->add_option("--size", gn, "random mode: dimension");
    gband->add_option("--bandwidth", gk, "random mode: bandwidth");
    gband->add_option("--seed", seed, "random mode seed");
    add_gen_common(gband);

    auto* gtruss = gen->add_subcommand("truss", "linear-equality design with cardinality");
    gtruss->add_option("--data", data_path, "data file: A, b, blocks, cap, lower, upper");
    gtruss->add_option("--size", gn, "random mode: number of variables");
    gtruss->add_option("--rows", gr, "random mode: number of equality rows");
    gtruss->add_option("--cap", cap, "cardinality cap");
    gtruss->add_option("--seed", seed, "random mode seed");
    add_gen_common(gtruss);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed())
            return run_solve(instance_path, eps, td_path, out_path, threads, trace);
        if (check->parsed()) return run_check(instance_path, solution_path, eps);
        if (oracle->parsed()) return run_oracle(instance_path, out_path, threads, stop_at_first);
        if (decompose->parsed()) return run_decompose(instance_path, out_path);

        if (gw3->parsed()) {
            qib::SubsetSumData d{avec, a0, 0};
            write_generated(qib::gen_subsetsum_w3(d), out_path, td_out);
            return 0;
        }
        if (g2row->parsed()) {
            qib::SubsetSumData d{avec, a0, cap};
            Eigen::VectorXd w;
            if (!dvec.empty()) w = Eigen::Map<Eigen::VectorXd>(dvec.data(),
                                                              static_cast<Eigen::Index>(dvec.size()));
            write_generated(qib::gen_2row(d, w), out_path, td_out);
            return 0;
        }
        if (gport->parsed()) {
            qib::PortfolioData d = data_path.empty()
                                       ? random_portfolio(gn, gh, gr, cap, seed)
                                       : portfolio_from_file(data_path);
            if (cap_plus >= 0) d.cap_plus = cap_plus;
            if (cap_minus >= 0) d.cap_minus = cap_minus;
            write_generated(longshort ? qib::gen_portfolio_longshort(d) : qib::gen_portfolio(d),
                            out_path, td_out);
            return 0;
        }
        if (gband->parsed()) {
            const qib::BandedData d =
                data_path.empty() ? random_banded(gn, gk, seed) : banded_from_file(data_path);
            write_generated(qib::gen_banded(d), out_path, td_out);
            return 0;
        }
        if (gtruss->parsed()) {
            if (!data_path.empty()) {
                const nlohmann::json j = load_json(data_path);
                write_generated(
                    qib::gen_truss(json_matrix(j.at("A")), json_vector(j.at("b")),
                                   j.at("blocks").get<std::vector<std::vector<Index>>>(),
                                   j.at("cap").get<long long>(), json_vector(j.at("lower")),
                                   json_vector(j.at("upper"))),
                    out_path, td_out);
                return 0;
            }
            std::mt19937_64 rng(seed);
            Eigen::MatrixXd A(gr, gn);
            for (Eigen::Index a = 0; a < gr; ++a)
                for (Eigen::Index b = 0; b < gn; ++b) A(a, b) = uniform(rng, -1.0, 1.0);
            Eigen::VectorXd x0(gn);
            for (Eigen::Index i = 0; i < gn; ++i) x0[i] = uniform(rng, -0.5, 0.5);
            std::vector<std::vector<Index>> blocks;
            for (Index i = 0; i < gn; ++i) blocks.push_back({i});
            write_generated(qib::gen_truss(A, A * x0, blocks, cap > 0 ? cap : gn,
                                           Eigen::VectorXd::Constant(gn, -1.0),
                                           Eigen::VectorXd::Ones(gn)),
                            out_path, td_out);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
