#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "qib/qcqp.hpp"
#include "support/factory.hpp"
#include "support/reference.hpp"

using namespace qib;
using namespace testsupport;

namespace {

BlockQcqp one_dim(double upper) {
    BlockQcqp q;
    q.P = Eigen::MatrixXd::Zero(1, 1);
    q.q = Eigen::VectorXd::Zero(1);
    q.upper = Eigen::VectorXd::Constant(1, upper);
    return q;
}

}  // namespace

TEST_SUITE("qcqp") {

TEST_CASE("unconstrained box minimum at the corner") {
    BlockQcqp q = one_dim(1.0);
    q.P(0, 0) = 1.0;
    const QcqpResult res = solve(q);
    REQUIRE(res.status == QcqpStatus::Optimal);
    CHECK(res.value == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(res.x[0] == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(kkt_residual(q, res) <= 1e-6);
}

TEST_CASE("quadratic constraint binds at the ball boundary") {
    // min (x-1)^2 s.t. x^2 <= 1/4 on [0,1]: optimum x = 1/2, value 1/4.
    BlockQcqp q = one_dim(1.0);
    q.P(0, 0) = 1.0;
    q.q[0] = -2.0;
    q.r = 1.0;
    QcqpRow row;
    row.Q = Eigen::MatrixXd::Constant(1, 1, 1.0);
    row.a = Eigen::VectorXd::Zero(1);
    row.rhs = 0.25;
    q.rows.push_back(row);

    const QcqpResult res = solve(q);
    REQUIRE(res.status == QcqpStatus::Optimal);
    CHECK(res.x[0] == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(res.value == doctest::Approx(0.25).epsilon(1e-5));
    CHECK(kkt_residual(q, res) <= 1e-6);
    REQUIRE(res.row_multipliers.size() == 1);
    CHECK(res.row_multipliers[0] > 0.1);  // the ball is active
}

TEST_CASE("relaxing the binding row can only improve the value") {
    BlockQcqp q = one_dim(1.0);
    q.P(0, 0) = 1.0;
    q.q[0] = -2.0;
    q.r = 1.0;
    QcqpRow row;
    row.Q = Eigen::MatrixXd::Constant(1, 1, 1.0);
    row.a = Eigen::VectorXd::Zero(1);
    row.rhs = 0.25;
    q.rows.push_back(row);
    const double tight = solve(q).value;
    q.rows[0].rhs = 0.5;
    const double loose = solve(q).value;
    CHECK(loose <= tight + 1e-8);
    CHECK(loose == doctest::Approx((1.0 - std::sqrt(0.5)) * (1.0 - std::sqrt(0.5))).epsilon(1e-4));
}

TEST_CASE("contradictory linear rows are reported infeasible") {
    BlockQcqp q = one_dim(1.0);
    QcqpLinearRow hi;
    hi.a = Eigen::VectorXd::Constant(1, 1.0);
    hi.lo = -kNoBound;
    hi.hi = 0.2;
    QcqpLinearRow lo;
    lo.a = Eigen::VectorXd::Constant(1, 1.0);
    lo.lo = 0.8;
    lo.hi = kNoBound;
    q.linear_rows = {hi, lo};

    const QcqpResult res = solve(q);
    CHECK(res.status == QcqpStatus::Infeasible);
    CHECK(res.max_violation > 0.1);

    const Phase1Result ph = phase1(q);
    CHECK(ph.t == doctest::Approx(0.3).epsilon(1e-3));
}

TEST_CASE("phase1 short-circuits without constraints") {
    BlockQcqp q = one_dim(2.0);
    const Phase1Result ph = phase1(q);
    CHECK(ph.t == 0.0);
    CHECK(ph.x[0] == doctest::Approx(1.0));
}

TEST_CASE("phase1 certifies feasible systems") {
    BlockQcqp q = one_dim(1.0);
    QcqpRow row;
    row.Q = Eigen::MatrixXd::Constant(1, 1, 1.0);
    row.a = Eigen::VectorXd::Zero(1);
    row.rhs = 0.25;
    q.rows.push_back(row);
    CHECK(phase1(q).t <= 1e-8);
}

TEST_CASE("one-sided linear lower bound binds") {
    BlockQcqp q = one_dim(1.0);
    q.q[0] = 1.0;  // minimize x
    QcqpLinearRow row;
    row.a = Eigen::VectorXd::Constant(1, 1.0);
    row.lo = 0.3;
    row.hi = kNoBound;
    q.linear_rows.push_back(row);
    const QcqpResult res = solve(q);
    REQUIRE(res.status == QcqpStatus::Optimal);
    CHECK(res.x[0] == doctest::Approx(0.3).epsilon(1e-5));
    CHECK(res.value == doctest::Approx(0.3).epsilon(1e-5));
}

TEST_CASE("equality rows are eliminated exactly") {
    // min x^2 + y^2 s.t. x + y = 1: optimum (1/2, 1/2), value 1/2.
    BlockQcqp q;
    q.P = Eigen::MatrixXd::Identity(2, 2);
    q.q = Eigen::VectorXd::Zero(2);
    q.upper = Eigen::VectorXd::Constant(2, 1.0);
    QcqpLinearRow row;
    row.a = Eigen::VectorXd::Constant(2, 1.0);
    row.lo = 1.0;
    row.hi = 1.0;
    q.linear_rows.push_back(row);

    const QcqpResult res = solve(q);
    REQUIRE(res.status == QcqpStatus::Optimal);
    CHECK(res.x[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(res.x[1] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(res.value == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(std::abs(res.x.sum() - 1.0) <= 1e-9);  // the equality holds tightly
    CHECK(kkt_residual(q, res) <= 1e-6);
}

TEST_CASE("kkt residual flags a perturbed point") {
    BlockQcqp q = one_dim(1.0);
    q.P(0, 0) = 1.0;
    q.q[0] = -1.0;  // optimum x = 1/2 interior
    QcqpResult res = solve(q);
    CHECK(kkt_residual(q, res) <= 1e-6);
    res.x[0] += 0.1;
    CHECK(kkt_residual(q, res) >= 1e-3);
}

TEST_CASE("all-zero data solves to zero") {
    BlockQcqp q = one_dim(1.0);
    const QcqpResult res = solve(q);
    REQUIRE(res.status == QcqpStatus::Optimal);
    CHECK(std::abs(res.value) <= 1e-9);
}

TEST_CASE("dimension-zero problems return the constant") {
    BlockQcqp q;
    q.upper = Eigen::VectorXd(0);
    q.r = 1.5;
    const QcqpResult res = solve(q);
    CHECK(res.status == QcqpStatus::Optimal);
    CHECK(res.value == doctest::Approx(1.5));
}

TEST_CASE("random feasible instances agree with the projected-gradient reference") {
    std::mt19937_64 rng(808);
    int checked = 0;
    for (int trial = 0; trial < 25; ++trial) {
        const BlockQcqp q = random_qcqp(rng);
        const QcqpResult res = solve(q);
        REQUIRE(res.status == QcqpStatus::Optimal);
        CHECK((res.x.array() >= -1e-12).all());
        CHECK(((q.upper - res.x).array() >= -1e-12).all());
        CHECK(kkt_residual(q, res) <= 1e-6);

        const refimpl::PgResult pg = refimpl::pg_solve(q);
        CHECK(pg.max_violation <= 1e-7);
        CHECK(std::abs(res.value - pg.value) <= 1e-5 * std::max(1.0, std::abs(pg.value)));
        ++checked;
    }
    CHECK(checked == 25);
}

}  // TEST_SUITE
