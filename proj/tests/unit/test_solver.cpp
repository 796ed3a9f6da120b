#include <doctest.h>

#include <cmath>

#include "fepa/semantics.hpp"
#include "fepa/solver.hpp"
#include "support/models.hpp"

using namespace fepa;

namespace {

VectorFieldFn decay(double k) {
  return [k](std::span<const double> x, std::span<double> dx) {
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = -k * x[i];
  };
}

// Harmonic oscillator: x'' = -x.
void oscillator(std::span<const double> x, std::span<double> dx) {
  dx[0] = x[1];
  dx[1] = -x[0];
}

}  // namespace

TEST_CASE("adaptive solver on exponential decay") {
  SolverConfig cfg;
  cfg.t_end = 1.0;
  cfg.grid = 0.1;
  auto tr = integrate(decay(1.0), {1.0}, cfg, {"x"});
  REQUIRE(tr.rows() == 11);
  CHECK(tr.times.back() == 1.0);
  CHECK(std::abs(tr.at(10, 0) - std::exp(-1.0)) <= 1e-8);
  for (std::size_t i = 0; i < tr.rows(); ++i)
    CHECK(std::abs(tr.at(i, 0) - std::exp(-tr.times[i])) <= 1e-8);
}

TEST_CASE("dense output between steps is accurate") {
  SolverConfig cfg;
  cfg.t_end = 20.0;
  cfg.grid = 0.02;
  auto tr = integrate(oscillator, {1.0, 0.0}, cfg, {"x", "v"});
  double worst = 0.0;
  for (std::size_t i = 0; i < tr.rows(); ++i) {
    worst = std::max(worst, std::abs(tr.at(i, 0) - std::cos(tr.times[i])));
    worst = std::max(worst, std::abs(tr.at(i, 1) + std::sin(tr.times[i])));
  }
  CHECK(worst <= 1e-7);
}

TEST_CASE("fixed-step RK4 converges at fourth order") {
  auto error = [](double h) {
    SolverConfig cfg;
    cfg.method = Method::Rk4Fixed;
    cfg.step = h;
    cfg.t_end = 2.0;
    cfg.grid = 1.0;
    auto tr = integrate(oscillator, {1.0, 0.0}, cfg, {"x", "v"});
    return std::abs(tr.at(2, 0) - std::cos(2.0));
  };
  double ratio = error(0.1) / error(0.05);
  CHECK(ratio > 14.0);
  CHECK(ratio < 18.0);
}

TEST_CASE("fixed-step mode is bitwise deterministic") {
  FluidSystem sys(parse_model(testing::sys_text(3, Sync::Min)));
  auto f = [&](std::span<const double> x, std::span<double> dx) { sys.derivative(x, dx); };
  SolverConfig cfg;
  cfg.method = Method::Rk4Fixed;
  cfg.step = 1e-3;
  cfg.t_end = 2.0;
  auto a = integrate(f, sys.initial_state(), cfg, sys.state_names());
  auto b = integrate(f, sys.initial_state(), cfg, sys.state_names());
  CHECK(a.data == b.data);
}

TEST_CASE("grid must divide the horizon") {
  SolverConfig cfg;
  cfg.t_end = 1.0;
  cfg.grid = 0.3;
  CHECK_THROWS_AS(output_grid(cfg), SolverError);
  cfg.grid = 0.2;
  CHECK(output_grid(cfg).size() == 6);
  cfg.t_end = 100.0;
  auto g = output_grid(cfg);
  CHECK(g.size() == 501);
  CHECK(g[250] == doctest::Approx(50.0));
}

TEST_CASE("solver reports blow-up") {
  SolverConfig cfg;
  cfg.t_end = 2.0;
  cfg.grid = 0.5;
  auto blowup = [](std::span<const double> x, std::span<double> dx) { dx[0] = x[0] * x[0]; };
  CHECK_THROWS_AS(integrate(blowup, {1.0}, cfg, {"x"}), SolverError);
  cfg.method = Method::Rk4Fixed;
  cfg.step = 0.01;
  CHECK_THROWS_AS(integrate(blowup, {1.0}, cfg, {"x"}), SolverError);
}

TEST_CASE("running example: conservation and equilibrium") {
  for (Sync rho : {Sync::Min, Sync::Product}) {
    FluidSystem sys(parse_model(testing::sys_text(
        {1.0, 1.2, 1.4}, 0.5, 1.0, 15, rho, {200, 201, 202}, 400)));
    auto f = [&](std::span<const double> x, std::span<double> dx) { sys.derivative(x, dx); };
    SolverConfig cfg;
    auto tr = integrate(f, sys.initial_state(), cfg, sys.state_names());
    CHECK(tr.rows() == 501);
    for (std::size_t d = 1; d <= 3; ++d) {
      auto p = tr.column("P" + std::to_string(d));
      auto q = tr.column("P" + std::to_string(d) + "'");
      double n = 199.0 + static_cast<double>(d);
      for (std::size_t i = 0; i < tr.rows(); ++i)
        CHECK(std::abs(tr.at(i, p) + tr.at(i, q) - n) <= 1e-8);
    }
    auto last = tr.row(tr.rows() - 1);
    auto fx = sys.derivative(std::vector<double>(last.begin(), last.end()));
    auto f0 = sys.derivative(sys.initial_state());
    double worst = 0.0, start = 0.0;
    for (double x : fx) worst = std::max(worst, std::abs(x));
    for (double x : f0) start = std::max(start, std::abs(x));
    CHECK(worst <= 1e-6 * start);
  }
}

TEST_CASE("trajectory distance and norms") {
  Trajectory a;
  a.times = {0, 1, 2};
  a.names = {"x", "y"};
  a.data = {1, 2, 3, 4, 5, 6};
  Trajectory b = a;
  CHECK(trajectory_distance(a, b) == 0.0);
  b.data[3] += 0.25;
  CHECK(trajectory_distance(a, b) == 0.25);
  // Columns are matched by name.
  Trajectory c;
  c.times = a.times;
  c.names = {"y", "x"};
  c.data = {2, 1, 4, 3, 6, 5};
  CHECK(trajectory_distance(a, c) == 0.0);
  Trajectory d = a;
  d.times = {0, 1, 3};
  CHECK_THROWS(trajectory_distance(a, d));

  std::vector<double> v = {3, -4};
  CHECK(vector_norm(v, Norm::Inf) == 4.0);
  CHECK(vector_norm(v, Norm::One) == 7.0);
  CHECK(vector_norm(v, Norm::Two) == 5.0);
  CHECK(parse_norm("2") == Norm::Two);
  CHECK_THROWS(parse_norm("max"));
}

TEST_CASE("trajectory CSV round trip clamps negatives") {
  Trajectory a;
  a.times = {0, 0.2};
  a.names = {"P", "(b, 2).P"};
  a.data = {1.5, -1e-14, 0.25, 3};
  auto text = trajectory_csv(a);
  CHECK(text.substr(0, text.find('\n')) == "t,P,\"(b, 2).P\"");
  auto back = parse_trajectory_csv(text);
  CHECK(back.names == a.names);
  CHECK(back.times == a.times);
  CHECK(back.data == std::vector<double>{1.5, 0.0, 0.25, 3});
}
