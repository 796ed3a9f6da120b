#include <doctest.h>

#include <cmath>
#include <limits>

#include "fepa/experiment.hpp"
#include "fepa/semantics.hpp"
#include "fepa/symbolic.hpp"

using namespace fepa;

namespace {

const double nan_value = std::numeric_limits<double>::quiet_NaN();

SweepConfig small_config() {
  SweepConfig cfg;
  cfg.efl_sizes = {3};
  cfg.ofl_sizes = {3};
  cfg.deltas = {0.05, 0.01};
  cfg.solver.t_end = 10.0;
  return cfg;
}

}  // namespace

TEST_CASE("spread model") {
  auto m = spread_model(3, 0.03, Sync::Min);
  CHECK(m.rho == Sync::Min);
  auto r = m.rates();
  REQUIRE(r.size() == 8);
  CHECK(r[0] == 1.0);
  CHECK(r[2] == doctest::Approx(1.03));
  CHECK(r[4] == doctest::Approx(1.06));
  CHECK(r[1] == 0.5);
  CHECK(r[6] == 1.0);
  CHECK(r[7] == 15.0);
  CHECK(m.initial.at("P1") == 200.0);
  CHECK(m.initial.at("P3") == 202.0);
  CHECK(m.initial.at("Q") == 400.0);
  FluidSystem sys(m);
  CHECK(sys.state_count() == 8);
  CHECK(sys.actions() == std::vector<std::string>{"alpha", "beta", "gamma"});

  auto one = spread_model(1, 0.1, Sync::Product);
  CHECK(export_text(symbolic_field(FluidSystem(one))) ==
        "d/dt V[P1] = -1*V[P1]*V[Q] + 0.5*V[P1']\n"
        "d/dt V[P1'] = 1*V[P1]*V[Q] - 0.5*V[P1']\n"
        "d/dt V[Q] = -1*V[P1]*V[Q] + 15*V[Q']\n"
        "d/dt V[Q'] = 1*V[P1]*V[Q] - 15*V[Q']\n");
  CHECK_THROWS_AS(spread_model(0, 0.1, Sync::Min), std::invalid_argument);
  CHECK_THROWS_AS(spread_model(2, -0.1, Sync::Min), std::invalid_argument);
}

TEST_CASE("default sweep values") {
  auto d = default_deltas();
  REQUIRE(d.size() == 20);
  CHECK(d.front() == doctest::Approx(0.0005));
  CHECK(d[1] == doctest::Approx(0.0055));
  CHECK(d.back() == doctest::Approx(0.0955));
}

TEST_CASE("linear fit") {
  auto exact = linear_fit({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(exact.slope == doctest::Approx(2.0));
  CHECK(exact.intercept == doctest::Approx(1.0));
  CHECK(exact.r2 == doctest::Approx(1.0));
  auto rough = linear_fit({0, 1, 2}, {0, 1, 1});
  CHECK(rough.slope == doctest::Approx(0.5));
  CHECK(rough.intercept == doctest::Approx(1.0 / 6.0));
  CHECK(rough.r2 == doctest::Approx(0.75));
  CHECK_THROWS_AS(linear_fit({1}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(linear_fit({1, 1}, {1, 2}), std::invalid_argument);
}

TEST_CASE("exact aggregation gives no error") {
  SweepConfig cfg;
  cfg.params.population_step = 0.0;
  cfg.solver.t_end = 20.0;
  cfg.solver.rel_tol = 1e-12;
  cfg.solver.abs_tol = 1e-12;
  for (Sync rho : {Sync::Min, Sync::Product}) {
    auto row = run_sweep_point(rho, 4, 0.0, true, true, cfg);
    CHECK(row.eps_norm == 0.0);
    CHECK(row.delta0_norm == 0.0);
    CHECK(row.efl_error_pct <= 1e-6);
    CHECK(row.ofl_error_pct <= 1e-6);
    CHECK(row.theory_bound == 0.0);
  }
}

TEST_CASE("sweep point magnitudes") {
  SweepConfig cfg;
  cfg.solver.t_end = 5.0;
  auto row = run_sweep_point(Sync::Min, 3, 0.02, true, false, cfg);
  CHECK(row.D == 3);
  CHECK(row.eps_norm == doctest::Approx(0.02));
  CHECK(row.delta0_norm == doctest::Approx(1.0));
  // The averaged initial populations already differ by 1 from 200.
  CHECK(row.efl_error_pct >= 0.5);
  CHECK(std::isnan(row.ofl_error_pct));
  CHECK(row.theory_bound > 0.0);
  auto ofl = run_sweep_point(Sync::Min, 3, 0.02, false, true, cfg);
  CHECK(std::isnan(ofl.efl_error_pct));
  CHECK(ofl.delta0_norm == 0.0);
  CHECK(ofl.ofl_error_pct < row.efl_error_pct);
}

TEST_CASE("sweep layout and determinism") {
  auto cfg = small_config();
  auto serial = run_sweep(cfg);
  cfg.jobs = 4;
  auto parallel = run_sweep(cfg);
  CHECK(sweep_csv(serial) == sweep_csv(parallel));
  REQUIRE(serial.size() == 4);
  CHECK(serial[0].rho == Sync::Min);
  CHECK(serial[0].delta == 0.01);
  CHECK(serial[1].delta == 0.05);
  CHECK(serial[2].rho == Sync::Product);

  SweepConfig grid;
  grid.deltas = {0.01, 0.02};
  grid.solver.t_end = 0.4;
  auto rows = run_sweep(grid);
  CHECK(rows.size() == 2 * 4 * 2);
  for (const auto& r : rows) {
    CHECK_FALSE(std::isnan(r.efl_error_pct));
    CHECK(std::isnan(r.ofl_error_pct) == (r.D != 12));
  }
}

TEST_CASE("sweep csv") {
  std::vector<SweepRow> rows{{Sync::Min, 3, 0.0005, 0.0005, 1.0, 0.5, nan_value, INFINITY},
                             {Sync::Product, 12, 0.01, 0.055, 5.5, 2.75, 0.25, 3.5}};
  CHECK(sweep_csv(rows) ==
        "rho,D,delta_param,eps_norm,delta0_norm,efl_error_pct,ofl_error_pct,theory_bound\n"
        "min,3,5e-04,5e-04,1,0.5,,inf\n"
        "product,12,0.01,0.055,5.5,2.75,0.25,3.5\n");
}

TEST_CASE("sweep checks") {
  auto row = [](Sync rho, std::size_t D, double delta, double efl, double ofl) {
    return SweepRow{rho, D, delta, delta, 1.0, efl, ofl, INFINITY};
  };
  std::vector<SweepRow> good;
  for (double d : {0.01, 0.02, 0.03}) {
    good.push_back(row(Sync::Min, 3, d, 100 * d, nan_value));
    good.push_back(row(Sync::Product, 3, d, 50 * d, nan_value));
    good.push_back(row(Sync::Min, 12, d, 200 * d, 0.1));
  }
  auto checks = sweep_checks(good);
  for (const auto& c : checks) CHECK_MESSAGE(c.pass, c.name);
  CHECK(checks.size() == 2 * 3 + 2);

  auto bad = good;
  bad[3].efl_error_pct = 0.1;  // min D=3 drops at 0.02 and is now below product
  bad[8].ofl_error_pct = 1.5;  // min D=12 at 0.03
  checks = sweep_checks(bad);
  int failed = 0;
  for (const auto& c : checks) failed += c.pass ? 0 : 1;
  CHECK(failed == 4);
  auto text = sweep_summary(checks);
  CHECK(text.find("FAIL exact-lumping error nondecreasing, min D=3") != std::string::npos);
  CHECK(text.find("FAIL product error <= min error") != std::string::npos);
  CHECK(text.find("FAIL ordinary-lumping error") != std::string::npos);
}
