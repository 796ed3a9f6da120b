#pragma once

// Explicit Runge-Kutta integration onto a uniform output grid.

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fepa {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method { Rk4Fixed, Rk45Adaptive };

struct SolverConfig {
  Method method = Method::Rk45Adaptive;
  /// Step size for Rk4Fixed.
  double step = 1e-3;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double t_end = 100.0;
  /// Output grid spacing; must divide t_end.
  double grid = 0.2;
  std::size_t max_steps = 50'000'000;
};

/// Rows are grid times, columns states.
struct Trajectory {
  std::vector<double> times;
  std::vector<std::string> names;
  std::vector<double> data;

  std::size_t rows() const { return times.size(); }
  std::size_t columns() const { return names.size(); }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * columns(), columns()};
  }
  double at(std::size_t i, std::size_t j) const { return data[i * columns() + j]; }
  std::size_t column(const std::string& name) const;
};

using VectorFieldFn =
    std::function<void(std::span<const double> x, std::span<double> dxdt)>;

/// Output grid 0, grid, 2 grid, ..., t_end.
std::vector<double> output_grid(const SolverConfig& cfg);

/// Integrates dx/dt = f(x) from x0. Throws SolverError on step underflow,
/// non-finite state or exhausted step budget.
Trajectory integrate(const VectorFieldFn& f, std::vector<double> x0,
                     const SolverConfig& cfg, std::vector<std::string> names);

enum class Norm { Inf, One, Two };

Norm parse_norm(const std::string& text);
std::string to_string(Norm norm);
double vector_norm(std::span<const double> x, Norm norm);

/// max over grid rows of ||a(t) - b(t)||. Columns are matched by name; both
/// trajectories must share grid times and column names.
double trajectory_distance(const Trajectory& a, const Trajectory& b,
                           Norm norm = Norm::Inf);

/// CSV with header `t,<names...>`; negative roundoff is written as 0.
std::string trajectory_csv(const Trajectory& trajectory);
Trajectory parse_trajectory_csv(const std::string& text);

}  // namespace fepa
