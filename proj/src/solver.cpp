#include "fepa/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fepa/model.hpp"

namespace fepa {

std::size_t Trajectory::column(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("no trajectory column " + name);
  return static_cast<std::size_t>(it - names.begin());
}

std::vector<double> output_grid(const SolverConfig& cfg) {
  if (!(cfg.grid > 0.0) || !(cfg.t_end >= 0.0))
    throw SolverError("grid step must be positive and horizon nonnegative");
  double count = cfg.t_end / cfg.grid;
  auto n = static_cast<std::size_t>(std::llround(count));
  if (std::abs(count - static_cast<double>(n)) > 1e-9 * std::max(1.0, count))
    throw SolverError("grid step " + format_double(cfg.grid) +
                      " does not divide horizon " + format_double(cfg.t_end));
  std::vector<double> times(n + 1);
  for (std::size_t i = 0; i <= n; ++i) times[i] = static_cast<double>(i) * cfg.grid;
  times.back() = cfg.t_end;
  return times;
}

namespace {

void check_finite(std::span<const double> x, double t) {
  for (double v : x)
    if (!std::isfinite(v))
      throw SolverError("non-finite state at t = " + format_double(t));
}

Trajectory rk4(const VectorFieldFn& f, std::vector<double> x,
               const SolverConfig& cfg, std::vector<std::string> names) {
  if (!(cfg.step > 0.0)) throw SolverError("step size must be positive");
  Trajectory out;
  out.times = output_grid(cfg);
  out.names = std::move(names);
  const std::size_t n = x.size();
  out.data.reserve(out.times.size() * n);
  out.data.insert(out.data.end(), x.begin(), x.end());
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (std::size_t g = 1; g < out.times.size(); ++g) {
    double span = out.times[g] - out.times[g - 1];
    auto steps = std::max<long long>(1, std::llround(span / cfg.step));
    double h = span / static_cast<double>(steps);
    for (long long s = 0; s < steps; ++s) {
      f(x, k1);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
      f(tmp, k2);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
      f(tmp, k3);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
      f(tmp, k4);
      for (std::size_t i = 0; i < n; ++i)
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    check_finite(x, out.times[g]);
    out.data.insert(out.data.end(), x.begin(), x.end());
  }
  return out;
}

// Dormand-Prince 5(4) with the 4th-order continuous extension.
namespace dp {
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0,
                 d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0,
                 d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0,
                 d7 = 69997945.0 / 29380423.0;
}  // namespace dp

double scaled_rms(std::span<const double> e, std::span<const double> y0,
                  std::span<const double> y1, const SolverConfig& cfg) {
  double sum = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    double sk = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    double r = e[i] / sk;
    sum += r * r;
  }
  return e.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(e.size()));
}

double initial_step(const VectorFieldFn& f, std::span<const double> x,
                    std::span<const double> f0, const SolverConfig& cfg,
                    double span) {
  const std::size_t n = x.size();
  std::vector<double> zero(n, 0.0);
  double d0 = scaled_rms(x, x, zero, cfg);
  double d1 = scaled_rms(f0, x, zero, cfg);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  std::vector<double> x1(n), f1(n), diff(n);
  for (std::size_t i = 0; i < n; ++i) x1[i] = x[i] + h0 * f0[i];
  f(x1, f1);
  for (std::size_t i = 0; i < n; ++i) diff[i] = f1[i] - f0[i];
  double d2 = scaled_rms(diff, x, zero, cfg) / h0;
  double dm = std::max(d1, d2);
  double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
  return std::min({100.0 * h0, h1, span});
}

Trajectory rk45(const VectorFieldFn& f, std::vector<double> x,
                const SolverConfig& cfg, std::vector<std::string> names) {
  if (!(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0))
    throw SolverError("tolerances must be positive");
  using namespace dp;
  Trajectory out;
  out.times = output_grid(cfg);
  out.names = std::move(names);
  const std::size_t n = x.size();
  out.data.reserve(out.times.size() * n);
  out.data.insert(out.data.end(), x.begin(), x.end());
  if (out.times.size() == 1) return out;

  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  std::vector<double> tmp(n), xn(n), err(n), r5(n);
  f(x, k1);
  double t = 0.0;
  const double t_end = cfg.t_end;
  double h = initial_step(f, x, k1, cfg, t_end);
  std::size_t next = 1;
  std::size_t steps = 0;
  bool rejected = false;

  while (next < out.times.size()) {
    if (++steps > cfg.max_steps) throw SolverError("step budget exhausted");
    if (t + h > t_end) h = t_end - t;
    if (h < 1e-12 * std::max(1.0, std::abs(t)))
      throw SolverError("step size underflow at t = " + format_double(t));

    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * a21 * k1[i];
    f(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * (a31 * k1[i] + a32 * k2[i]);
    f(tmp, k3);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = x[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = x[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(tmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = x[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                           a65 * k5[i]);
    f(tmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      xn[i] = x[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] +
                          a76 * k6[i]);
    f(xn, k7);
    for (std::size_t i = 0; i < n; ++i)
      err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                    e7 * k7[i]);
    double e = scaled_rms(err, x, xn, cfg);
    if (!std::isfinite(e)) {
      // Treat as a failed step; shrink hard.
      h *= 0.1;
      rejected = true;
      continue;
    }
    if (e > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(e, -0.2));
      rejected = true;
      continue;
    }

    const double t_new = (h == t_end - t) ? t_end : t + h;
    if (next < out.times.size() && out.times[next] <= t_new) {
      for (std::size_t i = 0; i < n; ++i)
        r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                     d7 * k7[i]);
      while (next < out.times.size() && out.times[next] <= t_new) {
        double tg = out.times[next];
        if (tg == t_new) {
          out.data.insert(out.data.end(), xn.begin(), xn.end());
        } else {
          double th = (tg - t) / h;
          double th1 = 1.0 - th;
          for (std::size_t i = 0; i < n; ++i) {
            double ydiff = xn[i] - x[i];
            double bspl = h * k1[i] - ydiff;
            double c4 = ydiff - h * k7[i] - bspl;
            tmp[i] = x[i] + th * (ydiff + th1 * (bspl + th * (c4 + th1 * r5[i])));
          }
          out.data.insert(out.data.end(), tmp.begin(), tmp.end());
        }
        ++next;
      }
    }

    check_finite(xn, t_new);
    x.swap(xn);
    k1.swap(k7);
    t = t_new;
    double fac = e == 0.0 ? 10.0 : std::min(10.0, std::max(0.2, 0.9 * std::pow(e, -0.2)));
    if (rejected) fac = std::min(fac, 1.0);
    h *= fac;
    rejected = false;
  }
  return out;
}

}  // namespace

Trajectory integrate(const VectorFieldFn& f, std::vector<double> x0,
                     const SolverConfig& cfg, std::vector<std::string> names) {
  if (names.empty()) {
    for (std::size_t i = 0; i < x0.size(); ++i) names.push_back("x" + std::to_string(i));
  }
  if (names.size() != x0.size())
    throw std::invalid_argument("state names and initial state differ in size");
  check_finite(x0, 0.0);
  return cfg.method == Method::Rk4Fixed ? rk4(f, std::move(x0), cfg, std::move(names))
                                        : rk45(f, std::move(x0), cfg, std::move(names));
}

Norm parse_norm(const std::string& text) {
  if (text == "inf") return Norm::Inf;
  if (text == "1") return Norm::One;
  if (text == "2") return Norm::Two;
  throw std::invalid_argument("unknown norm '" + text + "' (expected inf, 1 or 2)");
}

std::string to_string(Norm norm) {
  switch (norm) {
    case Norm::Inf: return "inf";
    case Norm::One: return "1";
    case Norm::Two: return "2";
  }
  return "?";
}

double vector_norm(std::span<const double> x, Norm norm) {
  double acc = 0.0;
  for (double v : x) {
    switch (norm) {
      case Norm::Inf: acc = std::max(acc, std::abs(v)); break;
      case Norm::One: acc += std::abs(v); break;
      case Norm::Two: acc += v * v; break;
    }
  }
  return norm == Norm::Two ? std::sqrt(acc) : acc;
}

double trajectory_distance(const Trajectory& a, const Trajectory& b, Norm norm) {
  if (a.times.size() != b.times.size())
    throw std::invalid_argument("trajectories have different grids");
  for (std::size_t i = 0; i < a.times.size(); ++i)
    if (std::abs(a.times[i] - b.times[i]) > 1e-9 * std::max(1.0, std::abs(a.times[i])))
      throw std::invalid_argument("trajectories have different grids");
  if (a.columns() != b.columns())
    throw std::invalid_argument("trajectories have different state sets");
  std::vector<std::size_t> map(a.columns());
  for (std::size_t j = 0; j < a.columns(); ++j) map[j] = b.column(a.names[j]);
  double worst = 0.0;
  std::vector<double> diff(a.columns());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.columns(); ++j) diff[j] = a.at(i, j) - b.at(i, map[j]);
    worst = std::max(worst, vector_norm(diff, norm));
  }
  return worst;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string trajectory_csv(const Trajectory& trajectory) {
  std::ostringstream os;
  os << 't';
  for (const auto& n : trajectory.names) os << ',' << csv_field(n);
  os << '\n';
  for (std::size_t i = 0; i < trajectory.rows(); ++i) {
    os << format_double(trajectory.times[i]);
    for (double v : trajectory.row(i)) os << ',' << format_double(v < 0.0 ? 0.0 : v);
    os << '\n';
  }
  return os.str();
}

Trajectory parse_trajectory_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("empty trajectory CSV");
  auto header = split_csv_line(line);
  if (header.empty() || header[0] != "t")
    throw std::invalid_argument("trajectory CSV must start with column 't'");
  Trajectory tr;
  tr.names.assign(header.begin() + 1, header.end());
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::invalid_argument("trajectory CSV line " + std::to_string(lineno) +
                                  " has " + std::to_string(fields.size()) + " fields");
    try {
      tr.times.push_back(std::stod(fields[0]));
      for (std::size_t j = 1; j < fields.size(); ++j) tr.data.push_back(std::stod(fields[j]));
    } catch (const std::exception&) {
      throw std::invalid_argument("malformed number on trajectory CSV line " +
                                  std::to_string(lineno));
    }
  }
  return tr;
}

}  // namespace fepa
