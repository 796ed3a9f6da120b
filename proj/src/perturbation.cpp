#include "fepa/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "fepa/symbolic.hpp"

namespace fepa {

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

// Operator norm bound of a rows x cols matrix of absolute entry bounds.
double matrix_norm(const std::vector<double>& m, std::size_t rows, std::size_t cols, Norm norm) {
  double out = 0.0;
  switch (norm) {
    case Norm::Inf:
      for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += std::abs(m[i * cols + j]);
        out = std::max(out, s);
      }
      break;
    case Norm::One:
      for (std::size_t j = 0; j < cols; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < rows; ++i) s += std::abs(m[i * cols + j]);
        out = std::max(out, s);
      }
      break;
    case Norm::Two:
      for (double x : m) out += x * x;
      out = std::sqrt(out);
      break;
  }
  return out;
}

std::vector<std::size_t> column_map(const FluidSystem& sys, const Trajectory& t) {
  std::vector<std::size_t> out;
  for (const auto& name : sys.state_names()) out.push_back(t.column(name));
  return out;
}

std::vector<double> state_row(const Trajectory& t, std::size_t i,
                              const std::vector<std::size_t>& cols) {
  std::vector<double> v(cols.size());
  for (std::size_t g = 0; g < cols.size(); ++g) v[g] = t.at(i, cols[g]);
  return v;
}

void check_grids(const Trajectory& a, const Trajectory& b) {
  if (a.times.size() != b.times.size())
    throw std::invalid_argument("trajectories have " + std::to_string(a.rows()) + " and " +
                                std::to_string(b.rows()) + " grid points");
  for (std::size_t i = 0; i < a.times.size(); ++i)
    if (std::abs(a.times[i] - b.times[i]) > 1e-9 * std::max(1.0, std::abs(a.times[i])))
      throw std::invalid_argument("trajectory grids differ at row " + std::to_string(i));
}

LipschitzConstants product_constants(const FluidSystem& sys,
                                     std::span<const double> state_upper,
                                     std::span<const double> rate_upper,
                                     const Trajectory& trajectory, Norm norm) {
  const auto field = symbolic_field(sys);
  const std::size_t n = sys.state_count(), m = field.rate_count;
  std::vector<double> values(state_upper.begin(), state_upper.end());
  values.insert(values.end(), rate_upper.begin(), rate_upper.end());

  std::vector<double> jac(n * n, 0.0);
  std::vector<std::vector<Polynomial>> by_rate(n, std::vector<Polynomial>(m));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      jac[i * n + j] =
          field.parametric[i].derivative(static_cast<std::uint32_t>(j)).absolute_bound(values);
    for (std::size_t k = 0; k < m; ++k)
      by_rate[i][k] = field.parametric[i].derivative(static_cast<std::uint32_t>(n + k));
  }
  LipschitzConstants out;
  out.L = matrix_norm(jac, n, n, norm);

  auto cols = column_map(sys, trajectory);
  std::vector<double> kx(n * m);
  for (std::size_t r = 0; r < trajectory.rows(); ++r) {
    auto x = state_row(trajectory, r, cols);
    for (std::size_t g = 0; g < n; ++g) values[g] = std::abs(x[g]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < m; ++k) kx[i * m + k] = by_rate[i][k].absolute_bound(values);
    out.K = std::max(out.K, matrix_norm(kx, n, m, norm));
  }
  out.K *= 1.1;
  return out;
}

LipschitzConstants min_constants(const FluidSystem& sys, std::span<const double> state_upper,
                                 std::span<const double> rate_lower,
                                 std::span<const double> rate_upper,
                                 const Trajectory& trajectory, Norm norm) {
  const std::size_t n = sys.state_count(), m = rate_upper.size();
  std::vector<std::vector<double>> corners{{rate_lower.begin(), rate_lower.end()},
                                           {rate_upper.begin(), rate_upper.end()}};
  if (corners[0] == corners[1]) corners.pop_back();

  auto cols = column_map(sys, trajectory);
  std::vector<std::vector<double>> points;
  for (std::size_t r = 0; r < trajectory.rows(); ++r) points.push_back(state_row(trajectory, r, cols));
  std::mt19937_64 rng(7);
  for (std::size_t s = 0; s < 200; ++s) {
    std::vector<double> v(n);
    for (std::size_t g = 0; g < n; ++g)
      v[g] = std::uniform_real_distribution<double>(0.0, state_upper[g])(rng);
    points.push_back(std::move(v));
  }

  LipschitzConstants out;
  std::vector<double> jac(n * n), kx(n * m);
  for (const auto& theta : corners) {
    FluidSystem base = sys.with_rates(theta);
    std::vector<FluidSystem> shifted;
    std::vector<double> dtheta(m);
    for (std::size_t k = 0; k < m; ++k) {
      auto t = theta;
      dtheta[k] = 1e-6 * std::max(1.0, std::abs(theta[k]));
      t[k] += dtheta[k];
      shifted.push_back(sys.with_rates(t));
    }
    for (std::size_t p = 0; p < points.size(); ++p) {
      auto x = points[p];
      auto f = base.derivative(x);
      for (std::size_t j = 0; j < n; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
        const double keep = x[j];
        x[j] += h;
        auto fh = base.derivative(x);
        x[j] = keep;
        for (std::size_t i = 0; i < n; ++i) jac[i * n + j] = (fh[i] - f[i]) / h;
      }
      out.L = std::max(out.L, matrix_norm(jac, n, n, norm));
      if (p >= trajectory.rows()) continue;
      for (std::size_t k = 0; k < m; ++k) {
        auto fk = shifted[k].derivative(x);
        for (std::size_t i = 0; i < n; ++i) kx[i * m + k] = (fk[i] - f[i]) / dtheta[k];
      }
      out.K = std::max(out.K, matrix_norm(kx, n, m, norm));
    }
  }
  out.L *= 1.1;
  out.K *= 1.1;
  return out;
}

}  // namespace

HomogenizationPlan plan_for_partition(const FluidSystem& sys, const Partition& p,
                                      bool average_initial) {
  check_partition(sys, p);
  const std::size_t slots = sys.model().rate_vector.size();
  UnionFind uf(slots);
  HomogenizationPlan plan;
  for (const auto& block : p.blocks) {
    const auto& rep = sys.atoms()[sys.atom_index(block.atoms[0])];
    for (std::size_t j = 1; j < block.atoms.size(); ++j) {
      const auto& member = sys.atoms()[sys.atom_index(block.atoms[j])];
      for (std::size_t s = 0; s < rep.graph.size(); ++s) {
        const std::size_t gr = rep.offset + s, gm = member.offset + block.sigma[j][s];
        for (ActionId a = 0; a < sys.actions().size(); ++a) {
          const auto& from = sys.outgoing(gr, a);
          const auto& to = sys.outgoing(gm, a);
          if (from.size() != to.size())
            throw LumpingError("states " + sys.state_names()[gr] + " and " +
                               sys.state_names()[gm] + " have different " +
                               sys.actions()[a] + "-transitions");
          std::vector<bool> used(to.size(), false);
          for (const auto& o : from) {
            const std::size_t image = member.offset + block.sigma[j][o.target - rep.offset];
            bool paired = false;
            for (std::size_t k = 0; k < to.size() && !paired; ++k) {
              if (used[k] || to[k].target != image) continue;
              used[k] = true;
              paired = true;
              uf.unite(o.slot, to[k].slot);
            }
            if (!paired)
              throw LumpingError("no " + sys.actions()[a] + "-transition of " +
                                 sys.state_names()[gm] + " matches one of " +
                                 sys.state_names()[gr]);
          }
        }
      }
    }
    if (average_initial && block.atoms.size() > 1) {
      for (std::size_t s = 0; s < rep.graph.size(); ++s) {
        std::vector<std::string> cls;
        for (std::size_t j = 0; j < block.atoms.size(); ++j) {
          const auto& member = sys.atoms()[sys.atom_index(block.atoms[j])];
          cls.push_back(sys.state_names()[member.offset + block.sigma[j][s]]);
        }
        plan.initial_classes.push_back(std::move(cls));
      }
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t k = 0; k < slots; ++k) by_root[uf.find(k)].push_back(k);
  for (auto& [root, members] : by_root)
    if (members.size() > 1) plan.rate_classes.push_back(std::move(members));
  std::sort(plan.rate_classes.begin(), plan.rate_classes.end());
  return plan;
}

Homogenized homogenize(const FepaModel& model, const HomogenizationPlan& plan, Norm norm) {
  const auto xi = model.rates();
  auto zeta = xi;
  std::vector<bool> seen(xi.size(), false);
  for (const auto& cls : plan.rate_classes) {
    double sum = 0.0;
    for (std::size_t k : cls) {
      if (k >= xi.size())
        throw std::invalid_argument("rate class names occurrence " + std::to_string(k) +
                                    " of " + std::to_string(xi.size()));
      if (seen[k])
        throw std::invalid_argument("rate occurrence " + std::to_string(k) +
                                    " is in more than one class");
      seen[k] = true;
      sum += xi[k];
    }
    for (std::size_t k : cls) zeta[k] = sum / static_cast<double>(cls.size());
  }

  Homogenized out{apply_rates(model, zeta), {}};
  std::set<std::string> seen_states;
  for (const auto& cls : plan.initial_classes) {
    double sum = 0.0;
    for (const auto& state : cls) {
      if (!seen_states.insert(state).second)
        throw std::invalid_argument("state " + state + " is in more than one initial class");
      auto it = model.initial.find(state);
      sum += it == model.initial.end() ? 0.0 : it->second;
    }
    for (const auto& state : cls) out.model.initial[state] = sum / static_cast<double>(cls.size());
  }

  std::vector<double> drate(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) drate[k] = xi[k] - zeta[k];
  std::vector<double> dinit;
  for (const auto& [state, value] : out.model.initial) {
    auto it = model.initial.find(state);
    dinit.push_back((it == model.initial.end() ? 0.0 : it->second) - value);
  }
  out.report.norm = norm;
  out.report.epsilon = vector_norm(drate, norm);
  out.report.delta = vector_norm(dinit, norm);
  return out;
}

std::vector<double> conservation_box(const FluidSystem& sys) {
  auto v0 = sys.initial_state();
  std::vector<double> out(sys.state_count());
  for (const auto& atom : sys.atoms()) {
    double total = 0.0;
    for (std::size_t s = 0; s < atom.graph.size(); ++s) total += v0[atom.offset + s];
    for (std::size_t s = 0; s < atom.graph.size(); ++s) out[atom.offset + s] = total;
  }
  return out;
}

LipschitzConstants lipschitz_estimate(const FluidSystem& sys,
                                      std::span<const double> state_upper,
                                      std::span<const double> rate_lower,
                                      std::span<const double> rate_upper,
                                      const Trajectory& trajectory, Norm norm) {
  if (state_upper.size() != sys.state_count())
    throw std::invalid_argument("state box has " + std::to_string(state_upper.size()) +
                                " bounds, system has " + std::to_string(sys.state_count()) +
                                " states");
  const std::size_t m = sys.model().rate_vector.size();
  if (rate_lower.size() != m || rate_upper.size() != m)
    throw std::invalid_argument("rate box must have " + std::to_string(m) + " bounds");
  for (double x : state_upper)
    if (!std::isfinite(x) || x < 0.0)
      throw std::invalid_argument("state box must be bounded and nonnegative");
  for (std::size_t k = 0; k < m; ++k)
    if (!std::isfinite(rate_upper[k]) || !(rate_lower[k] > 0.0) || rate_lower[k] > rate_upper[k])
      throw std::invalid_argument("rate box must be bounded with 0 < lower <= upper");
  if (sys.rho() == Sync::Product)
    return product_constants(sys, state_upper, rate_upper, trajectory, norm);
  return min_constants(sys, state_upper, rate_lower, rate_upper, trajectory, norm);
}

double error_bound(double epsilon, double delta, double K, double L, double t) {
  if (!(L > 0.0)) throw std::invalid_argument("error bound needs L > 0");
  if (!std::isfinite(K) || K < 0.0)
    throw std::invalid_argument("error bound needs a finite K >= 0");
  if (epsilon < 0.0 || delta < 0.0 || t < 0.0)
    throw std::invalid_argument("error bound needs nonnegative epsilon, delta and t");
  const double c = epsilon * K / L;
  double bound = 0.0;
  if (delta > 0.0) bound += delta * std::exp(L * t);
  if (c > 0.0) bound += c * std::expm1(L * t);
  return bound;
}

double error_bound(const PerturbationReport& r) {
  return error_bound(r.epsilon, r.delta, r.K, r.L, r.horizon);
}

PerturbationReport perturbation_report(const FluidSystem& original,
                                       const FluidSystem& reference,
                                       const Trajectory& original_trajectory, double t,
                                       Norm norm) {
  if (original.state_names() != reference.state_names())
    throw std::invalid_argument("original and reference models have different states");
  const auto xi = original.model().rates(), zeta = reference.model().rates();
  if (xi.size() != zeta.size())
    throw std::invalid_argument("original and reference models have different rate vectors");
  std::vector<double> lower(xi.size()), upper(xi.size()), drate(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) {
    lower[k] = std::min(xi[k], zeta[k]);
    upper[k] = std::max(xi[k], zeta[k]);
    drate[k] = xi[k] - zeta[k];
  }
  auto v0 = original.initial_state(), w0 = reference.initial_state();
  std::vector<double> dinit(v0.size());
  for (std::size_t g = 0; g < v0.size(); ++g) dinit[g] = v0[g] - w0[g];
  auto box = conservation_box(original), other = conservation_box(reference);
  for (std::size_t g = 0; g < box.size(); ++g) box[g] = std::max(box[g], other[g]);

  Trajectory window;
  window.names = original_trajectory.names;
  for (std::size_t i = 0; i < original_trajectory.rows(); ++i) {
    if (original_trajectory.times[i] > t + 1e-12) break;
    window.times.push_back(original_trajectory.times[i]);
    auto row = original_trajectory.row(i);
    window.data.insert(window.data.end(), row.begin(), row.end());
  }

  PerturbationReport r;
  r.norm = norm;
  r.epsilon = vector_norm(drate, norm);
  r.delta = vector_norm(dinit, norm);
  auto lk = lipschitz_estimate(reference, box, lower, upper, window, norm);
  r.L = lk.L;
  r.K = lk.K;
  r.horizon = t;
  r.bound = error_bound(r);
  return r;
}

double efl_error(const Trajectory& full, const Trajectory& perturbed, const FepaModel& model) {
  check_grids(full, perturbed);
  double worst = 0.0;
  bool any = false;
  for (const auto& [state, v0] : model.initial) {
    if (!(v0 > 0.0)) continue;
    any = true;
    const std::size_t a = full.column(state), b = perturbed.column(state);
    for (std::size_t i = 0; i < full.rows(); ++i)
      worst = std::max(worst, std::abs(full.at(i, a) - perturbed.at(i, b)) / v0);
  }
  if (!any) throw std::invalid_argument("no state has a positive initial population");
  return 100.0 * worst;
}

double ofl_error(const FluidSystem& sys, const Partition& p, const Trajectory& full,
                 const Trajectory& lumped) {
  check_partition(sys, p);
  check_grids(full, lumped);
  auto cols = column_map(sys, full);
  double worst = 0.0;
  bool any = false;
  for (const auto& block : p.blocks) {
    const auto& rep = sys.atoms()[sys.atom_index(block.atoms[0])];
    for (std::size_t s = 0; s < rep.graph.size(); ++s) {
      std::vector<std::size_t> members;
      for (std::size_t j = 0; j < block.atoms.size(); ++j)
        members.push_back(cols[sys.atoms()[sys.atom_index(block.atoms[j])].offset +
                               block.sigma[j][s]]);
      auto sum_at = [&](std::size_t i) {
        double total = 0.0;
        for (std::size_t c : members) total += full.at(i, c);
        return total;
      };
      const double denom = sum_at(0);
      if (!(denom > 0.0)) continue;
      any = true;
      const std::size_t w = lumped.column(sys.state_names()[rep.offset + s]);
      for (std::size_t i = 0; i < full.rows(); ++i)
        worst = std::max(worst, std::abs(sum_at(i) - lumped.at(i, w)) / denom);
    }
  }
  if (!any) throw std::invalid_argument("no block has a positive initial population");
  return 100.0 * worst;
}

}  // namespace fepa
