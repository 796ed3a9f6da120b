#include "fepa/lumping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace fepa {

Bijection identity_bijection(std::size_t n) {
  Bijection b(n);
  std::iota(b.begin(), b.end(), 0);
  return b;
}

Bijection inverse(const Bijection& b) {
  Bijection out(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) out[b[i]] = i;
  return out;
}

Bijection compose(const Bijection& first, const Bijection& second) {
  Bijection out(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) out[i] = second[first[i]];
  return out;
}

RateTensor::RateTensor(const DerivationGraph& g, const std::vector<std::string>& actions)
    : n_(g.size()), na_(actions.size()), data_(na_ * n_ * n_, 0.0) {
  for (const auto& t : g.transitions) {
    auto it = std::lower_bound(actions.begin(), actions.end(), t.action);
    if (it == actions.end() || *it != t.action) continue;
    auto a = static_cast<std::size_t>(it - actions.begin());
    data_[(a * n_ + t.source) * n_ + t.target] +=
        t.rate * static_cast<double>(t.multiplicity);
  }
}

namespace {

std::vector<std::string> joint_actions(const DerivationGraph& p, const DerivationGraph& q) {
  std::set<std::string> s;
  for (const auto& t : p.transitions) s.insert(t.action);
  for (const auto& t : q.transitions) s.insert(t.action);
  return {s.begin(), s.end()};
}

bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

// Per-state invariants of a semi-isomorphism: for each action the self-loop
// rate and the sorted nonzero rates to and from other states.
struct StateSignature {
  std::vector<double> values;
};

std::vector<StateSignature> signatures(const RateTensor& t) {
  const std::size_t n = t.size();
  std::vector<StateSignature> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& v = out[i].values;
    for (std::size_t a = 0; a < t.action_count(); ++a) {
      v.push_back(t.at(a, i, i));
      std::vector<double> outs, ins;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        if (t.at(a, i, j) != 0.0) outs.push_back(t.at(a, i, j));
        if (t.at(a, j, i) != 0.0) ins.push_back(t.at(a, j, i));
      }
      std::sort(outs.begin(), outs.end());
      std::sort(ins.begin(), ins.end());
      v.push_back(static_cast<double>(outs.size()));
      v.insert(v.end(), outs.begin(), outs.end());
      v.push_back(-1.0);
      v.push_back(static_cast<double>(ins.size()));
      v.insert(v.end(), ins.begin(), ins.end());
      v.push_back(-1.0);
    }
  }
  return out;
}

bool compatible(const StateSignature& a, const StateSignature& b, double tol) {
  if (a.values.size() != b.values.size()) return false;
  for (std::size_t k = 0; k < a.values.size(); ++k)
    if (!close(a.values[k], b.values[k], tol)) return false;
  return true;
}

struct ExactSearch {
  const RateTensor& p;
  const RateTensor& q;
  double tol;
  std::vector<std::vector<bool>> allowed;
  Bijection sigma;
  std::vector<bool> used;

  bool consistent(std::size_t i, std::size_t image) const {
    for (std::size_t a = 0; a < p.action_count(); ++a) {
      if (!close(p.at(a, i, i), q.at(a, image, image), tol)) return false;
      for (std::size_t k = 0; k < i; ++k) {
        if (!close(p.at(a, i, k), q.at(a, image, sigma[k]), tol)) return false;
        if (!close(p.at(a, k, i), q.at(a, sigma[k], image), tol)) return false;
      }
    }
    return true;
  }

  bool run(std::size_t i) {
    if (i == p.size()) return true;
    // Prefer the same index first so that identical graphs map identically.
    for (std::size_t off = 0; off < p.size(); ++off) {
      std::size_t c = (i + off) % p.size();
      if (used[c] || !allowed[i][c] || !consistent(i, c)) continue;
      sigma[i] = c;
      used[c] = true;
      if (run(i + 1)) return true;
      used[c] = false;
    }
    return false;
  }
};

struct EpsSearch {
  const RateTensor& p;
  const RateTensor& q;
  bool preserve_support;
  Bijection sigma;
  std::vector<bool> used;
  Bijection best_sigma;
  double best = std::numeric_limits<double>::infinity();

  // Largest deviation introduced by assigning i -> image, or infinity when
  // support would not be preserved.
  double cost(std::size_t i, std::size_t image) const {
    double worst = 0.0;
    auto pair = [&](double x, double y) {
      if (preserve_support && ((x != 0.0) != (y != 0.0)))
        worst = std::numeric_limits<double>::infinity();
      else
        worst = std::max(worst, std::abs(x - y));
    };
    for (std::size_t a = 0; a < p.action_count(); ++a) {
      pair(p.at(a, i, i), q.at(a, image, image));
      for (std::size_t k = 0; k < i; ++k) {
        pair(p.at(a, i, k), q.at(a, image, sigma[k]));
        pair(p.at(a, k, i), q.at(a, sigma[k], image));
      }
    }
    return worst;
  }

  void run(std::size_t i, double so_far) {
    if (so_far >= best) return;
    if (i == p.size()) {
      best = so_far;
      best_sigma = sigma;
      return;
    }
    std::vector<std::pair<double, std::size_t>> options;
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (used[c]) continue;
      double step = std::max(so_far, cost(i, c));
      if (step < best) options.emplace_back(step, c);
    }
    std::stable_sort(options.begin(), options.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [step, c] : options) {
      sigma[i] = c;
      used[c] = true;
      run(i + 1, step);
      used[c] = false;
    }
  }
};

}  // namespace

double bijection_deviation(const DerivationGraph& p, const DerivationGraph& q,
                           const Bijection& sigma) {
  auto actions = joint_actions(p, q);
  RateTensor tp(p, actions), tq(q, actions);
  double worst = 0.0;
  for (std::size_t a = 0; a < actions.size(); ++a)
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = 0; j < p.size(); ++j)
        worst = std::max(worst, std::abs(tp.at(a, i, j) - tq.at(a, sigma[i], sigma[j])));
  return worst;
}

std::optional<Bijection> semi_isomorphism(const DerivationGraph& p,
                                          const DerivationGraph& q, double tol) {
  if (p.size() != q.size()) return std::nullopt;
  auto actions = joint_actions(p, q);
  RateTensor tp(p, actions), tq(q, actions);
  auto sp = signatures(tp), sq = signatures(tq);
  const std::size_t n = p.size();
  ExactSearch search{tp, tq, tol, std::vector<std::vector<bool>>(n, std::vector<bool>(n)),
                     Bijection(n), std::vector<bool>(n, false)};
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      search.allowed[i][j] = compatible(sp[i], sq[j], tol);
      any = any || search.allowed[i][j];
    }
    if (!any) return std::nullopt;
  }
  if (!search.run(0)) return std::nullopt;
  return search.sigma;
}

std::optional<EpsMatch> eps_semi_isomorphism(const DerivationGraph& p,
                                             const DerivationGraph& q,
                                             bool preserve_support) {
  if (p.size() != q.size()) return std::nullopt;
  auto actions = joint_actions(p, q);
  RateTensor tp(p, actions), tq(q, actions);
  const std::size_t n = p.size();
  EpsSearch search{tp, tq, preserve_support, Bijection(n), std::vector<bool>(n, false), {}};
  search.run(0, 0.0);
  if (search.best_sigma.empty() && n > 0) return std::nullopt;
  return EpsMatch{search.best_sigma, search.best};
}

Bijection match_atoms(const FluidSystem& sys, const std::string& from,
                      const std::string& to) {
  const auto& p = sys.atoms()[sys.atom_index(from)].graph;
  const auto& q = sys.atoms()[sys.atom_index(to)].graph;
  if (auto s = semi_isomorphism(p, q)) return *s;
  if (auto e = eps_semi_isomorphism(p, q)) return e->sigma;
  throw LumpingError("atoms " + from + " and " + to + " have " +
                     std::to_string(p.size()) + " and " + std::to_string(q.size()) +
                     " derivatives; no bijection exists");
}

namespace {

std::size_t leaf_position(const FluidSystem& sys, const std::string& atom) {
  return sys.atom_index(atom);
}

bool is_bijection(const Bijection& b, std::size_t n) {
  if (b.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (std::size_t x : b) {
    if (x >= n || seen[x]) return false;
    seen[x] = true;
  }
  return true;
}

// Lexicographically smallest atom first, the rest in leaf order; blocks in
// leaf order of their first atom.
Partition normalize(const FluidSystem& sys, Partition p) {
  for (auto& block : p.blocks) {
    std::size_t r = 0;
    for (std::size_t j = 1; j < block.atoms.size(); ++j)
      if (block.atoms[j] < block.atoms[r]) r = j;
    Bijection back = inverse(block.sigma[r]);
    std::vector<std::size_t> order(block.atoms.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if ((a == r) != (b == r)) return a == r;
      return leaf_position(sys, block.atoms[a]) < leaf_position(sys, block.atoms[b]);
    });
    Block out;
    for (std::size_t j : order) {
      out.atoms.push_back(block.atoms[j]);
      out.sigma.push_back(compose(back, block.sigma[j]));
    }
    block = std::move(out);
  }
  std::sort(p.blocks.begin(), p.blocks.end(), [&](const Block& a, const Block& b) {
    return leaf_position(sys, a.atoms[0]) < leaf_position(sys, b.atoms[0]);
  });
  return p;
}

void check_cover(const FluidSystem& sys, const std::vector<std::string>& atoms,
                 const std::string& what) {
  std::set<std::string> seen;
  for (const auto& a : atoms) {
    try {
      (void)sys.atom_index(a);
    } catch (const std::out_of_range&) {
      throw std::invalid_argument(what + " names unknown atom " + a);
    }
    if (!seen.insert(a).second)
      throw std::invalid_argument(what + " lists atom " + a + " more than once");
  }
  for (const auto& atom : sys.atoms())
    if (!seen.count(atom.graph.atom))
      throw std::invalid_argument(what + " does not cover atom " + atom.graph.atom);
}

const DerivationGraph& graph_of(const FluidSystem& sys, const std::string& atom) {
  return sys.atoms()[sys.atom_index(atom)].graph;
}

std::size_t global_of(const FluidSystem& sys, const std::string& atom, std::size_t local) {
  return sys.atoms()[sys.atom_index(atom)].offset + local;
}

}  // namespace

void check_partition(const FluidSystem& sys, const Partition& p) {
  std::vector<std::string> all;
  for (const auto& b : p.blocks) {
    if (b.atoms.empty()) throw std::invalid_argument("partition has an empty block");
    if (b.sigma.size() != b.atoms.size())
      throw std::invalid_argument("block of " + b.atoms[0] + " lacks bijections");
    all.insert(all.end(), b.atoms.begin(), b.atoms.end());
  }
  check_cover(sys, all, "partition");
  for (const auto& b : p.blocks) {
    const std::size_t n = graph_of(sys, b.atoms[0]).size();
    if (b.sigma[0] != identity_bijection(n))
      throw std::invalid_argument("bijection of block representative " + b.atoms[0] +
                                  " is not the identity");
    for (std::size_t j = 0; j < b.atoms.size(); ++j) {
      if (graph_of(sys, b.atoms[j]).size() != n || !is_bijection(b.sigma[j], n))
        throw std::invalid_argument("no valid bijection from " + b.atoms[0] + " to " +
                                    b.atoms[j]);
    }
  }
}

void check_tuple_partition(const FluidSystem& sys, const TuplePartition& tp) {
  std::vector<std::string> all;
  for (const auto& t : tp.tuples) {
    if (t.empty()) throw std::invalid_argument("tuple partition has an empty tuple");
    all.insert(all.end(), t.begin(), t.end());
  }
  check_cover(sys, all, "tuple partition");
  std::vector<int> seen(tp.tuples.size(), 0);
  for (const auto& cls : tp.classes) {
    if (cls.empty()) throw std::invalid_argument("tuple partition has an empty class");
    for (std::size_t t : cls) {
      if (t >= tp.tuples.size() || seen[t]++)
        throw std::invalid_argument("tuple classes must partition the tuple indices");
      if (tp.tuples[t].size() != tp.tuples[cls[0]].size())
        throw std::invalid_argument("related tuples must have equal length");
    }
  }
  for (std::size_t t = 0; t < seen.size(); ++t)
    if (!seen[t]) throw std::invalid_argument("tuple " + std::to_string(t) + " has no class");
  if (tp.sigma.size() != tp.tuples.size())
    throw std::invalid_argument("tuple partition lacks bijections");
  for (const auto& cls : tp.classes) {
    const auto& rep = tp.tuples[cls[0]];
    for (std::size_t t : cls) {
      if (tp.sigma[t].size() != rep.size())
        throw std::invalid_argument("tuple partition lacks bijections");
      for (std::size_t k = 0; k < rep.size(); ++k) {
        const std::size_t n = graph_of(sys, rep[k]).size();
        if (graph_of(sys, tp.tuples[t][k]).size() != n || !is_bijection(tp.sigma[t][k], n))
          throw std::invalid_argument("no valid bijection from " + rep[k] + " to " +
                                      tp.tuples[t][k]);
        if (t == cls[0] && tp.sigma[t][k] != identity_bijection(n))
          throw std::invalid_argument("bijection of " + rep[k] + " to itself is not the identity");
      }
    }
  }
}

Partition discrete_partition(const FluidSystem& sys) {
  Partition p;
  for (const auto& atom : sys.atoms())
    p.blocks.push_back({{atom.graph.atom}, {identity_bijection(atom.graph.size())}});
  return p;
}

Partition make_partition(const FluidSystem& sys,
                         const std::vector<std::vector<std::string>>& blocks) {
  Partition p;
  std::vector<std::string> all;
  for (const auto& names : blocks) {
    if (names.empty()) throw std::invalid_argument("partition has an empty block");
    all.insert(all.end(), names.begin(), names.end());
  }
  check_cover(sys, all, "partition");
  for (const auto& names : blocks) {
    Block b;
    for (const auto& atom : names) {
      b.atoms.push_back(atom);
      try {
        b.sigma.push_back(match_atoms(sys, names[0], atom));
      } catch (const LumpingError& e) {
        throw std::invalid_argument(e.what());
      }
    }
    p.blocks.push_back(std::move(b));
  }
  p = normalize(sys, std::move(p));
  check_partition(sys, p);
  return p;
}

TuplePartition make_tuple_partition(const FluidSystem& sys,
                                    std::vector<std::vector<std::string>> tuples,
                                    std::vector<std::vector<std::size_t>> classes) {
  TuplePartition tp{std::move(tuples), std::move(classes), {}};
  tp.sigma.resize(tp.tuples.size());
  for (const auto& cls : tp.classes) {
    for (std::size_t t : cls) {
      if (t >= tp.tuples.size() || tp.tuples[t].size() != tp.tuples[cls[0]].size())
        throw std::invalid_argument("related tuples must exist and have equal length");
      for (std::size_t k = 0; k < tp.tuples[t].size(); ++k) {
        try {
          tp.sigma[t].push_back(match_atoms(sys, tp.tuples[cls[0]][k], tp.tuples[t][k]));
        } catch (const std::exception& e) {
          throw std::invalid_argument(e.what());
        }
      }
    }
  }
  check_tuple_partition(sys, tp);
  return tp;
}

double residual(double lhs, double rhs) {
  return std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

std::vector<double> ordinary_projection(const FluidSystem& sys, const Partition& p,
                                        std::span<const double> v) {
  if (v.size() != sys.state_count())
    throw std::invalid_argument("population has " + std::to_string(v.size()) +
                                " entries, system has " + std::to_string(sys.state_count()));
  std::vector<double> out(sys.state_count(), 0.0);
  for (const auto& b : p.blocks) {
    const std::size_t n = graph_of(sys, b.atoms[0]).size();
    for (std::size_t s = 0; s < n; ++s) {
      double sum = 0.0;
      for (std::size_t j = 0; j < b.atoms.size(); ++j)
        sum += v[global_of(sys, b.atoms[j], b.sigma[j][s])];
      out[global_of(sys, b.atoms[0], s)] = sum;
    }
  }
  return out;
}

std::vector<Bijection> tuple_bijections(const TuplePartition& tp, std::size_t i,
                                        std::size_t j) {
  std::vector<Bijection> out;
  for (std::size_t k = 0; k < tp.tuples[i].size(); ++k)
    out.push_back(compose(inverse(tp.sigma[i][k]), tp.sigma[j][k]));
  return out;
}

std::vector<double> tuple_swap(const FluidSystem& sys, const TuplePartition& tp,
                               std::size_t i, std::size_t j, std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  auto sig = tuple_bijections(tp, i, j);
  for (std::size_t k = 0; k < tp.tuples[i].size(); ++k) {
    for (std::size_t s = 0; s < sig[k].size(); ++s) {
      std::size_t gi = global_of(sys, tp.tuples[i][k], s);
      std::size_t gj = global_of(sys, tp.tuples[j][k], sig[k][s]);
      out[gi] = v[gj];
      out[gj] = v[gi];
    }
  }
  return out;
}

std::vector<std::vector<double>> verification_samples(const FluidSystem& sys,
                                                      const VerifyOptions& opt) {
  double vmax = opt.vmax;
  if (!(vmax > 0.0)) {
    double top = 0.0;
    for (double x : sys.initial_state()) top = std::max(top, x);
    vmax = 2.0 * top + 1.0;
  }
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(0.0, vmax);
  std::bernoulli_distribution zero(0.3);
  std::vector<std::vector<double>> out;
  for (std::size_t s = 0; s < opt.samples; ++s) {
    std::vector<double> v(sys.state_count());
    const bool vertex = s % 3 == 2;
    for (auto& x : v) {
      x = u(rng);
      if (vertex && zero(rng)) x = 0.0;
    }
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

struct Checker {
  VerificationReport& report;
  double tol;

  // Returns false (and records the witness) on a violation.
  bool check(double lhs, double rhs, Witness w, std::span<const double> v) {
    double r = residual(lhs, rhs);
    report.worst_residual = std::max(report.worst_residual, r);
    if (r <= tol) return true;
    report.pass = false;
    w.lhs = lhs;
    w.rhs = rhs;
    w.v.assign(v.begin(), v.end());
    report.witness = std::move(w);
    return false;
  }
};

void add_model_warnings(const FluidSystem& sys, VerificationReport& report) {
  for (const auto& d : validate(sys.model()))
    if (d.code == "ill-posed")
      report.warnings.push_back("ill-posed model; semi-isomorphism of block members is not "
                                "implied: " + d.message);
}

}  // namespace

VerificationReport verify_ofl(const FluidSystem& sys, const Partition& p,
                              const VerifyOptions& opt) {
  check_partition(sys, p);
  VerificationReport report;
  report.mode = "ofl";
  report.tol = opt.tol;
  add_model_warnings(sys, report);
  Checker c{report, opt.tol};
  const auto& names = sys.state_names();
  for (const auto& v : verification_samples(sys, opt)) {
    ++report.samples;
    auto vs = ordinary_projection(sys, p, v);
    for (ActionId a = 0; a < sys.actions().size(); ++a) {
      const auto& an = sys.actions()[a];
      auto R = sys.component_rates(v, a), Rs = sys.component_rates(vs, a);
      auto In = sys.inflow(v, a), Ins = sys.inflow(vs, a);
      for (const auto& b : p.blocks) {
        const std::size_t n = graph_of(sys, b.atoms[0]).size();
        for (std::size_t s = 0; s < n; ++s) {
          double out_sum = 0.0, in_sum = 0.0;
          for (std::size_t j = 0; j < b.atoms.size(); ++j) {
            std::size_t g = global_of(sys, b.atoms[j], b.sigma[j][s]);
            out_sum += R[g];
            in_sum += In[g];
          }
          std::size_t rep = global_of(sys, b.atoms[0], s);
          if (!c.check(out_sum, Rs[rep], {"i", an, names[rep], 0, 0, {}}, v)) return report;
          if (!c.check(in_sum, Ins[rep], {"ii", an, names[rep], 0, 0, {}}, v)) return report;
        }
      }
      if (!c.check(sys.apparent_rate(v, a), sys.apparent_rate(vs, a), {"iii", an, "", 0, 0, {}}, v))
        return report;
    }
  }
  for (const auto& b : p.blocks) {
    std::size_t rep = global_of(sys, b.atoms[0], 0);
    for (std::size_t j = 1; j < b.atoms.size(); ++j) {
      std::size_t g = global_of(sys, b.atoms[j], 0);
      for (ActionId a = 0; a < sys.actions().size(); ++a)
        if (!c.check(sys.state_apparent_rate(rep, a), sys.state_apparent_rate(g, a),
                     {"iii", sys.actions()[a], b.atoms[j], 0, 0, {}}, {}))
          return report;
    }
  }
  return report;
}

VerificationReport verify_efl(const FluidSystem& sys, const TuplePartition& tp,
                              const VerifyOptions& opt) {
  check_tuple_partition(sys, tp);
  VerificationReport report;
  report.mode = "efl";
  report.tol = opt.tol;
  add_model_warnings(sys, report);
  Checker c{report, opt.tol};
  const auto& names = sys.state_names();

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& cls : tp.classes)
    for (std::size_t x = 0; x < cls.size(); ++x)
      for (std::size_t y = x + 1; y < cls.size(); ++y) pairs.emplace_back(cls[x], cls[y]);

  auto samples = verification_samples(sys, opt);
  report.samples = samples.size();
  for (const auto& [i, j] : pairs) {
    auto sig = tuple_bijections(tp, i, j);
    std::vector<bool> inside(sys.atoms().size(), false);
    for (const auto& atom : tp.tuples[i]) inside[sys.atom_index(atom)] = true;
    for (const auto& atom : tp.tuples[j]) inside[sys.atom_index(atom)] = true;
    for (const auto& v : samples) {
      auto vs = tuple_swap(sys, tp, i, j, v);
      for (ActionId a = 0; a < sys.actions().size(); ++a) {
        const auto& an = sys.actions()[a];
        auto R = sys.component_rates(v, a), Rs = sys.component_rates(vs, a);
        auto In = sys.inflow(v, a), Ins = sys.inflow(vs, a);
        for (std::size_t k = 0; k < tp.tuples[i].size(); ++k) {
          for (std::size_t s = 0; s < sig[k].size(); ++s) {
            std::size_t gi = global_of(sys, tp.tuples[i][k], s);
            std::size_t gj = global_of(sys, tp.tuples[j][k], sig[k][s]);
            if (!c.check(R[gi], Rs[gj], {"a", an, names[gi], i, j, {}}, v)) return report;
            if (!c.check(In[gi], Ins[gj], {"b", an, names[gi], i, j, {}}, v)) return report;
          }
        }
        for (std::size_t g = 0; g < sys.state_count(); ++g) {
          if (inside[sys.atom_of(g)]) continue;
          if (!c.check(R[g], Rs[g], {"c", an, names[g], i, j, {}}, v)) return report;
        }
        if (!c.check(sys.apparent_rate(v, a), sys.apparent_rate(vs, a), {"d", an, "", i, j, {}}, v))
          return report;
      }
    }
    for (std::size_t k = 0; k < tp.tuples[i].size(); ++k) {
      std::size_t gi = global_of(sys, tp.tuples[i][k], 0);
      std::size_t gj = global_of(sys, tp.tuples[j][k], 0);
      for (ActionId a = 0; a < sys.actions().size(); ++a)
        if (!c.check(sys.state_apparent_rate(gi, a), sys.state_apparent_rate(gj, a),
                     {"d", sys.actions()[a], tp.tuples[j][k], i, j, {}}, {}))
          return report;
    }
  }
  return report;
}

Partition projected_partition(const FluidSystem& sys, const TuplePartition& tp) {
  check_tuple_partition(sys, tp);
  Partition p;
  for (const auto& cls : tp.classes) {
    for (std::size_t k = 0; k < tp.tuples[cls[0]].size(); ++k) {
      Block b;
      for (std::size_t t : cls) {
        b.atoms.push_back(tp.tuples[t][k]);
        b.sigma.push_back(tp.sigma[t][k]);
      }
      p.blocks.push_back(std::move(b));
    }
  }
  return normalize(sys, std::move(p));
}

Partition merge_partitions(const FluidSystem& sys, const std::vector<TuplePartition>& parts) {
  for (const auto& d : validate(sys.model()))
    if (d.code == "ill-posed")
      throw LumpingError("refusing to merge partitions of an ill-posed model: " + d.message);
  const std::size_t n = sys.atoms().size();
  // edges[x] = (y, bijection ds(x) -> ds(y))
  std::vector<std::vector<std::pair<std::size_t, Bijection>>> edges(n);
  for (const auto& tp : parts) {
    check_tuple_partition(sys, tp);
    for (const auto& cls : tp.classes) {
      for (std::size_t t : cls) {
        if (t == cls[0]) continue;
        for (std::size_t k = 0; k < tp.tuples[t].size(); ++k) {
          std::size_t x = sys.atom_index(tp.tuples[cls[0]][k]);
          std::size_t y = sys.atom_index(tp.tuples[t][k]);
          edges[x].emplace_back(y, tp.sigma[t][k]);
          edges[y].emplace_back(x, inverse(tp.sigma[t][k]));
        }
      }
    }
  }
  std::vector<bool> done(n, false);
  Partition p;
  for (std::size_t start = 0; start < n; ++start) {
    if (done[start]) continue;
    // Collect the component, then walk it again from its smallest name.
    std::vector<std::size_t> comp{start};
    done[start] = true;
    for (std::size_t q = 0; q < comp.size(); ++q)
      for (const auto& [y, b] : edges[comp[q]])
        if (!done[y]) {
          done[y] = true;
          comp.push_back(y);
        }
    std::size_t root = *std::min_element(comp.begin(), comp.end(), [&](auto a, auto b) {
      return sys.atoms()[a].graph.atom < sys.atoms()[b].graph.atom;
    });
    std::map<std::size_t, Bijection> from_root;
    from_root[root] = identity_bijection(sys.atoms()[root].graph.size());
    std::vector<std::size_t> order{root};
    for (std::size_t q = 0; q < order.size(); ++q) {
      std::size_t x = order[q];
      for (const auto& [y, b] : edges[x]) {
        if (from_root.count(y)) continue;
        from_root[y] = compose(from_root[x], b);
        order.push_back(y);
      }
    }
    Block block;
    for (std::size_t x : order) {
      block.atoms.push_back(sys.atoms()[x].graph.atom);
      block.sigma.push_back(from_root[x]);
    }
    p.blocks.push_back(std::move(block));
  }
  return normalize(sys, std::move(p));
}

std::string to_string(LumpKind kind) {
  return kind == LumpKind::Ordinary ? "ordinary" : "exact";
}

LumpedSystem::LumpedSystem(FluidSystem system, Partition partition, LumpKind kind)
    : system_(std::move(system)), partition_(std::move(partition)), kind_(kind) {
  check_partition(system_, partition_);
  lumped_of_.assign(system_.state_count(), 0);
  for (const auto& b : partition_.blocks) {
    const auto& rep = graph_of(system_, b.atoms[0]);
    for (std::size_t s = 0; s < rep.size(); ++s) {
      const std::size_t w = names_.size();
      names_.push_back(rep.names[s]);
      rep_state_.push_back(global_of(system_, b.atoms[0], s));
      weight_.push_back(1.0 / static_cast<double>(b.atoms.size()));
      for (std::size_t j = 0; j < b.atoms.size(); ++j)
        lumped_of_[global_of(system_, b.atoms[j], b.sigma[j][s])] = w;
    }
  }
}

std::vector<double> LumpedSystem::extend(std::span<const double> w) const {
  std::vector<double> v(system_.state_count(), 0.0);
  if (kind_ == LumpKind::Ordinary) {
    for (std::size_t k = 0; k < w.size(); ++k) v[rep_state_[k]] = w[k];
  } else {
    for (std::size_t g = 0; g < v.size(); ++g) v[g] = w[lumped_of_[g]];
  }
  return v;
}

std::vector<double> LumpedSystem::reduce(std::span<const double> v) const {
  std::vector<double> w(size(), 0.0);
  for (std::size_t g = 0; g < v.size(); ++g) w[lumped_of_[g]] += v[g];
  if (kind_ == LumpKind::Exact)
    for (std::size_t k = 0; k < w.size(); ++k) w[k] *= weight_[k];
  return w;
}

std::vector<double> LumpedSystem::initial_state() const {
  return reduce(system_.initial_state());
}

void LumpedSystem::derivative(std::span<const double> w, std::span<double> out) const {
  auto v = extend(w);
  auto f = system_.derivative(v);
  for (std::size_t k = 0; k < size(); ++k) out[k] = f[rep_state_[k]];
}

std::vector<double> LumpedSystem::derivative(std::span<const double> w) const {
  std::vector<double> out(size());
  derivative(w, out);
  return out;
}

Trajectory LumpedSystem::reduce(const Trajectory& full) const {
  Trajectory out;
  out.times = full.times;
  out.names = names_;
  std::vector<double> row(system_.state_count());
  for (std::size_t i = 0; i < full.rows(); ++i) {
    for (std::size_t g = 0; g < row.size(); ++g)
      row[g] = full.at(i, full.column(system_.state_names()[g]));
    auto w = reduce(row);
    out.data.insert(out.data.end(), w.begin(), w.end());
  }
  return out;
}

Trajectory LumpedSystem::extend(const Trajectory& lumped) const {
  Trajectory out;
  out.times = lumped.times;
  out.names = system_.state_names();
  std::vector<double> row(size());
  for (std::size_t i = 0; i < lumped.rows(); ++i) {
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = lumped.at(i, lumped.column(names_[k]));
    auto v = extend(row);
    out.data.insert(out.data.end(), v.begin(), v.end());
  }
  return out;
}

SymbolicField LumpedSystem::symbolic() const {
  SymbolicField full = symbolic_field(system_);
  std::vector<std::int64_t> map(system_.state_count(), -1);
  if (kind_ == LumpKind::Ordinary) {
    for (std::size_t k = 0; k < size(); ++k) map[rep_state_[k]] = static_cast<std::int64_t>(k);
  } else {
    for (std::size_t g = 0; g < map.size(); ++g) map[g] = static_cast<std::int64_t>(lumped_of_[g]);
  }
  SymbolicField out;
  out.rho = full.rho;
  out.symbol = "W";
  out.states = names_;
  for (std::size_t k = 0; k < size(); ++k) {
    if (full.rho == Sync::Product)
      out.polynomials.push_back(full.polynomials[rep_state_[k]].remap(map));
    else
      out.expressions.push_back(remap(full.expressions[rep_state_[k]], map));
  }
  return out;
}

Trajectory solve(const FluidSystem& sys, const SolverConfig& cfg) {
  auto f = [&](std::span<const double> x, std::span<double> dx) { sys.derivative(x, dx); };
  return integrate(f, sys.initial_state(), cfg, sys.state_names());
}

Trajectory solve(const LumpedSystem& sys, const SolverConfig& cfg) {
  auto f = [&](std::span<const double> x, std::span<double> dx) { sys.derivative(x, dx); };
  return integrate(f, sys.initial_state(), cfg, sys.state_names());
}

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

// Groups of indices by union-find roots: members in increasing order,
// groups ordered by their smallest member.
std::vector<std::vector<std::size_t>> groups(UnionFind& uf, std::size_t n) {
  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < n; ++i) by_root[uf.find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [root, members] : by_root) out.push_back(std::move(members));
  std::sort(out.begin(), out.end());
  return out;
}

bool related(const DerivationGraph& p, const DerivationGraph& q, bool eps) {
  return eps ? eps_semi_isomorphism(p, q, true).has_value()
             : semi_isomorphism(p, q).has_value();
}

// Class id of every atom (index into atoms()).
std::vector<std::size_t> atom_class_ids(const FluidSystem& sys, bool eps) {
  const std::size_t n = sys.atoms().size();
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (uf.find(i) != uf.find(j) &&
          related(sys.atoms()[i].graph, sys.atoms()[j].graph, eps))
        uf.unite(i, j);
  std::vector<std::size_t> id(n);
  auto gs = groups(uf, n);
  for (std::size_t c = 0; c < gs.size(); ++c)
    for (std::size_t x : gs[c]) id[x] = c;
  return id;
}

Bijection class_bijection(const FluidSystem& sys, const std::string& from,
                          const std::string& to, bool eps) {
  if (!eps) return match_atoms(sys, from, to);
  const auto& p = graph_of(sys, from);
  const auto& q = graph_of(sys, to);
  if (auto s = semi_isomorphism(p, q)) return *s;
  if (auto e = eps_semi_isomorphism(p, q, true)) return e->sigma;
  return match_atoms(sys, from, to);
}

Partition partition_from_classes(const FluidSystem& sys,
                                 const std::vector<std::vector<std::string>>& classes,
                                 bool eps) {
  Partition p;
  for (const auto& names : classes) {
    Block b;
    for (const auto& atom : names) {
      b.atoms.push_back(atom);
      b.sigma.push_back(class_bijection(sys, names[0], atom, eps));
    }
    p.blocks.push_back(std::move(b));
  }
  return normalize(sys, std::move(p));
}

TuplePartition tuples_with_bijections(const FluidSystem& sys,
                                      std::vector<std::vector<std::string>> tuples,
                                      std::vector<std::vector<std::size_t>> classes,
                                      bool eps) {
  TuplePartition tp{std::move(tuples), std::move(classes), {}};
  tp.sigma.resize(tp.tuples.size());
  for (const auto& cls : tp.classes)
    for (std::size_t t : cls)
      for (std::size_t k = 0; k < tp.tuples[t].size(); ++k)
        tp.sigma[t].push_back(class_bijection(sys, tp.tuples[cls[0]][k], tp.tuples[t][k], eps));
  check_tuple_partition(sys, tp);
  return tp;
}

// Tuples in leaf order of their first atom, classes renumbered to match.
TuplePartition ordered_tuples(const FluidSystem& sys,
                              std::vector<std::vector<std::vector<std::string>>> classes,
                              bool eps) {
  std::vector<std::pair<std::size_t, std::size_t>> index;  // (class, member)
  for (std::size_t c = 0; c < classes.size(); ++c)
    for (std::size_t m = 0; m < classes[c].size(); ++m) index.emplace_back(c, m);
  std::sort(index.begin(), index.end(), [&](const auto& a, const auto& b) {
    return sys.atom_index(classes[a.first][a.second][0]) <
           sys.atom_index(classes[b.first][b.second][0]);
  });
  std::vector<std::vector<std::string>> tuples;
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (const auto& [c, m] : index) {
    by_class[c].push_back(tuples.size());
    tuples.push_back(classes[c][m]);
  }
  std::vector<std::vector<std::size_t>> cls;
  for (auto& [c, members] : by_class) cls.push_back(std::move(members));
  std::sort(cls.begin(), cls.end());
  return tuples_with_bijections(sys, std::move(tuples), std::move(cls), eps);
}

// Disjoint subtrees with equal shape (sync sets and atom classes at the
// leaves) become related tuples, largest subtrees first.
TuplePartition replica_tuples(const FluidSystem& sys, const std::vector<std::size_t>& class_id,
                              bool eps) {
  const auto& nodes = sys.nodes();
  std::vector<std::string> sig(nodes.size());
  std::vector<std::size_t> size(nodes.size(), 1);
  std::vector<std::vector<std::string>> leaves(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto& node = nodes[k];
    if (node.is_leaf()) {
      auto a = static_cast<std::size_t>(node.atom);
      sig[k] = "L" + std::to_string(class_id[a]);
      leaves[k] = {sys.atoms()[a].graph.atom};
      continue;
    }
    auto l = static_cast<std::size_t>(node.left), r = static_cast<std::size_t>(node.right);
    std::string sync;
    for (ActionId a = 0; a < sys.actions().size(); ++a)
      if (node.sync[a]) sync += sys.actions()[a] + ",";
    sig[k] = "(" + sig[l] + "|" + sync + "|" + sig[r] + ")";
    size[k] = size[l] + size[r];
    leaves[k] = leaves[l];
    leaves[k].insert(leaves[k].end(), leaves[r].begin(), leaves[r].end());
  }
  std::map<std::string, std::vector<std::size_t>> by_sig;
  for (std::size_t k = 0; k < nodes.size(); ++k) by_sig[sig[k]].push_back(k);
  std::vector<std::pair<std::string, std::vector<std::size_t>>> ordered(by_sig.begin(),
                                                                        by_sig.end());
  std::stable_sort(ordered.begin(), ordered.end(), [&](const auto& a, const auto& b) {
    if (size[a.second[0]] != size[b.second[0]]) return size[a.second[0]] > size[b.second[0]];
    return sys.atom_index(leaves[a.second[0]][0]) < sys.atom_index(leaves[b.second[0]][0]);
  });

  std::vector<bool> claimed_atom(sys.atoms().size(), false);
  std::vector<std::vector<std::vector<std::string>>> classes;
  for (const auto& [s, members] : ordered) {
    std::vector<std::size_t> free;
    for (std::size_t k : members) {
      bool ok = true;
      for (const auto& atom : leaves[k]) ok = ok && !claimed_atom[sys.atom_index(atom)];
      if (ok) free.push_back(k);
    }
    if (free.size() < 2) continue;
    std::vector<std::vector<std::string>> cls;
    for (std::size_t k : free) {
      for (const auto& atom : leaves[k]) claimed_atom[sys.atom_index(atom)] = true;
      cls.push_back(leaves[k]);
    }
    classes.push_back(std::move(cls));
  }
  for (std::size_t a = 0; a < sys.atoms().size(); ++a)
    if (!claimed_atom[a]) classes.push_back({{sys.atoms()[a].graph.atom}});
  return ordered_tuples(sys, std::move(classes), eps);
}

bool same_candidate(const Candidate& a, const Candidate& b) {
  if (a.partition && b.partition) {
    if (a.partition->blocks.size() != b.partition->blocks.size()) return false;
    for (std::size_t i = 0; i < a.partition->blocks.size(); ++i)
      if (a.partition->blocks[i].atoms != b.partition->blocks[i].atoms) return false;
    return true;
  }
  if (a.tuples && b.tuples)
    return a.tuples->tuples == b.tuples->tuples && a.tuples->classes == b.tuples->classes;
  return false;
}

}  // namespace

std::vector<std::vector<std::string>> atom_classes(const FluidSystem& sys, bool eps) {
  auto id = atom_class_ids(sys, eps);
  std::map<std::size_t, std::vector<std::string>> by_id;
  for (std::size_t a = 0; a < id.size(); ++a) by_id[id[a]].push_back(sys.atoms()[a].graph.atom);
  std::vector<std::vector<std::string>> out;
  for (auto& [c, names] : by_id) {
    auto smallest = std::min_element(names.begin(), names.end());
    std::rotate(names.begin(), smallest, smallest + 1);
    out.push_back(std::move(names));
  }
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    return sys.atom_index(a[0]) < sys.atom_index(b[0]);
  });
  return out;
}

std::vector<Candidate> discover_partitions(const FluidSystem& sys, const std::string& mode,
                                           bool eps) {
  std::vector<Candidate> out;
  auto push = [&](Candidate c) {
    for (const auto& existing : out)
      if (same_candidate(existing, c)) return;
    out.push_back(std::move(c));
  };
  const std::string kind = eps ? "rate-deviation" : "semi-isomorphism";
  auto classes = atom_classes(sys, eps);
  if (mode == "ofl") {
    push({partition_from_classes(sys, classes, eps), std::nullopt, kind + " classes"});
    push({discrete_partition(sys), std::nullopt, "discrete partition"});
  } else if (mode == "efl") {
    auto id = atom_class_ids(sys, eps);
    push({std::nullopt, replica_tuples(sys, id, eps), "replicated subtrees"});
    std::vector<std::vector<std::vector<std::string>>> singles;
    for (const auto& cls : classes) {
      std::vector<std::vector<std::string>> tuples;
      for (const auto& atom : cls) tuples.push_back({atom});
      singles.push_back(std::move(tuples));
    }
    push({std::nullopt, ordered_tuples(sys, singles, eps), kind + " classes"});
    std::vector<std::vector<std::vector<std::string>>> discrete;
    for (const auto& atom : sys.atoms()) discrete.push_back({{atom.graph.atom}});
    push({std::nullopt, ordered_tuples(sys, discrete, eps), "discrete partition"});
  } else {
    throw std::invalid_argument("unknown lumping mode '" + mode + "' (expected efl or ofl)");
  }
  return out;
}

namespace {

nlohmann::json sigma_pairs(const FluidSystem& sys, const std::string& from,
                           const std::string& to, const Bijection& b) {
  const auto& p = graph_of(sys, from);
  const auto& q = graph_of(sys, to);
  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t s = 0; s < b.size(); ++s) pairs.push_back({p.names[s], q.names[b[s]]});
  return pairs;
}

Bijection sigma_from_json(const FluidSystem& sys, const std::string& from,
                          const std::string& to, const nlohmann::json& pairs) {
  const auto& p = graph_of(sys, from);
  const auto& q = graph_of(sys, to);
  if (!pairs.is_array() || pairs.size() != p.size())
    throw std::invalid_argument("sigma for " + to + " must list " +
                                std::to_string(p.size()) + " state pairs");
  Bijection b(p.size(), p.size());
  for (const auto& pr : pairs) {
    if (!pr.is_array() || pr.size() != 2)
      throw std::invalid_argument("sigma entries must be [from, to] pairs");
    auto s = pr[0].get<std::string>(), t = pr[1].get<std::string>();
    auto i = std::find(p.names.begin(), p.names.end(), s);
    auto j = std::find(q.names.begin(), q.names.end(), t);
    if (i == p.names.end() || j == q.names.end())
      throw std::invalid_argument("sigma pair (" + s + ", " + t + ") names unknown states of " +
                                  from + " or " + to);
    b[static_cast<std::size_t>(i - p.names.begin())] =
        static_cast<std::size_t>(j - q.names.begin());
  }
  if (!is_bijection(b, p.size()))
    throw std::invalid_argument("sigma for " + to + " is not a bijection");
  return b;
}

std::vector<std::vector<std::string>> name_lists(const nlohmann::json& j, const char* key) {
  if (!j[key].is_array()) throw std::invalid_argument(std::string(key) + " must be an array");
  std::vector<std::vector<std::string>> out;
  for (const auto& item : j[key]) {
    if (!item.is_array()) throw std::invalid_argument(std::string(key) + " entries must be arrays");
    out.push_back(item.get<std::vector<std::string>>());
  }
  return out;
}

}  // namespace

nlohmann::json partition_to_json(const FluidSystem& sys, const Partition& p) {
  nlohmann::json blocks = nlohmann::json::array();
  nlohmann::json sigma = nlohmann::json::object();
  for (const auto& b : p.blocks) {
    blocks.push_back(b.atoms);
    for (std::size_t j = 1; j < b.atoms.size(); ++j)
      sigma[b.atoms[j]] = sigma_pairs(sys, b.atoms[0], b.atoms[j], b.sigma[j]);
  }
  return {{"mode", "ofl"}, {"blocks", blocks}, {"sigma", sigma}};
}

nlohmann::json tuple_partition_to_json(const FluidSystem& sys, const TuplePartition& tp) {
  nlohmann::json sigma = nlohmann::json::object();
  for (const auto& cls : tp.classes)
    for (std::size_t t : cls) {
      if (t == cls[0]) continue;
      for (std::size_t k = 0; k < tp.tuples[t].size(); ++k)
        sigma[tp.tuples[t][k]] =
            sigma_pairs(sys, tp.tuples[cls[0]][k], tp.tuples[t][k], tp.sigma[t][k]);
    }
  return {{"mode", "efl"}, {"tuples", tp.tuples}, {"classes", tp.classes}, {"sigma", sigma}};
}

Candidate candidate_from_json(const FluidSystem& sys, const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("partition file must hold a JSON object");
  const nlohmann::json sigma = j.contains("sigma") ? j["sigma"] : nlohmann::json::object();
  if (j.contains("blocks")) {
    auto blocks = name_lists(j, "blocks");
    std::vector<std::string> all;
    for (const auto& b : blocks) {
      if (b.empty()) throw std::invalid_argument("partition has an empty block");
      all.insert(all.end(), b.begin(), b.end());
    }
    check_cover(sys, all, "partition");
    Partition p;
    for (const auto& names : blocks) {
      Block b;
      for (const auto& atom : names) {
        b.atoms.push_back(atom);
        if (atom != names[0] && sigma.contains(atom))
          b.sigma.push_back(sigma_from_json(sys, names[0], atom, sigma[atom]));
        else
          b.sigma.push_back(match_atoms(sys, names[0], atom));
      }
      p.blocks.push_back(std::move(b));
    }
    p = normalize(sys, std::move(p));
    check_partition(sys, p);
    return {p, std::nullopt, "partition file"};
  }
  if (j.contains("tuples")) {
    auto tuples = name_lists(j, "tuples");
    std::vector<std::string> all;
    for (const auto& t : tuples) all.insert(all.end(), t.begin(), t.end());
    check_cover(sys, all, "tuple partition");
    std::vector<std::vector<std::size_t>> classes;
    if (j.contains("classes")) {
      classes = j["classes"].get<std::vector<std::vector<std::size_t>>>();
    } else {
      UnionFind uf(tuples.size());
      for (std::size_t a = 0; a < tuples.size(); ++a)
        for (std::size_t b = a + 1; b < tuples.size(); ++b) {
          if (tuples[a].size() != tuples[b].size()) continue;
          bool ok = true;
          for (std::size_t k = 0; k < tuples[a].size() && ok; ++k)
            ok = semi_isomorphism(graph_of(sys, tuples[a][k]), graph_of(sys, tuples[b][k]))
                     .has_value();
          if (ok) uf.unite(a, b);
        }
      classes = groups(uf, tuples.size());
    }
    TuplePartition tp{tuples, classes, {}};
    tp.sigma.resize(tuples.size());
    for (const auto& cls : classes) {
      for (std::size_t t : cls) {
        if (t >= tuples.size() || tuples[t].size() != tuples[cls[0]].size())
          throw std::invalid_argument("related tuples must exist and have equal length");
        for (std::size_t k = 0; k < tuples[t].size(); ++k) {
          const auto& from = tuples[cls[0]][k];
          const auto& to = tuples[t][k];
          if (t != cls[0] && sigma.contains(to))
            tp.sigma[t].push_back(sigma_from_json(sys, from, to, sigma[to]));
          else
            tp.sigma[t].push_back(match_atoms(sys, from, to));
        }
      }
    }
    check_tuple_partition(sys, tp);
    return {std::nullopt, tp, "partition file"};
  }
  throw std::invalid_argument("partition file needs \"blocks\" or \"tuples\"");
}

nlohmann::json report_to_json(const FluidSystem& sys, const VerificationReport& r) {
  nlohmann::json j = {{"verdict", r.pass ? "PASS" : "FAIL"},
                      {"mode", r.mode},
                      {"conditions", r.mode == "ofl" ? "i-iii" : "a-d"},
                      {"samples", r.samples},
                      {"tol", r.tol},
                      {"worst_residual", r.worst_residual},
                      {"warnings", r.warnings}};
  if (r.witness) {
    const auto& w = *r.witness;
    nlohmann::json wj = {{"condition", w.condition},
                         {"action", w.action},
                         {"state", w.state},
                         {"lhs", w.lhs},
                         {"rhs", w.rhs},
                         {"residual", residual(w.lhs, w.rhs)}};
    if (r.mode == "efl") wj["tuples"] = {w.first, w.second};
    nlohmann::json pop = nlohmann::json::object();
    for (std::size_t g = 0; g < w.v.size(); ++g) pop[sys.state_names()[g]] = w.v[g];
    wj["population"] = pop;
    j["witness"] = wj;
  }
  return j;
}

}  // namespace fepa
