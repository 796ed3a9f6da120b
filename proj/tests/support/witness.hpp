#pragma once

// Recomputes the two sides of a verifier witness with the reference
// semantics and an independently built V^sigma.

#include <algorithm>
#include <string>
#include <vector>

#include "fepa/lumping.hpp"
#include "support/oracle.hpp"

namespace fepa::testing {

inline double reference_inflow(const ReferenceSemantics& ref, const FepaModel& m,
                               const std::vector<double>& v, const std::string& state,
                               const std::string& a) {
  double in = 0.0;
  for (const auto& other : ref.names())
    in += ref.jump(other, state, a) * ref.component(*m.system, v, other, a);
  return in;
}

inline const DerivationGraph& graph_named(const FluidSystem& sys, const std::string& atom) {
  return sys.atoms()[sys.atom_index(atom)].graph;
}

/// Residual of an ordinary-lumpability witness.
inline double reevaluate(const FluidSystem& sys, const Partition& p, const Witness& w) {
  const auto& m = sys.model();
  ReferenceSemantics ref(m);
  if (w.v.empty()) {
    // Static: first states of the block representative and of the member.
    for (const auto& b : p.blocks)
      if (std::find(b.atoms.begin(), b.atoms.end(), w.state) != b.atoms.end())
        return residual(ref.state_rate(graph_named(sys, b.atoms[0]).names[0], w.action),
                        ref.state_rate(graph_named(sys, w.state).names[0], w.action));
    return 0.0;
  }
  std::vector<double> vs(w.v.size(), 0.0);
  for (const auto& b : p.blocks) {
    const auto& rep = graph_named(sys, b.atoms[0]);
    for (std::size_t s = 0; s < rep.size(); ++s)
      for (std::size_t j = 0; j < b.atoms.size(); ++j)
        vs[ref.global(rep.names[s])] +=
            w.v[ref.global(graph_named(sys, b.atoms[j]).names[b.sigma[j][s]])];
  }
  if (w.condition == "iii")
    return residual(ref.apparent(*m.system, w.v, w.action),
                    ref.apparent(*m.system, vs, w.action));
  for (const auto& b : p.blocks) {
    const auto& rep = graph_named(sys, b.atoms[0]);
    auto it = std::find(rep.names.begin(), rep.names.end(), w.state);
    if (it == rep.names.end()) continue;
    const std::size_t s = static_cast<std::size_t>(it - rep.names.begin());
    double lhs = 0.0;
    for (std::size_t j = 0; j < b.atoms.size(); ++j) {
      const auto& member = graph_named(sys, b.atoms[j]).names[b.sigma[j][s]];
      lhs += w.condition == "i" ? ref.component(*m.system, w.v, member, w.action)
                                : reference_inflow(ref, m, w.v, member, w.action);
    }
    double rhs = w.condition == "i" ? ref.component(*m.system, vs, w.state, w.action)
                                    : reference_inflow(ref, m, vs, w.state, w.action);
    return residual(lhs, rhs);
  }
  return 0.0;
}

/// Residual of a label-equivalence witness.
inline double reevaluate(const FluidSystem& sys, const TuplePartition& tp, const Witness& w) {
  const auto& m = sys.model();
  ReferenceSemantics ref(m);
  const auto& ti = tp.tuples[w.first];
  const auto& tj = tp.tuples[w.second];
  auto sig = tuple_bijections(tp, w.first, w.second);
  if (w.v.empty()) {
    auto k = static_cast<std::size_t>(std::find(tj.begin(), tj.end(), w.state) - tj.begin());
    return residual(ref.state_rate(graph_named(sys, ti[k]).names[0], w.action),
                    ref.state_rate(graph_named(sys, tj[k]).names[0], w.action));
  }
  std::vector<double> vs = w.v;
  std::string image = w.state;
  for (std::size_t k = 0; k < ti.size(); ++k) {
    const auto& gi = graph_named(sys, ti[k]);
    const auto& gj = graph_named(sys, tj[k]);
    for (std::size_t s = 0; s < gi.size(); ++s) {
      const auto a = ref.global(gi.names[s]);
      const auto b = ref.global(gj.names[sig[k][s]]);
      vs[a] = w.v[b];
      vs[b] = w.v[a];
      if (gi.names[s] == w.state) image = gj.names[sig[k][s]];
    }
  }
  if (w.condition == "d")
    return residual(ref.apparent(*m.system, w.v, w.action),
                    ref.apparent(*m.system, vs, w.action));
  if (w.condition == "b")
    return residual(reference_inflow(ref, m, w.v, w.state, w.action),
                    reference_inflow(ref, m, vs, image, w.action));
  return residual(ref.component(*m.system, w.v, w.state, w.action),
                  ref.component(*m.system, vs, image, w.action));
}

}  // namespace fepa::testing
