#pragma once

// Random fluid atoms with a handful of states, plus relabelled, split-rate
// and perturbed variants, for semi-isomorphism checks.

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "fepa/semantics.hpp"

namespace fepa::testing {

struct RawTransition {
  std::size_t from;
  std::size_t to;
  std::string action;
  double rate;
};

struct RawAtom {
  std::size_t states = 0;
  std::vector<RawTransition> transitions;
};

inline RawAtom random_raw_atom(std::mt19937& rng, std::size_t max_states = 5) {
  std::uniform_int_distribution<std::size_t> size(1, max_states);
  std::uniform_int_distribution<int> rate(1, 8);
  std::uniform_int_distribution<int> act(0, 1);
  RawAtom a;
  a.states = size(rng);
  const char* names[] = {"a", "b"};
  for (std::size_t i = 1; i < a.states; ++i) {
    std::uniform_int_distribution<std::size_t> parent(0, i - 1);
    a.transitions.push_back({parent(rng), i, names[act(rng)], rate(rng) * 0.25});
  }
  std::uniform_int_distribution<std::size_t> any(0, a.states - 1);
  std::uniform_int_distribution<int> extra(0, 2);
  for (std::size_t i = 0; i < a.states; ++i) {
    int k = extra(rng) + (a.states == 1 ? 1 : 0);
    for (int e = 0; e < k; ++e)
      a.transitions.push_back({i, any(rng), names[act(rng)], rate(rng) * 0.25});
  }
  // Every state needs a body.
  for (std::size_t i = 0; i < a.states; ++i) {
    bool has = std::any_of(a.transitions.begin(), a.transitions.end(),
                           [&](const RawTransition& t) { return t.from == i; });
    if (!has) a.transitions.push_back({i, 0, names[act(rng)], rate(rng) * 0.25});
  }
  return a;
}

/// Same graph with states renamed (state 0 stays the root).
inline RawAtom relabel(std::mt19937& rng, const RawAtom& a) {
  std::vector<std::size_t> perm(a.states);
  std::iota(perm.begin(), perm.end(), 0);
  if (a.states > 2) std::shuffle(perm.begin() + 1, perm.end(), rng);
  RawAtom b = a;
  for (auto& t : b.transitions) {
    t.from = perm[t.from];
    t.to = perm[t.to];
  }
  std::shuffle(b.transitions.begin(), b.transitions.end(), rng);
  return b;
}

/// Splits one transition of rate > 0.25 into two parallel ones.
inline RawAtom split_rate(std::mt19937& rng, const RawAtom& a) {
  RawAtom b = a;
  std::vector<std::size_t> big;
  for (std::size_t i = 0; i < b.transitions.size(); ++i)
    if (b.transitions[i].rate > 0.25) big.push_back(i);
  if (big.empty()) return b;
  auto& t = b.transitions[big[std::uniform_int_distribution<std::size_t>(0, big.size() - 1)(rng)]];
  RawTransition extra = t;
  extra.rate = 0.25;
  t.rate -= 0.25;
  b.transitions.push_back(extra);
  return b;
}

inline RawAtom perturb(std::mt19937& rng, const RawAtom& a, double by) {
  RawAtom b = a;
  auto i = std::uniform_int_distribution<std::size_t>(0, b.transitions.size() - 1)(rng);
  b.transitions[i].rate += by;
  return b;
}

inline std::string atom_text(const RawAtom& a, const std::string& prefix) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < a.states; ++i) {
    os << prefix << "_" << i << " = ";
    bool first = true;
    for (const auto& t : a.transitions) {
      if (t.from != i) continue;
      os << (first ? "" : " + ") << "(" << t.action << ", " << t.rate << ")." << prefix
         << "_" << t.to;
      first = false;
    }
    os << ";\n";
  }
  return os.str();
}

/// A corpus of `count` atoms named A0_0, A1_0, ...; returns the model text.
inline std::string atom_corpus(std::mt19937& rng, std::size_t count,
                               std::size_t max_states = 5) {
  std::vector<RawAtom> atoms;
  std::uniform_int_distribution<int> kind(0, 4);
  while (atoms.size() < count) {
    if (atoms.empty() || kind(rng) == 0) {
      atoms.push_back(random_raw_atom(rng, max_states));
      continue;
    }
    const RawAtom& base =
        atoms[std::uniform_int_distribution<std::size_t>(0, atoms.size() - 1)(rng)];
    switch (kind(rng)) {
      case 1: atoms.push_back(relabel(rng, base)); break;
      case 2: atoms.push_back(split_rate(rng, relabel(rng, base))); break;
      case 3: atoms.push_back(perturb(rng, relabel(rng, base), 0.125)); break;
      default: atoms.push_back(random_raw_atom(rng, max_states)); break;
    }
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < atoms.size(); ++i)
    os << atom_text(atoms[i], "A" + std::to_string(i));
  os << "system = ";
  for (std::size_t i = 0; i < atoms.size(); ++i)
    os << (i ? " <> " : "") << "A" << i << "_0";
  os << ";\n";
  return os.str();
}

/// Aggregated rate of (from, to, action) straight from the transition list.
inline std::map<std::tuple<std::size_t, std::size_t, std::string>, double>
aggregate(const DerivationGraph& g) {
  std::map<std::tuple<std::size_t, std::size_t, std::string>, double> out;
  for (const auto& t : g.transitions)
    out[{t.source, t.target, t.action}] += t.rate * static_cast<double>(t.multiplicity);
  return out;
}

/// Minimum over all bijections of the largest aggregated-rate deviation, by
/// enumeration. Returns -1 for different sizes.
inline double brute_min_deviation(const DerivationGraph& p, const DerivationGraph& q) {
  if (p.size() != q.size()) return -1.0;
  auto ap = aggregate(p), aq = aggregate(q);
  std::vector<std::size_t> perm(p.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double worst = 0.0;
    std::map<std::tuple<std::size_t, std::size_t, std::string>, double> mapped;
    for (const auto& [k, r] : ap)
      mapped[{perm[std::get<0>(k)], perm[std::get<1>(k)], std::get<2>(k)}] += r;
    for (const auto& [k, r] : mapped) {
      auto it = aq.find(k);
      worst = std::max(worst, std::abs(r - (it == aq.end() ? 0.0 : it->second)));
    }
    for (const auto& [k, r] : aq)
      if (!mapped.count(k)) worst = std::max(worst, r);
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Deviation of one given bijection, computed like brute_min_deviation.
inline double deviation_of(const DerivationGraph& p, const DerivationGraph& q,
                           const std::vector<std::size_t>& perm) {
  auto ap = aggregate(p), aq = aggregate(q);
  std::map<std::tuple<std::size_t, std::size_t, std::string>, double> mapped;
  for (const auto& [k, r] : ap)
    mapped[{perm[std::get<0>(k)], perm[std::get<1>(k)], std::get<2>(k)}] += r;
  double worst = 0.0;
  for (const auto& [k, r] : mapped) {
    auto it = aq.find(k);
    worst = std::max(worst, std::abs(r - (it == aq.end() ? 0.0 : it->second)));
  }
  for (const auto& [k, r] : aq)
    if (!mapped.count(k)) worst = std::max(worst, r);
  return worst;
}

}  // namespace fepa::testing
