#pragma once

// Model texts used across the test suites.

#include <sstream>
#include <string>
#include <vector>

#include "fepa/model.hpp"

namespace fepa::testing {

/// (P1 <> ... <> PD) <alpha> Q with P_d = (alpha, r_d).P_d', P_d' =
/// (beta, s).P_d, Q = (alpha, u).Q', Q' = (delta, w).Q.
inline std::string sys_text(const std::vector<double>& r, double s, double u,
                            double w, Sync rho,
                            const std::vector<double>& populations, double q0) {
  std::ostringstream os;
  os.precision(17);
  os << "semantics = " << to_string(rho) << ";\n";
  for (std::size_t d = 1; d <= r.size(); ++d) {
    os << "P" << d << " = (alpha, " << r[d - 1] << ").P" << d << "';\n";
    os << "P" << d << "' = (beta, " << s << ").P" << d << ";\n";
  }
  os << "Q = (alpha, " << u << ").Q';\nQ' = (delta, " << w << ").Q;\n";
  os << "system = ";
  if (r.size() > 1) os << "(";
  for (std::size_t d = 1; d <= r.size(); ++d) os << (d > 1 ? " <> " : "") << "P" << d;
  if (r.size() > 1) os << ")";
  os << " <alpha> Q;\n";
  for (std::size_t d = 1; d <= r.size(); ++d)
    os << "init P" << d << " = " << populations[d - 1] << ";\n";
  os << "init Q = " << q0 << ";\n";
  return os.str();
}

inline std::string sys_text(std::size_t D, Sync rho, double pop = 200.0,
                            double q0 = 400.0) {
  return sys_text(std::vector<double>(D, 1.0), 0.5, 1.0, 15.0, rho,
                  std::vector<double>(D, pop), q0);
}

/// ((P1 <alpha> R1) <> ... <> (PD <alpha> RD)) <alpha> Q with R_d =
/// (alpha, rt).R_d', R_d' = (gamma, st).R_d.
inline std::string sys_e_text(std::size_t D, Sync rho, double r = 1.0,
                              double rt = 2.0, double pop = 100.0,
                              double rpop = 50.0, double q0 = 300.0) {
  std::ostringstream os;
  os.precision(17);
  os << "semantics = " << to_string(rho) << ";\n";
  for (std::size_t d = 1; d <= D; ++d) {
    os << "P" << d << " = (alpha, " << r << ").P" << d << "';\n";
    os << "P" << d << "' = (beta, 0.5).P" << d << ";\n";
    os << "R" << d << " = (alpha, " << rt << ").R" << d << "';\n";
    os << "R" << d << "' = (gamma, 0.7).R" << d << ";\n";
  }
  os << "Q = (alpha, 1.5).Q';\nQ' = (delta, 3).Q;\n";
  os << "system = (";
  for (std::size_t d = 1; d <= D; ++d)
    os << (d > 1 ? " <> " : "") << "(P" << d << " <alpha> R" << d << ")";
  os << ") <alpha> Q;\n";
  for (std::size_t d = 1; d <= D; ++d)
    os << "init P" << d << " = " << pop << ";\ninit R" << d << " = " << rpop << ";\n";
  os << "init Q = " << q0 << ";\n";
  return os.str();
}

/// Ill-posed model: the gamma-rates of each atom sum to r but split between a
/// self-loop (r/d) and a move to the derivative (r - r/d), so atoms are not
/// pairwise semi-isomorphic; Q blocks gamma entirely.
inline std::string ill_posed_text(std::size_t D, Sync rho, double r = 1.0,
                                  double s = 0.5) {
  std::ostringstream os;
  os.precision(17);
  os << "semantics = " << to_string(rho) << ";\n";
  for (std::size_t d = 1; d <= D; ++d) {
    double self = r / static_cast<double>(d);
    os << "T" << d << " = (alpha, " << r << ").T" << d << "'";
    if (d == 1)
      os << " + (gamma, " << r << ").T" << d << ";\n";
    else
      os << " + (gamma, " << self << ").T" << d << " + (gamma, " << r - self
         << ").T" << d << "';\n";
    os << "T" << d << "' = (beta, " << s << ").T" << d << ";\n";
  }
  os << "Q = (alpha, 1).Q';\nQ' = (delta, 15).Q;\n";
  os << "system = (";
  for (std::size_t d = 1; d <= D; ++d) os << (d > 1 ? " <> " : "") << "T" << d;
  os << ") <alpha, gamma> Q;\n";
  for (std::size_t d = 1; d <= D; ++d) os << "init T" << d << " = " << 100 + d << ";\n";
  os << "init Q = 300;\n";
  return os.str();
}

}  // namespace fepa::testing
