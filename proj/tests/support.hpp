#pragma once

#include <random>

#include "hankel_mpc/lti.hpp"
#include "hankel_mpc/trajectory.hpp"

namespace hmpc::testing {

inline Matrix random_matrix(Index r, Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> ud(-scale, scale);
  Matrix out(r, c);
  for (Index i = 0; i < out.size(); ++i) out.data()[i] = ud(rng);
  return out;
}

/// Noise-free bank whose input is persistently exciting of order L + l + n.
inline DataBank make_bank(const LtiSystem& sys, int horizon, int window, std::mt19937_64& rng,
                          Index extra = 20) {
  const int order = horizon + window + static_cast<int>(sys.states());
  const Index len = minimum_length_for_excitation(sys.inputs(), order) + extra;
  const Matrix u = random_matrix(sys.inputs(), len, rng);
  const auto sim = simulate(sys, random_matrix(sys.states(), 1, rng), u);
  return build_data_bank(IoTrajectory(u, sim.outputs), horizon, window);
}

inline Vector equilibrium_output(const LtiSystem& sys, const Vector& us) {
  const Index n = sys.states();
  const Vector xs = (Matrix::Identity(n, n) - sys.a()).lu().solve(sys.b() * us);
  return sys.c() * xs + sys.d() * us;
}

/// Random system whose lag l satisfies p * l == n.
inline LtiSystem square_system(Index n, Index m, Index p, std::mt19937_64& rng) {
  for (;;) {
    auto sys = random_system(n, m, p, rng);
    if (lag(sys) * p == n) return sys;
  }
}

}  // namespace hmpc::testing
