#include "cdpm/schedule.hpp"

#include <cmath>

#include "cdpm/errors.hpp"

namespace cdpm {

SigmaMode sigma_mode_from_string(const std::string& s) {
  if (s == "beta") return SigmaMode::kBeta;
  if (s == "beta_tilde") return SigmaMode::kBetaTilde;
  throw InvalidInputError("unknown sigma_mode '" + s + "'");
}

std::string to_string(SigmaMode m) {
  return m == SigmaMode::kBeta ? "beta" : "beta_tilde";
}

NoiseSchedule linear_schedule(int T, double beta_start, double beta_end,
                              SigmaMode sigma_mode) {
  if (T < 1) throw InvalidInputError("linear_schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw InvalidInputError("linear_schedule: need 0 < beta_start <= beta_end < 1");

  NoiseSchedule s;
  s.T = T;
  s.beta.resize(static_cast<std::size_t>(T));
  s.alpha.resize(static_cast<std::size_t>(T));
  s.sigma.resize(static_cast<std::size_t>(T));
  s.alpha_bar.resize(static_cast<std::size_t>(T) + 1);
  s.alpha_bar[0] = 1.0;

  for (int t = 1; t <= T; ++t) {
    const double frac = (T == 1) ? 0.0 : static_cast<double>(t - 1) / (T - 1);
    const double b = beta_start + frac * (beta_end - beta_start);
    s.beta[t - 1] = b;
    s.alpha[t - 1] = 1.0 - b;
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t - 1];
  }
  for (int t = 1; t <= T; ++t) {
    if (sigma_mode == SigmaMode::kBeta) {
      s.sigma[t - 1] = std::sqrt(s.beta[t - 1]);
    } else {
      const double var =
          (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * s.beta[t - 1];
      s.sigma[t - 1] = std::sqrt(var);
    }
  }
  return s;
}

}  // namespace cdpm
