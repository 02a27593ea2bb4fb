#pragma once

#include <string>
#include <vector>

namespace cdpm {

enum class SigmaMode {
  kBeta,       // sigma_t^2 = beta_t
  kBetaTilde,  // sigma_t^2 = (1 - abar_{t-1}) / (1 - abar_t) * beta_t
};

SigmaMode sigma_mode_from_string(const std::string& s);
std::string to_string(SigmaMode m);

// Precomputed noise-schedule tables for t = 1..T. The cumulative product
// is anchored at alpha_bar(0) = 1 so the t = 0 edge of the forward
// process is the identity.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;       // beta[t-1]     = beta_t,   t in 1..T
  std::vector<double> alpha;      // alpha[t-1]    = 1 - beta_t
  std::vector<double> alpha_bar;  // alpha_bar[t]  = prod_{s<=t} alpha_s, size T+1
  std::vector<double> sigma;      // sigma[t-1]    = reverse-step stddev

  double beta_at(int t) const { return beta.at(static_cast<std::size_t>(t - 1)); }
  double alpha_at(int t) const { return alpha.at(static_cast<std::size_t>(t - 1)); }
  double alpha_bar_at(int t) const { return alpha_bar.at(static_cast<std::size_t>(t)); }
  double sigma_at(int t) const { return sigma.at(static_cast<std::size_t>(t - 1)); }
};

// beta_t interpolated linearly from beta_start (t=1) to beta_end (t=T).
// Requires 0 < beta_start <= beta_end < 1 and T >= 1.
NoiseSchedule linear_schedule(int T, double beta_start, double beta_end,
                              SigmaMode sigma_mode = SigmaMode::kBeta);

}  // namespace cdpm
