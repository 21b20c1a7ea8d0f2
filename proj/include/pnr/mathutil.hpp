#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>

namespace pnr {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;
inline constexpr double kLogSqrt2Pi = 0.9189385332046727418;

inline double norm_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return kInvSqrt2Pi / sigma * std::exp(-0.5 * z * z);
}

inline double log_norm_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

//! Linear-interpolated sample quantile (the common "type 7" definition).
//! `sorted` must be ascending and nonempty; p in [0, 1].
double quantile_sorted(const Eigen::VectorXd& sorted, double p);

double sample_stddev(const Eigen::VectorXd& x);

//! Binomial pmf C(n,j) p^j (1-p)^(n-j), stable for the small n used here.
double binomial_pmf(int j, int n, double p);

//! SplitMix64 mixing step; used to derive independent per-trial seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

//! Independent generator for trial `trial` of probe `probe`; the stream
//! layout makes parallel generation order-independent.
inline std::mt19937_64 make_trial_rng(std::uint64_t seed, std::uint64_t probe,
                                      std::uint64_t trial) {
  std::uint64_t s = splitmix64(seed ^ splitmix64(probe + 0x100000001ULL));
  s = splitmix64(s ^ splitmix64(trial + 0x200000003ULL));
  return std::mt19937_64(s);
}

}  // namespace pnr
