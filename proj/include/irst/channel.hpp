#pragma once

#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "irst/errors.hpp"
#include "irst/nd.hpp"
#include "irst/random.hpp"

namespace irst {

// Shadowed-Rician fading: Rayleigh scatter plus a Nakagami-m shadowed
// line-of-sight component. The power-gain PDF is
//   f(r) = (2 b0 m / (2 b0 m + O))^m * 1/(2 b0) * exp(-r / (2 b0))
//          * 1F1(m, 1, O r / (2 b0 (2 b0 m + O))).
struct ChannelParams {
  double b0 = 0.158;   // average scatter-component power
  double m = 19.4;     // Nakagami shape
  double omega = 1.29; // average LoS power

  void validate() const {
    if (!(b0 > 0.0)) throw ConfigError("ChannelParams: b0 must be > 0");
    if (!(m > 0.0)) throw ConfigError("ChannelParams: m must be > 0");
    if (!(omega >= 0.0)) throw ConfigError("ChannelParams: omega must be >= 0");
  }
};

struct ChannelDraw {
  double power_gain = 1.0;  // r
  double amplitude = 1.0;   // sqrt(r), used as the coefficient h
};

struct NoiseSpec {
  double snr_db = 0.0;
  double sigma2 = 1.0;  // per-element noise variance under unit signal power

  static NoiseSpec from_snr_db(double snr_db) {
    return {snr_db, std::pow(10.0, -snr_db / 10.0)};
  }
};

// Kummer's function of the first kind via the ascending series,
// stopped when the next term falls below 1e-14 relative.
inline double hyp1f1(double a, double b, double z) {
  if (b <= 0.0 && b == std::floor(b))
    throw DomainError("hyp1f1: b must not be a non-positive integer");
  if (!std::isfinite(z)) throw DomainError("hyp1f1: z must be finite");
  double term = 1.0, sum = 1.0;
  const int kmax = 10000;
  for (int k = 0; k < kmax; ++k) {
    term *= (a + k) * z / ((b + k) * (k + 1));
    sum += term;
    if (std::abs(term) < 1e-14 * std::abs(sum)) return sum;
  }
  std::ostringstream os;
  os << "hyp1f1: series did not converge within " << kmax << " terms (a=" << a
     << ", z=" << z << ")";
  throw NumericalError(os.str());
}

inline double eval_pdf(const ChannelParams& p, double r) {
  p.validate();
  if (r < 0.0) throw DomainError("eval_pdf: r must be >= 0");
  double denom = 2.0 * p.b0 * p.m + p.omega;
  double coeff = std::pow(2.0 * p.b0 * p.m / denom, p.m) / (2.0 * p.b0);
  double z = p.omega * r / (2.0 * p.b0 * denom);
  return coeff * std::exp(-r / (2.0 * p.b0)) * hyp1f1(p.m, 1.0, z);
}

// i.i.d. draws with power gain distributed per the SR law. Construction:
// scatter term = complex Gaussian with per-axis variance b0; LoS amplitude A
// with A^2 ~ Gamma(shape m, scale omega/m); uniform LoS phase;
// power = |A e^{j phi} + Z|^2.
inline std::vector<ChannelDraw> sample_gain(const ChannelParams& p, uint64_t seed, long n) {
  p.validate();
  if (n < 1) throw ConfigError("sample_gain: n must be >= 1");
  Rng rng(seed);
  std::vector<ChannelDraw> out;
  out.reserve(static_cast<size_t>(n));
  double sb = std::sqrt(p.b0);
  for (long i = 0; i < n; ++i) {
    std::complex<double> z(rng.normal(0.0, sb), rng.normal(0.0, sb));
    double a = p.omega > 0.0 ? std::sqrt(rng.gamma(p.m, p.omega / p.m)) : 0.0;
    double phi = rng.uniform(0.0, 2.0 * M_PI);
    std::complex<double> h = std::polar(a, phi) + z;
    double r = std::norm(h);
    out.push_back({r, std::sqrt(r)});
  }
  return out;
}

// y -> h*y + n, elementwise Gaussian noise of variance sigma2; optional
// perfect-CSI equalization divides the result by h.
inline NdArray apply_channel(const NdArray& y, const ChannelDraw& draw,
                             const NoiseSpec& noise, uint64_t seed, bool equalize) {
  if (equalize && draw.amplitude == 0.0)
    throw NumericalError("apply_channel: degenerate channel (h = 0) with equalization");
  Rng rng(seed);
  NdArray out(y.shape);
  double h = draw.amplitude;
  double sd = std::sqrt(noise.sigma2);
  for (long i = 0; i < y.numel(); ++i) {
    double v = h * y[i] + (sd > 0.0 ? rng.normal(0.0, sd) : 0.0);
    out[i] = equalize ? v / h : v;
  }
  return out;
}

// Numerical CDF of the SR power-gain law on [0, r_max], via composite
// Simpson on a fine grid; returned as a table for interpolation.
class SrCdf {
 public:
  SrCdf(const ChannelParams& p, double r_max, int steps = 20000) : r_max_(r_max) {
    // Simpson needs an even interval count.
    if (steps % 2) ++steps;
    grid_.resize(static_cast<size_t>(steps) + 1);
    cdf_.resize(grid_.size());
    double h = r_max / steps;
    std::vector<double> f(grid_.size());
    for (size_t i = 0; i < grid_.size(); ++i) {
      grid_[i] = h * static_cast<double>(i);
      f[i] = eval_pdf(p, grid_[i]);
    }
    cdf_[0] = 0.0;
    for (size_t i = 2; i < grid_.size(); i += 2)
      cdf_[i] = cdf_[i - 2] + h / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
    for (size_t i = 1; i < grid_.size(); i += 2)
      cdf_[i] = cdf_[i - 1] + h / 12.0 * (5.0 * f[i - 1] + 8.0 * f[i] - f[i + 1 < f.size() ? i + 1 : i]);
  }

  double operator()(double r) const {
    if (r <= 0.0) return 0.0;
    if (r >= r_max_) return cdf_.back();
    double pos = r / r_max_ * static_cast<double>(grid_.size() - 1);
    size_t i = static_cast<size_t>(pos);
    double t = pos - static_cast<double>(i);
    return cdf_[i] * (1.0 - t) + cdf_[i + 1] * t;
  }

  double total() const { return cdf_.back(); }

 private:
  double r_max_;
  std::vector<double> grid_, cdf_;
};

}  // namespace irst
