#include "roughvol/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace roughvol {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

void check_bs_inputs(double S0, double K, double T) {
  if (!(S0 > 0.0)) throw std::invalid_argument("Black-Scholes: S0 must be positive");
  if (!(K > 0.0)) throw std::invalid_argument("Black-Scholes: K must be positive");
  if (!(T > 0.0)) throw std::invalid_argument("Black-Scholes: T must be positive");
}

std::string bound_message(ImpliedVolBoundsError::Bound b, double price, double limit) {
  std::ostringstream os;
  os.precision(17);
  os << "implied_vol: price " << price << (b == ImpliedVolBoundsError::Bound::lower ? " <= lower" : " >= upper")
     << " no-arbitrage bound " << limit;
  return os.str();
}

}  // namespace

double bs_price(double S0, double K, double T, double vol, OptionType type) {
  check_bs_inputs(S0, K, T);
  if (!(vol >= 0.0)) throw std::invalid_argument("Black-Scholes: vol must be non-negative");
  if (vol == 0.0)
    return type == OptionType::call ? std::max(S0 - K, 0.0) : std::max(K - S0, 0.0);
  const double s = vol * std::sqrt(T);
  const double d1 = std::log(S0 / K) / s + 0.5 * s;
  const double d2 = d1 - s;
  if (type == OptionType::call) return S0 * norm_cdf(d1) - K * norm_cdf(d2);
  return K * norm_cdf(-d2) - S0 * norm_cdf(-d1);
}

double bs_vega(double S0, double K, double T, double vol) {
  check_bs_inputs(S0, K, T);
  if (!(vol > 0.0)) return 0.0;
  const double s = vol * std::sqrt(T);
  const double d1 = std::log(S0 / K) / s + 0.5 * s;
  return S0 * kInvSqrt2Pi * std::exp(-0.5 * d1 * d1) * std::sqrt(T);
}

ImpliedVolBoundsError::ImpliedVolBoundsError(Bound bound, double price, double limit)
    : std::domain_error(bound_message(bound, price, limit)), bound_(bound) {}

double implied_vol(double price, double S0, double K, double T, OptionType type) {
  check_bs_inputs(S0, K, T);
  const double lower = type == OptionType::call ? std::max(S0 - K, 0.0) : std::max(K - S0, 0.0);
  const double upper = type == OptionType::call ? S0 : K;
  if (!(price > lower))
    throw ImpliedVolBoundsError(ImpliedVolBoundsError::Bound::lower, price, lower);
  if (!(price < upper))
    throw ImpliedVolBoundsError(ImpliedVolBoundsError::Bound::upper, price, upper);

  auto f = [&](double v) { return bs_price(S0, K, T, v, type) - price; };
  double lo = 0.0;
  double hi = 1.0;
  while (f(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw ImpliedVolBoundsError(ImpliedVolBoundsError::Bound::upper, price, upper);
  }
  for (int i = 0; i < 100 && hi - lo > 1e-3 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }

  double v = 0.5 * (lo + hi);
  for (int i = 0; i < 100; ++i) {
    const double fv = f(v);
    if (fv == 0.0) return v;
    (fv < 0.0 ? lo : hi) = v;
    const double vega = bs_vega(S0, K, T, v);
    double next = vega > 0.0 ? v - fv / vega : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - v) <= 4.0 * std::numeric_limits<double>::epsilon() * v) return next;
    v = next;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) return v;
  }
  return v;
}

double SmileResult::vol_difference_stderr(std::size_t i, std::size_t j) const {
  const std::size_t n = size();
  if (i >= n || j >= n) throw std::out_of_range("SmileResult: strike index out of range");
  if (vol_covariance.size() != n * n) return 0.0;
  const double var = vol_covariance[i * n + i] + vol_covariance[j * n + j] -
                     2.0 * vol_covariance[i * n + j];
  return std::sqrt(std::max(var, 0.0));
}

std::vector<double> log_moneyness_grid(double k_min, double k_max, std::size_t count) {
  if (count < 1) throw std::invalid_argument("strike grid needs at least one point");
  if (!(k_max >= k_min)) throw std::invalid_argument("strike grid needs k_max >= k_min");
  if (count == 1) return {k_min};
  std::vector<double> k(count);
  for (std::size_t i = 0; i < count; ++i)
    k[i] = k_min + (k_max - k_min) * static_cast<double>(i) / static_cast<double>(count - 1);
  return k;
}

SmileResult mc_smile(const std::vector<double>& log_price_terminal,
                     const std::vector<double>& log_moneyness, double T) {
  if (log_price_terminal.empty()) throw std::invalid_argument("mc_smile: no paths");
  if (!(T > 0.0)) throw std::invalid_argument("mc_smile: maturity must be positive");
  const std::size_t n = log_price_terminal.size();
  const double dn = static_cast<double>(n);
  std::vector<double> S(n);
  for (std::size_t p = 0; p < n; ++p) S[p] = std::exp(log_price_terminal[p]);

  SmileResult out;
  out.maturity = T;
  out.n_paths = n;
  std::vector<double> vegas;
  std::vector<OptionType> types;
  for (double k : log_moneyness) {
    const double K = std::exp(k);
    const OptionType type = k < 0.0 ? OptionType::put : OptionType::call;
    double sum = 0.0, sum2 = 0.0;
    for (double s : S) {
      const double pay = type == OptionType::call ? std::max(s - K, 0.0) : std::max(K - s, 0.0);
      sum += pay;
      sum2 += pay * pay;
    }
    if (sum == 0.0) {
      out.skipped.push_back({k, "all payoffs zero"});
      continue;
    }
    const double mean = sum / dn;
    const double var = n > 1 ? std::max(sum2 / dn - mean * mean, 0.0) * dn / (dn - 1.0) : 0.0;
    double iv;
    try {
      iv = implied_vol(mean, 1.0, K, T, type);
    } catch (const ImpliedVolBoundsError& e) {
      out.skipped.push_back({k, e.what()});
      continue;
    }
    out.log_moneyness.push_back(k);
    out.strikes.push_back(K);
    out.implied_vols.push_back(iv);
    out.prices.push_back(mean);
    out.stderrs.push_back(std::sqrt(var / dn));
    vegas.push_back(bs_vega(1.0, K, T, iv));
    types.push_back(type);
  }

  // Delta method: vol_i ~ payoff_i / vega_i, so the vol covariance is the
  // covariance of those per-path ratios divided by n.
  const std::size_t m = out.size();
  out.vol_covariance.assign(m * m, 0.0);
  if (n > 1 && m > 0) {
    std::vector<double> z(m), mean_z(m);
    for (std::size_t i = 0; i < m; ++i) mean_z[i] = out.prices[i] / vegas[i];
    for (double s : S) {
      for (std::size_t i = 0; i < m; ++i) {
        const double K = out.strikes[i];
        const double pay = types[i] == OptionType::call ? std::max(s - K, 0.0) : std::max(K - s, 0.0);
        z[i] = pay / vegas[i] - mean_z[i];
      }
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j <= i; ++j) out.vol_covariance[i * m + j] += z[i] * z[j];
    }
    const double norm = 1.0 / ((dn - 1.0) * dn);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        out.vol_covariance[i * m + j] *= norm;
        out.vol_covariance[j * m + i] = out.vol_covariance[i * m + j];
      }
  }
  return out;
}

double smile_rmse(const SmileResult& a, const SmileResult& b) {
  if (a.maturity != b.maturity) throw std::invalid_argument("smile_rmse: maturities differ");
  if (a.size() != b.size() || a.size() == 0)
    throw std::invalid_argument("smile_rmse: strike grids differ");
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a.log_moneyness[i] - b.log_moneyness[i]) > 1e-12)
      throw std::invalid_argument("smile_rmse: strike grids differ");
    const double d = a.implied_vols[i] - b.implied_vols[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(a.size()));
}

namespace {

SmileResult subset(const SmileResult& s, const std::vector<std::size_t>& keep) {
  SmileResult out;
  out.maturity = s.maturity;
  out.n_paths = s.n_paths;
  out.seed = s.seed;
  out.model = s.model;
  out.skipped = s.skipped;
  const std::size_t n = s.size(), m = keep.size();
  std::vector<bool> kept(n, false);
  for (std::size_t i : keep) {
    kept[i] = true;
    out.log_moneyness.push_back(s.log_moneyness[i]);
    out.strikes.push_back(s.strikes[i]);
    out.implied_vols.push_back(s.implied_vols[i]);
    out.prices.push_back(s.prices[i]);
    out.stderrs.push_back(s.stderrs[i]);
  }
  if (s.vol_covariance.size() == n * n) {
    out.vol_covariance.resize(m * m);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) out.vol_covariance[a * m + b] = s.vol_covariance[keep[a] * n + keep[b]];
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!kept[i]) out.skipped.push_back({s.log_moneyness[i], "not priced in the other smile"});
  return out;
}

}  // namespace

std::pair<SmileResult, SmileResult> common_strikes(const SmileResult& a, const SmileResult& b) {
  std::vector<std::size_t> ka, kb;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      if (std::abs(a.log_moneyness[i] - b.log_moneyness[j]) <= 1e-12) {
        ka.push_back(i);
        kb.push_back(j);
        break;
      }
  return {subset(a, ka), subset(b, kb)};
}

SmileResult scale_smile(SmileResult s, double m) {
  if (!(m > 0.0)) throw std::invalid_argument("scale_smile: factor must be positive");
  for (double& v : s.implied_vols) v *= m;
  for (double& c : s.vol_covariance) c *= m * m;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const OptionType type = s.log_moneyness[i] < 0.0 ? OptionType::put : OptionType::call;
    s.prices[i] = bs_price(1.0, s.strikes[i], s.maturity, s.implied_vols[i], type);
  }
  return s;
}

namespace {

// Index of log-moneyness k in s, or npos.
std::size_t find_strike(const SmileResult& s, double k) {
  for (std::size_t i = 0; i < s.size(); ++i)
    if (std::abs(s.log_moneyness[i] - k) <= 1e-12) return i;
  return static_cast<std::size_t>(-1);
}

}  // namespace

SkewReport atm_skew(const SmileFunction& smile_fn, const std::vector<double>& maturities,
                    double bump) {
  if (maturities.size() < 3)
    throw std::invalid_argument("atm_skew: at least three maturities are needed to fit a line");
  if (!(bump > 0.0)) throw std::invalid_argument("atm_skew: bump must be positive");
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  SkewReport r;
  r.bump = bump;
  const std::vector<double> ks{-bump, -0.5 * bump, 0.5 * bump, bump};
  for (double T : maturities) {
    const SmileResult s = smile_fn(T, ks);
    const std::size_t m1 = find_strike(s, -bump), p1 = find_strike(s, bump);
    const std::size_t m2 = find_strike(s, -0.5 * bump), p2 = find_strike(s, 0.5 * bump);
    double psi = nan, se = nan, half = nan;
    if (m1 != npos && p1 != npos) {
      psi = std::abs(s.implied_vols[p1] - s.implied_vols[m1]) / (2.0 * bump);
      se = s.vol_difference_stderr(p1, m1) / (2.0 * bump);
    }
    if (m2 != npos && p2 != npos) half = std::abs(s.implied_vols[p2] - s.implied_vols[m2]) / bump;
    r.maturities.push_back(T);
    r.psi.push_back(psi);
    r.psi_stderr.push_back(se);
    r.psi_half.push_back(half);
    r.psi_richardson.push_back((4.0 * half - psi) / 3.0);
    r.flagged.push_back(!(psi > 3.0 * se) || !(psi > 0.0));
  }

  std::vector<double> x, y;
  for (std::size_t i = 0; i < r.maturities.size(); ++i) {
    if (r.flagged[i]) continue;
    x.push_back(std::log(r.maturities[i]));
    y.push_back(std::log(r.psi[i]));
  }
  if (x.size() < 3) {
    r.fit_message = "fewer than three maturities with a significant skew";
    return r;
  }
  const double nx = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= nx;
  my /= nx;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) {
    r.fit_message = "maturities must be distinct";
    return r;
  }
  r.exponent = sxy / sxx;
  r.intercept = my - r.exponent * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (r.intercept + r.exponent * x[i]);
    ss += e * e;
  }
  r.residual = std::sqrt(ss / nx);
  r.fit_valid = true;
  r.fit_message = "ok";
  return r;
}

}  // namespace roughvol
