#pragma once

// Black-Scholes pricing and inversion, Monte Carlo smiles, ATM skew term
// structures, and the second-order Bergomi-Guyon implied-vol expansion for
// rBergomi and the two-factor Bergomi model. Zero rates throughout, S0 = 1
// unless stated.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "roughvol/sim_core.hpp"

namespace roughvol {

enum class OptionType { call, put };

/// Undiscounted Black-Scholes price. vol = 0 gives the intrinsic value.
/// Throws std::invalid_argument unless S0, K, T > 0 and vol >= 0.
double bs_price(double S0, double K, double T, double vol, OptionType type = OptionType::call);
/// dPrice/dvol (identical for calls and puts).
double bs_vega(double S0, double K, double T, double vol);

/// Raised when a price lies outside the open no-arbitrage interval.
class ImpliedVolBoundsError : public std::domain_error {
 public:
  enum class Bound { lower, upper };
  ImpliedVolBoundsError(Bound bound, double price, double limit);
  Bound bound() const noexcept { return bound_; }

 private:
  Bound bound_;
};

/// Bracketing bisection followed by a safeguarded Newton polish.
double implied_vol(double price, double S0, double K, double T,
                   OptionType type = OptionType::call);

struct SkippedStrike {
  double log_moneyness;
  std::string reason;
};

struct SmileResult {
  double maturity = 0.0;
  std::vector<double> log_moneyness;
  std::vector<double> strikes;
  std::vector<double> implied_vols;
  std::vector<double> prices;   // out-of-the-money option prices
  std::vector<double> stderrs;  // MC standard error of each price
  /// Delta-method covariance of the implied-vol estimates, row-major
  /// [strikes x strikes]; zero for deterministic smiles.
  std::vector<double> vol_covariance;
  std::vector<SkippedStrike> skipped;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  std::string model;

  std::size_t size() const noexcept { return log_moneyness.size(); }
  /// Standard error of implied_vols[i] - implied_vols[j].
  double vol_difference_stderr(std::size_t i, std::size_t j) const;
};

/// Uniform log-moneyness grid; default 21 points on [-0.2, 0.2].
std::vector<double> log_moneyness_grid(double k_min = -0.2, double k_max = 0.2,
                                       std::size_t count = 21);

/// Smile from terminal log-prices (S0 = 1). Puts are priced for k < 0 and calls
/// for k >= 0. Strikes whose payoffs are all zero or whose price falls outside
/// the no-arbitrage bounds are dropped and listed in `skipped`.
SmileResult mc_smile(const std::vector<double>& log_price_terminal,
                     const std::vector<double>& log_moneyness, double T);

/// Root-mean-square implied-vol difference. Throws std::invalid_argument on
/// mismatched maturities or strike grids.
double smile_rmse(const SmileResult& a, const SmileResult& b);

/// Both smiles restricted to the strikes present in each. Strikes dropped from
/// either side are appended to its `skipped` list.
std::pair<SmileResult, SmileResult> common_strikes(const SmileResult& a, const SmileResult& b);

/// Multiplies every implied vol (and its covariance) by m.
SmileResult scale_smile(SmileResult s, double m);

struct SkewReport {
  std::vector<double> maturities;
  std::vector<double> psi;             // |sigma(+dk) - sigma(-dk)| / (2 dk)
  std::vector<double> psi_stderr;
  std::vector<double> psi_half;        // same with dk / 2
  std::vector<double> psi_richardson;  // (4 psi_half - psi) / 3
  std::vector<bool> flagged;           // excluded from the fit
  double bump = 0.01;
  bool fit_valid = false;
  std::string fit_message;
  double exponent = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of the log-log fit residuals
};

using SmileFunction = std::function<SmileResult(double T, const std::vector<double>& log_moneyness)>;

/// Central-difference ATM skew per maturity and a least-squares fit of log psi
/// on log T. A maturity is flagged when psi <= 0 or psi is within three standard
/// errors of zero. The fit needs at least three unflagged maturities.
SkewReport atm_skew(const SmileFunction& smile_fn, const std::vector<double>& maturities,
                    double bump = 0.01);

struct HelperValues {
  double I, J, K, H;
};
/// I(z) = (1-e^-z)/z, J(z) = (z-1+e^-z)/z^2, K(z) = (1-e^-z-z e^-z)/z^2,
/// H(z) = (J-K)/z; series expansions below z = 1e-4.
HelperValues helper_functions(double z);

struct ExpansionCoeffs {
  double c_x_xi = 0.0;   // C^{X xi}
  double c_xi_xi = 0.0;  // C^{xi xi}
  double c_mu = 0.0;     // C^mu
};

struct TwoFactorParams {
  double omega = 1.0;
  double theta = 0.5;
  double kappa_x = 4.0;
  double kappa_y = 0.5;
  double rho_sx = -0.7;
  double rho_sy = -0.5;
  double rho_xy = 0.3;

  void validate() const;
  double alpha_theta() const;
  double chi() const;
  /// Loadings on the three independent Brownian motions.
  std::array<double, 3> omega_x() const;
  std::array<double, 3> omega_y() const;
};

ExpansionCoeffs two_factor_coeffs(const TwoFactorParams& p, double T, double xi0);

/// C1 (k_x T - 1 + e^{-k_x T}) / T^2 + C2 (k_y T - 1 + e^{-k_y T}) / T^2 with
/// C1 = a_theta w w_1X / (2 k_x^2), C2 = a_theta w w_1Y / (2 k_y^2). Signed; the
/// ATM skew is its absolute value.
double two_factor_skew_shape(const TwoFactorParams& p, double T);
double two_factor_shape_constant_x(const TwoFactorParams& p);
double two_factor_shape_constant_y(const TwoFactorParams& p);

/// rBergomi autocorrelation functionals by adaptive quadrature of their defining
/// integrals under a flat curve.
ExpansionCoeffs rbergomi_expansion_coeffs(const ModelParams& params, double T,
                                          double tolerance = 1e-12);
/// C_H xi0^{3/2} T^{H+3/2} with C_H = rho eta sqrt(2H) / ((a+1)(a+2)).
double rbergomi_c_x_xi_closed_form(const ModelParams& params, double T);

struct ExpansionTerms {
  double sigma_vs;   // sqrt(v / T)
  double sigma_atm;
  double skew;       // S_T
  double curvature;  // C_T
};
ExpansionTerms expansion_terms(const ExpansionCoeffs& c, double v, double T, double epsilon = 1.0);

/// sigma_atm + S_T k + C_T k^2
double sigma_bs_expansion(const ExpansionCoeffs& c, double v, double T, double k,
                          double epsilon = 1.0);

}  // namespace roughvol
