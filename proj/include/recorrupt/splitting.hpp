#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "recorrupt/autodiff.hpp"
#include "recorrupt/noise.hpp"
#include "recorrupt/report.hpp"
#include "recorrupt/samplers.hpp"

namespace recorrupt {

enum class PgWeight { AsPrinted, Inverse };

struct SplitConfig {
  /// Splitting strength for the NEF, mask and Poisson-Gaussian rules.
  double alpha = 0.5;
  /// Recorruption strength for the additive and Poisson-Gaussian rules.
  double tau = 1.0;
  /// Law of omega for additive families; defaults to the model's own noise law.
  std::optional<DistSpec> aux;
  PgWeight pg_weight = PgWeight::AsPrinted;

  void validate() const;
};

struct RecorruptedPair {
  Tensor y1;
  Tensor y2;
  /// Per-pixel weight; empty when the rule has none.
  Tensor weight;
  double alpha = 0.0;
  double tau = 0.0;
  /// Split fraction actually realised (binomial rounds n * alpha to an integer draw count).
  double alpha_effective = 0.0;
  NoiseFamily family = NoiseFamily::Gaussian;

  bool has_weight() const { return !weight.empty(); }
};

/// Auxiliary variables of one split. omega1 is only used by the Poisson-Gaussian rule.
struct AuxDraw {
  Tensor omega;
  Tensor omega1;
};

/// round-half-to-even(n * alpha): number of draws of the binomial hypergeometric split.
std::int64_t binomial_draws(int n_trials, double alpha);

AuxDraw draw_aux(const Tensor& y, const NoiseModel& model, const SplitConfig& cfg, RngStream& rng);
/// Deterministic part of the split given the auxiliary draw.
RecorruptedPair assemble_pair(const Tensor& y, const NoiseModel& model, const SplitConfig& cfg, const AuxDraw& aux);
RecorruptedPair gr2r_pair(const Tensor& y, const NoiseModel& model, const SplitConfig& cfg, RngStream& rng);

/// Mean per-pixel GR2R loss of `prediction` = f(y1). With clamp the NLL losses
/// clip predictions into their domain; without it a domain violation throws.
Var gr2r_loss(Var prediction, const RecorruptedPair& pair, const NoiseModel& model, bool clamp = true);
double gr2r_loss(const Tensor& prediction, const RecorruptedPair& pair, const NoiseModel& model, bool clamp = false);

/// Empirical law of z2 given z1 + z2 = y when z1, z2 follow the NEF decomposition at x,
/// and its total-variation distance to the auxiliary law of the split.
struct ConditionalLaw {
  std::vector<double> pmf;
  std::vector<double> aux_pmf;
  double tv = 0.0;
  std::size_t accepted = 0;
};

ConditionalLaw conditional_split_law(const NoiseModel& model, double x, std::int64_t y_count, double alpha,
                                     std::size_t n_accept, RngStream& rng);
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

Report nef_split_validate(const NoiseModel& model, const std::vector<double>& x_grid, double alpha, std::size_t n_mc,
                          RngStream& rng);

struct ConditionSide {
  double lhs = 0.0, lhs_se = 0.0;
  double rhs = 0.0, rhs_se = 0.0;
  bool pass = false;
};

/// Additive moment-matching conditions, n = 1: E w^2 = E e^2 and
/// n = 3: E w^4 = E e^4 / tau^2 + 3 (E e^2)^2 (1 - 1/tau^2).
struct ConditionReport {
  ConditionSide n1;
  ConditionSide n3;
  bool asymmetric = false;
  std::vector<std::string> warnings;

  bool all_pass() const { return n1.pass && n3.pass; }
  Report as_report() const;
};

ConditionReport check_moment_conditions(const DistSpec& eps, const DistSpec& omega, double tau, std::size_t n_mc,
                                        RngStream& rng, bool force_mc = false);

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// Monte Carlo estimate of E[(e - w/tau) f(x + e + tau w)].
Estimate correlation_functional(const std::function<double(double)>& f, double x, const DistSpec& eps,
                                const DistSpec& omega, double tau, std::size_t n_mc, RngStream& rng);

struct SupervisedGap {
  /// Per-pixel E||f(y1) - y2||^2 - E||f(y1) - x||^2.
  Estimate gap;
  /// Per-pixel E||y2 - x||^2 from closed forms.
  double closed_form = 0.0;
};

SupervisedGap gr2r_supervised_gap(const std::function<Tensor(const Tensor&)>& f, const NoiseModel& model,
                                  const SplitConfig& cfg, const Tensor& x, std::size_t n_mc, RngStream& rng);

} // namespace recorrupt
