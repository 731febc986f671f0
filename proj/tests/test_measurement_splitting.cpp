#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/hypergeometric.hpp>
#include <cmath>
#include <stdexcept>

#include "recorrupt/splitting.hpp"

using namespace recorrupt;

namespace {

AuxDraw aux_of(double omega, double omega1 = 0.0) {
  return {Tensor(Shape{1}, omega), Tensor(Shape{1}, omega1)};
}

double loss_at(double c, double y2, const NoiseModel& m) {
  RecorruptedPair p;
  p.y1 = Tensor(Shape{1}, y2);
  p.y2 = Tensor(Shape{1}, y2);
  return gr2r_loss(Tensor(Shape{1}, c), p, m);
}

} // namespace

TEST_CASE("pair formulas") {
  SUBCASE("additive gaussian") {
    SplitConfig cfg;
    cfg.tau = 2.0;
    const RecorruptedPair p = assemble_pair(Tensor(Shape{1}, 1.0), NoiseModel::gaussian(0.1), cfg, aux_of(0.5));
    CHECK(p.y1[0] == 2.0);
    CHECK(p.y2[0] == 0.75);
  }
  SUBCASE("poisson counts") {
    SplitConfig cfg;
    cfg.alpha = 0.4;
    const RecorruptedPair p = assemble_pair(Tensor(Shape{1}, 5.0), NoiseModel::poisson(1.0), cfg, aux_of(2.0));
    CHECK(p.y1[0] == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(p.y2[0] == doctest::Approx(5.0).epsilon(1e-15));
  }
  SUBCASE("poisson in image units scales by gamma") {
    SplitConfig cfg;
    cfg.alpha = 0.4;
    const RecorruptedPair p = assemble_pair(Tensor(Shape{1}, 0.5), NoiseModel::poisson(0.1), cfg, aux_of(2.0));
    CHECK(p.y1[0] == doctest::Approx(0.1 * 3.0 / 0.6));
    CHECK(p.y2[0] == doctest::Approx(0.1 * 2.0 / 0.4));
  }
  SUBCASE("gamma symmetric split point") {
    SplitConfig cfg;
    cfg.alpha = 0.5;
    const RecorruptedPair p = assemble_pair(Tensor(Shape{1}, 2.0), NoiseModel::gamma_noise(3.0), cfg, aux_of(0.5));
    CHECK(p.y1[0] == 2.0);
    CHECK(p.y2[0] == 2.0);
  }
  SUBCASE("bernoulli mask keeps y1 and weights kept pixels") {
    SplitConfig cfg;
    cfg.alpha = 0.25;
    const Tensor y(Shape{2}, std::vector<double>{0.4, 0.6});
    const AuxDraw a{Tensor(Shape{2}, std::vector<double>{1.0, 0.0}), Tensor()};
    const RecorruptedPair p = assemble_pair(y, NoiseModel::bernoulli_mask(0.5), cfg, a);
    CHECK(p.y1[0] == 0.4);
    CHECK(p.y2[0] == 0.0);
    CHECK(p.y2[1] == doctest::Approx(0.6 / 0.75));
    CHECK(p.weight[0] == 0.0);
    CHECK(p.weight[1] == 1.0);
  }
  SUBCASE("poisson-gaussian") {
    SplitConfig cfg;
    cfg.alpha = 0.5;
    cfg.tau = 0.5;
    const NoiseModel m = NoiseModel::poisson_gaussian(0.1, 0.02);
    // y = 0.73 rounds to 7 counts.
    const RecorruptedPair p = assemble_pair(Tensor(Shape{1}, 0.73), m, cfg, aux_of(3.0, 0.01));
    CHECK(p.y1[0] == doctest::Approx(0.1 * 4.0 / 0.5 + 0.5 * 0.01));
    CHECK(p.y2[0] == doctest::Approx(0.1 * 3.0 / 0.5 - 0.01 / 0.5));
    CHECK(p.weight[0] == doctest::Approx(0.1 * p.y2[0] + (1.0 + 4.0) * 4e-4));
  }
}

TEST_CASE("invalid split settings") {
  RngStream rng;
  const Tensor y(Shape{3}, 0.5);
  SplitConfig cfg;
  cfg.alpha = 1.0;
  CHECK_THROWS(gr2r_pair(y, NoiseModel::poisson(0.1), cfg, rng));
  cfg.alpha = 0.0;
  CHECK_THROWS(gr2r_pair(y, NoiseModel::gamma_noise(2.0), cfg, rng));
  cfg.alpha = 0.5;
  cfg.tau = -1.0;
  CHECK_THROWS(gr2r_pair(y, NoiseModel::gaussian(0.1), cfg, rng));
  cfg.tau = 1.0;
  CHECK_THROWS(gr2r_pair(Tensor(Shape{2}, -1.0), NoiseModel::poisson(1.0), cfg, rng));
}

TEST_CASE("NEF pairs reassemble y exactly") {
  RngStream rng(6);
  Tensor x(Shape{1, 1, 16, 16});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.1 + 0.8 * double(i) / double(x.size());
  SplitConfig cfg;
  cfg.alpha = 0.3;
  for (const NoiseModel& m : {NoiseModel::poisson(0.05), NoiseModel::gamma_noise(4.0), NoiseModel::binomial(10)}) {
    const Tensor y = corrupt(x, m, rng);
    const RecorruptedPair p = gr2r_pair(y, m, cfg, rng);
    const double a = p.alpha_effective;
    for (std::size_t i = 0; i < y.size(); ++i)
      CHECK(std::abs((1 - a) * p.y1[i] + a * p.y2[i] - y[i]) <= 1e-12 * std::max(1.0, std::abs(y[i])));
  }
  CHECK(binomial_draws(10, 0.25) == 2);
  CHECK(binomial_draws(10, 0.35) == 4);
  CHECK(binomial_draws(16, 0.5) == 8);
}

TEST_CASE("gr2r losses") {
  SUBCASE("additive perfect fit is zero") {
    RecorruptedPair p;
    p.y2 = Tensor(Shape{3}, std::vector<double>{0.1, 0.2, 0.3});
    CHECK(gr2r_loss(p.y2, p, NoiseModel::gaussian(0.1)) == 0.0);
  }
  SUBCASE("poisson at c = y2 = 2") {
    CHECK(loss_at(2.0, 2.0, NoiseModel::poisson(1.0)) == doctest::Approx(2.0 - 2.0 * std::log(2.0)).epsilon(1e-14));
    CHECK(loss_at(2.0, 2.0, NoiseModel::poisson(1.0)) == doctest::Approx(0.6137).epsilon(1e-4));
    CHECK(loss_at(1.9, 2.0, NoiseModel::poisson(1.0)) > loss_at(2.0, 2.0, NoiseModel::poisson(1.0)));
    CHECK(loss_at(2.1, 2.0, NoiseModel::poisson(1.0)) > loss_at(2.0, 2.0, NoiseModel::poisson(1.0)));
  }
  SUBCASE("gamma minimized at c = y2") {
    const NoiseModel m = NoiseModel::gamma_noise(2.0);
    CHECK(loss_at(3.0, 3.0, m) == doctest::Approx(std::log(3.0) + 1.0));
    for (double d : {1e-3, 0.1, 1.0}) {
      CHECK(loss_at(3.0 - d, 3.0, m) > loss_at(3.0, 3.0, m));
      CHECK(loss_at(3.0 + d, 3.0, m) > loss_at(3.0, 3.0, m));
    }
  }
  SUBCASE("binomial minimized at c = y2") {
    const NoiseModel m = NoiseModel::binomial(8);
    CHECK(loss_at(0.25, 0.25, m) < loss_at(0.2, 0.25, m));
    CHECK(loss_at(0.25, 0.25, m) < loss_at(0.3, 0.25, m));
  }
  SUBCASE("domain violations without clamping") {
    RecorruptedPair p;
    p.y2 = Tensor(Shape{3}, 1.0);
    CHECK_THROWS_AS(gr2r_loss(Tensor(Shape{3}, std::vector<double>{1.0, -1.0, 0.0}), p, NoiseModel::poisson(1.0), false),
                    std::domain_error);
    CHECK_THROWS_AS(gr2r_loss(Tensor(Shape{3}, 1.0), p, NoiseModel::binomial(4), false), std::domain_error);
  }
}

TEST_CASE("nef_split_validate") {
  SUBCASE("gaussian variance ratios and independence") {
    RngStream rng(8);
    const Report r = nef_split_validate(NoiseModel::gaussian(0.1), {0.5}, 0.5, 1000000, rng);
    CHECK(r.all_pass());
    for (const ReportRow& row : r.rows) {
      if (row.name.rfind("var_ratio", 0) == 0) CHECK(std::abs(row.value - 2.0) < 0.04);
      if (row.name.rfind("corr", 0) == 0) CHECK(std::abs(row.value) < 0.01);
    }
  }
  SUBCASE("non-NEF family is rejected") {
    RngStream rng;
    CHECK_THROWS(nef_split_validate(NoiseModel::laplace(0.1), {0.5}, 0.5, 100000, rng));
  }
}

TEST_CASE("conditional law of z2 given y is the auxiliary law") {
  RngStream rng(12);
  SUBCASE("poisson y = 6, alpha = 0.25 against Bin(6, 0.25)") {
    const ConditionalLaw law = conditional_split_law(NoiseModel::poisson(0.1), 0.6, 6, 0.25, 200000, rng);
    boost::math::binomial_distribution<double> bin(6, 0.25);
    std::vector<double> exact(7);
    for (int k = 0; k <= 6; ++k) exact[k] = boost::math::pdf(bin, k);
    CHECK(total_variation(law.pmf, exact) < 0.01);
    // The x used to generate z1, z2 does not matter.
    const ConditionalLaw other = conditional_split_law(NoiseModel::poisson(0.1), 0.3, 6, 0.25, 200000, rng);
    CHECK(total_variation(other.pmf, exact) < 0.01);
  }
  SUBCASE("binomial against the hypergeometric law") {
    const NoiseModel m = NoiseModel::binomial(12);
    const ConditionalLaw law = conditional_split_law(m, 0.4, 5, 0.25, 200000, rng);
    boost::math::hypergeometric_distribution<double> hyp(5, 3, 12);
    std::vector<double> exact(6, 0.0);
    for (int k = 0; k <= 3; ++k) exact[k] = boost::math::pdf(hyp, k);
    CHECK(total_variation(law.pmf, exact) < 0.01);
  }
}

TEST_CASE("moment conditions") {
  RngStream rng(14);
  const double s = 0.1;
  SUBCASE("gaussian pair at tau = 1") {
    const ConditionReport c = check_moment_conditions(DistSpec::normal(0, s), DistSpec::normal(0, s), 1.0, 100000, rng);
    CHECK(c.all_pass());
    CHECK(c.n3.lhs == doctest::Approx(3 * std::pow(s, 4)));
    CHECK(c.n3.rhs == doctest::Approx(3 * std::pow(s, 4)));
  }
  SUBCASE("laplace noise against a gaussian omega") {
    const ConditionReport c =
        check_moment_conditions(DistSpec::laplace(0, s / std::sqrt(2.0)), DistSpec::normal(0, s), 1.0, 100000, rng);
    CHECK(c.n1.pass);
    CHECK_FALSE(c.n3.pass);
    CHECK(c.n3.lhs == doctest::Approx(3 * std::pow(s, 4)));
    CHECK(c.n3.rhs == doctest::Approx(6 * std::pow(s, 4)));
  }
  SUBCASE("identical laws pass at tau = 1") {
    for (const DistSpec& d : {DistSpec::laplace(0, 0.3), DistSpec::rademacher(), DistSpec::normal(0, 2.0)})
      CHECK(check_moment_conditions(d, d, 1.0, 100000, rng).all_pass());
  }
  SUBCASE("monte carlo path agrees with the closed forms") {
    const ConditionReport c =
        check_moment_conditions(DistSpec::laplace(0, s / std::sqrt(2.0)), DistSpec::normal(0, s), 1.0, 1000000, rng, true);
    CHECK(c.n1.pass);
    CHECK_FALSE(c.n3.pass);
    CHECK(std::abs(c.n3.rhs - 6 * std::pow(s, 4)) < 4 * c.n3.rhs_se);
  }
  SUBCASE("gaussian pair away from tau = 1") {
    // E w^4 = 3 s^4 for any tau; RHS = 3 s^4 / tau^2 + 3 s^4 (1 - 1 / tau^2) = 3 s^4.
    const ConditionReport c = check_moment_conditions(DistSpec::normal(0, s), DistSpec::normal(0, s), 0.5, 100000, rng);
    CHECK(c.all_pass());
  }
  SUBCASE("asymmetric law raises a flag") {
    const ConditionReport c = check_moment_conditions(DistSpec::gamma(2.0, 1.0), DistSpec::normal(0, 1), 1.0, 100000, rng);
    CHECK(c.asymmetric);
    CHECK_FALSE(c.warnings.empty());
  }
}

TEST_CASE("correlation functional") {
  RngStream rng(15);
  const DistSpec lap = DistSpec::laplace(0, 1.0 / std::sqrt(2.0)), gau = DistSpec::normal(0, 1);
  SUBCASE("constant f") {
    const Estimate e = correlation_functional([](double) { return 3.0; }, 0.2, lap, gau, 1.0, 100000, rng);
    CHECK(std::abs(e.value) < 4 * e.se);
  }
  SUBCASE("linear f with matched variances") {
    const Estimate e = correlation_functional([](double u) { return 2 * u - 1; }, 0.2, lap, gau, 1.0, 200000, rng);
    CHECK(std::abs(e.value) < 4 * e.se);
  }
  SUBCASE("cubic f sees the fourth-moment mismatch") {
    // E[(e - w)(e + w)^3] = E e^4 - E w^4 = 6 - 3 for unit variances.
    const Estimate e = correlation_functional([](double u) { return u * u * u; }, 0.0, lap, gau, 1.0, 1000000, rng);
    CHECK(std::abs(e.value - 3.0) < 4 * e.se);
  }
}

TEST_CASE("GR2R loss equals the supervised loss plus a constant") {
  RngStream rng(16);
  Tensor x(Shape{1, 1, 4, 4});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.2 + 0.04 * double(i);
  auto f = [](const Tensor& t) { return map(t, [](double v) { return 0.5 * v + 0.1; }); };
  SUBCASE("gaussian") {
    SplitConfig cfg;
    cfg.tau = 0.5;
    const SupervisedGap g = gr2r_supervised_gap(f, NoiseModel::gaussian(0.1), cfg, x, 20000, rng);
    CHECK(g.closed_form == doctest::Approx(0.01 * (1 + 4)));
    CHECK(std::abs(g.gap.value - g.closed_form) < 4 * g.gap.se);
  }
  SUBCASE("poisson") {
    SplitConfig cfg;
    cfg.alpha = 0.5;
    const SupervisedGap g = gr2r_supervised_gap(f, NoiseModel::poisson(0.05), cfg, x, 20000, rng);
    CHECK(std::abs(g.gap.value - g.closed_form) < 4 * g.gap.se);
  }
}
