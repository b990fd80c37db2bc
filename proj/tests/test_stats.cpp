#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "modlab/errors.hpp"
#include "modlab/stats/stats.hpp"

using namespace modlab;
using namespace modlab::stats;

namespace {

const SeedSet kBase = SeedSet::from_values("baseline", {0.4820, 0.4815, 0.4853});
const SeedSet kSoftpick = SeedSet::from_values("softpick", {0.4922, 0.4905, 0.4931});

double tail2(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

struct Printed {
  std::string method;
  double climb;
  double z;
};

std::vector<Printed> printed_columns() {
  std::ifstream in(std::string(MODLAB_TEST_DATA) + "/published/printed_columns.csv");
  std::string line;
  std::getline(in, line);
  std::vector<Printed> rows;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    Printed p;
    std::string a, b;
    std::getline(ss, p.method, ',');
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    p.climb = std::stod(a);
    p.z = std::stod(b);
    rows.push_back(p);
  }
  return rows;
}

std::set<std::size_t> rejected(const std::vector<Decision>& d) {
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i].reject) out.insert(i);
  }
  return out;
}

// Step-up BH written from the definition: reject the k smallest where k is the
// largest rank with p_(k) <= k q / m.
std::set<std::size_t> bh_oracle(const std::vector<double>& p, double q) {
  std::vector<std::size_t> idx(p.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::size_t k = 0;
  for (std::size_t r = 1; r <= p.size(); ++r) {
    if (p[idx[r - 1]] <= static_cast<double>(r) * q / static_cast<double>(p.size())) k = r;
  }
  return {idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k)};
}

}  // namespace

// ---- noise floor ----------------------------------------------------------

TEST(SampleStd, SeedFloors) {
  EXPECT_NEAR(sample_std(kBase.values), 0.00208, 2e-5);
  EXPECT_NEAR(sample_std(kSoftpick.values), 0.00133, 2e-5);
  const std::vector<double> same{0.5, 0.5, 0.5};
  EXPECT_EQ(sample_std(same), 0.0);
  const std::vector<double> one{0.5};
  EXPECT_THROW(sample_std(one), ContractError);
}

TEST(ZScore, PublishedValues) {
  EXPECT_NEAR(zscore(0.4922, kBase), 4.47, 0.05);
  // Unrounded mean and sigma put sigmoid at -78.09; the printed -77.68 came
  // from a rounded sigma, so only a relative bound holds here.
  const double mu = (0.4820 + 0.4815 + 0.4853) / 3.0;
  const double sd = std::sqrt((std::pow(0.4820 - mu, 2) + std::pow(0.4815 - mu, 2) + std::pow(0.4853 - mu, 2)) / 2.0);
  EXPECT_NEAR(zscore(0.3217, kBase), (0.3217 - mu) / sd, 1e-9);
  EXPECT_NEAR(zscore(0.3217, kBase), -77.68, 0.006 * 77.68);
  EXPECT_NEAR(zscore(mean(kBase.values), kBase), 0.0, 1e-12);
  EXPECT_THROW(zscore(0.5, SeedSet::from_values("c", {0.4, 0.4, 0.4})), ContractError);
  EXPECT_THROW(zscore(0.5, SeedSet::from_values("c", {0.4})), ContractError);
}

TEST(ZScore, EveryPrintedZWithinRounding) {
  for (const auto& r : printed_columns()) {
    // The printed column divides by a rounded sigma; the gap grows with |z|.
    const double tol = 0.05 + 0.006 * std::fabs(r.z);
    EXPECT_NEAR(zscore(r.climb, kBase), r.z, tol) << r.method;
  }
}

TEST(SeedSet, Validation) {
  SeedSet s{"m", {42, 42}, {0.1, 0.2}, {}};
  EXPECT_THROW(s.validate(), ContractError);
  SeedSet t{"m", {42}, {0.1, 0.2}, {}};
  EXPECT_THROW(t.validate(), ContractError);
  SeedSet e{"m", {}, {}, {}};
  EXPECT_THROW(e.validate(), ContractError);
}

// ---- bootstrap ------------------------------------------------------------

TEST(Bootstrap, SoftpickNeverBelowFloor) {
  const auto r = bootstrap_floor(kBase, kSoftpick, 10000, 0);
  EXPECT_EQ(r.p_leq, 0.0);
  EXPECT_EQ(r.resamples, 10000u);
  EXPECT_LE(r.floor_ci.lo, r.floor_ci.hi);
  EXPECT_GT(r.other_ci.lo, r.floor_ci.hi);
}

TEST(Bootstrap, FloorAgainstItselfIsAboutHalf) {
  EXPECT_NEAR(bootstrap_floor(kBase, kBase, 10000, 0).p_leq, 0.5, 0.05);
}

TEST(Bootstrap, ConstantFloorHasDegenerateInterval) {
  const auto c = SeedSet::from_values("c", {0.47, 0.47, 0.47});
  const auto r = bootstrap_floor(c, kSoftpick, 1000, 3);
  EXPECT_EQ(r.floor_ci.lo, 0.47);
  EXPECT_EQ(r.floor_ci.hi, 0.47);
}

TEST(Bootstrap, BitReproducibleForSeedAndDependsOnIt) {
  const auto a = bootstrap_floor(kBase, kBase, 2000, 7);
  const auto b = bootstrap_floor(kBase, kBase, 2000, 7);
  const auto c = bootstrap_floor(kBase, kBase, 2000, 8);
  EXPECT_EQ(a.p_leq, b.p_leq);
  EXPECT_EQ(a.floor_ci.lo, b.floor_ci.lo);
  EXPECT_EQ(a.other_ci.hi, b.other_ci.hi);
  EXPECT_NE(a.p_leq, c.p_leq);
}

TEST(Bootstrap, RejectsTooFewResamples) { EXPECT_THROW(bootstrap_floor(kBase, kBase, 999, 0), ContractError); }

// ---- Welch ----------------------------------------------------------------

TEST(Welch, SoftpickAgainstBaseline) {
  const auto w = welch_t(kSoftpick, kBase);
  EXPECT_NEAR(w.t, 6.36, 0.05);
  EXPECT_NEAR(w.p, 0.0053, 0.001);
  // Satterthwaite df from the formula.
  const double va = std::pow(sample_std(kSoftpick.values), 2) / 3, vb = std::pow(sample_std(kBase.values), 2) / 3;
  EXPECT_NEAR(w.df, (va + vb) * (va + vb) / (va * va / 2 + vb * vb / 2), 1e-9);
}

TEST(Welch, IdenticalAndSeparatedSets) {
  const auto same = welch_t(kBase, kBase);
  EXPECT_EQ(same.t, 0.0);
  EXPECT_NEAR(same.p, 1.0, 1e-12);
  const std::vector<double> a{0, 0, 0}, b{1, 1 + 1e-6, 1 - 1e-6};
  EXPECT_GT(std::fabs(welch_t(a, b).t), 100.0);
  const std::vector<double> c{1, 1, 1};
  EXPECT_THROW(welch_t(a, c), ContractError);
}

TEST(Welch, SignFollowsMeanDifference) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(3), b(4);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng) + 0.3;
    const double d = mean(a) - mean(b);
    const auto w = welch_t(a, b);
    EXPECT_EQ(std::signbit(w.t), std::signbit(d));
    EXPECT_GE(w.p, 0.0);
    EXPECT_LE(w.p, 1.0);
  }
}

// ---- corrections ----------------------------------------------------------

TEST(Correction, PublishedBonferroniValues) {
  const std::vector<double> p{tail2(4.47), tail2(3.19), tail2(0.5)};
  const auto d = correct_multiplicity(p, Correction::bonferroni, 0.05, 19);
  EXPECT_NEAR(d[0].p_adjusted, 1.5e-4, 0.05e-4);
  EXPECT_NEAR(d[1].p_adjusted, 0.027, 0.0005);
  EXPECT_EQ(d[2].p_adjusted, 1.0);
  const std::vector<double> edge{0.0527};
  EXPECT_EQ(correct_multiplicity(edge, Correction::bonferroni, 0.05, 19)[0].p_adjusted, 1.0);
  EXPECT_THROW(correct_multiplicity(p, Correction::bonferroni, 0.05, 2), ContractError);
}

TEST(Correction, PrintedZColumnFamilies) {
  const auto rows = printed_columns();
  ASSERT_EQ(rows.size(), 19u);
  std::vector<double> p;
  for (const auto& r : rows) p.push_back(tail2(r.z));
  auto names = [&](const std::set<std::size_t>& s) {
    std::set<std::string> out;
    for (auto i : s) out.insert(rows[i].method);
    return out;
  };
  const std::set<std::string> strict{"softpick", "hybrid_norm", "layerscale", "hyper",
                                     "attnres",  "ssmax",       "sigmoid_attn"};
  EXPECT_EQ(names(rejected(correct_multiplicity(p, Correction::bonferroni))), strict);
  EXPECT_EQ(names(rejected(correct_multiplicity(p, Correction::holm))), strict);
  const auto bh = names(rejected(correct_multiplicity(p, Correction::bh)));
  for (const char* m : {"qknorm", "sandwich_norm", "relu_squared", "diff_attn"}) EXPECT_TRUE(bh.count(m)) << m;
  EXPECT_EQ(bh, names(bh_oracle(p, 0.05)));
}

TEST(Correction, NestingOnRandomFamilies) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + trial % 25;
    std::vector<double> p(n);
    // Mix of tiny and ordinary p-values so every procedure has work to do.
    for (auto& x : p) x = u(rng) < 0.4 ? std::pow(u(rng), 6) : u(rng);
    const auto b = rejected(correct_multiplicity(p, Correction::bonferroni));
    const auto h = rejected(correct_multiplicity(p, Correction::holm));
    const auto q = rejected(correct_multiplicity(p, Correction::bh));
    EXPECT_TRUE(std::includes(h.begin(), h.end(), b.begin(), b.end()));
    EXPECT_TRUE(std::includes(q.begin(), q.end(), h.begin(), h.end()));
    EXPECT_EQ(q, bh_oracle(p, 0.05));
    for (const auto& d : correct_multiplicity(p, Correction::holm)) {
      EXPECT_GE(d.p_adjusted, d.p_raw);
      EXPECT_LE(d.p_adjusted, 1.0);
    }
  }
}

// ---- Stouffer ---------------------------------------------------------------

TEST(Stouffer, ClosedForms) {
  const std::vector<double> half(12, 0.5);
  const auto z0 = stouffer_combine(half);
  EXPECT_EQ(z0.z, 0.0);
  EXPECT_NEAR(z0.p, 0.5, 1e-15);
  // One sigma each: Phi^-1(1 - 0.158655...) = 1.
  const double one_sigma = 0.5 * std::erfc(1.0 / std::sqrt(2.0));
  EXPECT_NEAR(stouffer_combine(std::vector<double>(12, one_sigma)).z, std::sqrt(12.0), 1e-9);
  EXPECT_NEAR(stouffer_combine(std::vector<double>(12, 0.1587)).z, std::sqrt(12.0), 2e-3);
  std::vector<double> mixed(6, 0.5 * std::erfc(2.0 / std::sqrt(2.0)));
  mixed.resize(12, 0.5);
  EXPECT_NEAR(stouffer_combine(mixed).z, 12.0 / std::sqrt(12.0), 1e-9);
}

TEST(Stouffer, ClampsBoundaryValues) {
  std::vector<double> p(12, 0.5);
  EXPECT_FALSE(stouffer_combine(p).clamped);
  p[0] = 0.0;
  const auto r = stouffer_combine(p);
  EXPECT_TRUE(r.clamped);
  EXPECT_TRUE(std::isfinite(r.z));
  p[0] = 1.0;
  EXPECT_TRUE(stouffer_combine(p).clamped);
  EXPECT_TRUE(std::isfinite(stouffer_combine(p).z));
}

TEST(Stouffer, MonotoneDecreasingInEachInput) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(12);
    for (auto& x : p) x = u(rng);
    const double z = stouffer_combine(p).z;
    const std::size_t i = trial % 12;
    p[i] = std::min(0.999, p[i] + 0.005);
    EXPECT_LT(stouffer_combine(p).z, z);
  }
}

// ---- Spearman ---------------------------------------------------------------

TEST(Spearman, OrderingsAndTies) {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{10, 20, 30, 40, 50}, c{5, 4, 3, 2, 1};
  EXPECT_NEAR(spearman_rho(a, b), 1.0, 1e-15);
  EXPECT_NEAR(spearman_rho(a, c), -1.0, 1e-15);
  const std::vector<double> t{1, 2, 2, 3};
  EXPECT_EQ(average_ranks(t), (std::vector<double>{1, 2.5, 2.5, 4}));
  const std::vector<double> one{1};
  EXPECT_THROW(spearman_rho(one, one), ContractError);
  EXPECT_THROW(spearman_rho(a, t), ContractError);
}

TEST(Spearman, UntiedMatchesRankDifferenceFormula) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + trial % 10;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = u(rng);
      b[i] = u(rng);
    }
    const auto ra = average_ranks(a), rb = average_ranks(b);
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
    const double nn = static_cast<double>(n);
    EXPECT_NEAR(spearman_rho(a, b), 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0)), 1e-12);
  }
}

// ---- properties of z ----------------------------------------------------------

TEST(ZScore, TranslationAndScaleInvariance) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.48, 0.01);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(3);
    for (auto& x : v) x = n(rng);
    const double x = n(rng);
    const double z = zscore(x, SeedSet::from_values("f", v));
    const double c = n(rng) * 10.0, k = 0.1 + std::fabs(n(rng)) * 20.0;
    std::vector<double> shifted = v, scaled = v;
    for (auto& y : shifted) y += c;
    for (auto& y : scaled) y *= k;
    EXPECT_NEAR(zscore(x + c, SeedSet::from_values("f", shifted)), z, 1e-6 * (1 + std::fabs(z)));
    EXPECT_NEAR(zscore(x * k, SeedSet::from_values("f", scaled)), z, 1e-9 * (1 + std::fabs(z)));
  }
}

// ---- protocol table ---------------------------------------------------------

TEST(Reports, FloorRowUntestedAndColumnsConsistent) {
  std::vector<SeedSet> methods{kSoftpick, SeedSet::from_values("sigmoid_attn", {0.3217}), kBase};
  ProtocolOptions opt;
  opt.bootstrap_resamples = 1000;
  const auto reps = build_reports(kBase, methods, opt);
  ASSERT_EQ(reps.size(), 3u);
  // The floor's own row is listed but never tested.
  EXPECT_EQ(reps[2].method, "baseline");
  EXPECT_FALSE(reps[2].bonf_significant);
  EXPECT_FALSE(reps[2].welch.has_value());
  for (int i = 0; i < 2; ++i) {
    const auto& r = reps[i];
    EXPECT_NEAR(r.z, r.delta / sample_std(kBase.values), 1e-12);
    EXPECT_NEAR(r.p_raw, tail2(r.z), 1e-15);
    EXPECT_EQ(r.p_bonf, std::min(1.0, 19.0 * r.p_raw));
  }
  EXPECT_TRUE(reps[0].welch.has_value());
  EXPECT_TRUE(reps[0].bootstrap_ci.has_value());
  EXPECT_FALSE(reps[1].welch.has_value());
}
