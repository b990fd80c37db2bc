#include "modlab/stats/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "modlab/errors.hpp"
#include "modlab/random.hpp"

namespace modlab::stats {

namespace {

const boost::math::normal kStdNormal(0.0, 1.0);

double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= s.size()) return s.back();
  const double frac = pos - static_cast<double>(i);
  return s[i] + frac * (s[i + 1] - s[i]);
}

double variance(std::span<const double> xs) {
  // Identical values: the rounded mean would leave a spurious residue.
  if (std::adjacent_find(xs.begin(), xs.end(), std::not_equal_to<>()) == xs.end()) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

void SeedSet::validate() const {
  if (values.empty()) throw ContractError("seed set for " + method + " is empty");
  if (seeds.size() != values.size()) throw ContractError("seed set for " + method + ": seed ids and values differ in length");
  std::set<int> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw ContractError("seed set for " + method + " repeats a seed id");
  for (const auto& [task, accs] : per_task) {
    if (accs.size() != values.size()) throw ContractError("seed set for " + method + ": task " + task + " misaligned");
  }
}

SeedSet SeedSet::from_values(std::string method, std::vector<double> values, int first_seed) {
  SeedSet s;
  s.method = std::move(method);
  s.values = std::move(values);
  s.seeds.resize(s.values.size());
  std::iota(s.seeds.begin(), s.seeds.end(), first_seed);
  return s;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw ContractError("mean of an empty list");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) throw ContractError("sample_std needs at least two values, got " + std::to_string(xs.size()));
  return std::sqrt(variance(xs));
}

double zscore(double x, const SeedSet& floor) {
  floor.validate();
  const double sd = sample_std(floor.values);
  if (sd == 0.0) throw ContractError("noise floor " + floor.method + " has zero standard deviation");
  return (x - mean(floor.values)) / sd;
}

double normal_two_sided_p(double z) { return 2.0 * boost::math::cdf(boost::math::complement(kStdNormal, std::fabs(z))); }

BootstrapResult bootstrap_floor(const SeedSet& floor, const SeedSet& other, std::size_t n, std::uint64_t rng_seed) {
  floor.validate();
  other.validate();
  if (n < 1000) throw ContractError("bootstrap needs at least 1000 resamples");
  std::mt19937_64 rng(rng_seed);
  std::vector<double> fm(n), om(n);
  std::size_t less = 0, ties = 0;
  auto resample = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += v[uniform_index(rng, v.size())];
    return s / static_cast<double>(v.size());
  };
  for (std::size_t b = 0; b < n; ++b) {
    fm[b] = resample(floor.values);
    om[b] = resample(other.values);
    const double tol = 1e-12 * std::max({1.0, std::fabs(fm[b]), std::fabs(om[b])});
    if (std::fabs(om[b] - fm[b]) <= tol) {
      ++ties;
    } else if (om[b] < fm[b]) {
      ++less;
    }
  }
  BootstrapResult r;
  r.resamples = n;
  r.rng_seed = rng_seed;
  r.p_leq = (static_cast<double>(less) + 0.5 * static_cast<double>(ties)) / static_cast<double>(n);
  std::sort(fm.begin(), fm.end());
  std::sort(om.begin(), om.end());
  r.floor_ci = {quantile_sorted(fm, 0.025), quantile_sorted(fm, 0.975)};
  r.other_ci = {quantile_sorted(om, 0.025), quantile_sorted(om, 0.975)};
  return r;
}

WelchResult welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ContractError("welch_t needs at least two values per group");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = variance(a) / na, vb = variance(b) / nb;
  const double se2 = va + vb;
  if (se2 == 0.0) throw ContractError("welch_t: both groups have zero variance");
  WelchResult r;
  r.t = (mean(a) - mean(b)) / std::sqrt(se2);
  r.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t))));
  return r;
}

WelchResult welch_t(const SeedSet& a, const SeedSet& b) { return welch_t(a.values, b.values); }

std::vector<Decision> correct_multiplicity(std::span<const double> p_raw, Correction scheme, double alpha,
                                           std::optional<std::size_t> m_opt) {
  const std::size_t k = p_raw.size();
  const std::size_t m = m_opt.value_or(k);
  if (m < k) throw ContractError("family size smaller than the number of p-values");
  for (double p : p_raw) {
    if (!(p >= 0.0 && p <= 1.0)) throw ContractError("p-value outside [0, 1]");
  }
  std::vector<Decision> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i].p_raw = p_raw[i];
  if (k == 0) return out;

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return p_raw[x] < p_raw[y]; });
  const double md = static_cast<double>(m);

  switch (scheme) {
    case Correction::bonferroni:
      for (auto& d : out) d.p_adjusted = std::min(1.0, md * d.p_raw);
      break;
    case Correction::holm: {
      double running = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double adj = std::min(1.0, (md - static_cast<double>(j)) * p_raw[order[j]]);
        running = std::max(running, adj);
        out[order[j]].p_adjusted = running;
      }
      break;
    }
    case Correction::bh: {
      double running = 1.0;
      for (std::size_t j = k; j-- > 0;) {
        const double adj = std::min(1.0, md * p_raw[order[j]] / static_cast<double>(j + 1));
        running = std::min(running, adj);
        out[order[j]].p_adjusted = running;
      }
      break;
    }
  }
  for (auto& d : out) d.reject = d.p_adjusted <= alpha;
  return out;
}

StoufferResult stouffer_combine(std::span<const double> p) {
  if (p.empty()) throw ContractError("stouffer_combine needs at least one p-value");
  constexpr double lo = 1e-12, hi = 1.0 - 1e-12;
  StoufferResult r;
  double acc = 0.0;
  for (double pi : p) {
    if (!(pi >= 0.0 && pi <= 1.0)) throw ContractError("stouffer_combine: p-value outside [0, 1]");
    if (pi < lo || pi > hi) r.clamped = true;
    const double c = std::clamp(pi, lo, hi);
    acc += boost::math::quantile(boost::math::complement(kStdNormal, c));
  }
  r.z = acc / std::sqrt(static_cast<double>(p.size()));
  r.p = boost::math::cdf(boost::math::complement(kStdNormal, r.z));
  return r;
}

std::vector<double> average_ranks(std::span<const double> xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("spearman_rho: score lists differ in length");
  if (a.size() < 2) throw ContractError("spearman_rho needs at least two methods");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double ma = mean(ra), mb = mean(rb);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw ContractError("spearman_rho: constant ranking");
  return sab / std::sqrt(saa * sbb);
}

std::vector<StatReport> build_reports(const SeedSet& floor, std::span<const SeedSet> methods,
                                      const ProtocolOptions& opt) {
  floor.validate();
  const double mu = mean(floor.values);
  std::vector<StatReport> out;
  std::vector<std::size_t> tested;
  std::set<std::string> seen;
  for (const SeedSet& s : methods) {
    s.validate();
    if (!seen.insert(s.method).second) throw ContractError("duplicate method row: " + s.method);
    StatReport r;
    r.method = s.method;
    r.score = mean(s.values);
    r.delta = r.score - mu;
    if (s.method == floor.method) {
      out.push_back(r);
      continue;
    }
    r.z = zscore(r.score, floor);
    r.p_raw = normal_two_sided_p(r.z);
    const auto boot = bootstrap_floor(floor, s, opt.bootstrap_resamples, opt.rng_seed);
    r.bootstrap_ci = boot.other_ci;
    r.bootstrap_p_leq = boot.p_leq;
    if (s.values.size() >= 2 && floor.values.size() >= 2) r.welch = welch_t(s, floor);
    tested.push_back(out.size());
    out.push_back(r);
  }
  std::vector<double> ps;
  for (auto i : tested) ps.push_back(out[i].p_raw);
  const std::size_t m = std::max(opt.family_size, ps.size());
  const auto bonf = correct_multiplicity(ps, Correction::bonferroni, opt.alpha, m);
  const auto holm = correct_multiplicity(ps, Correction::holm, opt.alpha, m);
  const auto bh = correct_multiplicity(ps, Correction::bh, opt.fdr, m);
  for (std::size_t j = 0; j < tested.size(); ++j) {
    StatReport& r = out[tested[j]];
    r.p_bonf = bonf[j].p_adjusted;
    r.bonf_significant = bonf[j].reject;
    r.p_holm = holm[j].p_adjusted;
    r.holm_significant = holm[j].reject;
    r.bh_significant = bh[j].reject;
  }
  return out;
}

}  // namespace modlab::stats
