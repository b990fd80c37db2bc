#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace modlab::stats {

// Per-seed scores of one configuration.
struct SeedSet {
  std::string method;
  std::vector<int> seeds;
  std::vector<double> values;
  // task -> per-seed accuracies, aligned with `seeds`.
  std::map<std::string, std::vector<double>> per_task;

  // Throws ContractError if empty, misaligned, or seed ids repeat.
  void validate() const;
  static SeedSet from_values(std::string method, std::vector<double> values, int first_seed = 42);
};

double mean(std::span<const double> xs);
// Unbiased (n - 1) standard deviation; n >= 2.
double sample_std(std::span<const double> xs);

// (x - mean(floor)) / sample_std(floor), unrounded.
double zscore(double x, const SeedSet& floor);

// Two-sided standard-normal tail 2 * P(Z > |z|).
double normal_two_sided_p(double z);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct BootstrapResult {
  Interval floor_ci;  // percentile 95% of the floor's resampled means
  Interval other_ci;
  // Pr(other mean <= floor mean) over paired resamples, ties counted half.
  double p_leq = 0.0;
  std::size_t resamples = 0;
  std::uint64_t rng_seed = 0;
};

// Each resample draws |floor| floor seeds and |other| other seeds with
// replacement from one mt19937_64 stream seeded with rng_seed.
BootstrapResult bootstrap_floor(const SeedSet& floor, const SeedSet& other, std::size_t n_resamples = 10000,
                                std::uint64_t rng_seed = 0);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

// t = (mean(a) - mean(b)) / sqrt(s_a^2/n_a + s_b^2/n_b), Welch-Satterthwaite df.
WelchResult welch_t(std::span<const double> a, std::span<const double> b);
WelchResult welch_t(const SeedSet& a, const SeedSet& b);

enum class Correction { bonferroni, holm, bh };

struct Decision {
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  bool reject = false;
};

// Adjusted p-values and rejections for a family of `m` hypotheses (m defaults
// to p_raw.size() and may not be smaller). `alpha` is the FWER level for
// Bonferroni/Holm and the FDR level for BH.
std::vector<Decision> correct_multiplicity(std::span<const double> p_raw, Correction scheme, double alpha = 0.05,
                                           std::optional<std::size_t> m = std::nullopt);

struct StoufferResult {
  double z = 0.0;
  double p = 0.5;        // one-sided upper tail of z
  bool clamped = false;  // some input was 0 or 1 and was moved into (0, 1)
};

// Z = sum_i Phi^{-1}(1 - p_i) / sqrt(k) over one-sided p-values.
StoufferResult stouffer_combine(std::span<const double> p_one_sided);

// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> average_ranks(std::span<const double> xs);
// Pearson correlation of average ranks; equals 1 - 6 sum d^2 / (n (n^2 - 1)) without ties.
double spearman_rho(std::span<const double> a, std::span<const double> b);

// One row of a significance table.
struct StatReport {
  std::string method;
  double score = 0.0;  // CLIMB-avg, mean over seeds when several
  double delta = 0.0;  // score - floor mean
  double z = 0.0;
  double p_raw = 1.0;
  double p_bonf = 1.0;
  double p_holm = 1.0;
  bool bonf_significant = false;
  bool holm_significant = false;
  bool bh_significant = false;
  std::optional<Interval> bootstrap_ci;
  std::optional<double> bootstrap_p_leq;
  std::optional<WelchResult> welch;
};

struct ProtocolOptions {
  std::size_t family_size = 19;
  double alpha = 0.05;
  double fdr = 0.05;
  std::size_t bootstrap_resamples = 10000;
  std::uint64_t rng_seed = 0;
};

// z, p and corrections for every method against the floor. Methods with
// several seeds also get a bootstrap comparison and Welch's t; the floor's
// own method is excluded from the tested family.
std::vector<StatReport> build_reports(const SeedSet& floor, std::span<const SeedSet> methods,
                                      const ProtocolOptions& options = {});

}  // namespace modlab::stats
