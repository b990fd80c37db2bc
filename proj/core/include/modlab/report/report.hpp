#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modlab/stats/stats.hpp"

namespace modlab::report {

// lm-evaluation-harness identifiers, in the canonical column order.
inline constexpr std::array<std::string_view, 12> kClimbTasks = {
    "piqa",       "arc_challenge", "arc_easy", "hellaswag", "winogrande",     "social_iqa",
    "mmlu",       "openbookqa",    "boolq",    "race",      "lambada_openai", "truthfulqa_mc2"};

bool is_climb_task(std::string_view name);

// Unweighted mean over the twelve tasks. Throws ContractError naming the
// first missing or unknown task, or an accuracy outside [0, 1].
double climb_avg(const std::map<std::string, double>& per_task);

// One evaluated checkpoint. Either the full per-task map is present, or only
// an aggregate climb_avg was ingested (or neither, for a diverged run).
struct ResultsFile {
  std::string method;
  std::string scale;
  std::int64_t seed = 42;
  std::map<std::string, double> per_task;
  std::optional<double> aggregate;  // ingested CLIMB-avg when per_task is absent
  std::optional<double> val_loss;
  bool diverged = false;
  std::optional<std::string> provenance;

  void validate() const;
  bool has_score() const;
  // climb_avg(per_task) when tasks are present, else the ingested aggregate.
  double score() const;

  std::string to_json() const;
  static ResultsFile from_json(const std::string& text);
  bool operator==(const ResultsFile&) const = default;
};

ResultsFile load_results(const std::filesystem::path& file);
void save_results(const ResultsFile& r, const std::filesystem::path& file);
// Every regular file under `root` whose name ends in "results.json",
// sorted by path. A single file path is also accepted.
std::vector<ResultsFile> load_results_tree(const std::filesystem::path& root);

// Keeps one file per method: the one with `seed` if given, else the lowest
// seed. Methods without that seed are dropped.
std::vector<ResultsFile> one_per_method(const std::vector<ResultsFile>& results,
                                        std::optional<std::int64_t> seed = std::nullopt);
std::vector<ResultsFile> at_scale(const std::vector<ResultsFile>& results, std::string_view scale);
// Noise floor from every scored file of `method`.
stats::SeedSet seed_set(const std::vector<ResultsFile>& results, std::string_view method);

// ---- rank table ---------------------------------------------------------

struct RankRow {
  std::string method;
  double climb_avg = 0.0;
  double delta = 0.0;
  double z = 0.0;
  std::optional<double> p_raw;
  std::optional<double> p_bonf;
  std::optional<double> p_holm;
  bool bonf = false, holm = false, bh = false;
  bool is_reference = false;
};

struct RankTable {
  std::string scale;
  double floor_mean = 0.0;
  double floor_std = 0.0;
  std::size_t family_size = 19;
  std::vector<RankRow> rows;  // descending climb_avg, ties by method tag

  std::string to_text() const;
  std::string to_csv() const;
};

// One row per method; rows for floor.method are replaced by the floor mean.
// Throws ContractError on a duplicate method, mixed scales or a missing score.
RankTable rank_table(const std::vector<ResultsFile>& results, const stats::SeedSet& floor,
                     const stats::ProtocolOptions& options = {});

// Welch and paired-bootstrap comparisons for methods with two or more seeds.
std::vector<stats::StatReport> seed_comparisons(const std::vector<ResultsFile>& results, const stats::SeedSet& floor,
                                                const stats::ProtocolOptions& options = {});
std::string seed_comparisons_text(const std::vector<stats::StatReport>& reports);
std::string stat_reports_json(const std::vector<stats::StatReport>& reports);

// ---- cross-scale ---------------------------------------------------------

struct CrossScaleRow {
  std::string method;
  std::optional<double> score_a, score_b;
  std::optional<double> delta_a, delta_b;
  std::optional<std::size_t> rank_a, rank_b;
  // Empty when scored at both scales; otherwise "diverged" or "absent" for the
  // scale that has no score.
  std::string marker_a, marker_b;
  bool is_reference = false;
};

struct SignSummary {
  std::size_t improvers = 0, improvers_kept = 0;
  std::size_t failures = 0, failures_kept = 0;
  std::size_t unscored_b = 0;  // non-reference methods scored at A only
  std::optional<double> improver_rho;  // Spearman over improvers' A vs B scores
};

struct CrossScaleTable {
  std::string scale_a, scale_b, reference;
  double ref_a = 0.0, ref_b = 0.0;
  std::vector<CrossScaleRow> rows;  // by B rank, then A-only rows by A rank
  SignSummary summary;

  std::string to_text() const;
  std::string to_csv() const;
};

// Each scale's reference score is the mean over its reference-method files.
// Other methods must appear at most once per scale.
CrossScaleTable cross_scale_table(const std::vector<ResultsFile>& a, const std::vector<ResultsFile>& b,
                                  std::string_view reference = "baseline");

// ---- per-task delta matrix ----------------------------------------------

struct DeltaMatrixRow {
  std::string method;
  std::int64_t seed = 0;
  std::array<double, 12> delta{};
  double climb_delta = 0.0;
};

struct DeltaMatrix {
  std::string reference;
  std::vector<DeltaMatrixRow> rows;  // descending climb_avg

  std::string to_text() const;
  std::string to_csv() const;
};

DeltaMatrix per_task_delta_matrix(const std::vector<ResultsFile>& results, const ResultsFile& reference);

// Two-column per-task comparison (e.g. one checkpoint on two platforms).
struct TaskComparison {
  std::string label_a, label_b;
  std::array<double, 12> a{}, b{};
  double avg_a = 0.0, avg_b = 0.0;

  std::string to_text() const;
  std::string to_csv() const;
};

TaskComparison task_comparison(const ResultsFile& a, const ResultsFile& b, std::string label_a = "A",
                               std::string label_b = "B");

// ---- loss vs CLIMB ------------------------------------------------------

struct LossClimbRow {
  std::string method;
  double val_loss = 0.0;
  double climb_avg = 0.0;
  std::optional<double> z;
  double loss_gap = 0.0;      // val_loss - reference val_loss
  double rel_loss_gap = 0.0;  // loss_gap / reference val_loss
  bool is_reference = false;
};

struct LossClimbTable {
  std::string reference;
  std::vector<LossClimbRow> rows;  // descending climb_avg

  std::string to_text() const;
  std::string to_csv() const;
};

// One file per method, each with val_loss; `reference` must be among them.
// With a floor, the reference row shows the floor mean and z is filled in.
LossClimbTable loss_vs_climb_table(const std::vector<ResultsFile>& results, std::string_view reference = "baseline",
                                   const std::optional<stats::SeedSet>& floor = std::nullopt);

}  // namespace modlab::report
