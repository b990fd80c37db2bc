// modlab: train toy decoders, account for their cost, and turn evaluation
// results into significance tables.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "modlab/accounting/accounting.hpp"
#include "modlab/errors.hpp"
#include "modlab/model/checkpoint.hpp"
#include "modlab/model/decoder.hpp"
#include "modlab/report/report.hpp"
#include "modlab/train/run.hpp"
#include "modlab/train/run_config.hpp"

namespace fs = std::filesystem;
using namespace modlab;

namespace {

enum Exit { kOk = 0, kContract = 1, kDiverged = 2 };

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ContractError("cannot write " + p.string());
  out << text;
  if (!out) throw ContractError("short write to " + p.string());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<report::ResultsFile> load_all(const std::vector<std::string>& paths) {
  std::vector<report::ResultsFile> out;
  for (const auto& p : paths) {
    auto part = report::load_results_tree(p);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::string only_scale(const std::vector<report::ResultsFile>& rs) {
  std::set<std::string> scales;
  for (const auto& r : rs) scales.insert(r.scale);
  if (scales.size() != 1) {
    std::string all;
    for (const auto& s : scales) all += (all.empty() ? "" : ", ") + s;
    throw ContractError("results span several scales (" + all + "); pick one with --scale");
  }
  return *scales.begin();
}

struct Common {
  std::string config;
  std::optional<std::int64_t> seed;
  std::string out;
  std::vector<std::string> scales;
  std::string reference = "baseline";
};

// ---- train ---------------------------------------------------------------

int cmd_train(const Common& c) {
  train::RunConfig rc = train::load_run_config(c.config);
  if (c.seed) {
    if (*c.seed < 0) throw ConfigError("--seed must be non-negative");
    rc.seed = static_cast<std::uint64_t>(*c.seed);
  }
  if (!c.scales.empty()) rc.scale = c.scales.front();

  const std::string run_name =
      std::string(rc.method.name()) + "_" + rc.scale + "_" + std::to_string(rc.seed);
  const fs::path dir = fs::path(c.out.empty() ? "runs" : c.out) / run_name;
  fs::create_directories(dir);
  write_file(dir / "run_config.ini", slurp(c.config));

  train::PackingReport packing;
  const train::TrainData data = train::prepare_data(rc.data, &packing);
  write_file(dir / "packing.json", packing.to_json());

  train::TrainOptions opt;
  opt.seed = rc.seed;
  opt.scale = rc.scale;
  opt.on_step = [&](const train::StepMetrics& m) {
    if (m.step % 50 == 0 || m.step == rc.recipe.total_steps) {
      std::fprintf(stderr, "step %5ld  loss %.4f  grad %.3f  lr %.2e\n", m.step, m.loss, m.grad_norm, m.lr);
    }
  };
  opt.on_complete = [&](const model::Decoder& m) { model::save_checkpoint(m, dir / "checkpoint"); };

  std::fprintf(stderr, "%s: %s, %zu train / %zu validation sequences\n", run_name.c_str(),
               rc.model.describe().c_str(), data.train.size(), data.validation.size());
  const train::RunRecord rec = train::train_run(rc.model, rc.method, rc.recipe, data, opt);
  write_file(dir / "metrics.jsonl", rec.to_jsonl());

  if (rec.diverged) {
    std::printf("%s diverged at step %ld (%s); record written to %s\n", run_name.c_str(), rec.nan_step.value_or(-1),
                std::string(train::to_string(rec.signature)).c_str(), dir.string().c_str());
    return kDiverged;
  }
  std::printf("%s: val loss %.4f -> %.4f over %ld steps; outputs in %s\n", run_name.c_str(),
              rec.initial_val_loss.value_or(std::nan("")), rec.final_val_loss.value_or(std::nan("")),
              rc.recipe.total_steps, dir.string().c_str());
  return kOk;
}

// ---- stats ---------------------------------------------------------------

int cmd_stats(const Common& c, const std::vector<std::string>& inputs) {
  auto all = load_all(inputs);
  const std::string scale = c.scales.empty() ? only_scale(all) : c.scales.front();
  all = report::at_scale(all, scale);
  if (all.empty()) throw ContractError("no results at scale " + scale);

  const stats::SeedSet floor = report::seed_set(all, c.reference);
  std::vector<report::ResultsFile> ranked;
  for (const auto& r : report::one_per_method(all, c.seed)) {
    if (r.method == c.reference) continue;
    if (!r.has_score()) {
      std::fprintf(stderr, "note: %s (seed %lld) diverged; not ranked\n", r.method.c_str(),
                   static_cast<long long>(r.seed));
      continue;
    }
    ranked.push_back(r);
  }
  const auto table = report::rank_table(ranked, floor);
  std::cout << table.to_text();

  const auto comparisons = report::seed_comparisons(all, floor);
  if (!comparisons.empty()) std::cout << "\nmulti-seed comparisons vs " << c.reference << "\n"
                                      << report::seed_comparisons_text(comparisons);
  if (!c.out.empty()) {
    const fs::path out(c.out);
    write_file(out / ("rank_table_" + scale + ".csv"), table.to_csv());
    write_file(out / ("seed_comparisons_" + scale + ".json"), report::stat_reports_json(comparisons));
  }
  return kOk;
}

// ---- flops ---------------------------------------------------------------

int cmd_flops(const Common& c) {
  model::ModelConfig cfg = model::ModelConfig::llama_1p2b();
  std::int64_t batch_tokens = static_cast<std::int64_t>(cfg.context);
  if (!c.config.empty()) {
    const auto rc = train::load_run_config(c.config);
    cfg = rc.model;
    batch_tokens = rc.recipe.tokens_per_step;
  }
  const auto rows = acct::delta_table(cfg, batch_tokens);
  const auto base = acct::step_flops(cfg, model::MethodSpec{}, batch_tokens);
  std::printf("%s\nbaseline: %lld parameters, %lld FLOPs per step (%lld tokens)\n\n", cfg.describe().c_str(),
              static_cast<long long>(base.params_total), static_cast<long long>(base.flops_per_step),
              static_cast<long long>(batch_tokens));
  std::cout << acct::format_delta_text(rows);
  if (!c.out.empty()) write_file(fs::path(c.out) / "flops.csv", acct::format_delta_csv(rows));
  return kOk;
}

// ---- report --------------------------------------------------------------

int cmd_report(const Common& c, const std::string& kind, const std::vector<std::string>& inputs) {
  auto all = load_all(inputs);
  std::string text, csv, name;
  if (kind == "cross_scale") {
    if (c.scales.size() != 2) throw ContractError("cross_scale needs --scale twice (smaller scale first)");
    std::vector<report::ResultsFile> sides[2];
    for (int i = 0; i < 2; ++i) {
      // The reference keeps all its seeds; other methods one file each.
      for (const auto& r : report::at_scale(all, c.scales[i])) {
        if (r.method == c.reference) sides[i].push_back(r);
      }
      for (const auto& r : report::one_per_method(report::at_scale(all, c.scales[i]), c.seed)) {
        if (r.method != c.reference) sides[i].push_back(r);
      }
    }
    const auto t = report::cross_scale_table(sides[0], sides[1], c.reference);
    text = t.to_text();
    csv = t.to_csv();
    name = "cross_scale_" + c.scales[0] + "_" + c.scales[1] + ".csv";
  } else if (kind == "delta_matrix") {
    const std::string scale = c.scales.empty() ? only_scale(all) : c.scales.front();
    std::vector<report::ResultsFile> rows;
    std::optional<report::ResultsFile> ref;
    for (const auto& r : report::one_per_method(report::at_scale(all, scale), c.seed)) {
      if (r.method == c.reference) ref = r;
      if (!r.per_task.empty()) rows.push_back(r);
    }
    if (!ref) throw ContractError("no '" + c.reference + "' results at scale " + scale);
    const auto m = report::per_task_delta_matrix(rows, *ref);
    text = m.to_text();
    csv = m.to_csv();
    name = "delta_matrix_" + scale + ".csv";
  } else if (kind == "loss_vs_climb") {
    const std::string scale = c.scales.empty() ? only_scale(all) : c.scales.front();
    const auto at = report::at_scale(all, scale);
    std::vector<report::ResultsFile> rows;
    for (const auto& r : report::one_per_method(at, c.seed)) {
      if (r.val_loss && r.has_score()) rows.push_back(r);
    }
    std::optional<stats::SeedSet> floor;
    if (report::seed_set(at, c.reference).values.size() >= 2) floor = report::seed_set(at, c.reference);
    const auto t = report::loss_vs_climb_table(rows, c.reference, floor);
    text = t.to_text();
    csv = t.to_csv();
    name = "loss_vs_climb_" + scale + ".csv";
  } else if (kind == "tasks") {
    if (inputs.size() != 2 || all.size() != 2) throw ContractError("tasks compares exactly two results files");
    // Columns are labelled by the directory each file sits in.
    const auto label = [](const std::string& in) {
      const fs::path p = fs::absolute(in).lexically_normal();
      return (fs::is_directory(p) ? p.filename() : p.parent_path().filename()).string();
    };
    const auto t = report::task_comparison(all[0], all[1], label(inputs[0]), label(inputs[1]));
    text = t.to_text();
    csv = t.to_csv();
    name = "tasks.csv";
  } else {
    throw ContractError("unknown report kind '" + kind + "'");
  }
  std::cout << text;
  if (!c.out.empty()) write_file(fs::path(c.out) / name, csv);
  return kOk;
}

// ---- pack ----------------------------------------------------------------

int cmd_pack(const Common& c) {
  const auto rc = train::load_run_config(c.config);
  train::PackOptions po;
  po.separator = rc.data.separator;
  po.shuffle_seed = c.seed ? static_cast<std::uint64_t>(*c.seed) : rc.data.shuffle_seed;
  const auto packed = train::pack_corpus(train::load_corpus(rc.data), rc.data.seq_len, po);
  const auto& r = packed.report;
  std::printf("%zu documents -> %zu sequences of %zu tokens; %zu discarded (%.4f%%), %zu separators\n",
              r.n_documents, r.n_sequences, r.seq_len, r.discarded_tokens, 100.0 * r.discard_fraction,
              r.separator_tokens);
  if (!c.out.empty()) write_file(fs::path(c.out) / "packing.json", r.to_json());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"modlab: toy decoder ablations, cost accounting and significance reporting"};
  app.require_subcommand(1);
  Common c;
  std::int64_t seed_value = 0;
  std::vector<std::string> inputs;
  std::string kind;

  auto add_seed = [&](CLI::App* sub, const char* help) {
    return sub->add_option("--seed", seed_value, help);
  };

  auto* train = app.add_subcommand("train", "Train one configuration; writes metrics, packing and a checkpoint");
  train->add_option("--config", c.config, "Run config (INI)")->required()->check(CLI::ExistingFile);
  auto* train_seed = add_seed(train, "Initialization seed (overrides the config)");
  train->add_option("--out", c.out, "Output root; the run goes to <out>/<method>_<scale>_<seed>");
  train->add_option("--scale", c.scales, "Scale tag (overrides the config)")->expected(1);

  auto* st = app.add_subcommand("stats", "Rank table and significance tests from results files");
  st->add_option("inputs", inputs, "Results files or directories")->required();
  auto* st_seed = add_seed(st, "Use this seed for every method (default: lowest seed)");
  st->add_option("--out", c.out, "Directory for CSV/JSON outputs");
  st->add_option("--scale", c.scales, "Scale to analyse")->expected(1);
  st->add_option("--reference", c.reference, "Noise-floor method");

  auto* fl = app.add_subcommand("flops", "Parameter and FLOP deltas for every method");
  fl->add_option("--config", c.config, "Run config; default is the 1.2B shape")->check(CLI::ExistingFile);
  fl->add_option("--out", c.out, "Directory for flops.csv");

  auto* rp = app.add_subcommand("report", "cross_scale | delta_matrix | loss_vs_climb | tasks");
  rp->add_option("kind", kind, "Report kind")
      ->required()
      ->check(CLI::IsMember({"cross_scale", "delta_matrix", "loss_vs_climb", "tasks"}));
  rp->add_option("inputs", inputs, "Results files or directories")->required();
  auto* rp_seed = add_seed(rp, "Use this seed for every method (default: lowest seed)");
  rp->add_option("--out", c.out, "Directory for the CSV output");
  rp->add_option("--scale", c.scales, "Scale tag; give twice for cross_scale");
  rp->add_option("--reference", c.reference, "Reference method");

  auto* pk = app.add_subcommand("pack", "Pack the configured corpus and report discards");
  pk->add_option("--config", c.config, "Run config (INI)")->required()->check(CLI::ExistingFile);
  auto* pk_seed = add_seed(pk, "Shuffle seed (overrides the config)");
  pk->add_option("--out", c.out, "Directory for packing.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kContract;
  }
  for (auto* opt : {train_seed, st_seed, rp_seed, pk_seed}) {
    if (opt->count()) c.seed = seed_value;
  }

  try {
    if (train->parsed()) return cmd_train(c);
    if (st->parsed()) return cmd_stats(c, inputs);
    if (fl->parsed()) return cmd_flops(c);
    if (rp->parsed()) return cmd_report(c, kind, inputs);
    if (pk->parsed()) return cmd_pack(c);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kContract;
  }
  return kContract;
}
