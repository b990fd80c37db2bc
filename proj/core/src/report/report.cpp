#include "modlab/report/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "modlab/errors.hpp"

namespace modlab::report {

using nlohmann::json;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Full round-trip precision for machine-readable output.
std::string num(double v) { return fmt("%.17g", v); }

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::string pad(std::string s, std::size_t w, bool left = true) {
  if (s.size() >= w) return s;
  return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
}

// Two significant digits, scientific below 0.01, display capped at 1.00.
std::string p_text(double p) {
  if (p == 0.0) return "<1e-300";
  if (p < 0.01) return fmt("%.1e", p);
  if (p < 0.1) return fmt("%.3f", p);
  return fmt("%.2f", std::min(p, 1.0));
}

std::string signed4(double v) {
  // Avoid "-0.0000" for values that round to zero.
  if (std::fabs(v) < 5e-5) return "+0.0000";
  return fmt("%+.4f", v);
}

bool by_score_desc(double sa, const std::string& ma, double sb, const std::string& mb) {
  if (sa != sb) return sa > sb;
  return ma < mb;
}

void check_unit(const std::string& what, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ContractError(what + " accuracy " + num(v) + " is outside [0, 1]");
}

}  // namespace

bool is_climb_task(std::string_view name) {
  return std::find(kClimbTasks.begin(), kClimbTasks.end(), name) != kClimbTasks.end();
}

double climb_avg(const std::map<std::string, double>& per_task) {
  for (const auto& [task, acc] : per_task) {
    if (!is_climb_task(task)) throw ContractError("unknown task '" + task + "'");
    check_unit(task, acc);
  }
  double sum = 0.0;
  for (std::string_view t : kClimbTasks) {
    auto it = per_task.find(std::string(t));
    if (it == per_task.end()) throw ContractError("missing task '" + std::string(t) + "'");
    sum += it->second;
  }
  return sum / static_cast<double>(kClimbTasks.size());
}

void ResultsFile::validate() const {
  if (method.empty()) throw ContractError("results file has no method");
  if (scale.empty()) throw ContractError("results file for " + method + " has no scale");
  if (!per_task.empty()) {
    (void)climb_avg(per_task);
    if (aggregate) throw ContractError(method + ": both per-task accuracies and an aggregate were given");
  }
  if (aggregate) check_unit(method + " CLIMB-avg", *aggregate);
  if (!diverged && !has_score()) throw ContractError(method + ": results file carries no accuracies");
  if (val_loss && !(std::isfinite(*val_loss) && *val_loss > 0.0)) {
    throw ContractError(method + ": val_loss must be finite and positive");
  }
}

bool ResultsFile::has_score() const { return !per_task.empty() || aggregate.has_value(); }

double ResultsFile::score() const {
  if (!per_task.empty()) return climb_avg(per_task);
  if (aggregate) return *aggregate;
  throw ContractError(method + " (" + scale + ", seed " + std::to_string(seed) + ") has no CLIMB-avg");
}

std::string ResultsFile::to_json() const {
  validate();
  json j = {{"method", method}, {"scale", scale}, {"seed", seed}};
  if (!per_task.empty()) j["per_task"] = per_task;
  if (has_score()) j["climb_avg"] = score();
  if (val_loss) j["val_loss"] = *val_loss;
  if (diverged) j["diverged"] = true;
  if (provenance) j["provenance"] = *provenance;
  return j.dump(2) + "\n";
}

ResultsFile ResultsFile::from_json(const std::string& text) {
  ResultsFile r;
  try {
    const json j = json::parse(text);
    r.method = j.at("method").get<std::string>();
    r.scale = j.at("scale").get<std::string>();
    r.seed = j.at("seed").get<std::int64_t>();
    if (j.contains("per_task")) r.per_task = j.at("per_task").get<std::map<std::string, double>>();
    if (j.contains("val_loss") && !j.at("val_loss").is_null()) r.val_loss = j.at("val_loss").get<double>();
    r.diverged = j.value("diverged", false);
    if (j.contains("provenance") && !j.at("provenance").is_null()) r.provenance = j.at("provenance").get<std::string>();
    if (j.contains("climb_avg") && !j.at("climb_avg").is_null()) {
      const double given = j.at("climb_avg").get<double>();
      if (r.per_task.empty()) {
        r.aggregate = given;
      } else if (std::fabs(given - climb_avg(r.per_task)) > 5e-5) {
        throw ContractError(r.method + ": climb_avg " + num(given) + " disagrees with its per-task mean");
      }
    }
    for (const auto& [k, _] : j.items()) {
      static const std::set<std::string> known = {"method",   "scale",    "seed",      "per_task",
                                                  "climb_avg", "val_loss", "diverged", "provenance"};
      if (!known.count(k)) throw ContractError("unknown results field '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw ContractError(std::string("malformed results file: ") + e.what());
  }
  r.validate();
  return r;
}

ResultsFile load_results(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ContractError("cannot read results file " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return ResultsFile::from_json(ss.str());
  } catch (const ContractError& e) {
    throw ContractError(file.string() + ": " + e.what());
  }
}

void save_results(const ResultsFile& r, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw ContractError("cannot write " + file.string());
  out << r.to_json();
}

std::vector<ResultsFile> load_results_tree(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(root)) return {load_results(root)};
  if (!fs::is_directory(root)) throw ContractError("no such results path: " + root.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() >= 12 && name.compare(name.size() - 12, 12, "results.json") == 0) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<ResultsFile> out;
  for (const auto& f : files) out.push_back(load_results(f));
  return out;
}

std::vector<ResultsFile> one_per_method(const std::vector<ResultsFile>& results, std::optional<std::int64_t> seed) {
  std::map<std::string, const ResultsFile*> pick;
  for (const auto& r : results) {
    if (seed && r.seed != *seed) continue;
    auto [it, fresh] = pick.emplace(r.method, &r);
    if (!fresh && r.seed < it->second->seed) it->second = &r;
  }
  std::vector<ResultsFile> out;
  for (const auto& [_, r] : pick) out.push_back(*r);
  return out;
}

std::vector<ResultsFile> at_scale(const std::vector<ResultsFile>& results, std::string_view scale) {
  std::vector<ResultsFile> out;
  for (const auto& r : results) {
    if (r.scale == scale) out.push_back(r);
  }
  return out;
}

stats::SeedSet seed_set(const std::vector<ResultsFile>& results, std::string_view method) {
  stats::SeedSet s;
  s.method = std::string(method);
  std::vector<const ResultsFile*> rows;
  for (const auto& r : results) {
    if (r.method == method && r.has_score()) rows.push_back(&r);
  }
  std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->seed < b->seed; });
  for (const auto* r : rows) {
    s.seeds.push_back(static_cast<int>(r->seed));
    s.values.push_back(r->score());
    if (!r->per_task.empty()) {
      for (const auto& [task, acc] : r->per_task) s.per_task[task].push_back(acc);
    }
  }
  // per_task is only kept when every seed carries it.
  for (const auto& [_, v] : s.per_task) {
    if (v.size() != s.values.size()) {
      s.per_task.clear();
      break;
    }
  }
  if (s.values.empty()) throw ContractError("no scored results for '" + std::string(method) + "'");
  s.validate();
  return s;
}

// ---- rank table ---------------------------------------------------------

RankTable rank_table(const std::vector<ResultsFile>& results, const stats::SeedSet& floor,
                     const stats::ProtocolOptions& options) {
  floor.validate();
  RankTable t;
  t.floor_mean = stats::mean(floor.values);
  t.floor_std = stats::sample_std(floor.values);
  t.family_size = options.family_size;

  std::set<std::string> seen;
  std::vector<stats::SeedSet> sets;
  for (const auto& r : results) {
    if (t.scale.empty()) t.scale = r.scale;
    if (r.scale != t.scale) throw ContractError("rank table mixes scales " + t.scale + " and " + r.scale);
    // Floor seeds may all be passed; the floor row is the seed mean.
    if (r.method == floor.method) continue;
    if (!seen.insert(r.method).second) {
      throw ContractError("duplicate method row '" + r.method + "' at scale " + r.scale);
    }
    if (!r.has_score()) {
      throw ContractError(r.method + " (seed " + std::to_string(r.seed) + ") has no score; it cannot be ranked");
    }
    sets.push_back(stats::SeedSet{r.method, {static_cast<int>(r.seed)}, {r.score()}, {}});
  }
  // Ranking needs only z and the corrections; skip the bootstrap work.
  stats::ProtocolOptions opt = options;
  opt.bootstrap_resamples = 1000;
  const auto reports = stats::build_reports(floor, sets, opt);

  RankRow ref;
  ref.method = floor.method;
  ref.climb_avg = t.floor_mean;
  ref.is_reference = true;
  t.rows.push_back(ref);
  for (const auto& s : reports) {
    RankRow row;
    row.method = s.method;
    row.climb_avg = s.score;
    row.delta = s.delta;
    row.z = s.z;
    row.p_raw = s.p_raw;
    row.p_bonf = s.p_bonf;
    row.p_holm = s.p_holm;
    row.bonf = s.bonf_significant;
    row.holm = s.holm_significant;
    row.bh = s.bh_significant;
    t.rows.push_back(row);
  }
  std::sort(t.rows.begin(), t.rows.end(),
            [](const RankRow& a, const RankRow& b) { return by_score_desc(a.climb_avg, a.method, b.climb_avg, b.method); });
  return t;
}

std::string RankTable::to_text() const {
  std::ostringstream os;
  os << "scale " << scale << "   noise floor: mean " << fmt("%.4f", floor_mean) << ", sigma "
     << fmt("%.5f", floor_std) << "   family m=" << family_size << "\n";
  os << pad("Method", 20) << pad("CLIMB-avg", 10, false) << pad("Delta", 10, false) << pad("z", 9, false)
     << pad("p_Bonf", 10, false) << "  sig\n";
  for (const auto& r : rows) {
    os << pad(r.method, 20) << pad(fmt("%.4f", r.climb_avg), 10, false);
    if (r.is_reference) {
      os << pad("", 10, false) << pad("0", 9, false) << pad("-", 10, false) << "\n";
      continue;
    }
    std::string sig;
    if (r.bonf) sig += " bonf";
    if (r.holm) sig += " holm";
    if (r.bh) sig += " bh";
    os << pad(signed4(r.delta), 10, false) << pad(fmt("%+.2f", r.z), 9, false)
       << pad(r.p_bonf ? p_text(*r.p_bonf) : "-", 10, false) << " " << sig << "\n";
  }
  return os.str();
}

std::string RankTable::to_csv() const {
  std::ostringstream os;
  os << "method,climb_avg,delta,z,p_raw,p_bonf,p_holm,bonf,holm,bh,reference\n";
  for (const auto& r : rows) {
    os << r.method << ',' << num(r.climb_avg) << ',' << num(r.delta) << ',' << num(r.z) << ',' << opt_num(r.p_raw)
       << ',' << opt_num(r.p_bonf) << ',' << opt_num(r.p_holm) << ',' << r.bonf << ',' << r.holm << ',' << r.bh << ','
       << r.is_reference << "\n";
  }
  return os.str();
}

std::vector<stats::StatReport> seed_comparisons(const std::vector<ResultsFile>& results, const stats::SeedSet& floor,
                                                const stats::ProtocolOptions& options) {
  std::set<std::string> methods;
  for (const auto& r : results) {
    if (r.method != floor.method && r.has_score()) methods.insert(r.method);
  }
  std::vector<stats::SeedSet> multi;
  for (const auto& m : methods) {
    auto s = seed_set(results, m);
    if (s.values.size() >= 2) multi.push_back(std::move(s));
  }
  if (multi.empty()) return {};
  return stats::build_reports(floor, multi, options);
}

std::string seed_comparisons_text(const std::vector<stats::StatReport>& reports) {
  std::ostringstream os;
  os << pad("Method", 20) << pad("mean", 9, false) << pad("Welch t", 9, false) << pad("df", 7, false)
     << pad("p", 9, false) << pad("boot CI", 20, false) << pad("Pr(<=base)", 12, false) << "\n";
  for (const auto& r : reports) {
    os << pad(r.method, 20) << pad(fmt("%.4f", r.score), 9, false);
    if (r.welch) {
      os << pad(fmt("%+.2f", r.welch->t), 9, false) << pad(fmt("%.2f", r.welch->df), 7, false)
         << pad(fmt("%.4f", r.welch->p), 9, false);
    } else {
      os << pad("-", 9, false) << pad("-", 7, false) << pad("-", 9, false);
    }
    if (r.bootstrap_ci) {
      os << pad("[" + fmt("%.4f", r.bootstrap_ci->lo) + ", " + fmt("%.4f", r.bootstrap_ci->hi) + "]", 20, false);
    } else {
      os << pad("-", 20, false);
    }
    os << pad(r.bootstrap_p_leq ? fmt("%.4f", *r.bootstrap_p_leq) : "-", 12, false) << "\n";
  }
  return os.str();
}

std::string stat_reports_json(const std::vector<stats::StatReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    json j = {{"method", r.method}, {"score", r.score},   {"delta", r.delta},
              {"z", r.z},           {"p_raw", r.p_raw},   {"p_bonf", r.p_bonf},
              {"p_holm", r.p_holm}, {"bonf_significant", r.bonf_significant},
              {"holm_significant", r.holm_significant},   {"bh_significant", r.bh_significant}};
    if (r.bootstrap_ci) j["bootstrap_ci"] = {r.bootstrap_ci->lo, r.bootstrap_ci->hi};
    if (r.bootstrap_p_leq) j["bootstrap_p_leq"] = *r.bootstrap_p_leq;
    if (r.welch) j["welch"] = {{"t", r.welch->t}, {"df", r.welch->df}, {"p", r.welch->p}};
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

// ---- cross-scale ---------------------------------------------------------

namespace {

struct ScaleView {
  std::string scale;
  double ref = 0.0;
  std::map<std::string, std::optional<double>> score;  // nullopt = diverged
  std::map<std::string, std::size_t> rank;
};

ScaleView view_of(const std::vector<ResultsFile>& rs, std::string_view reference) {
  ScaleView v;
  std::vector<double> ref_scores;
  for (const auto& r : rs) {
    if (v.scale.empty()) v.scale = r.scale;
    if (r.scale != v.scale) throw ContractError("one side of a cross-scale table mixes " + v.scale + " and " + r.scale);
    if (r.method == reference) {
      if (r.has_score()) ref_scores.push_back(r.score());
      continue;
    }
    if (v.score.count(r.method)) {
      throw ContractError("duplicate method row '" + r.method + "' at scale " + r.scale);
    }
    v.score[r.method] = r.has_score() ? std::optional<double>(r.score()) : std::nullopt;
  }
  if (ref_scores.empty()) {
    throw ContractError("scale " + (v.scale.empty() ? std::string("?") : v.scale) + " has no scored '" +
                        std::string(reference) + "' results");
  }
  v.ref = stats::mean(ref_scores);
  v.score[std::string(reference)] = v.ref;

  std::vector<std::pair<std::string, double>> order;
  for (const auto& [m, s] : v.score) {
    if (s) order.emplace_back(m, *s);
  }
  std::sort(order.begin(), order.end(),
            [](const auto& a, const auto& b) { return by_score_desc(a.second, a.first, b.second, b.first); });
  for (std::size_t i = 0; i < order.size(); ++i) v.rank[order[i].first] = i + 1;
  return v;
}

}  // namespace

CrossScaleTable cross_scale_table(const std::vector<ResultsFile>& a, const std::vector<ResultsFile>& b,
                                  std::string_view reference) {
  const ScaleView va = view_of(a, reference);
  const ScaleView vb = view_of(b, reference);
  if (va.scale == vb.scale) throw ContractError("cross-scale table needs two different scales");

  CrossScaleTable t;
  t.scale_a = va.scale;
  t.scale_b = vb.scale;
  t.reference = std::string(reference);
  t.ref_a = va.ref;
  t.ref_b = vb.ref;

  std::set<std::string> methods;
  for (const auto& [m, _] : va.score) methods.insert(m);
  for (const auto& [m, _] : vb.score) methods.insert(m);

  std::vector<double> imp_a, imp_b;
  for (const auto& m : methods) {
    CrossScaleRow row;
    row.method = m;
    row.is_reference = m == reference;
    auto fill = [&](const ScaleView& v, std::optional<double>& score, std::optional<double>& delta,
                    std::optional<std::size_t>& rank, std::string& marker) {
      auto it = v.score.find(m);
      if (it == v.score.end()) {
        marker = "absent";
      } else if (!it->second) {
        marker = "diverged";
      } else {
        score = it->second;
        delta = *score - v.ref;
        rank = v.rank.at(m);
      }
    };
    fill(va, row.score_a, row.delta_a, row.rank_a, row.marker_a);
    fill(vb, row.score_b, row.delta_b, row.rank_b, row.marker_b);

    if (!row.is_reference && row.delta_a) {
      if (!row.delta_b) {
        ++t.summary.unscored_b;
      } else if (*row.delta_a > 0.0) {
        ++t.summary.improvers;
        t.summary.improvers_kept += *row.delta_b > 0.0;
        imp_a.push_back(*row.score_a);
        imp_b.push_back(*row.score_b);
      } else if (*row.delta_a < 0.0) {
        ++t.summary.failures;
        t.summary.failures_kept += *row.delta_b < 0.0;
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (imp_a.size() >= 2) {
    try {
      t.summary.improver_rho = stats::spearman_rho(imp_a, imp_b);
    } catch (const ContractError&) {
      // constant ranking: rho undefined
    }
  }

  std::sort(t.rows.begin(), t.rows.end(), [](const CrossScaleRow& x, const CrossScaleRow& y) {
    if (x.rank_b.has_value() != y.rank_b.has_value()) return x.rank_b.has_value();
    if (x.rank_b) return *x.rank_b < *y.rank_b;
    if (x.rank_a.has_value() != y.rank_a.has_value()) return x.rank_a.has_value();
    if (x.rank_a) return *x.rank_a < *y.rank_a;
    return x.method < y.method;
  });
  return t;
}

std::string CrossScaleTable::to_text() const {
  std::ostringstream os;
  os << pad("Method", 20) << pad(scale_a, 10, false) << pad(scale_b, 10, false) << pad("Delta " + scale_b, 12, false)
     << pad("Rank", 10, false) << "\n";
  auto rank_s = [](const std::optional<std::size_t>& r) { return r ? std::to_string(*r) : std::string("-"); };
  for (const auto& r : rows) {
    os << pad(r.method, 20) << pad(r.score_a ? fmt("%.4f", *r.score_a) : r.marker_a, 10, false)
       << pad(r.score_b ? fmt("%.4f", *r.score_b) : r.marker_b, 10, false)
       << pad(r.is_reference ? "-" : (r.delta_b ? signed4(*r.delta_b) : "-"), 12, false)
       << pad(rank_s(r.rank_a) + "->" + rank_s(r.rank_b), 10, false) << "\n";
  }
  os << "reference " << reference << ": " << fmt("%.4f", ref_a) << " at " << scale_a << ", " << fmt("%.4f", ref_b)
     << " at " << scale_b << "\n";
  os << "sign preserved: " << summary.improvers_kept << "/" << summary.improvers << " improvers stay positive, "
     << summary.failures_kept << "/" << summary.failures << " failures stay negative";
  if (summary.unscored_b) os << " (" << summary.unscored_b << " without a " << scale_b << " score)";
  os << "\n";
  if (summary.improver_rho) os << "Spearman rho over improvers: " << fmt("%+.3f", *summary.improver_rho) << "\n";
  return os.str();
}

std::string CrossScaleTable::to_csv() const {
  std::ostringstream os;
  os << "method,score_a,score_b,delta_a,delta_b,rank_a,rank_b,marker_a,marker_b,reference\n";
  auto rank_s = [](const std::optional<std::size_t>& r) { return r ? std::to_string(*r) : std::string(); };
  for (const auto& r : rows) {
    os << r.method << ',' << opt_num(r.score_a) << ',' << opt_num(r.score_b) << ',' << opt_num(r.delta_a) << ','
       << opt_num(r.delta_b) << ',' << rank_s(r.rank_a) << ',' << rank_s(r.rank_b) << ',' << r.marker_a << ','
       << r.marker_b << ',' << r.is_reference << "\n";
  }
  return os.str();
}

// ---- per-task delta matrix ----------------------------------------------

DeltaMatrix per_task_delta_matrix(const std::vector<ResultsFile>& results, const ResultsFile& reference) {
  if (reference.per_task.empty()) {
    throw ContractError("reference " + reference.method + " has no per-task accuracies");
  }
  const double ref_avg = climb_avg(reference.per_task);
  DeltaMatrix m;
  m.reference = reference.method;
  std::vector<std::pair<double, DeltaMatrixRow>> rows;
  for (const auto& r : results) {
    if (r.per_task.empty()) throw ContractError(r.method + " has no per-task accuracies for the delta matrix");
    const double avg = climb_avg(r.per_task);
    DeltaMatrixRow row;
    row.method = r.method;
    row.seed = r.seed;
    for (std::size_t i = 0; i < kClimbTasks.size(); ++i) {
      const std::string t(kClimbTasks[i]);
      row.delta[i] = r.per_task.at(t) - reference.per_task.at(t);
    }
    row.climb_delta = avg - ref_avg;
    rows.emplace_back(avg, std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
    return by_score_desc(x.first, x.second.method, y.first, y.second.method);
  });
  for (auto& [_, row] : rows) m.rows.push_back(std::move(row));
  return m;
}

std::string DeltaMatrix::to_text() const {
  std::ostringstream os;
  os << pad("Method", 20);
  for (auto t : kClimbTasks) os << pad(std::string(t.substr(0, 9)), 10, false);
  os << pad("avg", 10, false) << "\n";
  for (const auto& r : rows) {
    os << pad(r.method, 20);
    for (double d : r.delta) os << pad(signed4(d), 10, false);
    os << pad(signed4(r.climb_delta), 10, false) << "\n";
  }
  return os.str();
}

std::string DeltaMatrix::to_csv() const {
  std::ostringstream os;
  os << "method,seed";
  for (auto t : kClimbTasks) os << ',' << t;
  os << ",climb_avg\n";
  for (const auto& r : rows) {
    os << r.method << ',' << r.seed;
    for (double d : r.delta) os << ',' << num(d);
    os << ',' << num(r.climb_delta) << "\n";
  }
  return os.str();
}

TaskComparison task_comparison(const ResultsFile& a, const ResultsFile& b, std::string label_a, std::string label_b) {
  TaskComparison c;
  c.label_a = std::move(label_a);
  c.label_b = std::move(label_b);
  if (a.per_task.empty() || b.per_task.empty()) throw ContractError("task comparison needs per-task accuracies on both sides");
  c.avg_a = climb_avg(a.per_task);
  c.avg_b = climb_avg(b.per_task);
  for (std::size_t i = 0; i < kClimbTasks.size(); ++i) {
    c.a[i] = a.per_task.at(std::string(kClimbTasks[i]));
    c.b[i] = b.per_task.at(std::string(kClimbTasks[i]));
  }
  return c;
}

std::string TaskComparison::to_text() const {
  std::ostringstream os;
  os << pad("Task", 18) << pad(label_a, 10, false) << pad(label_b, 10, false) << pad("Delta", 10, false) << "\n";
  for (std::size_t i = 0; i < a.size(); ++i) {
    os << pad(std::string(kClimbTasks[i]), 18) << pad(fmt("%.4f", a[i]), 10, false) << pad(fmt("%.4f", b[i]), 10, false)
       << pad(signed4(b[i] - a[i]), 10, false) << "\n";
  }
  os << pad("CLIMB-avg", 18) << pad(fmt("%.4f", avg_a), 10, false) << pad(fmt("%.4f", avg_b), 10, false)
     << pad(signed4(avg_b - avg_a), 10, false) << "\n";
  return os.str();
}

std::string TaskComparison::to_csv() const {
  std::ostringstream os;
  os << "task," << label_a << ',' << label_b << ",delta\n";
  for (std::size_t i = 0; i < a.size(); ++i) {
    os << kClimbTasks[i] << ',' << num(a[i]) << ',' << num(b[i]) << ',' << num(b[i] - a[i]) << "\n";
  }
  os << "climb_avg," << num(avg_a) << ',' << num(avg_b) << ',' << num(avg_b - avg_a) << "\n";
  return os.str();
}

// ---- loss vs CLIMB ------------------------------------------------------

LossClimbTable loss_vs_climb_table(const std::vector<ResultsFile>& results, std::string_view reference,
                                   const std::optional<stats::SeedSet>& floor) {
  LossClimbTable t;
  t.reference = std::string(reference);
  std::set<std::string> seen;
  const ResultsFile* ref = nullptr;
  for (const auto& r : results) {
    if (!seen.insert(r.method).second) throw ContractError("duplicate method row '" + r.method + "'");
    if (!r.val_loss) throw ContractError(r.method + " has no val_loss");
    if (!r.has_score()) throw ContractError(r.method + " has no CLIMB-avg");
    if (r.method == reference) ref = &r;
  }
  if (!ref) throw ContractError("reference '" + std::string(reference) + "' is not among the loss rows");
  const double ref_loss = *ref->val_loss;
  for (const auto& r : results) {
    LossClimbRow row;
    row.method = r.method;
    row.is_reference = r.method == reference;
    row.val_loss = *r.val_loss;
    row.climb_avg = r.score();
    if (floor) {
      if (row.is_reference && floor->method == reference) row.climb_avg = stats::mean(floor->values);
      row.z = stats::zscore(row.climb_avg, *floor);
    }
    row.loss_gap = row.val_loss - ref_loss;
    row.rel_loss_gap = row.loss_gap / ref_loss;
    t.rows.push_back(row);
  }
  std::sort(t.rows.begin(), t.rows.end(), [](const LossClimbRow& a, const LossClimbRow& b) {
    return by_score_desc(a.climb_avg, a.method, b.climb_avg, b.method);
  });
  return t;
}

std::string LossClimbTable::to_text() const {
  std::ostringstream os;
  os << pad("Method", 20) << pad("val loss", 10, false) << pad("CLIMB-avg", 10, false) << pad("z", 9, false)
     << pad("gap", 9, false) << pad("rel gap", 9, false) << "\n";
  for (const auto& r : rows) {
    os << pad(r.method, 20) << pad(fmt("%.4f", r.val_loss), 10, false) << pad(fmt("%.4f", r.climb_avg), 10, false)
       << pad(r.z ? fmt("%+.2f", *r.z) : "-", 9, false) << pad(fmt("%+.4f", r.loss_gap), 9, false)
       << pad(fmt("%+.2f%%", 100.0 * r.rel_loss_gap), 9, false) << "\n";
  }
  return os.str();
}

std::string LossClimbTable::to_csv() const {
  std::ostringstream os;
  os << "method,val_loss,climb_avg,z,loss_gap,rel_loss_gap,reference\n";
  for (const auto& r : rows) {
    os << r.method << ',' << num(r.val_loss) << ',' << num(r.climb_avg) << ',' << opt_num(r.z) << ','
       << num(r.loss_gap) << ',' << num(r.rel_loss_gap) << ',' << r.is_reference << "\n";
  }
  return os.str();
}

}  // namespace modlab::report
