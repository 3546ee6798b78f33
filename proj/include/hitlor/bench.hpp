#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "hitlor/active_loop.hpp"
#include "hitlor/classifier.hpp"
#include "hitlor/evaluation.hpp"
#include "hitlor/feature_store.hpp"
#include "hitlor/representation.hpp"
#include "hitlor/rng.hpp"

namespace hitlor {

// ---------------------------------------------------------------------------
// Query generation
// ---------------------------------------------------------------------------

struct GeneratedQuery {
  std::string query_id;
  int index = 0;
  QuerySpec spec;
};

using WarningSink = std::function<void(const std::string&)>;

// Q benchmark queries for a class: one positive (with its largest instance
// box) and N_n explicit negatives each. Positives are drawn without
// replacement while the pool allows, with replacement otherwise.
inline std::vector<GeneratedQuery> generate_queries(const Dataset& dataset, const std::string& class_label, int q,
                                                    int n_positive, int n_negative, Rng& rng,
                                                    const WarningSink& warn = {}) {
  if (n_positive != 1) throw ConfigError("queries carry exactly one positive image (N_p = 1)");
  const auto& annotations = dataset.annotations();
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  for (const auto& img : dataset.manifest().images()) {
    (annotations.contains_class(img.id, class_label) ? positives : negatives).push_back(img.id);
  }
  if (positives.size() < static_cast<std::size_t>(n_positive) || negatives.size() < static_cast<std::size_t>(n_negative)) {
    if (warn) {
      warn("skipping class '" + class_label + "': " + std::to_string(positives.size()) + " positive and " +
           std::to_string(negatives.size()) + " negative images");
    }
    return {};
  }

  std::vector<std::string> chosen;
  if (positives.size() >= static_cast<std::size_t>(q)) {
    chosen = rng.sample_without_replacement<std::string>(positives, static_cast<std::size_t>(q));
  } else {
    for (int i = 0; i < q; ++i) chosen.push_back(positives[rng.uniform_index(positives.size())]);
  }

  SimulatedOracle oracle(std::shared_ptr<const Dataset>(&dataset, [](const Dataset*) {}));
  std::vector<GeneratedQuery> out;
  for (int i = 0; i < q; ++i) {
    GeneratedQuery g;
    g.index = i;
    g.query_id = class_label + "-q" + std::to_string(i);
    g.spec.mode = QueryMode::Benchmark;
    g.spec.class_label = class_label;
    g.spec.positive_id = chosen[static_cast<std::size_t>(i)];
    g.spec.positive_bbox = *oracle.salient_instance(g.spec.positive_id, class_label);
    g.spec.negatives = rng.sample_without_replacement<std::string>(negatives, static_cast<std::size_t>(n_negative));
    g.spec.auto_negatives = n_negative;
    out.push_back(std::move(g));
  }
  return out;
}

inline nlohmann::json query_to_json(const GeneratedQuery& g) {
  return {{"query_id", g.query_id},
          {"class", g.spec.class_label},
          {"positive", {{"image_id", g.spec.positive_id}, {"bbox", detail::bbox_json(g.spec.positive_bbox)}}},
          {"negatives", g.spec.negatives}};
}

// ---------------------------------------------------------------------------
// Per-session metrics
// ---------------------------------------------------------------------------

struct MetricOptions {
  bool map_exclude_labeled = false;
  bool coverage_exclude_query = false;
};

// Global (1x1) descriptors of every positive image of a class, the feature
// space coverage clusters in.
inline std::map<std::string, std::vector<double>> class_positive_features(const Dataset& dataset,
                                                                          const std::string& class_label) {
  const auto& global = dataset.descriptors({1, 1});
  std::map<std::string, std::vector<double>> out;
  for (std::size_t row = 0; row < dataset.size(); ++row) {
    const auto& id = dataset.manifest()[row].id;
    if (!dataset.annotations().contains_class(id, class_label)) continue;
    const auto v = global.cell(row, 0);
    out.emplace(id, std::vector<double>(v.begin(), v.end()));
  }
  return out;
}

// Turns iteration results into MAP / coverage / positives-found points.
class MetricTracker {
 public:
  MetricTracker(const Dataset& dataset, std::string class_label, std::shared_ptr<const CoverageIndex> coverage,
                MetricOptions options = {})
      : dataset_(dataset), class_label_(std::move(class_label)), coverage_(std::move(coverage)), options_(options) {
    relevant_.resize(dataset.size());
    tie_rank_.resize(dataset.size());
    for (std::size_t row = 0; row < dataset.size(); ++row) {
      relevant_[row] = dataset.annotations().contains_class(dataset.manifest()[row].id, class_label_) ? 1 : 0;
      tie_rank_[row] = dataset.id_rank(row);
    }
  }

  // `session` must already have ingested `result`.
  SeriesPoint measure(const IterationResult& result, const Session& session) const {
    SeriesPoint p;
    p.iteration = result.iteration + 1;
    if (options_.map_exclude_labeled) {
      std::vector<double> scores;
      std::vector<std::size_t> ranks;
      std::vector<char> rel;
      for (std::size_t row = 0; row < dataset_.size(); ++row) {
        const auto it = session.labeled().find(dataset_.manifest()[row].id);
        if (it != session.labeled().end() && it->second.iteration_added <= result.iteration) continue;
        scores.push_back(result.scores[row]);
        ranks.push_back(tie_rank_[row]);
        rel.push_back(relevant_[row]);
      }
      p.map = std::count(rel.begin(), rel.end(), 1) == 0 ? 0.0 : average_precision(scores, ranks, rel);
    } else {
      p.map = average_precision(result.scores, tie_rank_, relevant_);
    }
    std::set<std::string> returned;
    for (const auto& [id, entry] : session.labeled()) {
      if (entry.label != 1) continue;
      if (options_.coverage_exclude_query && id == session.query().positive_id) continue;
      if (coverage_->contains(id)) returned.insert(id);
    }
    p.coverage = coverage_->coverage(returned);
    p.positives_found = static_cast<int>(session.positives());
    return p;
  }

 private:
  const Dataset& dataset_;
  std::string class_label_;
  std::shared_ptr<const CoverageIndex> coverage_;
  MetricOptions options_;
  std::vector<char> relevant_;
  std::vector<std::size_t> tie_rank_;
};

// Drives one benchmark session to completion with the simulated oracle.
inline RunReport run_session_report(std::shared_ptr<const Dataset> dataset, const GeneratedQuery& query,
                                    const SessionConfig& config, std::shared_ptr<const ViewIndex> views,
                                    std::shared_ptr<const CoverageIndex> coverage, MetricOptions options = {}) {
  RunReport report;
  report.query_id = query.query_id;
  report.class_label = query.spec.class_label;
  report.strategy = config.strategy.name();
  report.grid = config.strategy.local_grid().name();
  report.seed = config.seed;
  report.coverage_k = coverage->k();
  report.coverage_k_clamped = coverage->clamped();

  Session session(config, query.spec, dataset, std::move(views));
  SimulatedOracle oracle(dataset);
  const MetricTracker tracker(*dataset, query.spec.class_label, std::move(coverage), options);
  while (!session.done()) {
    const auto result = session.run_iteration(oracle);
    report.series.push_back(tracker.measure(result, session));
    if (result.batch.empty()) break;
  }
  report.status = std::string(status_name(session.status()));
  report.summarize();
  return report;
}

// ---------------------------------------------------------------------------
// Bench
// ---------------------------------------------------------------------------

struct BenchConfig {
  std::vector<std::string> strategies{"go"};
  std::vector<GridSpec> grids{{2, 2}};
  std::vector<std::string> classes;  // empty: every annotated class
  int queries_per_class = 10;
  int n_positive = 1;
  int n_negative = 5;
  int max_iterations = 25;
  int budget = 10;
  std::uint64_t seed = 0;
  int parallelism = 1;
  TrainConfig train;
  Selection selection = Selection::Uncertainty;
  CoverageConfig coverage;
  MetricOptions metrics;
  bool pool_keep_negative_patches = false;
  double min_overlap_fraction = 0.0;
};

struct AggregateRow {
  std::string strategy;
  std::string grid;
  std::size_t runs = 0;
  double auc_map = 0.0;
  double auc_coverage = 0.0;
  std::optional<double> delta_map_pct;
  std::optional<double> delta_coverage_pct;
  std::optional<double> delta_sum_pct;
};

struct BenchFailure {
  std::string query_id;
  std::string strategy;
  std::string grid;
  std::string message;
};

struct BenchReport {
  nlohmann::json config;
  std::vector<GeneratedQuery> queries;
  std::vector<RunReport> runs;
  std::vector<AggregateRow> aggregate;
  std::vector<BenchFailure> failures;
  std::vector<std::string> warnings;
};

// Every (strategy, grid) pair to run. GO ignores the grid and runs once.
inline std::vector<Strategy> expand_strategies(const BenchConfig& config) {
  std::vector<Strategy> out;
  for (const auto& id : config.strategies) {
    if (id == "go") {
      out.push_back(Strategy::parse("go", {1, 1}));
      continue;
    }
    for (const auto& grid : config.grids) {
      Strategy s = Strategy::parse(id, grid);
      s.pool_keep_negative_patches = config.pool_keep_negative_patches;
      s.min_overlap_fraction = config.min_overlap_fraction;
      out.push_back(s);
    }
  }
  return out;
}

// Mean AUCs per (strategy, grid) in first-seen order, with percentage
// deltas against the GO row when one exists.
inline std::vector<AggregateRow> aggregate_runs(const std::vector<RunReport>& runs) {
  std::vector<AggregateRow> rows;
  for (const auto& r : runs) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const AggregateRow& a) { return a.strategy == r.strategy && a.grid == r.grid; });
    if (it == rows.end()) {
      rows.push_back({r.strategy, r.grid});
      it = rows.end() - 1;
    }
    ++it->runs;
    it->auc_map += r.auc_map;
    it->auc_coverage += r.auc_coverage;
  }
  for (auto& row : rows) {
    row.auc_map /= static_cast<double>(row.runs);
    row.auc_coverage /= static_cast<double>(row.runs);
  }
  const auto go = std::find_if(rows.begin(), rows.end(), [](const AggregateRow& a) { return a.strategy == "go"; });
  if (go != rows.end()) {
    const double base_map = go->auc_map;
    const double base_cov = go->auc_coverage;
    for (auto& row : rows) {
      row.delta_map_pct = base_map != 0.0 ? 100.0 * (row.auc_map - base_map) / base_map : 0.0;
      row.delta_coverage_pct = base_cov != 0.0 ? 100.0 * (row.auc_coverage - base_cov) / base_cov : 0.0;
      row.delta_sum_pct = *row.delta_map_pct + *row.delta_coverage_pct;
    }
  }
  return rows;
}

inline nlohmann::json bench_config_to_json(const BenchConfig& c) {
  std::vector<std::string> grids;
  for (const auto& g : c.grids) grids.push_back(g.name());
  return {{"strategies", c.strategies},
          {"grids", grids},
          {"classes", c.classes},
          {"Q", c.queries_per_class},
          {"N_p", c.n_positive},
          {"N_n", c.n_negative},
          {"T", c.max_iterations},
          {"budget", c.budget},
          {"seed", c.seed},
          {"selection", c.selection == Selection::Uncertainty ? "uncertainty" : "random"},
          {"train", train_config_to_json(c.train)},
          {"coverage", {{"k", c.coverage.k}, {"clusterings", c.coverage.clusterings},
                        {"max_kmeans_iterations", c.coverage.max_kmeans_iterations}}},
          {"map_exclude_labeled", c.metrics.map_exclude_labeled},
          {"coverage_exclude_query", c.metrics.coverage_exclude_query},
          {"pool_keep_negative_patches", c.pool_keep_negative_patches},
          {"min_overlap_fraction", c.min_overlap_fraction}};
}

// Runs every (class, query, strategy, grid) session. Per-session seeds come
// from (seed, class, query index), so the report does not depend on
// parallelism or on which other strategies are in the list.
inline BenchReport run_bench(std::shared_ptr<const Dataset> dataset, const BenchConfig& config) {
  if (!dataset->has_annotations()) throw ConfigError("bench needs ground-truth annotations");
  if (config.queries_per_class <= 0 || config.budget <= 0 || config.max_iterations <= 0) {
    throw ConfigError("Q, budget and T must be positive");
  }
  BenchReport report;
  report.config = bench_config_to_json(config);
  const auto warn = [&](const std::string& msg) { report.warnings.push_back(msg); };

  std::vector<std::string> classes = config.classes;
  if (classes.empty()) {
    const auto all = dataset->annotations().classes();
    classes.assign(all.begin(), all.end());
  }
  const auto strategies = expand_strategies(config);

  std::map<std::string, std::shared_ptr<const ViewIndex>> views;
  for (const auto& s : strategies) {
    const auto key = s.name() + "@" + s.local_grid().name();
    if (!views.contains(key)) views[key] = std::make_shared<const ViewIndex>(s, *dataset, config.train.l2_normalize_inputs);
  }

  struct Task {
    const GeneratedQuery* query;
    Strategy strategy;
    std::shared_ptr<const CoverageIndex> coverage;
  };
  std::map<std::string, std::shared_ptr<const CoverageIndex>> coverage;
  std::vector<Task> tasks;
  for (const auto& label : classes) {
    Rng rng(derive_seed(config.seed, label, 0xC0FFEE));
    auto queries = generate_queries(*dataset, label, config.queries_per_class, config.n_positive, config.n_negative,
                                    rng, warn);
    if (queries.empty()) continue;
    CoverageConfig cov = config.coverage;
    cov.seed = config.seed;
    coverage[label] = std::make_shared<const CoverageIndex>(class_positive_features(*dataset, label), cov);
    if (coverage[label]->clamped()) {
      warn("class '" + label + "': coverage k clamped to " + std::to_string(coverage[label]->k()));
    }
    for (auto& q : queries) report.queries.push_back(std::move(q));
  }
  for (const auto& q : report.queries) {
    for (const auto& s : strategies) tasks.push_back({&q, s, coverage.at(q.spec.class_label)});
  }

  std::vector<std::optional<RunReport>> results(tasks.size());
  std::vector<std::optional<std::string>> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const auto& task = tasks[i];
      SessionConfig sc;
      sc.strategy = task.strategy;
      sc.budget = config.budget;
      sc.max_iterations = config.max_iterations;
      sc.seed = derive_seed(config.seed, task.query->spec.class_label, static_cast<std::uint64_t>(task.query->index));
      sc.train = config.train;
      sc.selection = config.selection;
      try {
        results[i] = run_session_report(dataset, *task.query, sc,
                                        views.at(task.strategy.name() + "@" + task.strategy.local_grid().name()),
                                        task.coverage, config.metrics);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int threads = std::max(1, config.parallelism);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (results[i]) {
      report.runs.push_back(std::move(*results[i]));
    } else {
      report.failures.push_back({tasks[i].query->query_id, tasks[i].strategy.name(),
                                 tasks[i].strategy.local_grid().name(), errors[i].value_or("unknown error")});
    }
  }
  report.aggregate = aggregate_runs(report.runs);
  return report;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string series_csv(const std::vector<RunReport>& runs) {
  std::ostringstream out;
  out << "query_id,class,strategy,grid,iteration,map,coverage,positives_found\n";
  for (const auto& r : runs) {
    for (const auto& p : r.series) {
      out << r.query_id << ',' << r.class_label << ',' << r.strategy << ',' << r.grid << ',' << p.iteration << ','
          << format_fixed(p.map, 6) << ',' << format_fixed(p.coverage, 6) << ',' << p.positives_found << '\n';
    }
  }
  return out.str();
}

inline std::string summary_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream out;
  out << "strategy,grid,runs,auc_map,auc_coverage,delta_map_pct,delta_coverage_pct,delta_sum_pct\n";
  const auto opt = [](const std::optional<double>& v) { return v ? format_fixed(*v, 3) : std::string("n/a"); };
  for (const auto& r : rows) {
    out << r.strategy << ',' << r.grid << ',' << r.runs << ',' << format_fixed(r.auc_map, 3) << ','
        << format_fixed(r.auc_coverage, 3) << ',' << opt(r.delta_map_pct) << ',' << opt(r.delta_coverage_pct) << ','
        << opt(r.delta_sum_pct) << '\n';
  }
  return out.str();
}

// Fixed-width table in the layout of the paper-style results matrix.
inline std::string summary_table(const std::vector<AggregateRow>& rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-18s %-6s %5s %8s %8s %9s %9s %9s\n", "strategy", "grid", "runs", "MAP-AUC",
                "Cov-AUC", "dMAP%", "dCov%", "dSum%");
  out << line;
  const auto opt = [](const std::optional<double>& v) { return v ? format_fixed(*v, 1) : std::string("-"); };
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-18s %-6s %5zu %8.3f %8.3f %9s %9s %9s\n", r.strategy.c_str(), r.grid.c_str(),
                  r.runs, r.auc_map, r.auc_coverage, opt(r.delta_map_pct).c_str(), opt(r.delta_coverage_pct).c_str(),
                  opt(r.delta_sum_pct).c_str());
    out << line;
  }
  return out.str();
}

inline nlohmann::json aggregate_to_json(const std::vector<AggregateRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    out.push_back({{"strategy", r.strategy},
                   {"grid", r.grid},
                   {"runs", r.runs},
                   {"auc_map", r.auc_map},
                   {"auc_coverage", r.auc_coverage},
                   {"delta_map_pct", opt(r.delta_map_pct)},
                   {"delta_coverage_pct", opt(r.delta_coverage_pct)},
                   {"delta_sum_pct", opt(r.delta_sum_pct)}});
  }
  return out;
}

inline nlohmann::json bench_report_to_json(const BenchReport& report) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : report.runs) runs.push_back(report_to_json(r));
  nlohmann::json queries = nlohmann::json::array();
  for (const auto& q : report.queries) queries.push_back(query_to_json(q));
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : report.failures) {
    failures.push_back({{"query_id", f.query_id}, {"strategy", f.strategy}, {"grid", f.grid}, {"message", f.message}});
  }
  return {{"config", report.config},     {"queries", std::move(queries)}, {"runs", std::move(runs)},
          {"aggregate", aggregate_to_json(report.aggregate)}, {"failures", std::move(failures)},
          {"warnings", report.warnings}};
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError(path.string() + ": cannot open for writing");
  out << text;
}

inline void write_bench_outputs(const BenchReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_json_file(dir / "report.json", bench_report_to_json(report));
  write_text_file(dir / "series.csv", series_csv(report.runs));
  write_text_file(dir / "summary.csv", summary_csv(report.aggregate));
}

// Recomputes every run's AUC summary from its series and re-aggregates.
inline std::vector<RunReport> recompute_summaries(const nlohmann::json& report_doc) {
  std::vector<RunReport> runs;
  for (const auto& j : report_doc.at("runs")) {
    auto r = report_from_json(j);
    r.summarize();
    runs.push_back(std::move(r));
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Size profile output
// ---------------------------------------------------------------------------

inline std::string size_profile_csv(const SizeProfile& profile) {
  std::ostringstream out;
  out << "class,instances,small,medium,large\n";
  const auto row = [&](const std::string& name, const SizeCounts& c) {
    out << name << ',' << c.total() << ',' << format_fixed(c.proportion(SizeClass::Small), 4) << ','
        << format_fixed(c.proportion(SizeClass::Medium), 4) << ',' << format_fixed(c.proportion(SizeClass::Large), 4)
        << '\n';
  };
  for (const auto& [label, counts] : profile.per_class) row(label, counts);
  row("overall", profile.overall);
  return out.str();
}

}  // namespace hitlor
