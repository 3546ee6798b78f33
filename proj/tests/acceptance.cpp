// Acceptance checks. Prints one PASS/FAIL line per criterion with its runtime
// and exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "support.hpp"

using namespace hitlor;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome al_score_exactness() {
  Outcome o;
  const int n = 10000;
  double max_err = 0.0;
  double max_mirror_dev = 0.0;
  std::size_t exact_pairs = 0;
  bool exact_symmetry = true;
  bool grid_rounding_bound = true;
  for (int i = 0; i <= n; ++i) {
    const double s = static_cast<double>(i) / n;
    const double v = al_score(s);
    max_err = std::max(max_err, std::abs(v - (1.0 - std::abs(0.5 - s))));
    // Exact mirror when 1 - s is representable (its rounding error is zero).
    const double r = 1.0 - s;
    if ((1.0 - r) - s == 0.0) {
      ++exact_pairs;
      exact_symmetry = exact_symmetry && al_score(r) == v;
    }
    // Decimal grid mirrors differ only by the rounding of the grid points.
    const double m = static_cast<double>(n - i) / n;
    const double dev = std::abs(al_score(m) - v);
    max_mirror_dev = std::max(max_mirror_dev, dev);
    const long double offset = std::abs(static_cast<long double>(s) + static_cast<long double>(m) - 1.0L);
    grid_rounding_bound = grid_rounding_bound && dev <= offset + std::numeric_limits<double>::epsilon() / 2;
  }
  o.require(max_err == 0.0, "max error " + fmt("%.3g", max_err));
  o.require(exact_symmetry, "asymmetric on an exactly representable mirror pair");
  o.require(grid_rounding_bound, "grid mirror deviation exceeds grid rounding");
  o.require(al_score(0.5) == 1.0 && al_score(0.0) == 0.5 && al_score(1.0) == 0.5, "anchor values");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("max error 0 over 10001 points, ") + std::to_string(exact_pairs) +
              " exact mirror pairs, decimal-grid mirror deviation " + fmt("%.2g", max_mirror_dev);
  return o;
}

// ---------------------------------------------------------------------------

Outcome max_pooling() {
  Outcome o;
  Rng rng(4242);
  const std::vector<std::string> ids{"go",           "lo-one-proto",      "lo-one-rand",      "lo-all",
                                     "gl-concat-one-proto", "gl-concat-one-rand", "gl-concat-all",
                                     "gl-pool-one-proto",   "gl-pool-one-rand",   "gl-pool-all"};
  const std::vector<GridSpec> grids{{2, 2}, {3, 3}, {4, 4}, {2, 3}};
  std::size_t checks = 0, proto_checks = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t d = 1 + rng.uniform_index(6);
    const auto ds = hitlor::testing::random_dataset(3, d, {{1, 1}, {2, 2}, {3, 3}, {4, 4}, {2, 3}}, std::nullopt,
                                                    1000 + static_cast<std::uint64_t>(t));
    auto s = Strategy::parse(ids[t % ids.size()], grids[rng.uniform_index(grids.size())]);
    LinearModel m;
    m.weights.resize(strategy_feature_dim(s, *ds));
    for (auto& w : m.weights) w = rng.normal() * 3.0;
    m.bias = rng.normal();
    m.segments = s.segments();
    m.l2_normalize_inputs = rng.uniform01() < 0.5;
    for (std::size_t row = 0; row < ds->size(); ++row) {
      const auto& id = ds->manifest()[row].id;
      const auto views = inference_views(s, row, *ds);
      double expected = -1.0;
      for (const auto& v : views) expected = std::max(expected, m.score(v.vector));
      const auto r = score_image(m, s, id, *ds);
      o.require(r.image_score == expected, "t=" + std::to_string(t) + " " + s.name() + " image score differs from max");
      const std::size_t cells = s.is_global_only() ? 1 : static_cast<std::size_t>(s.grid.cells());
      const std::size_t want = s.base == LocalBase::OneProto && !s.is_global_only() ? cells + 1 : cells;
      o.require(views.size() == want && r.per_view.size() == want, s.name() + " view count");
      if (s.base == LocalBase::OneProto && !s.is_global_only()) {
        o.require(views.back().tag == "prototype", "prototype view missing");
        ++proto_checks;
      }
      ++checks;
    }
    if (!o.pass) break;
  }
  o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(checks) + " images under 500 models, " +
              std::to_string(proto_checks) + " with M+1 views";
  return o;
}

// ---------------------------------------------------------------------------

Outcome training_set_construction() {
  Outcome o;
  const std::size_t d = 3;
  std::vector<ImageEntry> images{{"pos", std::nullopt, 8, 8}, {"neg", std::nullopt, 8, 8}};
  std::vector<DescriptorSet> sets;
  std::vector<float> g(2 * d), l(2 * 4 * d);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<float>(i + 1);
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = static_cast<float>(100 + i);
  sets.emplace_back(GridSpec{1, 1}, 2, d, g, "g");
  sets.emplace_back(GridSpec{2, 2}, 2, d, l, "l");
  const Dataset ds(ImageManifest("toy", images), std::nullopt, std::move(sets));
  const auto lo = Strategy::parse("lo-all", {2, 2});
  const auto gl = Strategy::parse("gl-concat-all", {2, 2});
  Rng rng(1);

  const auto neg_lo = build_training_samples(lo, {"neg", 0, std::nullopt, std::nullopt}, ds, rng);
  const auto neg_gl = build_training_samples(gl, {"neg", 0, std::nullopt, std::nullopt}, ds, rng);
  o.require(neg_lo.size() == 4 && neg_gl.size() == 4, "negative image must emit M samples");
  for (const auto& s : neg_lo) o.require(s.label == 0 && s.vector.size() == d, "LO negative sample shape");
  for (const auto& s : neg_gl) o.require(s.label == 0 && s.vector.size() == 2 * d, "GL negative sample shape");

  std::size_t boxes = 0;
  for (int x0 = 0; x0 < 8; ++x0)
    for (int x1 = x0 + 1; x1 <= 8; ++x1)
      for (int y0 = 0; y0 < 8; ++y0)
        for (int y1 = y0 + 1; y1 <= 8; ++y1) {
          const BBox box{double(x0), double(y0), double(x1), double(y1)};
          // Pixel-level oracle: cell m covers pixels [4c, 4c+4) x [4r, 4r+4).
          std::set<int> plus;
          for (int py = y0; py < y1; ++py)
            for (int px = x0; px < x1; ++px) plus.insert((py / 4) * 2 + px / 4);
          const auto a = build_training_samples(lo, {"pos", 1, box, std::nullopt}, ds, rng);
          const auto b = build_training_samples(gl, {"pos", 1, box, std::nullopt}, ds, rng);
          std::set<int> lo_pos, lo_neg, gl_pos;
          bool shapes = true;
          for (const auto& s : a) {
            (s.label == 1 ? lo_pos : lo_neg).insert(*s.provenance.cell);
            shapes = shapes && s.vector.size() == d;
          }
          for (const auto& s : b) {
            gl_pos.insert(*s.provenance.cell);
            shapes = shapes && s.vector.size() == 2 * d && s.label == 1;
          }
          std::set<int> minus;
          for (int m = 0; m < 4; ++m)
            if (!plus.contains(m)) minus.insert(m);
          const bool ok = shapes && a.size() == plus.size() + minus.size() && lo_pos == plus && lo_neg == minus &&
                          b.size() == plus.size() && gl_pos == plus;
          if (!ok) o.require(false, "box [" + std::to_string(x0) + "," + std::to_string(y0) + "," + std::to_string(x1) +
                                        "," + std::to_string(y1) + "]");
          ++boxes;
        }
  o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(boxes) + " placements checked";
  return o;
}

// ---------------------------------------------------------------------------

Outcome svm_optimality() {
  Outcome o;
  Rng rng(20240);
  TrainConfig c;
  c.C = 1000.0;
  c.class_weighting = ClassWeighting::Uniform;
  c.l2_normalize_inputs = false;
  double worst_hinge = 0, worst_dual = 0, worst_sg = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.uniform_index(49);
    const std::size_t d = 1 + rng.uniform_index(8);
    const auto inst = hitlor::testing::separable_instance(rng, n, d);
    const auto m = train(hitlor::testing::to_samples(inst), c);
    const auto xb = hitlor::testing::with_bias(inst.x);
    const std::vector<double> cost(n, c.C);
    auto w = m.weights;
    w.push_back(m.bias);
    double hinge = 0;
    for (std::size_t i = 0; i < n; ++i) hinge += std::max(0.0, 1.0 - inst.y[i] * m.margin(inst.x[i]));
    const auto qp = oracle::svm_dual_qp(xb, inst.y, cost);
    const double sg = oracle::subgradient_norm_fd(xb, inst.y, cost, w, 1e-5, 30, rng);
    worst_hinge = std::max(worst_hinge, hinge);
    worst_dual = std::max(worst_dual, std::abs(m.stats.dual_objective - qp.dual));
    worst_sg = std::max(worst_sg, sg);
  }
  o.require(worst_hinge <= 1e-9, "hinge " + fmt("%.3g", worst_hinge));
  o.require(worst_dual <= 1e-4, "dual gap to oracle " + fmt("%.3g", worst_dual));
  o.require(worst_sg <= 1e-3, "subgradient " + fmt("%.3g", worst_sg));
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("200 instances, max hinge ") + fmt("%.2g", worst_hinge) +
              ", max |dual-oracle| " + fmt("%.2g", worst_dual) + ", max subgradient " + fmt("%.2g", worst_sg);
  return o;
}

// ---------------------------------------------------------------------------

Outcome ap_oracle() {
  Outcome o;
  Rng rng(777);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.uniform_index(20);
    std::vector<double> scores(n);
    std::vector<std::string> keys(n);
    std::vector<bool> rel(n);
    std::map<std::string, double> m;
    std::set<std::string> relevant;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.uniform01() < 0.5 ? static_cast<double>(rng.uniform_index(4)) / 3.0 : rng.uniform01();
      keys[i] = hitlor::testing::image_id(i);
      rel[i] = rng.uniform01() < 0.4;
    }
    if (std::none_of(rel.begin(), rel.end(), [](bool b) { return b; })) rel[rng.uniform_index(n)] = true;
    for (std::size_t i = 0; i < n; ++i) {
      m[keys[i]] = scores[i];
      if (rel[i]) relevant.insert(keys[i]);
    }
    worst = std::max(worst, std::abs(average_precision(m, relevant) - oracle::average_precision_direct(scores, keys, rel)));
  }
  o.require(worst <= 1e-12, "max deviation " + fmt("%.3g", worst));
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("1000 instances, max deviation ") + fmt("%.2g", worst);
  return o;
}

// ---------------------------------------------------------------------------

double clustering_coverage(const CoverageIndex& index, int j, const std::set<std::string>& returned) {
  std::set<int> hit;
  for (std::size_t s = 0; s < index.ids().size(); ++s) {
    if (returned.contains(index.ids()[s])) hit.insert(index.assignment(j)[s]);
  }
  return static_cast<double>(hit.size()) / index.k();
}

Outcome coverage_properties() {
  Outcome o;
  const std::map<std::string, std::vector<double>> two{{"a", {0, 0}}, {"b", {0, 1}}, {"c", {10, 0}}, {"d", {10, 1}}};
  CoverageConfig c2;
  c2.k = 2;
  const CoverageIndex forced(two, c2);
  for (int j = 0; j < c2.clusterings; ++j) {
    o.require(clustering_coverage(forced, j, {"a"}) == 0.5, "clustering " + std::to_string(j) + " not 0.5");
  }
  o.require(forced.coverage({"a"}) == 0.5 && forced.coverage({"a", "b"}) == 0.5, "forced two-cluster coverage");

  Rng rng(99);
  std::size_t steps = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::map<std::string, std::vector<double>> pos;
    const std::size_t n = 1 + rng.uniform_index(60);
    for (std::size_t i = 0; i < n; ++i) {
      pos[hitlor::testing::image_id(i)] = {rng.normal() + (i % 3) * 5.0, rng.normal(), rng.normal()};
    }
    CoverageConfig c;
    c.seed = static_cast<std::uint64_t>(trial);
    c.clusterings = 3;
    const CoverageIndex index(pos, c);
    std::vector<std::string> order(index.ids());
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);
    std::set<std::string> returned;
    double prev = index.coverage(returned);
    o.require(prev == 0.0, "empty set not 0");
    for (const auto& id : order) {
      returned.insert(id);
      const double v = index.coverage(returned);
      if (v < prev) o.require(false, "decrease in trial " + std::to_string(trial));
      prev = v;
      ++steps;
    }
    o.require(prev == 1.0, "full set not 1 in trial " + std::to_string(trial));
    if (!o.pass) break;
  }
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("10 clusterings at 0.5, 500 trials, ") +
              std::to_string(steps) + " monotone steps";
  return o;
}

// ---------------------------------------------------------------------------

Outcome auc_checks() {
  Outcome o;
  Rng rng(3);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const double c = rng.uniform01();
    const std::size_t len = 2 + rng.uniform_index(100);
    worst = std::max(worst, std::abs(normalized_auc(std::vector<double>(len, c)) - c));
  }
  o.require(worst == 0.0, "constant curve deviation " + fmt("%.3g", worst));
  const std::vector<std::pair<std::vector<double>, double>> hand{
      {{0, 1}, 0.5},
      {{0, 1, 1}, 0.75},
      {{0.2, 0.4, 0.6}, 0.4},
      {{1, 0, 1, 0}, 0.5},
      {{0.1, 0.3, 0.2, 0.9, 0.5}, (0.2 + 0.25 + 0.55 + 0.7) / 4},
  };
  for (const auto& [curve, want] : hand) {
    o.require(std::abs(normalized_auc(curve) - want) <= 1e-12, "hand trapezoid mismatch");
  }
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("100 constants exact, 5 hand-computed curves");
  return o;
}

// ---------------------------------------------------------------------------

struct PlantedRun {
  std::string cls;
  std::uint64_t seed;
  bool small = false;
  std::vector<double> map;  // one value per iteration
};

std::map<std::string, std::vector<PlantedRun>> planted_runs(std::uint64_t seed) {
  synthetic::PlantedConfig pc;
  pc.seed = seed;
  const auto planted = synthetic::generate_planted(pc);
  std::map<std::string, std::vector<PlantedRun>> out;
  const auto collect = [&](const BenchReport& r, const std::string& suffix) {
    for (const auto& f : r.failures) std::fprintf(stderr, "  run failure %s %s: %s\n", f.query_id.c_str(), f.strategy.c_str(), f.message.c_str());
    for (const auto& run : r.runs) {
      PlantedRun p{run.class_label, seed, planted.small_classes.contains(run.class_label), {}};
      for (const auto& pt : run.series) p.map.push_back(pt.map);
      out[run.strategy + suffix].push_back(std::move(p));
    }
  };
  BenchConfig c;
  c.strategies = {"go", "lo-all", "gl-concat-all"};
  c.grids = {GridSpec{4, 4}};
  c.queries_per_class = 1;
  c.max_iterations = 25;
  c.budget = 10;
  c.n_negative = 5;
  c.seed = seed;
  c.coverage.clusterings = 1;
  collect(run_bench(planted.dataset, c), "");
  c.strategies = {"gl-concat-all"};
  c.selection = Selection::Random;
  collect(run_bench(planted.dataset, c), "/random");
  return out;
}

// Feedback rounds before MAP first reaches the target. Point t of a series
// scores the model trained after t rounds; runs that never reach it count T.
double rounds_to(const std::vector<double>& series, double target) {
  for (std::size_t t = 0; t < series.size(); ++t) {
    if (series[t] >= target) return static_cast<double>(t);
  }
  return static_cast<double>(series.size());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

Outcome planted_end_to_end() {
  Outcome o;
  std::map<std::string, std::vector<PlantedRun>> all;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (auto& [k, v] : planted_runs(seed)) all[k].insert(all[k].end(), v.begin(), v.end());
  }
  const auto final_mean = [&](const std::string& key) {
    double s = 0;
    for (const auto& r : all[key]) s += r.map.back();
    return all[key].empty() ? 0.0 : s / static_cast<double>(all[key].size());
  };
  std::ostringstream detail;
  for (const char* key : {"lo-all", "gl-concat-all"}) {
    const double m = final_mean(key);
    o.require(all[key].size() == 40, std::string(key) + " has " + std::to_string(all[key].size()) + " runs");
    o.require(m >= 0.95, std::string("(a) ") + key + " final MAP " + fmt("%.3f", m));
    detail << "(a) " << key << " final MAP " << fmt("%.3f", m) << ", ";
  }

  // (b) Paired by (seed, class) on small-object classes.
  double go_small = 0, lo_small = 0;
  std::size_t pairs = 0;
  for (const auto& g : all["go"]) {
    if (!g.small) continue;
    for (const auto& l : all["lo-all"]) {
      if (l.seed == g.seed && l.cls == g.cls) {
        go_small += g.map.back();
        lo_small += l.map.back();
        ++pairs;
      }
    }
  }
  const double gap = pairs ? (lo_small - go_small) / static_cast<double>(pairs) : 0.0;
  o.require(pairs == 20, "(b) expected 20 small-class pairs, got " + std::to_string(pairs));
  o.require(gap >= 0.10, "(b) LO-All minus GO on small classes " + fmt("%.3f", gap));
  detail << "(b) small-class gap LO-All-GO " << fmt("%.3f", gap) << " over " << pairs << " runs, ";

  // (c) GL-concat-All, uncertainty vs random selection.
  std::vector<double> unc, rnd;
  for (const auto& r : all["gl-concat-all"]) unc.push_back(rounds_to(r.map, 0.9));
  for (const auto& r : all["gl-concat-all/random"]) rnd.push_back(rounds_to(r.map, 0.9));
  const double mu = unc.empty() ? 0 : median(unc);
  const double mr = rnd.empty() ? 0 : median(rnd);
  const double ratio = mr > 0 ? mu / mr : 1e9;
  o.require(ratio <= 0.6, "(c) median rounds uncertainty/random " + fmt("%.2f", mu) + "/" + fmt("%.2f", mr));
  detail << "(c) median feedback rounds to MAP 0.9: uncertainty " << mu << ", random " << mr << ", ratio " << fmt("%.3f", ratio);
  o.detail += (o.detail.empty() ? "" : "; ") + detail.str();
  return o;
}

// ---------------------------------------------------------------------------

Outcome determinism() {
  Outcome o;
  synthetic::PlantedConfig pc;
  pc.images = 600;
  pc.seed = 21;
  const auto planted = synthetic::generate_planted(pc);
  BenchConfig c;
  c.strategies = {"go", "lo-all", "gl-concat-one-rand", "lo-one-rand"};
  c.grids = {GridSpec{2, 2}, GridSpec{4, 4}};
  c.classes = {planted.class_labels[0], planted.class_labels[5]};
  c.queries_per_class = 2;
  c.max_iterations = 8;
  c.seed = 99;
  c.parallelism = 1;
  const auto a = run_bench(planted.dataset, c);
  const auto b = run_bench(planted.dataset, c);
  c.parallelism = 8;
  const auto p = run_bench(planted.dataset, c);
  o.require(series_csv(a.runs) == series_csv(b.runs), "series.csv differs between identical runs");
  o.require(bench_report_to_json(a).dump() == bench_report_to_json(p).dump(), "parallelism 8 report differs");
  o.require(series_csv(a.runs) == series_csv(p.runs) && summary_csv(a.aggregate) == summary_csv(p.aggregate),
            "parallelism 8 csv differs");
  o.require(!a.runs.empty() && a.failures.empty(), "bench produced no runs");
  o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(a.runs.size()) +
              " runs, series.csv and report.json byte-identical across repeats and parallelism 1/8";
  return o;
}

// ---------------------------------------------------------------------------

Outcome replay() {
  Outcome o;
  synthetic::PlantedConfig pc;
  pc.images = 800;
  pc.seed = 5;
  const auto planted = synthetic::generate_planted(pc);
  std::size_t compared = 0;
  for (const char* id : {"lo-all", "lo-one-rand", "gl-pool-one-proto"}) {
    for (Selection sel : {Selection::Uncertainty, Selection::Random}) {
      SessionConfig config;
      config.strategy = Strategy::parse(id, {4, 4});
      config.seed = 1234;
      config.selection = sel;
      Rng qrng(8);
      const auto q = generate_queries(*planted.dataset, planted.class_labels[1], 1, 1, 5, qrng).at(0);
      SimulatedOracle oracle(planted.dataset);

      Session full(config, q.spec, planted.dataset);
      full.run(oracle);

      Session first(config, q.spec, planted.dataset);
      while (first.iteration() < 10) first.run_iteration(oracle);
      const auto text = first.checkpoint().dump();
      auto resumed = Session::restore(nlohmann::json::parse(text), planted.dataset);
      resumed.run(oracle);

      o.require(resumed.checkpoint() == full.checkpoint(), std::string(id) + " resumed state differs");
      o.require(resumed.history().size() == 25, "history length");
      ++compared;
    }
  }
  o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(compared) +
              " sessions checkpointed at iteration 10 match uninterrupted runs";
  return o;
}

// ---------------------------------------------------------------------------

Outcome size_profile_exact() {
  Outcome o;
  std::vector<ImageEntry> images;
  for (int i = 0; i < 10; ++i) images.push_back({hitlor::testing::image_id(i), std::nullopt, 200, 100});
  const ImageManifest manifest("sizes", images);
  AnnotationStore ann;
  // Image area 20000: small < 1250 <= medium <= 5000 < large.
  const auto add = [&](int img, const std::string& cls, double w, double h) {
    ann.add(hitlor::testing::image_id(img), {cls, {0, 0, w, h}});
  };
  add(0, "cat", 100, 50);    // exactly 25%: medium
  add(1, "cat", 50, 25);     // exactly 6.25%: medium
  add(2, "cat", 49, 25);     // small
  add(3, "cat", 100, 50.5);  // large
  add(4, "dog", 10, 10);
  add(5, "dog", 20, 20);
  add(6, "dog", 30, 30);
  add(7, "dog", 200, 100);
  add(8, "bird", 150, 90);
  add(9, "bird", 160, 80);
  const auto p = size_profile(ann, manifest);
  const std::string expected =
      "class,instances,small,medium,large\n"
      "bird,2,0.0000,0.0000,1.0000\n"
      "cat,4,0.2500,0.5000,0.2500\n"
      "dog,4,0.7500,0.0000,0.2500\n"
      "overall,10,0.4000,0.2000,0.4000\n";
  o.require(size_profile_csv(p) == expected, "profile csv:\n" + size_profile_csv(p));
  o.require(classify_size(5000, 200, 100) == SizeClass::Medium, "25% boundary not medium");
  o.require(classify_size(1250, 200, 100) == SizeClass::Medium, "6.25% boundary not medium");
  o.require(p.overall.small == 4 && p.overall.medium == 2 && p.overall.large == 4, "overall counts");
  o.require(p.recommendation == "2x2+4x4", "recommendation " + p.recommendation);
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("10 instances over 3 classes, boundaries medium");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"al_score formula exactness", 1, al_score_exactness},
      {"max-pooling inference", 10, max_pooling},
      {"training-set construction", 5, training_set_construction},
      {"SVM optimality", 60, svm_optimality},
      {"AP oracle equivalence", 5, ap_oracle},
      {"coverage properties", 30, coverage_properties},
      {"normalized AUC", 1e9, auc_checks},
      {"planted synthetic end-to-end", 600, planted_end_to_end},
      {"bench determinism", 1e9, determinism},
      {"checkpoint replay", 1e9, replay},
      {"size profile", 1e9, size_profile_exact},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs >= c.limit_s) o.require(false, "runtime " + fmt("%.2f", secs) + " s over limit " + fmt("%.0f", c.limit_s) + " s");
    failed += !o.pass;
    std::printf("%s  %-30s %8.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
