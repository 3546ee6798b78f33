#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>

#include "hitlor/hitlor.hpp"
#include "hitlor/service_http.hpp"

namespace fs = std::filesystem;
using namespace hitlor;

namespace {

struct DatasetArgs {
  std::string manifest;
  std::string annotations;
  std::vector<std::string> features;

  void add_to(CLI::App* app, bool annotations_required) {
    app->add_option("--manifest", manifest, "Image manifest JSON")->required()->check(CLI::ExistingFile);
    auto* a = app->add_option("--annotations", annotations, "Ground-truth annotations JSON")->check(CLI::ExistingFile);
    if (annotations_required) a->required();
    app->add_option("--features", features, "HITLORF1 descriptor files, one per grid")
        ->required()
        ->delimiter(',')
        ->check(CLI::ExistingFile);
  }

  std::shared_ptr<const Dataset> load() const {
    std::vector<fs::path> paths(features.begin(), features.end());
    std::optional<fs::path> ann;
    if (!annotations.empty()) ann = annotations;
    return load_dataset(manifest, ann, paths);
  }
};

std::vector<GridSpec> parse_grids(const std::vector<std::string>& texts) {
  std::vector<GridSpec> out;
  for (const auto& t : texts) out.push_back(parse_grid(t));
  return out;
}

Selection parse_selection(const std::string& s) {
  if (s == "uncertainty") return Selection::Uncertainty;
  if (s == "random") return Selection::Random;
  throw ConfigError("selection must be 'uncertainty' or 'random'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive patch-level image retrieval: benchmark, profiling and live sessions"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a planted synthetic dataset");
  synthetic::PlantedConfig planted;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--images", planted.images, "Number of images")->capture_default_str();
  synth->add_option("--dim", planted.dim, "Descriptor dimension")->capture_default_str();
  synth->add_option("--classes", planted.classes, "Number of classes")->capture_default_str();
  synth->add_option("--small-classes", planted.small_classes, "Classes with objects inside one 4x4 cell")->capture_default_str();
  synth->add_option("--signal-ratio", planted.signal_ratio, "Class direction norm over noise norm")->capture_default_str();
  synth->add_option("--positive-rate", planted.positive_rate, "Share of images containing each class")->capture_default_str();
  synth->add_option("--seed", planted.seed, "Generator seed")->capture_default_str();

  // bench
  auto* bench = app.add_subcommand("bench", "Run simulated-oracle sessions and aggregate MAP / coverage AUCs");
  DatasetArgs bench_data;
  bench_data.add_to(bench, true);
  BenchConfig bc;
  bc.strategies = {"go", "lo-all", "gl-concat-all"};
  std::vector<std::string> grid_texts{"2x2"};
  std::string selection = "uncertainty";
  std::string bench_out;
  bench->add_option("--strategies", bc.strategies, "Strategy ids")->delimiter(',')->capture_default_str();
  bench->add_option("--grids", grid_texts, "Patch grids, e.g. 2x2,4x4")->delimiter(',')->capture_default_str();
  bench->add_option("--classes", bc.classes, "Classes to run (default: all annotated)")->delimiter(',');
  bench->add_option("-Q,--Q,--queries", bc.queries_per_class, "Queries per class")->capture_default_str();
  bench->add_option("--n-positive", bc.n_positive, "Positives per query")->capture_default_str();
  bench->add_option("--n-negative", bc.n_negative, "Negatives per query")->capture_default_str();
  bench->add_option("-T,--T,--iterations", bc.max_iterations, "Iterations per session")->capture_default_str();
  bench->add_option("-b,--budget", bc.budget, "Images annotated per iteration")->capture_default_str();
  bench->add_option("--seed", bc.seed, "Global seed")->capture_default_str();
  bench->add_option("-j,--parallelism", bc.parallelism, "Worker threads")->capture_default_str();
  bench->add_option("--selection", selection, "uncertainty | random")->capture_default_str();
  bench->add_option("--C", bc.train.C, "SVM regularization constant")->capture_default_str();
  bench->add_option("--coverage-k", bc.coverage.k, "Clusters per coverage clustering")->capture_default_str();
  bench->add_option("--coverage-clusterings", bc.coverage.clusterings, "Number of coverage clusterings")->capture_default_str();
  bench->add_flag("--map-exclude-labeled", bc.metrics.map_exclude_labeled, "Drop labeled images from the MAP ranking");
  bench->add_flag("--coverage-exclude-query", bc.metrics.coverage_exclude_query, "Do not count the query positive");
  bench->add_flag("--pool-keep-negative-patches", bc.pool_keep_negative_patches, "gl-pool: keep non-object patches of positives as negatives");
  bench->add_option("--min-overlap", bc.min_overlap_fraction, "Minimum cell share for a patch to count as overlapped")->capture_default_str();
  bench->add_option("--out", bench_out, "Directory for report.json, series.csv, summary.csv");

  // queries
  auto* queries = app.add_subcommand("queries", "Generate benchmark queries for a class");
  DatasetArgs query_data;
  query_data.add_to(queries, true);
  std::string query_class;
  int query_q = 10;
  int query_nn = 5;
  std::uint64_t query_seed = 0;
  std::string query_out;
  queries->add_option("--class", query_class, "Class label")->required();
  queries->add_option("-Q,--queries", query_q, "Number of queries")->capture_default_str();
  queries->add_option("--n-negative", query_nn, "Negatives per query")->capture_default_str();
  queries->add_option("--seed", query_seed, "Seed")->capture_default_str();
  queries->add_option("--out", query_out, "Output JSON file (default: stdout)");

  // profile
  auto* profile = app.add_subcommand("profile", "Object size profile and grid recommendation");
  std::string profile_manifest;
  std::string profile_annotations;
  std::string profile_out;
  profile->add_option("--manifest", profile_manifest, "Image manifest JSON")->required()->check(CLI::ExistingFile);
  profile->add_option("--annotations", profile_annotations, "Annotations JSON")->required()->check(CLI::ExistingFile);
  profile->add_option("--out", profile_out, "CSV output file (default: stdout)");

  // eval
  auto* eval = app.add_subcommand("eval", "Recompute AUC summaries from a bench report");
  std::string eval_report;
  std::string eval_out;
  eval->add_option("--report", eval_report, "report.json written by bench")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "Write summary.csv here");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve live sessions over HTTP");
  DatasetArgs serve_data;
  serve_data.add_to(serve, false);
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string state_dir;
  std::string image_root = ".";
  std::size_t async_min = 50000;
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port")->capture_default_str();
  serve->add_option("--state-dir", state_dir, "Persist session checkpoints here");
  serve->add_option("--image-root", image_root, "Base directory for relative image paths")->capture_default_str();
  serve->add_option("--async-min-images", async_min, "Dataset size from which steps run in the background")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto data = synthetic::generate_planted(planted);
      const auto files = synthetic::write_dataset(*data.dataset, synth_out);
      std::printf("wrote %zu images, %zu classes to %s\n", data.dataset->size(), data.class_labels.size(), synth_out.c_str());
      for (const auto& f : files) std::printf("  %s\n", f.string().c_str());
    } else if (*bench) {
      bc.grids = parse_grids(grid_texts);
      bc.selection = parse_selection(selection);
      const auto dataset = bench_data.load();
      const auto report = run_bench(dataset, bc);
      for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      for (const auto& f : report.failures) {
        std::fprintf(stderr, "failed: %s %s %s: %s\n", f.query_id.c_str(), f.strategy.c_str(), f.grid.c_str(), f.message.c_str());
      }
      std::fputs(summary_table(report.aggregate).c_str(), stdout);
      if (!bench_out.empty()) write_bench_outputs(report, bench_out);
      return report.failures.empty() ? 0 : 2;
    } else if (*queries) {
      const auto dataset = query_data.load();
      Rng rng(query_seed);
      const auto list = generate_queries(*dataset, query_class, query_q, 1, query_nn, rng,
                                         [](const std::string& w) { std::fprintf(stderr, "warning: %s\n", w.c_str()); });
      nlohmann::json doc = nlohmann::json::array();
      for (const auto& g : list) doc.push_back(query_to_json(g));
      if (query_out.empty()) {
        std::cout << doc.dump(2) << '\n';
      } else {
        write_json_file(query_out, doc);
      }
    } else if (*profile) {
      const auto manifest = manifest_from_json(read_json_file(profile_manifest), profile_manifest);
      const auto annotations = annotations_from_json(read_json_file(profile_annotations), manifest);
      const auto p = size_profile(annotations, manifest);
      const auto csv = size_profile_csv(p);
      if (profile_out.empty()) {
        std::fputs(csv.c_str(), stdout);
      } else {
        write_text_file(profile_out, csv);
      }
      std::printf("recommended grid: %s\n", p.recommendation.c_str());
    } else if (*eval) {
      const auto runs = recompute_summaries(read_json_file(eval_report));
      const auto rows = aggregate_runs(runs);
      std::fputs(summary_table(rows).c_str(), stdout);
      if (!eval_out.empty()) write_text_file(eval_out, summary_csv(rows));
    } else if (*serve) {
      ServiceOptions options;
      if (!state_dir.empty()) options.state_dir = state_dir;
      options.image_root = image_root;
      options.async_min_images = async_min;
      SessionService service(serve_data.load(), options);
      httplib::Server server;
      bind_routes(server, service);
      std::printf("listening on http://%s:%d\n", host.c_str(), port);
      std::fflush(stdout);
      if (!server.listen(host, port)) {
        std::fprintf(stderr, "error: cannot listen on %s:%d\n", host.c_str(), port);
        return 1;
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
