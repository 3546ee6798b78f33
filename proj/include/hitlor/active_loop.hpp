#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hitlor/classifier.hpp"
#include "hitlor/error.hpp"
#include "hitlor/feature_store.hpp"
#include "hitlor/representation.hpp"
#include "hitlor/rng.hpp"

namespace hitlor {

// Uncertainty score: 1 at s = 0.5, falling to 0.5 at s = 0 or 1.
inline double al_score(double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("score must lie in [0, 1]", "score");
  return 1.0 - std::abs(0.5 - s);
}

// The b unlabeled images with the highest uncertainty, most uncertain first,
// ties by ascending id.
inline std::vector<std::string> select_batch(const std::map<std::string, double>& scores,
                                             const std::set<std::string>& labeled, int b) {
  if (b < 1) throw ValidationError("budget must be at least 1", "budget");
  std::vector<std::pair<double, const std::string*>> pool;
  for (const auto& [id, s] : scores) {
    if (!labeled.contains(id)) pool.emplace_back(al_score(s), &id);
  }
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(b), pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(),
                    [](const auto& a, const auto& c) {
                      if (a.first != c.first) return a.first > c.first;
                      return *a.second < *c.second;
                    });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back(*pool[i].second);
  return out;
}

// Row-indexed form used inside sessions. `id_rank` orders rows by id.
inline std::vector<std::size_t> select_batch_rows(std::span<const double> scores, std::span<const char> labeled,
                                                  const Dataset& dataset, int b) {
  if (b < 1) throw ValidationError("budget must be at least 1", "budget");
  std::vector<std::pair<double, std::size_t>> pool;
  for (std::size_t row = 0; row < scores.size(); ++row) {
    if (!labeled[row]) pool.emplace_back(al_score(scores[row]), row);
  }
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(b), pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(),
                    [&](const auto& a, const auto& c) {
                      if (a.first != c.first) return a.first > c.first;
                      return dataset.id_rank(a.second) < dataset.id_rank(c.second);
                    });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back(pool[i].second);
  return out;
}

struct Feedback {
  std::string image_id;
  bool relevant = false;
  std::optional<BBox> bbox;
};

// Answers relevance questions for a batch of images. Implementations may
// block (a human) or throw OracleAbort to pause the session.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual std::vector<Feedback> annotate(std::span<const std::string> image_ids, const std::string& class_label) = 0;
};

// Ground-truth stand-in for the user: relevant iff the image holds an
// instance of the class, answering with the largest instance's box.
class SimulatedOracle : public Oracle {
 public:
  explicit SimulatedOracle(std::shared_ptr<const Dataset> dataset) : dataset_(std::move(dataset)) {
    if (!dataset_->has_annotations()) throw ConfigError("the simulated oracle needs ground-truth annotations");
  }

  std::optional<BBox> salient_instance(const std::string& image_id, const std::string& class_label) const {
    std::optional<BBox> best;
    for (const auto& inst : dataset_->annotations().instances(image_id)) {
      if (inst.class_label != class_label) continue;
      if (!best || inst.bbox.area() > best->area() || (inst.bbox.area() == best->area() && inst.bbox < *best)) {
        best = inst.bbox;
      }
    }
    return best;
  }

  std::vector<Feedback> annotate(std::span<const std::string> image_ids, const std::string& class_label) override {
    std::vector<Feedback> out;
    for (const auto& id : image_ids) {
      if (!dataset_->manifest().find(id)) throw OracleError("oracle asked about unknown image '" + id + "'");
      auto box = salient_instance(id, class_label);
      out.push_back({id, box.has_value(), box});
    }
    return out;
  }

 private:
  std::shared_ptr<const Dataset> dataset_;
};

inline std::unique_ptr<Oracle> simulated_oracle(std::shared_ptr<const Dataset> dataset) {
  return std::make_unique<SimulatedOracle>(std::move(dataset));
}

enum class QueryMode { Benchmark, Live };
enum class Selection { Uncertainty, Random };

struct QuerySpec {
  QueryMode mode = QueryMode::Benchmark;
  std::string class_label;
  std::string positive_id;
  BBox positive_bbox;
  // Explicit negatives; when empty, `auto_negatives` are sampled.
  std::vector<std::string> negatives;
  int auto_negatives = 5;
};

struct SessionConfig {
  Strategy strategy;
  int budget = 10;
  int max_iterations = 25;
  std::uint64_t seed = 0;
  TrainConfig train;
  Selection selection = Selection::Uncertainty;
};

enum class SessionStatus { Running, Paused, Finished, Exhausted, Stopped };

inline std::string_view status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::Running: return "running";
    case SessionStatus::Paused: return "paused";
    case SessionStatus::Finished: return "finished";
    case SessionStatus::Exhausted: return "exhausted";
    case SessionStatus::Stopped: return "stopped";
  }
  return "?";
}

inline SessionStatus parse_status(std::string_view s) {
  for (auto v : {SessionStatus::Running, SessionStatus::Paused, SessionStatus::Finished, SessionStatus::Exhausted,
                 SessionStatus::Stopped}) {
    if (status_name(v) == s) return v;
  }
  throw ValidationError("unknown session status '" + std::string(s) + "'");
}

struct LabeledEntry {
  int label = 0;
  std::optional<BBox> bbox;
  int iteration_added = 0;
  std::optional<int> negative_cell;
};

struct HistoryEntry {
  int iteration = 0;
  std::vector<std::string> batch;
  std::vector<Feedback> feedback;
};

struct IterationResult {
  int iteration = 0;  // 0-based index of the iteration that produced this
  std::vector<std::string> batch;
  std::vector<Feedback> feedback;
  std::vector<double> scores;  // image score per dataset row, all of D
  TrainStats train_stats;
};

// Model, scores and batch computed for the current iteration, waiting for
// feedback.
struct Proposal {
  int iteration = 0;
  LinearModel model;
  std::vector<double> scores;
  std::vector<std::string> batch;
};

// One interactive retrieval run: labeled set, current model, iteration
// counter and history. Single writer; the dataset and view index are
// shared read-only.
class Session {
 public:
  Session(SessionConfig config, QuerySpec query, std::shared_ptr<const Dataset> dataset,
          std::shared_ptr<const ViewIndex> views = nullptr)
      : config_(std::move(config)), query_(std::move(query)), dataset_(std::move(dataset)), rng_(config_.seed) {
    validate_config();
    attach_views(std::move(views));
    initialize();
  }

  const SessionConfig& config() const noexcept { return config_; }
  const QuerySpec& query() const noexcept { return query_; }
  const Dataset& dataset() const noexcept { return *dataset_; }
  std::shared_ptr<const Dataset> dataset_ptr() const noexcept { return dataset_; }
  const std::map<std::string, LabeledEntry>& labeled() const noexcept { return labeled_; }
  int iteration() const noexcept { return iteration_; }
  SessionStatus status() const noexcept { return status_; }
  bool done() const noexcept {
    return status_ == SessionStatus::Finished || status_ == SessionStatus::Exhausted ||
           status_ == SessionStatus::Stopped;
  }
  const std::vector<HistoryEntry>& history() const noexcept { return history_; }
  const std::optional<Proposal>& pending() const noexcept { return pending_; }
  const std::optional<LinearModel>& model() const noexcept { return model_; }
  const ViewIndex& views() const noexcept { return *views_; }
  const Rng& rng() const noexcept { return rng_; }

  std::size_t positives() const {
    return static_cast<std::size_t>(
        std::count_if(labeled_.begin(), labeled_.end(), [](const auto& kv) { return kv.second.label == 1; }));
  }

  std::vector<LabeledSample> training_samples() const {
    std::vector<LabeledSample> out;
    Rng unused(0);
    for (const auto& [id, entry] : labeled_) {
      auto samples = build_training_samples(config_.strategy, {id, entry.label, entry.bbox, entry.negative_cell},
                                            *dataset_, unused);
      for (auto& s : samples) out.push_back(std::move(s));
    }
    return out;
  }

  // Retrain, score all of D and select the next batch among unlabeled
  // images. Idempotent while a proposal is pending.
  const Proposal& propose() {
    if (pending_) return *pending_;
    if (done()) throw Error("session is " + std::string(status_name(status_)));
    pending_ = compute_proposal(std::nullopt);
    if (pending_->batch.empty()) status_ = SessionStatus::Exhausted;
    return *pending_;
  }

  // Merge feedback for the pending batch and advance the iteration.
  IterationResult ingest(std::vector<Feedback> feedback) {
    if (!pending_) throw Error("no batch is awaiting feedback");
    const auto& batch = pending_->batch;
    if (feedback.size() != batch.size()) {
      throw ValidationError("feedback covers " + std::to_string(feedback.size()) + " images, the batch has " +
                            std::to_string(batch.size()), "feedback");
    }
    std::map<std::string, Feedback> by_id;
    for (auto& f : feedback) {
      const std::string id = f.image_id;
      if (!by_id.emplace(id, std::move(f)).second) throw ValidationError("duplicate feedback for '" + id + "'", "feedback");
    }
    std::vector<Feedback> ordered;
    for (const auto& id : batch) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw ValidationError("feedback is missing image '" + id + "'", "feedback");
      Feedback f = std::move(it->second);
      const auto& entry = dataset_->manifest().at(id);
      if (f.relevant) {
        if (!f.bbox) f.bbox = BBox::full_image(entry.width, entry.height);
        validate_bbox(*f.bbox, entry.width, entry.height);
      } else {
        f.bbox.reset();
      }
      ordered.push_back(std::move(f));
    }

    for (const auto& f : ordered) add_label(f.image_id, f.relevant ? 1 : 0, f.bbox, iteration_ + 1);

    IterationResult result;
    result.iteration = iteration_;
    result.batch = batch;
    result.feedback = ordered;
    result.scores = std::move(pending_->scores);
    result.train_stats = pending_->model.stats;
    model_ = std::move(pending_->model);
    history_.push_back({iteration_, batch, std::move(ordered)});
    pending_.reset();

    ++iteration_;
    if (status_ == SessionStatus::Paused) status_ = SessionStatus::Running;
    if (iteration_ >= config_.max_iterations) {
      status_ = SessionStatus::Finished;
    } else if (labeled_.size() >= dataset_->size()) {
      status_ = SessionStatus::Exhausted;
    }
    return result;
  }

  // One full round against an oracle. An OracleAbort pauses the session and
  // leaves the proposal pending so the round can be retried.
  IterationResult run_iteration(Oracle& oracle) {
    if (status_ == SessionStatus::Paused) status_ = SessionStatus::Running;
    const Proposal& proposal = propose();
    if (proposal.batch.empty()) {
      IterationResult result;
      result.iteration = iteration_;
      result.scores = proposal.scores;
      result.train_stats = proposal.model.stats;
      model_ = proposal.model;
      pending_.reset();
      return result;
    }
    std::vector<Feedback> answers;
    try {
      answers = oracle.annotate(proposal.batch, query_.class_label);
    } catch (const OracleAbort&) {
      status_ = SessionStatus::Paused;
      throw;
    }
    return ingest(std::move(answers));
  }

  std::vector<IterationResult> run(Oracle& oracle) {
    std::vector<IterationResult> out;
    while (!done()) {
      auto result = run_iteration(oracle);
      const bool empty = result.batch.empty();
      out.push_back(std::move(result));
      if (empty) break;
    }
    return out;
  }

  void stop() {
    pending_.reset();
    status_ = SessionStatus::Stopped;
  }

  nlohmann::json checkpoint() const;
  static Session restore(const nlohmann::json& doc, std::shared_ptr<const Dataset> dataset,
                         std::shared_ptr<const ViewIndex> views = nullptr);

 private:
  struct RestoreTag {};
  Session(RestoreTag, SessionConfig config, QuerySpec query, std::shared_ptr<const Dataset> dataset,
          std::shared_ptr<const ViewIndex> views)
      : config_(std::move(config)), query_(std::move(query)), dataset_(std::move(dataset)), rng_(config_.seed) {
    validate_config();
    attach_views(std::move(views));
  }

  void validate_config() const {
    if (!dataset_) throw ConfigError("session needs a dataset");
    if (config_.budget < 1) throw ConfigError("budget must be at least 1");
    if (config_.max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
    check_strategy(config_.strategy, *dataset_);
  }

  void attach_views(std::shared_ptr<const ViewIndex> views) {
    if (views) {
      if (views->strategy().name() != config_.strategy.name() || views->strategy().grid != config_.strategy.grid ||
          views->images() != dataset_->size()) {
        throw ConfigError("view index was built for a different strategy or dataset");
      }
      views_ = std::move(views);
    } else {
      views_ = std::make_shared<const ViewIndex>(config_.strategy, *dataset_, config_.train.l2_normalize_inputs);
    }
  }

  void initialize() {
    const auto& manifest = dataset_->manifest();
    const auto positive_row = manifest.find(query_.positive_id);
    if (!positive_row) throw QueryError("query positive '" + query_.positive_id + "' is not in the dataset");
    const auto& entry = manifest[*positive_row];
    validate_bbox(query_.positive_bbox, entry.width, entry.height);

    const bool benchmark = query_.mode == QueryMode::Benchmark;
    if (benchmark) {
      if (!dataset_->has_annotations()) throw ConfigError("benchmark queries need ground-truth annotations");
      if (!dataset_->annotations().contains_class(query_.positive_id, query_.class_label)) {
        throw QueryError("query positive '" + query_.positive_id + "' has no instance of class '" +
                         query_.class_label + "'");
      }
    }

    std::vector<std::string> negatives = query_.negatives;
    if (negatives.empty()) {
      if (query_.auto_negatives <= 0) {
        throw ConfigError("a query needs at least one negative image; training cannot start without one");
      }
      std::vector<std::string> pool;
      for (const auto& img : manifest.images()) {
        if (img.id == query_.positive_id) continue;
        if (benchmark && dataset_->annotations().contains_class(img.id, query_.class_label)) continue;
        pool.push_back(img.id);
      }
      if (static_cast<std::size_t>(query_.auto_negatives) > pool.size()) {
        throw QueryError("cannot sample " + std::to_string(query_.auto_negatives) + " negatives from " +
                         std::to_string(pool.size()) + " candidates");
      }
      negatives = rng_.sample_without_replacement<std::string>(pool, static_cast<std::size_t>(query_.auto_negatives));
    }

    add_label(query_.positive_id, 1, query_.positive_bbox, 0);
    for (const auto& id : negatives) {
      if (!manifest.find(id)) throw QueryError("query negative '" + id + "' is not in the dataset");
      if (id == query_.positive_id) throw QueryError("image '" + id + "' is both the positive and a negative");
      if (labeled_.contains(id)) throw QueryError("negative '" + id + "' listed twice");
      if (benchmark && dataset_->annotations().contains_class(id, query_.class_label)) {
        throw QueryError("negative '" + id + "' contains class '" + query_.class_label + "'");
      }
      add_label(id, 0, std::nullopt, 0);
    }
    query_.negatives = negatives;
  }

  void add_label(const std::string& id, int label, std::optional<BBox> bbox, int iteration) {
    if (labeled_.contains(id)) throw Error("image '" + id + "' is already labeled");
    LabeledEntry entry{label, std::move(bbox), iteration, std::nullopt};
    const auto& strategy = config_.strategy;
    if (label == 0 && strategy.uses_grid() && strategy.base == LocalBase::OneRand) {
      entry.negative_cell = static_cast<int>(rng_.uniform_index(static_cast<std::uint64_t>(strategy.grid.cells())));
    }
    labeled_.emplace(id, std::move(entry));
  }

  Proposal compute_proposal(std::optional<std::vector<std::string>> fixed_batch) {
    Proposal p;
    p.iteration = iteration_;
    p.model = train(training_samples(), config_.train, config_.strategy.segments());
    p.scores = views_->score_all(p.model);
    if (fixed_batch) {
      p.batch = std::move(*fixed_batch);
      return p;
    }
    std::vector<char> mask(dataset_->size(), 0);
    for (const auto& [id, entry] : labeled_) mask[dataset_->manifest().row_of(id)] = 1;
    std::vector<std::size_t> rows;
    if (config_.selection == Selection::Uncertainty) {
      rows = select_batch_rows(p.scores, mask, *dataset_, config_.budget);
    } else {
      std::vector<std::size_t> pool;
      for (std::size_t r = 0; r < mask.size(); ++r) {
        if (!mask[r]) pool.push_back(r);
      }
      rows = rng_.sample_without_replacement<std::size_t>(pool, static_cast<std::size_t>(config_.budget));
    }
    for (std::size_t r : rows) p.batch.push_back(dataset_->manifest()[r].id);
    return p;
  }

  SessionConfig config_;
  QuerySpec query_;
  std::shared_ptr<const Dataset> dataset_;
  std::shared_ptr<const ViewIndex> views_;
  Rng rng_;
  std::map<std::string, LabeledEntry> labeled_;
  int iteration_ = 0;
  SessionStatus status_ = SessionStatus::Running;
  std::vector<HistoryEntry> history_;
  std::optional<Proposal> pending_;
  std::optional<LinearModel> model_;
};

inline Session init_session(const QuerySpec& query, const SessionConfig& config, std::shared_ptr<const Dataset> dataset,
                            std::shared_ptr<const ViewIndex> views = nullptr) {
  return Session(config, query, std::move(dataset), std::move(views));
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json bbox_json(const std::optional<BBox>& b) {
  if (!b) return nullptr;
  return nlohmann::json::array({b->x_min, b->y_min, b->x_max, b->y_max});
}

inline std::optional<BBox> bbox_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_array() || j.size() != 4) throw ValidationError("bbox must be [x_min, y_min, x_max, y_max]", "bbox");
  for (const auto& v : j) {
    if (!v.is_number()) throw ValidationError("bbox coordinates must be numbers", "bbox");
  }
  return BBox{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline nlohmann::json feedback_json(const Feedback& f) {
  nlohmann::json j{{"image_id", f.image_id}, {"relevant", f.relevant}};
  if (f.bbox) j["bbox"] = bbox_json(f.bbox);
  return j;
}

inline Feedback feedback_from(const nlohmann::json& j) {
  Feedback f;
  f.image_id = j.at("image_id").get<std::string>();
  f.relevant = j.at("relevant").get<bool>();
  if (j.contains("bbox")) f.bbox = bbox_from(j["bbox"]);
  return f;
}

}  // namespace detail

inline nlohmann::json strategy_to_json(const Strategy& s) {
  return {{"id", s.name()},
          {"grid", s.grid.name()},
          {"pool_keep_negative_patches", s.pool_keep_negative_patches},
          {"min_overlap_fraction", s.min_overlap_fraction}};
}

inline Strategy strategy_from_json(const nlohmann::json& j) {
  Strategy s = Strategy::parse(j.at("id").get<std::string>(), parse_grid(j.value("grid", std::string("1x1"))));
  s.pool_keep_negative_patches = j.value("pool_keep_negative_patches", false);
  s.min_overlap_fraction = j.value("min_overlap_fraction", 0.0);
  return s;
}

inline nlohmann::json train_config_to_json(const TrainConfig& t) {
  return {{"C", t.C},
          {"class_weighting", t.class_weighting == ClassWeighting::Balanced ? "balanced" : "uniform"},
          {"max_epochs", t.max_epochs},
          {"optimality_tolerance", t.optimality_tolerance},
          {"polish_rank", t.polish_rank},
          {"l2_normalize_inputs", t.l2_normalize_inputs},
          {"calibration", {{"scale", t.calibration.scale}, {"offset", t.calibration.offset}}}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig t;
  t.C = j.value("C", t.C);
  t.class_weighting = j.value("class_weighting", std::string("balanced")) == "uniform" ? ClassWeighting::Uniform
                                                                                      : ClassWeighting::Balanced;
  t.max_epochs = j.value("max_epochs", t.max_epochs);
  t.optimality_tolerance = j.value("optimality_tolerance", t.optimality_tolerance);
  t.polish_rank = j.value("polish_rank", t.polish_rank);
  t.l2_normalize_inputs = j.value("l2_normalize_inputs", t.l2_normalize_inputs);
  if (j.contains("calibration")) {
    t.calibration.scale = j["calibration"].value("scale", 1.0);
    t.calibration.offset = j["calibration"].value("offset", 0.0);
  }
  return t;
}

inline nlohmann::json Session::checkpoint() const {
  nlohmann::json labeled = nlohmann::json::object();
  for (const auto& [id, e] : labeled_) {
    nlohmann::json entry{{"label", e.label}, {"bbox", detail::bbox_json(e.bbox)}, {"iteration_added", e.iteration_added}};
    entry["negative_cell"] = e.negative_cell ? nlohmann::json(*e.negative_cell) : nlohmann::json(nullptr);
    labeled[id] = std::move(entry);
  }
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : history_) {
    nlohmann::json fb = nlohmann::json::array();
    for (const auto& f : h.feedback) fb.push_back(detail::feedback_json(f));
    history.push_back({{"iteration", h.iteration}, {"batch", h.batch}, {"feedback", std::move(fb)}});
  }
  return {
      {"format", "hitlor-session/1"},
      {"config",
       {{"strategy", strategy_to_json(config_.strategy)},
        {"budget", config_.budget},
        {"max_iterations", config_.max_iterations},
        {"seed", config_.seed},
        {"selection", config_.selection == Selection::Uncertainty ? "uncertainty" : "random"},
        {"train", train_config_to_json(config_.train)}}},
      {"query",
       {{"mode", query_.mode == QueryMode::Benchmark ? "benchmark" : "live"},
        {"class", query_.class_label},
        {"positive", {{"image_id", query_.positive_id}, {"bbox", detail::bbox_json(query_.positive_bbox)}}},
        {"negatives", query_.negatives}}},
      {"labeled", std::move(labeled)},
      {"iteration", iteration_},
      {"status", status_name(status_)},
      {"rng", rng_.state()},
      {"history", std::move(history)},
      {"pending_batch", pending_ ? nlohmann::json(pending_->batch) : nlohmann::json(nullptr)},
      {"model", model_ ? model_to_json(*model_) : nlohmann::json(nullptr)},
  };
}

inline Session Session::restore(const nlohmann::json& doc, std::shared_ptr<const Dataset> dataset,
                                std::shared_ptr<const ViewIndex> views) {
  try {
    if (doc.value("format", std::string{}) != "hitlor-session/1") throw ValidationError("not a session checkpoint");
    const auto& c = doc.at("config");
    SessionConfig config;
    config.strategy = strategy_from_json(c.at("strategy"));
    config.budget = c.at("budget").get<int>();
    config.max_iterations = c.at("max_iterations").get<int>();
    config.seed = c.at("seed").get<std::uint64_t>();
    config.selection = c.value("selection", std::string("uncertainty")) == "random" ? Selection::Random
                                                                                   : Selection::Uncertainty;
    config.train = train_config_from_json(c.at("train"));

    const auto& q = doc.at("query");
    QuerySpec query;
    query.mode = q.at("mode").get<std::string>() == "live" ? QueryMode::Live : QueryMode::Benchmark;
    query.class_label = q.at("class").get<std::string>();
    query.positive_id = q.at("positive").at("image_id").get<std::string>();
    query.positive_bbox = *detail::bbox_from(q.at("positive").at("bbox"));
    query.negatives = q.at("negatives").get<std::vector<std::string>>();

    Session s(RestoreTag{}, std::move(config), std::move(query), std::move(dataset), std::move(views));
    for (const auto& [id, e] : doc.at("labeled").items()) {
      s.dataset_->manifest().row_of(id);
      LabeledEntry entry;
      entry.label = e.at("label").get<int>();
      entry.bbox = detail::bbox_from(e.at("bbox"));
      entry.iteration_added = e.at("iteration_added").get<int>();
      if (!e.at("negative_cell").is_null()) entry.negative_cell = e["negative_cell"].get<int>();
      s.labeled_.emplace(id, std::move(entry));
    }
    s.iteration_ = doc.at("iteration").get<int>();
    s.status_ = parse_status(doc.at("status").get<std::string>());
    s.rng_.restore(doc.at("rng").get<std::string>());
    for (const auto& h : doc.at("history")) {
      HistoryEntry entry{h.at("iteration").get<int>(), h.at("batch").get<std::vector<std::string>>(), {}};
      for (const auto& f : h.at("feedback")) entry.feedback.push_back(detail::feedback_from(f));
      s.history_.push_back(std::move(entry));
    }
    if (!doc.at("model").is_null()) s.model_ = model_from_json(doc["model"]);
    if (!doc.at("pending_batch").is_null()) {
      // The model is a deterministic function of the labeled set, so it is
      // recomputed rather than stored; the batch is kept verbatim because
      // random selection already consumed its draws.
      s.pending_ = s.compute_proposal(doc["pending_batch"].get<std::vector<std::string>>());
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed session checkpoint: ") + e.what());
  }
}

}  // namespace hitlor
