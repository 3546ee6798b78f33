#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "hitlor/active_loop.hpp"
#include "hitlor/classifier.hpp"
#include "hitlor/evaluation.hpp"
#include "hitlor/feature_store.hpp"

namespace hitlor {

// Error carrying an HTTP status and a machine-readable code.
class ApiError : public Error {
 public:
  ApiError(int status, std::string code, std::string message, std::string field = {})
      : Error(std::move(message)), status_(status), code_(std::move(code)), field_(std::move(field)) {}
  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int status_;
  std::string code_;
  std::string field_;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

inline nlohmann::json error_body(const std::string& code, const std::string& message, const std::string& field = {}) {
  nlohmann::json j{{"code", code}, {"message", message}};
  if (!field.empty()) j["field"] = field;
  return j;
}

struct ServiceOptions {
  // Checkpoints are written here after every iteration and reloaded on start.
  std::optional<std::filesystem::path> state_dir;
  // Relative manifest image paths resolve against this directory.
  std::filesystem::path image_root = ".";
  // Datasets at least this large run feedback steps in the background and
  // answer with status "computing".
  std::size_t async_min_images = 50000;
  TrainConfig train;
};

// View tags in the order ViewIndex stores them.
inline std::vector<std::string> view_tags(const Strategy& strategy) {
  if (strategy.is_global_only()) return {"global"};
  std::vector<std::string> tags;
  for (int m = 0; m < strategy.grid.cells(); ++m) tags.push_back("cell:" + std::to_string(m));
  if (strategy.base == LocalBase::OneProto) tags.emplace_back("prototype");
  return tags;
}

// Live sessions addressed by opaque ids. Every session has its own mutex
// (single writer); the dataset and view indexes are shared read-only.
class SessionService {
 public:
  explicit SessionService(std::shared_ptr<const Dataset> dataset, ServiceOptions options = {})
      : dataset_(std::move(dataset)), options_(std::move(options)), id_rng_(std::random_device{}()) {
    if (!dataset_) throw ConfigError("service needs a dataset");
    if (options_.state_dir) {
      std::filesystem::create_directories(*options_.state_dir);
      load_state();
    }
  }

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  const Dataset& dataset() const noexcept { return *dataset_; }

  ApiResponse create_session(const nlohmann::json& request) {
    return guarded([&] { return do_create(request); });
  }
  ApiResponse get_session(const std::string& id) {
    return guarded([&] {
      auto slot = find(id);
      if (slot->computing) return ApiResponse{200, computing_handle(*slot)};
      std::lock_guard lock(slot->mutex);
      return ApiResponse{200, handle_json(*slot)};
    });
  }
  ApiResponse get_batch(const std::string& id) {
    return guarded([&] {
      auto slot = find(id);
      if (slot->computing) return ApiResponse{200, {{"session", computing_handle(*slot)}, {"batch", nullptr}}};
      std::lock_guard lock(slot->mutex);
      return ApiResponse{200, {{"session", handle_json(*slot)}, {"batch", batch_json(*slot)}}};
    });
  }
  ApiResponse submit_feedback(const std::string& id, const nlohmann::json& body) {
    return guarded([&] { return do_feedback(id, body); });
  }
  ApiResponse get_ranking(const std::string& id, std::optional<long long> limit) {
    return guarded([&] { return do_ranking(id, limit); });
  }
  ApiResponse stop(const std::string& id) {
    return guarded([&] {
      auto slot = find(id);
      if (slot->computing) throw ApiError(409, "computing", "session is computing; retry when it is done");
      std::lock_guard lock(slot->mutex);
      if (!slot->session->done()) {
        slot->session->stop();
        finalize_model(*slot);
        persist(*slot);
      }
      return ApiResponse{200, handle_json(*slot)};
    });
  }
  ApiResponse datasets() const {
    return guarded([&] { return ApiResponse{200, {{"datasets", nlohmann::json::array({dataset_summary()})}}}; });
  }

  // Resolved file of an image, or ApiError 404.
  std::filesystem::path image_file(const std::string& image_id) const {
    const auto row = dataset_->manifest().find(image_id);
    if (!row) throw ApiError(404, "not_found", "unknown image '" + image_id + "'");
    const auto& entry = dataset_->manifest()[*row];
    if (!entry.path) throw ApiError(404, "no_file", "image '" + image_id + "' has no file path in the manifest");
    std::filesystem::path p(*entry.path);
    if (p.is_relative()) p = options_.image_root / p;
    if (!std::filesystem::is_regular_file(p)) throw ApiError(404, "no_file", "file for image '" + image_id + "' is missing");
    return p;
  }

  std::vector<std::string> session_ids() const {
    std::shared_lock lock(sessions_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, slot] : sessions_) out.push_back(id);
    return out;
  }

  // Blocks until no background step is running for the session.
  void wait_idle(const std::string& id) {
    auto slot = find(id);
    std::unique_lock lock(slot->mutex);
    slot->idle.wait(lock, [&] { return !slot->computing; });
  }

  // Checkpoint of a session (copy), for tests and export.
  nlohmann::json checkpoint(const std::string& id) {
    auto slot = find(id);
    std::lock_guard lock(slot->mutex);
    return slot->session->checkpoint();
  }

  ~SessionService() {
    std::unique_lock lock(sessions_mutex_);
    for (auto& [id, slot] : sessions_) {
      if (slot->worker.joinable()) slot->worker.join();
    }
  }

 private:
  struct Slot {
    std::mutex mutex;
    std::condition_variable idle;
    std::string id;
    std::string created_at;
    bool simulated = false;
    std::string oracle_class;
    std::optional<Session> session;
    std::optional<LinearModel> model;  // latest trained model
    std::vector<double> scores;        // its image scores by row
    std::map<std::string, ApiResponse> replies;  // by batch nonce
    std::atomic<bool> computing{false};
    std::string computing_nonce;
    std::atomic<int> iteration{0};
    std::thread worker;
  };

  template <class F>
  static ApiResponse guarded(F&& f) {
    try {
      return f();
    } catch (const ApiError& e) {
      return {e.status(), error_body(e.code(), e.what(), e.field())};
    } catch (const ValidationError& e) {
      return {400, error_body("invalid_request", e.what(), e.field())};
    } catch (const QueryError& e) {
      return {400, error_body("invalid_query", e.what())};
    } catch (const ConfigError& e) {
      return {400, error_body("invalid_config", e.what())};
    } catch (const TrainingError& e) {
      return {422, error_body("training_failed", e.what())};
    } catch (const nlohmann::json::exception& e) {
      return {400, error_body("invalid_request", e.what())};
    } catch (const std::exception& e) {
      return {500, error_body("internal", e.what())};
    }
  }

  static std::string now_iso8601() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  std::string new_id() {
    std::unique_lock lock(sessions_mutex_);
    for (;;) {
      char buf[24];
      std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(id_rng_()));
      if (!sessions_.contains(buf)) return buf;
    }
  }

  std::shared_ptr<Slot> find(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ApiError(404, "not_found", "unknown session '" + id + "'");
    return it->second;
  }

  std::shared_ptr<const ViewIndex> views_for(const Strategy& strategy) {
    const auto key = strategy.name() + "@" + strategy.local_grid().name() + (options_.train.l2_normalize_inputs ? "" : "/raw");
    std::lock_guard lock(views_mutex_);
    auto& slot = views_[key];
    if (!slot) slot = std::make_shared<const ViewIndex>(strategy, *dataset_, options_.train.l2_normalize_inputs);
    return slot;
  }

  static std::string nonce_of(const Slot& slot) { return slot.id + ":" + std::to_string(slot.session->iteration()); }

  // ---- request parsing --------------------------------------------------

  template <class T>
  static T field_as(const nlohmann::json& j, const char* key, const std::string& path, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
      return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ApiError(400, "invalid_request", "field '" + path + "' has the wrong type", path);
    }
  }

  ApiResponse do_create(const nlohmann::json& req) {
    if (!req.is_object()) throw ApiError(400, "invalid_request", "request body must be a JSON object");
    const auto strategy_id = field_as<std::string>(req, "strategy", "strategy", "go");
    const auto grid_text = field_as<std::string>(req, "grid", "grid", strategy_id == "go" ? "1x1" : "2x2");
    SessionConfig config;
    try {
      config.strategy = Strategy::parse(strategy_id, parse_grid(grid_text));
      check_strategy(config.strategy, *dataset_);
    } catch (const ConfigError& e) {
      throw ApiError(400, "invalid_request", e.what(), "strategy");
    }
    config.strategy.pool_keep_negative_patches = field_as<bool>(req, "pool_keep_negative_patches", "pool_keep_negative_patches", false);
    config.budget = field_as<int>(req, "budget", "budget", 10);
    config.max_iterations = field_as<int>(req, "max_iterations", "max_iterations", 25);
    config.seed = field_as<std::uint64_t>(req, "seed", "seed", 0);
    config.train = options_.train;
    if (config.budget < 1) throw ApiError(400, "invalid_request", "budget must be at least 1", "budget");
    if (config.max_iterations < 1) throw ApiError(400, "invalid_request", "max_iterations must be at least 1", "max_iterations");
    const auto selection = field_as<std::string>(req, "selection", "selection", "uncertainty");
    if (selection == "uncertainty") {
      config.selection = Selection::Uncertainty;
    } else if (selection == "random") {
      config.selection = Selection::Random;
    } else {
      throw ApiError(400, "invalid_request", "selection must be 'uncertainty' or 'random'", "selection");
    }

    if (!req.contains("query") || !req["query"].is_object()) {
      throw ApiError(400, "invalid_request", "missing query object", "query");
    }
    const auto& q = req["query"];
    QuerySpec query;
    query.class_label = field_as<std::string>(q, "class_label", "query.class_label", "");
    query.positive_id = field_as<std::string>(q, "positive_id", "query.positive_id", "");
    const auto row = dataset_->manifest().find(query.positive_id);
    if (!row) throw ApiError(400, "invalid_request", "unknown image '" + query.positive_id + "'", "query.positive_id");
    const auto& entry = dataset_->manifest()[*row];
    if (!q.contains("bbox")) {
      query.positive_bbox = BBox::full_image(entry.width, entry.height);
    } else {
      try {
        const auto box = detail::bbox_from(q["bbox"]);
        if (!box) throw ValidationError("bbox must not be null", "bbox");
        validate_bbox(*box, entry.width, entry.height);
        query.positive_bbox = *box;
      } catch (const ValidationError& e) {
        throw ApiError(400, "invalid_request", e.what(), "query.bbox");
      }
    }
    query.negatives = field_as<std::vector<std::string>>(q, "negatives", "query.negatives", {});
    for (const auto& id : query.negatives) {
      if (!dataset_->manifest().find(id)) throw ApiError(400, "invalid_request", "unknown image '" + id + "'", "query.negatives");
    }
    query.auto_negatives = field_as<int>(q, "auto_negatives", "query.auto_negatives", 5);

    const nlohmann::json oracle = req.value("oracle", nlohmann::json{{"type", "live"}});
    const auto oracle_type = field_as<std::string>(oracle, "type", "oracle.type", "live");
    bool simulated = false;
    if (oracle_type == "simulated") {
      if (!dataset_->has_annotations()) {
        throw ApiError(409, "no_annotations", "the simulated oracle needs ground-truth annotations", "oracle");
      }
      simulated = true;
      const auto cls = field_as<std::string>(oracle, "class", "oracle.class", query.class_label);
      if (cls.empty()) throw ApiError(400, "invalid_request", "simulated oracle needs a class", "oracle.class");
      if (!query.class_label.empty() && query.class_label != cls) {
        throw ApiError(400, "invalid_request", "oracle class differs from the query class", "oracle.class");
      }
      if (!dataset_->annotations().classes().contains(cls)) {
        throw ApiError(400, "invalid_request", "class '" + cls + "' has no annotations", "oracle.class");
      }
      query.class_label = cls;
      query.mode = QueryMode::Benchmark;
    } else if (oracle_type == "live") {
      query.mode = QueryMode::Live;
    } else {
      throw ApiError(400, "invalid_request", "oracle.type must be 'live' or 'simulated'", "oracle.type");
    }

    auto slot = std::make_shared<Slot>();
    slot->created_at = now_iso8601();
    slot->simulated = simulated;
    slot->oracle_class = simulated ? query.class_label : std::string{};
    slot->session.emplace(config, query, dataset_, views_for(config.strategy));
    advance(*slot);
    slot->id = new_id();
    persist(*slot);
    auto body = nlohmann::json{{"session", handle_json(*slot)}, {"batch", batch_json(*slot)}};
    {
      std::unique_lock lock(sessions_mutex_);
      sessions_.emplace(slot->id, slot);
    }
    return {201, std::move(body)};
  }

  // ---- stepping -----------------------------------------------------------

  // Retrain, score and select the next batch, or train the final model once
  // the session has ended.
  void advance(Slot& slot) {
    Session& s = *slot.session;
    if (!s.done()) {
      const auto& p = s.propose();
      slot.model = p.model;
      slot.scores = p.scores;
    }
    if (s.done()) finalize_model(slot);
    slot.iteration = s.iteration();
  }

  void finalize_model(Slot& slot) {
    Session& s = *slot.session;
    slot.model = train(s.training_samples(), s.config().train, s.config().strategy.segments());
    slot.scores = s.views().score_all(*slot.model);
  }

  ApiResponse do_feedback(const std::string& id, const nlohmann::json& body) {
    if (!body.is_object()) throw ApiError(400, "invalid_request", "request body must be a JSON object");
    auto slot = find(id);
    const auto nonce = field_as<std::string>(body, "nonce", "nonce", "");
    if (slot->computing) {
      if (!nonce.empty() && nonce != slot->computing_nonce) {
        throw ApiError(409, "computing", "another batch is being processed");
      }
      return {202, computing_handle(*slot)};
    }
    std::unique_lock lock(slot->mutex);
    if (!nonce.empty()) {
      const auto it = slot->replies.find(nonce);
      if (it != slot->replies.end()) return it->second;
    }
    Session& s = *slot->session;
    if (s.done()) throw ApiError(410, "finished", "session is " + std::string(status_name(s.status())));
    const auto current = nonce_of(*slot);
    if (!nonce.empty() && nonce != current) {
      throw ApiError(409, "stale_nonce", "nonce does not match the outstanding batch", "nonce");
    }
    const auto& batch = s.pending()->batch;

    std::vector<Feedback> feedback;
    if (body.contains("feedback")) {
      if (!body["feedback"].is_array()) throw ApiError(400, "invalid_request", "feedback must be an array", "feedback");
      try {
        for (const auto& f : body["feedback"]) feedback.push_back(detail::feedback_from(f));
      } catch (const ValidationError& e) {
        throw ApiError(400, "invalid_request", e.what(), e.field().empty() ? "feedback" : "feedback." + e.field());
      } catch (const nlohmann::json::exception&) {
        throw ApiError(400, "invalid_request", "each feedback item needs image_id and relevant", "feedback");
      }
      std::vector<std::string> given;
      for (const auto& f : feedback) given.push_back(f.image_id);
      std::vector<std::string> expected(batch.begin(), batch.end());
      std::sort(given.begin(), given.end());
      std::sort(expected.begin(), expected.end());
      if (given != expected) {
        throw ApiError(409, "batch_mismatch", "feedback ids do not match the outstanding batch", "feedback");
      }
      for (auto& f : feedback) {
        if (!f.relevant || !f.bbox) continue;
        const auto& entry = dataset_->manifest().at(f.image_id);
        try {
          validate_bbox(*f.bbox, entry.width, entry.height);
        } catch (const ValidationError& e) {
          throw ApiError(400, "invalid_request", f.image_id + ": " + e.what(), "feedback.bbox");
        }
      }
    } else if (slot->simulated) {
      SimulatedOracle oracle(dataset_);
      feedback = oracle.annotate(batch, slot->oracle_class);
    } else {
      throw ApiError(400, "invalid_request", "live sessions need a feedback array", "feedback");
    }

    if (dataset_->size() >= options_.async_min_images) {
      slot->computing_nonce = current;
      slot->computing = true;
      lock.unlock();
      if (slot->worker.joinable()) slot->worker.join();
      slot->worker = std::thread([this, slot, current, fb = std::move(feedback)]() mutable {
        std::lock_guard worker_lock(slot->mutex);
        slot->replies[current] = guarded([&] { return step(*slot, std::move(fb)); });
        slot->computing = false;
        slot->idle.notify_all();
      });
      return {202, computing_handle(*slot)};
    }
    auto reply = step(*slot, std::move(feedback));
    slot->replies[current] = reply;
    return reply;
  }

  // Caller holds the slot mutex.
  ApiResponse step(Slot& slot, std::vector<Feedback> feedback) {
    slot.session->ingest(std::move(feedback));
    advance(slot);
    persist(slot);
    nlohmann::json body{{"session", handle_json(slot)}, {"batch", batch_json(slot)}};
    if (auto m = metrics_json(slot)) body["metrics"] = std::move(*m);
    return {200, std::move(body)};
  }

  ApiResponse do_ranking(const std::string& id, std::optional<long long> limit) {
    auto slot = find(id);
    if (slot->computing) throw ApiError(409, "computing", "session is computing; poll until it is done");
    std::lock_guard lock(slot->mutex);
    if (limit && *limit < 0) throw ApiError(400, "invalid_request", "limit must be non-negative", "limit");
    const std::size_t n = dataset_->size();
    const std::size_t take = limit ? std::min<std::size_t>(n, static_cast<std::size_t>(*limit)) : std::min<std::size_t>(n, 50);
    std::vector<std::size_t> order(n);
    for (std::size_t r = 0; r < n; ++r) order[r] = r;
    const auto& scores = slot->scores;
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (scores[a] != scores[b]) return scores[a] > scores[b];
                        return dataset_->id_rank(a) < dataset_->id_rank(b);
                      });
    order.resize(take);
    nlohmann::json images = nlohmann::json::array();
    for (std::size_t r : order) images.push_back(image_json(*slot, r));
    return {200, {{"session_id", slot->id}, {"iteration", slot->session->iteration()}, {"images", std::move(images)}}};
  }

  // ---- JSON views -------------------------------------------------------

  nlohmann::json image_json(const Slot& slot, std::size_t row) const {
    const auto tags = view_tags(slot.session->config().strategy);
    const auto per_view = slot.session->views().per_view_scores(*slot.model, row);
    nlohmann::json views = nlohmann::json::array();
    for (std::size_t k = 0; k < per_view.size(); ++k) views.push_back({{"tag", tags.at(k)}, {"score", per_view[k]}});
    return {{"id", dataset_->manifest()[row].id}, {"score", slot.scores[row]}, {"views", std::move(views)}};
  }

  static std::string public_status(const Slot& slot) {
    if (slot.computing) return "computing";
    const auto st = slot.session->status();
    if (st == SessionStatus::Paused) return "paused";
    if (slot.session->done()) return "finished";
    return "awaiting_feedback";
  }

  nlohmann::json handle_json(const Slot& slot) const {
    const Session& s = *slot.session;
    nlohmann::json j{{"session_id", slot.id},
                     {"status", public_status(slot)},
                     {"iteration", s.iteration()},
                     {"created_at", slot.created_at},
                     {"strategy", s.config().strategy.name()},
                     {"grid", s.config().strategy.local_grid().name()},
                     {"budget", s.config().budget},
                     {"max_iterations", s.config().max_iterations},
                     {"labeled", s.labeled().size()},
                     {"positives", s.positives()},
                     {"oracle", slot.simulated ? "simulated" : "live"}};
    if (s.done()) j["reason"] = std::string(status_name(s.status()));
    return j;
  }

  nlohmann::json computing_handle(const Slot& slot) const {
    return {{"session_id", slot.id},
            {"status", "computing"},
            {"iteration", slot.iteration.load()},
            {"created_at", slot.created_at},
            {"poll", "/api/sessions/" + slot.id}};
  }

  nlohmann::json batch_json(const Slot& slot) const {
    const Session& s = *slot.session;
    if (s.done() || !s.pending()) return nullptr;
    nlohmann::json images = nlohmann::json::array();
    for (const auto& id : s.pending()->batch) images.push_back(image_json(slot, dataset_->manifest().row_of(id)));
    return {{"nonce", nonce_of(slot)}, {"iteration", s.iteration()}, {"images", std::move(images)}};
  }

  std::optional<nlohmann::json> metrics_json(const Slot& slot) const {
    if (!dataset_->has_annotations()) return std::nullopt;
    const auto& label = slot.session->query().class_label;
    if (label.empty() || !dataset_->annotations().classes().contains(label)) return std::nullopt;
    std::vector<char> relevant(dataset_->size());
    std::vector<std::size_t> ranks(dataset_->size());
    for (std::size_t r = 0; r < relevant.size(); ++r) {
      relevant[r] = dataset_->annotations().contains_class(dataset_->manifest()[r].id, label) ? 1 : 0;
      ranks[r] = dataset_->id_rank(r);
    }
    return nlohmann::json{{"map", average_precision(slot.scores, ranks, relevant)},
                          {"positives_found", slot.session->positives()}};
  }

  nlohmann::json dataset_summary() const {
    std::vector<std::string> grids;
    bool has_global = false;
    std::vector<GridSpec> patch_grids;
    for (const auto& g : dataset_->grids()) {
      grids.push_back(g.name());
      if (g.is_global()) has_global = true;
      else patch_grids.push_back(g);
    }
    std::vector<std::string> strategies;
    if (has_global) strategies.emplace_back("go");
    if (!patch_grids.empty()) {
      for (const char* base : {"one-proto", "one-rand", "all"}) strategies.push_back(std::string("lo-") + base);
      if (has_global) {
        for (const char* base : {"one-proto", "one-rand", "all"}) {
          strategies.push_back(std::string("gl-concat-") + base);
          strategies.push_back(std::string("gl-pool-") + base);
        }
      }
    }
    bool files = false;
    for (const auto& img : dataset_->manifest().images()) files = files || img.path.has_value();
    nlohmann::json classes = nlohmann::json::array();
    if (dataset_->has_annotations()) {
      for (const auto& c : dataset_->annotations().classes()) classes.push_back(c);
    }
    return {{"name", dataset_->manifest().name()},
            {"images", dataset_->size()},
            {"grids", grids},
            {"strategies", strategies},
            {"classes", std::move(classes)},
            {"annotations", dataset_->has_annotations()},
            {"image_files", files}};
  }

  // ---- persistence ------------------------------------------------------

  void persist(const Slot& slot) const {
    if (!options_.state_dir || slot.id.empty()) return;
    const nlohmann::json doc{{"format", "hitlor-service-session/1"},
                             {"session_id", slot.id},
                             {"created_at", slot.created_at},
                             {"simulated", slot.simulated},
                             {"oracle_class", slot.oracle_class},
                             {"checkpoint", slot.session->checkpoint()}};
    const auto target = *options_.state_dir / (slot.id + ".json");
    const auto tmp = *options_.state_dir / (slot.id + ".json.tmp");
    write_json_file(tmp, doc);
    std::filesystem::rename(tmp, target);
  }

  void load_state() {
    for (const auto& file : std::filesystem::directory_iterator(*options_.state_dir)) {
      if (file.path().extension() != ".json") continue;
      const auto doc = read_json_file(file.path());
      if (doc.value("format", std::string{}) != "hitlor-service-session/1") continue;
      auto slot = std::make_shared<Slot>();
      slot->id = doc.at("session_id").get<std::string>();
      slot->created_at = doc.at("created_at").get<std::string>();
      slot->simulated = doc.at("simulated").get<bool>();
      slot->oracle_class = doc.at("oracle_class").get<std::string>();
      const auto strategy = strategy_from_json(doc.at("checkpoint").at("config").at("strategy"));
      slot->session.emplace(Session::restore(doc.at("checkpoint"), dataset_, views_for(strategy)));
      advance(*slot);
      sessions_.emplace(slot->id, std::move(slot));
    }
  }

  std::shared_ptr<const Dataset> dataset_;
  ServiceOptions options_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::mutex views_mutex_;
  std::map<std::string, std::shared_ptr<const ViewIndex>> views_;
  std::mt19937_64 id_rng_;
};

}  // namespace hitlor
