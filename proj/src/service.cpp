#include "corex/service.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "corex/eval.hpp"
#include "corex/persistence.hpp"
#include "corex/pipeline.hpp"
#include "corex/topics.hpp"

namespace corex {

namespace {

using nlohmann::json;

/// An error that maps directly to an HTTP status and a JSON error body.
struct ApiError {
  int status;
  std::string code;
  std::string message;
  json details = json::object();
};

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, const ApiError& e) {
  json body{{"error", {{"code", e.code}, {"message", e.message}, {"details", e.details}}}};
  send_json(res, e.status, body.dump() + "\n");
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  auto secs = std::chrono::system_clock::to_time_t(now);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw ApiError{400, "malformed_request", "request body must be a JSON object"};
    return j;
  } catch (const json::parse_error& e) {
    throw ApiError{400, "malformed_json", e.what()};
  }
}

template <typename T>
T field(const json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ApiError{400, "malformed_request", std::string("field '") + key + "' has the wrong type"};
  }
}

/// Result of one completed fit; immutable once published.
struct Snapshot {
  std::size_t generation = 0;
  FitResult result;
};

struct HistoryEntry {
  std::size_t generation = 0;
  std::string timestamp;
  json anchors;
  bool warm_start = false;
  std::uint64_t seed = 0;
  std::string status;  // queued, running, completed, failed, cancelled
  std::optional<std::size_t> iterations_run;
  std::optional<double> tc_total;
  std::string error;
};

struct Session {
  std::string id;
  PreparedCorpus corpus;
  std::map<std::string, std::size_t> doc_index;
  FitConfig base;

  std::mutex mu;
  std::string state = "idle";  // idle, fitting, failed
  std::string last_error;
  std::shared_ptr<const Snapshot> snapshot;
  std::vector<HistoryEntry> history;
  std::stop_source stop;
  std::atomic<std::size_t> iteration{0};
  std::atomic<double> tc{0.0};
};

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  httplib::Server server;
  std::thread listener;
  int port = -1;

  std::mutex sessions_mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::size_t next_id = 1;

  std::mutex jobs_mu;
  std::condition_variable jobs_cv;
  std::deque<std::function<void()>> jobs;
  bool closing = false;
  std::vector<std::thread> workers;

  explicit Impl(ServiceConfig c) : config(std::move(c)) {
    if (config.workers == 0) config.workers = 1;
    for (std::size_t k = 0; k < config.workers; ++k) workers.emplace_back([this] { worker_loop(); });
    routes();
  }

  ~Impl() { shutdown(); }

  void worker_loop() {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock lock(jobs_mu);
        jobs_cv.wait(lock, [&] { return closing || !jobs.empty(); });
        if (jobs.empty()) return;
        job = std::move(jobs.front());
        jobs.pop_front();
      }
      job();
    }
  }

  void enqueue(std::function<void()> job) {
    {
      std::lock_guard lock(jobs_mu);
      jobs.push_back(std::move(job));
    }
    jobs_cv.notify_one();
  }

  void shutdown() {
    server.stop();
    if (listener.joinable()) listener.join();
    {
      std::lock_guard lock(sessions_mu);
      for (auto& [id, s] : sessions) s->stop.request_stop();
    }
    {
      std::lock_guard lock(jobs_mu);
      closing = true;
    }
    jobs_cv.notify_all();
    for (auto& w : workers) {
      if (w.joinable()) w.join();
    }
  }

  std::shared_ptr<Session> find_session(const std::string& id) {
    std::lock_guard lock(sessions_mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw ApiError{404, "session_not_found", "no session '" + id + "'", {{"session", id}}};
    return it->second;
  }

  static std::shared_ptr<const Snapshot> completed(Session& s) {
    std::lock_guard lock(s.mu);
    if (!s.snapshot) throw ApiError{409, "no_completed_fit", "the session has no completed fit yet"};
    return s.snapshot;
  }

  // Handlers.

  void create_session(const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    std::string text;
    if (body.contains("corpus_jsonl")) {
      text = field<std::string>(body, "corpus_jsonl", "");
    } else if (body.contains("corpus_path")) {
      auto path = field<std::string>(body, "corpus_path", "");
      std::ifstream in(path, std::ios::binary);
      if (!in) throw ApiError{400, "corpus_unreadable", "cannot open corpus file", {{"path", path}}};
      std::ostringstream buf;
      buf << in.rdbuf();
      text = buf.str();
    } else {
      throw ApiError{400, "malformed_request", "provide 'corpus_jsonl' or 'corpus_path'"};
    }
    if (text.size() > config.max_corpus_bytes) {
      throw ApiError{413, "corpus_too_large", "corpus exceeds the configured size cap",
                     {{"bytes", text.size()}, {"limit", config.max_corpus_bytes}}};
    }

    auto opts_json = field<json>(body, "options", json::object());
    CorpusOptions opts;
    opts.vocab_size = field<std::size_t>(opts_json, "vocab_size", opts.vocab_size);
    opts.min_df = field<std::size_t>(opts_json, "min_df", opts.min_df);
    opts.tokenize.min_token_length = field<std::size_t>(opts_json, "min_length", opts.tokenize.min_token_length);
    opts.strip_boilerplate = field<bool>(opts_json, "strip_boilerplate", opts.strip_boilerplate);
    opts.tokenize.negation = field<bool>(opts_json, "negation", opts.tokenize.negation);

    auto cfg_json = field<json>(body, "config", json::object());
    FitConfig base;
    base.n_factors = field<std::size_t>(cfg_json, "n_factors", base.n_factors);
    base.seed = field<std::uint64_t>(cfg_json, "seed", base.seed);
    base.max_iter = field<std::size_t>(cfg_json, "max_iter", base.max_iter);
    base.tol = field<double>(cfg_json, "tol", base.tol);
    base.patience = field<std::size_t>(cfg_json, "patience", base.patience);
    base.damping = field<double>(cfg_json, "damping", base.damping);
    base.smoothing = field<double>(cfg_json, "smoothing", base.smoothing);
    base.anchors = AnchorSet(field<double>(cfg_json, "beta", 1.0));
    if (cfg_json.contains("freeze_structure_after") && !cfg_json["freeze_structure_after"].is_null()) {
      base.freeze_structure_after = field<std::size_t>(cfg_json, "freeze_structure_after", 0);
    }
    base.threads = config.fit_threads;

    auto session = std::make_shared<Session>();
    try {
      std::istringstream in(text);
      session->corpus = prepare_corpus(parse_corpus_jsonl(in), opts);
      validate(base, session->corpus.vocab.size());
    } catch (const DuplicateIdError& e) {
      throw ApiError{400, "duplicate_document_id", e.what(), {{"id", e.id()}}};
    } catch (const DataError& e) {
      throw ApiError{400, "malformed_corpus", e.what()};
    } catch (const ValidationError& e) {
      throw ApiError{400, "invalid_config", e.what()};
    }
    session->base = base;
    for (std::size_t l = 0; l < session->corpus.docs.size(); ++l) session->doc_index[session->corpus.docs[l].id] = l;

    {
      std::lock_guard lock(sessions_mu);
      if (sessions.size() >= config.max_sessions) {
        throw ApiError{503, "session_limit", "the session cap is reached",
                       {{"limit", config.max_sessions}}};
      }
      session->id = "s" + std::to_string(next_id++);
      sessions[session->id] = session;
    }
    json out{{"id", session->id},
             {"documents", session->corpus.docs.size()},
             {"vocabulary_size", session->corpus.vocab.size()},
             {"config", config_to_json(base)}};
    send_json(res, 201, out.dump() + "\n");
  }

  void start_fit(const std::string& id, const httplib::Request& req, httplib::Response& res) {
    auto s = find_session(id);
    auto body = parse_body(req);

    std::vector<AnchorSpecEntry> entries;
    try {
      if (body.contains("anchors")) {
        const auto& a = body["anchors"];
        if (a.is_string()) {
          entries = parse_anchor_spec(a.get<std::string>());
        } else if (a.is_array()) {
          for (const auto& item : a) {
            if (item.is_string()) {
              auto parsed = parse_anchor_spec(item.get<std::string>());
              entries.insert(entries.end(), parsed.begin(), parsed.end());
            } else if (item.is_object()) {
              AnchorSpecEntry e;
              e.term = item.at("term").get<std::string>();
              e.factor = item.at("factor").get<std::size_t>();
              if (item.contains("strength")) e.strength = item.at("strength").get<double>();
              entries.push_back(std::move(e));
            } else {
              throw ApiError{400, "malformed_request", "anchors must be strings or objects"};
            }
          }
        } else if (!a.is_null()) {
          throw ApiError{400, "malformed_request", "anchors must be a string or an array"};
        }
      }
    } catch (const ValidationError& e) {
      throw ApiError{400, "malformed_anchor", e.what()};
    } catch (const json::exception& e) {
      throw ApiError{400, "malformed_anchor", e.what()};
    }

    FitConfig config = s->base;
    double beta = field<double>(body, "beta", s->base.anchors.default_strength());
    if (!(beta > 0.0)) throw ApiError{400, "invalid_config", "beta must be positive"};
    ResolvedAnchors resolved;
    try {
      resolved = resolve_anchors(entries, s->corpus.vocab, beta);
    } catch (const ValidationError& e) {
      throw ApiError{400, "malformed_anchor", e.what()};
    }
    if (!resolved.unknown.empty()) {
      throw ApiError{422, "unknown_anchor_terms", "anchor terms are not in the session vocabulary",
                     {{"terms", resolved.unknown}}};
    }
    config.anchors = resolved.anchors;
    try {
      validate(config, s->corpus.vocab.size());
    } catch (const ValidationError& e) {
      throw ApiError{400, "invalid_config", e.what()};
    }
    bool warm = field<bool>(body, "warm_start", false);

    std::lock_guard lock(s->mu);
    if (s->state == "fitting") throw ApiError{409, "fit_in_progress", "a fit is already running for this session"};
    std::shared_ptr<const Snapshot> warm_from;
    if (warm) {
      if (!s->snapshot) throw ApiError{409, "no_completed_fit", "warm start needs a completed fit"};
      warm_from = s->snapshot;
    }
    // Cold starts draw a fresh seed per fit unless one is given.
    config.seed = field<std::uint64_t>(body, "seed", s->base.seed + s->history.size());

    HistoryEntry entry;
    entry.generation = s->history.size() + 1;
    entry.timestamp = utc_timestamp();
    entry.anchors = anchors_to_json(config.anchors, s->corpus.vocab);
    entry.warm_start = warm;
    entry.seed = config.seed;
    entry.status = "queued";
    s->history.push_back(entry);
    s->state = "fitting";
    s->last_error.clear();
    s->stop = std::stop_source();
    s->iteration = 0;
    s->tc = 0.0;
    const std::size_t slot = s->history.size() - 1;
    std::stop_token token = s->stop.get_token();

    enqueue([s, config, warm_from, slot, token] { run_fit(s, config, warm_from, slot, token); });
    json out{{"id", s->id}, {"generation", entry.generation}, {"state", "fitting"}, {"seed", config.seed},
             {"warm_start", warm}};
    send_json(res, 202, out.dump() + "\n");
  }

  static void run_fit(const std::shared_ptr<Session>& s, const FitConfig& config,
                      const std::shared_ptr<const Snapshot>& warm_from, std::size_t slot, std::stop_token token) {
    {
      std::lock_guard lock(s->mu);
      s->history[slot].status = "running";
    }
    FitControl control;
    control.warm_start = warm_from ? &warm_from->result.posteriors : nullptr;
    control.stop = token;
    control.on_iteration = [&](const IterationInfo& info) {
      s->iteration = info.iteration;
      s->tc = info.tc;
    };
    try {
      auto snap = std::make_shared<Snapshot>();
      snap->result = fit(s->corpus.matrix, config, control);
      std::lock_guard lock(s->mu);
      auto& entry = s->history[slot];
      if (token.stop_requested()) {
        entry.status = "cancelled";
        s->state = "idle";
        return;
      }
      snap->generation = entry.generation;
      entry.status = "completed";
      entry.iterations_run = snap->result.report.iterations_run;
      entry.tc_total = snap->result.report.tc_total();
      s->snapshot = std::move(snap);
      s->state = "idle";
    } catch (const std::exception& e) {
      std::lock_guard lock(s->mu);
      s->history[slot].status = "failed";
      s->history[slot].error = e.what();
      s->state = "failed";
      s->last_error = e.what();
    }
  }

  void status(const std::string& id, httplib::Response& res) {
    auto s = find_session(id);
    std::lock_guard lock(s->mu);
    json out{{"id", s->id}, {"state", s->state}, {"fits_requested", s->history.size()}};
    out["generation"] = s->snapshot ? json(s->snapshot->generation) : json(nullptr);
    if (s->state == "fitting") {
      out["progress"] = {{"iteration", s->iteration.load()}, {"tc", s->tc.load()}};
    }
    if (!s->last_error.empty()) out["error"] = s->last_error;
    if (s->snapshot) {
      const auto& r = s->snapshot->result.report;
      out["last_fit"] = {{"iterations_run", r.iterations_run},
                         {"converged", r.converged},
                         {"tc_total", r.tc_total()},
                         {"tc_history", r.tc_history}};
    }
    send_json(res, 200, out.dump() + "\n");
  }

  void topics(const std::string& id, const httplib::Request& req, httplib::Response& res) {
    auto s = find_session(id);
    std::size_t top = 10;
    if (req.has_param("top")) {
      const auto text = req.get_param_value("top");
      try {
        std::size_t used = 0;
        long long v = std::stoll(text, &used);
        if (used != text.size() || v < 0) throw std::invalid_argument(text);
        top = static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        throw ApiError{400, "malformed_request", "top must be a non-negative integer", {{"top", text}}};
      }
    }
    auto snap = completed(*s);
    const auto& model = snap->result.model;
    send_json(res, 200, topics_to_string(all_topics(model, model.mi, top), s->corpus.vocab));
  }

  void scores(const std::string& id, const std::string& doc, httplib::Response& res) {
    auto s = find_session(id);
    auto it = s->doc_index.find(doc);
    if (it == s->doc_index.end()) {
      throw ApiError{404, "document_not_found", "no document '" + doc + "' in this session", {{"doc", doc}}};
    }
    auto snap = completed(*s);
    const auto& post = snap->result.posteriors;
    json values = json::array();
    for (std::size_t j = 0; j < post.n_factors; ++j) values.push_back(post.at(it->second, j, 1));
    json out{{"doc", doc}, {"generation", snap->generation}, {"scores", values}};
    send_json(res, 200, out.dump() + "\n");
  }

  void history(const std::string& id, httplib::Response& res) {
    auto s = find_session(id);
    std::lock_guard lock(s->mu);
    json arr = json::array();
    for (const auto& h : s->history) {
      json e{{"generation", h.generation}, {"timestamp", h.timestamp}, {"anchors", h.anchors},
             {"warm_start", h.warm_start}, {"seed", h.seed},    {"status", h.status}};
      if (h.iterations_run) e["iterations_run"] = *h.iterations_run;
      if (h.tc_total) e["tc_total"] = *h.tc_total;
      if (!h.error.empty()) e["error"] = h.error;
      arr.push_back(std::move(e));
    }
    send_json(res, 200, json{{"id", s->id}, {"history", arr}}.dump() + "\n");
  }

  void metrics(const std::string& id, const httplib::Request& req, httplib::Response& res) {
    auto s = find_session(id);
    auto body = parse_body(req);
    auto map_json = field<json>(body, "label_map", json());
    if (!map_json.is_object() || map_json.empty()) {
      throw ApiError{400, "malformed_request", "label_map must be a non-empty object of label -> factor"};
    }
    std::map<std::string, std::size_t> label_map;
    for (const auto& [label, factor] : map_json.items()) {
      if (!factor.is_number_unsigned()) {
        throw ApiError{400, "malformed_request", "label_map values must be factor indices", {{"label", label}}};
      }
      label_map[label] = factor.get<std::size_t>();
    }
    double threshold = field<double>(body, "threshold", 0.5);

    std::vector<Document> label_docs;
    if (body.contains("labels_jsonl")) {
      try {
        std::istringstream in(field<std::string>(body, "labels_jsonl", ""));
        label_docs = parse_corpus_jsonl(in);
      } catch (const DataError& e) {
        throw ApiError{400, "malformed_labels", e.what()};
      }
      if (label_docs.size() != s->corpus.docs.size()) {
        throw ApiError{400, "malformed_labels", "labels must list every session document in corpus order"};
      }
      for (std::size_t l = 0; l < label_docs.size(); ++l) {
        if (label_docs[l].id != s->corpus.docs[l].id) {
          throw ApiError{400, "malformed_labels", "label document order differs from the corpus",
                         {{"row", l}, {"id", label_docs[l].id}}};
        }
      }
    }
    auto snap = completed(*s);
    const auto& docs = body.contains("labels_jsonl") ? label_docs : s->corpus.docs;
    auto truths = label_truths(docs);
    try {
      auto report = evaluate(scores_from_posteriors(snap->result.posteriors), truths, label_map, threshold);
      send_json(res, 200, metrics_to_string(report));
    } catch (const ValidationError& e) {
      throw ApiError{400, "invalid_metrics_request", e.what()};
    }
  }

  void remove(const std::string& id, httplib::Response& res) {
    std::shared_ptr<Session> s;
    {
      std::lock_guard lock(sessions_mu);
      auto it = sessions.find(id);
      if (it == sessions.end()) throw ApiError{404, "session_not_found", "no session '" + id + "'", {{"session", id}}};
      s = it->second;
      sessions.erase(it);
    }
    s->stop.request_stop();
    send_json(res, 200, json{{"deleted", id}}.dump() + "\n");
  }

  template <typename F>
  auto guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const ApiError& e) {
        send_error(res, e);
      } catch (const std::exception& e) {
        send_error(res, {500, "internal_error", e.what()});
      }
    };
  }

  void routes() {
    server.set_payload_max_length(config.max_corpus_bytes + (1u << 20));
    server.Post("/sessions", guarded([this](auto& req, auto& res) { create_session(req, res); }));
    server.Post(R"(/sessions/([^/]+)/fit)",
                guarded([this](auto& req, auto& res) { start_fit(req.matches[1], req, res); }));
    server.Get(R"(/sessions/([^/]+)/status)", guarded([this](auto& req, auto& res) { status(req.matches[1], res); }));
    server.Get(R"(/sessions/([^/]+)/topics)",
               guarded([this](auto& req, auto& res) { topics(req.matches[1], req, res); }));
    server.Get(R"(/sessions/([^/]+)/docs/(.+)/scores)",
               guarded([this](auto& req, auto& res) { scores(req.matches[1], req.matches[2], res); }));
    server.Get(R"(/sessions/([^/]+)/history)",
               guarded([this](auto& req, auto& res) { history(req.matches[1], res); }));
    server.Post(R"(/sessions/([^/]+)/metrics)",
                guarded([this](auto& req, auto& res) { metrics(req.matches[1], req, res); }));
    server.Delete(R"(/sessions/([^/]+))", guarded([this](auto& req, auto& res) { remove(req.matches[1], res); }));
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 413) {
        send_error(res, {413, "payload_too_large", "request body exceeds the configured size cap"});
      } else if (res.status == 404) {
        send_error(res, {404, "not_found", "no such endpoint"});
      } else {
        send_error(res, {res.status, "http_error", httplib::status_message(res.status)});
      }
    });
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() { stop(); }

int Service::bind() {
  auto& impl = *impl_;
  if (impl.config.port == 0) {
    impl.port = impl.server.bind_to_any_port(impl.config.bind_address);
  } else if (impl.server.bind_to_port(impl.config.bind_address, impl.config.port)) {
    impl.port = impl.config.port;
  } else {
    impl.port = -1;
  }
  if (impl.port < 0) {
    throw std::runtime_error("cannot bind " + impl.config.bind_address + ":" + std::to_string(impl.config.port));
  }
  return impl.port;
}

void Service::serve() { impl_->server.listen_after_bind(); }

int Service::start() {
  int port = bind();
  impl_->listener = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  if (impl_) impl_->shutdown();
}

}  // namespace corex
