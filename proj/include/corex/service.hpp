#ifndef COREX_SERVICE_HPP
#define COREX_SERVICE_HPP

#include <cstddef>
#include <memory>
#include <string>

namespace corex {

struct ServiceConfig {
  std::string bind_address = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  std::size_t max_sessions = 16;
  /// Largest accepted corpus, in bytes of JSON-lines text.
  std::size_t max_corpus_bytes = 64u << 20;
  /// Fits that may run at the same time across all sessions.
  std::size_t workers = 2;
  /// Row-parallel threads inside one fit.
  std::size_t fit_threads = 1;
};

/// HTTP API for interactive anchor refinement. Sessions live in memory; fits
/// run on a fixed pool of background workers and readers always see the last
/// completed fit.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket and returns the bound port; throws
  /// std::runtime_error when binding fails.
  int bind();
  /// Serves until stop() is called. bind() must have succeeded.
  void serve();
  /// bind() then serve() on a background thread; returns the port.
  int start();
  /// Stops accepting requests, cancels running fits and joins all threads.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace corex

#endif  // COREX_SERVICE_HPP
