#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "corex/service.hpp"

int main(int argc, char** argv) {
  corex::ServiceConfig config;
  CLI::App app{"Anchored CorEx refinement service", "corex-serve"};
  app.add_option("--bind", config.bind_address, "Bind address")->envname("COREX_BIND");
  app.add_option("--port", config.port, "Port (0 = any free port)")->envname("COREX_PORT");
  app.add_option("--max-sessions", config.max_sessions, "Session cap")->envname("COREX_MAX_SESSIONS");
  app.add_option("--max-corpus-bytes", config.max_corpus_bytes, "Corpus size cap in bytes")
      ->envname("COREX_MAX_CORPUS_BYTES");
  app.add_option("--workers", config.workers, "Concurrent fits")->envname("COREX_WORKERS");
  app.add_option("--fit-threads", config.fit_threads, "Threads per fit")->envname("COREX_FIT_THREADS");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  // Block the shutdown signals in every thread; the main thread waits for them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  corex::Service service(config);
  try {
    int port = service.start();
    std::cout << "listening on " << config.bind_address << ":" << port << std::endl;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  int sig = 0;
  sigwait(&signals, &sig);
  service.stop();
  return 0;
}
