#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gensim/correction.hpp"
#include "gensim/simulation.hpp"

namespace httplib {
class Server;
}

namespace gensim {

struct ServiceRoutes;

enum class SimStatus { configured, running, paused, stopped, finished };

const char* to_string(SimStatus status);
/// configured->running, running->{paused, stopped, finished}, paused->running.
bool legal_transition(SimStatus from, SimStatus to);

/// One hosted simulation with its control state and labels.
class Session {
 public:
  Session(std::string id, std::unique_ptr<Simulation> sim);
  ~Session();

  const std::string& id() const noexcept { return id_; }
  Simulation& sim() noexcept { return *sim_; }
  FeedbackStore& feedback() noexcept { return feedback_; }

  SimStatus status() const;
  std::vector<SimStatus> history() const;
  nlohmann::json handle() const;

  /// Starts up to `rounds` more rounds (default: the rest) on a background
  /// thread. Throws ConflictError unless configured or paused.
  void run(std::optional<std::uint64_t> rounds);
  /// Both take effect at the next barrier. Throw ConflictError unless running.
  void pause();
  void stop();
  /// Blocks until the runner thread exits.
  void wait();
  bool terminal() const;

 private:
  void transition(SimStatus to);

  std::string id_;
  std::unique_ptr<Simulation> sim_;
  FeedbackStore feedback_;
  mutable std::mutex mutex_;
  SimStatus status_ = SimStatus::configured;
  std::vector<SimStatus> history_{SimStatus::configured};
  std::optional<std::string> last_error_;
  bool runner_active_ = false;
  std::thread runner_;
};

struct ServiceOptions {
  /// Exports without an explicit path go here.
  std::filesystem::path data_dir = "gensim-data";
  /// When set, every request needs "Authorization: Bearer <token>".
  std::optional<std::string> token;
  int threads = 64;
};

/// HTTP control plane: JSON over HTTP plus a server-sent event feed. Every
/// non-2xx reply carries {"error": {"code", "message"}}.
class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Binds and serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

  std::shared_ptr<Session> create(SimulationConfig config);
  std::shared_ptr<Session> session(const std::string& id) const;
  std::vector<std::shared_ptr<Session>> sessions() const;

 private:
  void routes();

  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::unique_ptr<ServiceRoutes> routes_;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
  std::atomic<bool> stopping_{false};

  struct Idempotent {
    bool done = false;
    std::string fingerprint;
    int status = 0;
    std::string body;
  };
  std::mutex idem_mutex_;
  std::condition_variable idem_cv_;
  std::map<std::string, Idempotent> idempotent_;

  friend struct ServiceRoutes;
};

}  // namespace gensim
