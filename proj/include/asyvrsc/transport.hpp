#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "asyvrsc/wire.hpp"

namespace asyvrsc {

/// Lost or failed connection; worker() names the peer.
class TransportError : public std::runtime_error {
 public:
  TransportError(std::size_t worker, const std::string& what)
      : std::runtime_error("worker " + std::to_string(worker) + ": " + what), worker_(worker) {}
  std::size_t worker() const { return worker_; }

 private:
  std::size_t worker_;
};

/// A well-formed message that violates the master/worker protocol.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Envelope {
  std::size_t worker = 0;
  Message message;
};

/// Master <-> worker channels. The master side may be used from one thread;
/// worker k's side from one thread per worker.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual std::size_t workers() const = 0;

  virtual void send_to_worker(std::size_t k, const Message& message) = 0;
  void broadcast(const Message& message);
  /// Next message from any worker, in arrival order.
  virtual Envelope receive_any() = 0;
  /// Next message from worker k; messages from other workers stay queued.
  virtual Message receive_from(std::size_t k) = 0;

  virtual void send_to_master(std::size_t k, const Message& message) = 0;
  virtual Message worker_receive(std::size_t k) = 0;
  /// Worker k gives up; the master's next receive raises a TransportError.
  virtual void report_failure(std::size_t k, const std::string& what) = 0;

  /// Unblocks every pending receive with a TransportError. Idempotent.
  virtual void close() = 0;
};

/// Unbounded FIFO with selective receive by worker id; failures jump the queue.
class MasterMailbox {
 public:
  void push(Envelope envelope);
  void fail(std::size_t worker, std::string what);
  void close();
  Envelope pop_any();
  Message pop_from(std::size_t worker);

 private:
  std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<Envelope> items_;
  std::optional<std::pair<std::size_t, std::string>> failure_;
  bool closed_ = false;
};

/// Messages are handed over as objects through per-worker queues.
class InProcessTransport final : public Transport {
 public:
  explicit InProcessTransport(std::size_t workers);

  std::size_t workers() const override { return inboxes_.size(); }
  void send_to_worker(std::size_t k, const Message& message) override;
  Envelope receive_any() override;
  Message receive_from(std::size_t k) override;
  void send_to_master(std::size_t k, const Message& message) override;
  Message worker_receive(std::size_t k) override;
  void report_failure(std::size_t k, const std::string& what) override;
  void close() override;

 private:
  struct Inbox {
    std::mutex mutex;
    std::condition_variable ready;
    std::deque<Message> items;
    bool closed = false;
  };
  Inbox& inbox(std::size_t k);

  std::vector<std::unique_ptr<Inbox>> inboxes_;
  MasterMailbox master_;
};

/// Every message is encoded into a frame and sent over a connected UNIX
/// stream socket pair per worker; the master side demultiplexes incoming
/// frames with one reader thread per worker.
class SocketTransport final : public Transport {
 public:
  explicit SocketTransport(std::size_t workers);
  ~SocketTransport() override;

  std::size_t workers() const override { return links_.size(); }
  void send_to_worker(std::size_t k, const Message& message) override;
  Envelope receive_any() override;
  Message receive_from(std::size_t k) override;
  void send_to_master(std::size_t k, const Message& message) override;
  Message worker_receive(std::size_t k) override;
  void report_failure(std::size_t k, const std::string& what) override;
  void close() override;

 private:
  struct Link {
    int master_fd = -1;
    int worker_fd = -1;
    std::mutex master_write;
    std::mutex worker_write;
    std::thread reader;
  };
  Link& link(std::size_t k);
  void read_loop(std::size_t k);

  std::vector<std::unique_ptr<Link>> links_;
  MasterMailbox master_;
  std::once_flag closed_;
};

enum class TransportKind { kInProcess, kSocket };
std::unique_ptr<Transport> make_transport(TransportKind kind, std::size_t workers);

}  // namespace asyvrsc
