#include "asyvrsc/transport.hpp"

#include <cerrno>
#include <cstring>

#include <sys/socket.h>
#include <unistd.h>

namespace asyvrsc {

void Transport::broadcast(const Message& message) {
  for (std::size_t k = 0; k < workers(); ++k) send_to_worker(k, message);
}

void MasterMailbox::push(Envelope envelope) {
  std::lock_guard lock(mutex_);
  items_.push_back(std::move(envelope));
  ready_.notify_all();
}

void MasterMailbox::fail(std::size_t worker, std::string what) {
  std::lock_guard lock(mutex_);
  if (!failure_) failure_.emplace(worker, std::move(what));
  ready_.notify_all();
}

void MasterMailbox::close() {
  std::lock_guard lock(mutex_);
  closed_ = true;
  ready_.notify_all();
}

Envelope MasterMailbox::pop_any() {
  std::unique_lock lock(mutex_);
  ready_.wait(lock, [&] { return failure_ || closed_ || !items_.empty(); });
  if (failure_) throw TransportError(failure_->first, failure_->second);
  if (items_.empty()) throw TransportError(0, "transport closed");
  Envelope e = std::move(items_.front());
  items_.pop_front();
  return e;
}

Message MasterMailbox::pop_from(std::size_t worker) {
  std::unique_lock lock(mutex_);
  for (;;) {
    if (failure_) throw TransportError(failure_->first, failure_->second);
    for (auto it = items_.begin(); it != items_.end(); ++it) {
      if (it->worker == worker) {
        Message m = std::move(it->message);
        items_.erase(it);
        return m;
      }
    }
    if (closed_) throw TransportError(worker, "transport closed");
    ready_.wait(lock);
  }
}

InProcessTransport::InProcessTransport(std::size_t workers) {
  if (workers == 0) throw std::invalid_argument("transport needs at least one worker");
  for (std::size_t k = 0; k < workers; ++k) inboxes_.push_back(std::make_unique<Inbox>());
}

InProcessTransport::Inbox& InProcessTransport::inbox(std::size_t k) {
  if (k >= inboxes_.size()) throw std::out_of_range("no worker " + std::to_string(k));
  return *inboxes_[k];
}

void InProcessTransport::send_to_worker(std::size_t k, const Message& message) {
  auto& box = inbox(k);
  std::lock_guard lock(box.mutex);
  if (box.closed) throw TransportError(k, "connection closed");
  box.items.push_back(message);
  box.ready.notify_one();
}

Envelope InProcessTransport::receive_any() { return master_.pop_any(); }

Message InProcessTransport::receive_from(std::size_t k) {
  inbox(k);
  return master_.pop_from(k);
}

void InProcessTransport::send_to_master(std::size_t k, const Message& message) {
  inbox(k);
  master_.push(Envelope{k, message});
}

Message InProcessTransport::worker_receive(std::size_t k) {
  auto& box = inbox(k);
  std::unique_lock lock(box.mutex);
  box.ready.wait(lock, [&] { return box.closed || !box.items.empty(); });
  if (box.items.empty()) throw TransportError(k, "connection closed");
  Message m = std::move(box.items.front());
  box.items.pop_front();
  return m;
}

void InProcessTransport::report_failure(std::size_t k, const std::string& what) {
  auto& box = inbox(k);
  {
    std::lock_guard lock(box.mutex);
    box.closed = true;
    box.ready.notify_all();
  }
  master_.fail(k, what);
}

void InProcessTransport::close() {
  for (auto& box : inboxes_) {
    std::lock_guard lock(box->mutex);
    box->closed = true;
    box->ready.notify_all();
  }
  master_.close();
}

namespace {

// False on orderly EOF before any byte; throws on errors or mid-frame EOF.
bool read_exact(int fd, std::uint8_t* data, std::size_t size, std::size_t worker) {
  std::size_t done = 0;
  while (done < size) {
    const ssize_t got = ::recv(fd, data + done, size - done, 0);
    if (got == 0) {
      if (done == 0) return false;
      throw TransportError(worker, "connection closed mid-frame");
    }
    if (got < 0) {
      if (errno == EINTR) continue;
      throw TransportError(worker, std::string("recv failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(got);
  }
  return true;
}

void write_all(int fd, const std::vector<std::uint8_t>& bytes, std::size_t worker) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t put = ::send(fd, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if (put < 0) {
      if (errno == EINTR) continue;
      throw TransportError(worker, std::string("send failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(put);
  }
}

// Reads one frame; nullopt on orderly EOF at a frame boundary.
std::optional<Message> read_frame(int fd, std::size_t worker) {
  std::vector<std::uint8_t> frame(kFrameHeaderBytes);
  if (!read_exact(fd, frame.data(), frame.size(), worker)) return std::nullopt;
  const FrameHeader header = decode_frame_header(frame);
  frame.resize(kFrameHeaderBytes + header.payload_bytes);
  if (header.payload_bytes != 0 &&
      !read_exact(fd, frame.data() + kFrameHeaderBytes, header.payload_bytes, worker)) {
    throw TransportError(worker, "connection closed mid-frame");
  }
  return decode_message(frame);
}

}  // namespace

SocketTransport::SocketTransport(std::size_t workers) {
  if (workers == 0) throw std::invalid_argument("transport needs at least one worker");
  for (std::size_t k = 0; k < workers; ++k) {
    auto l = std::make_unique<Link>();
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
      const int err = errno;
      close();
      throw TransportError(k, std::string("socketpair failed: ") + std::strerror(err));
    }
    l->master_fd = fds[0];
    l->worker_fd = fds[1];
    links_.push_back(std::move(l));
  }
  for (std::size_t k = 0; k < workers; ++k) links_[k]->reader = std::thread([this, k] { read_loop(k); });
}

SocketTransport::~SocketTransport() {
  close();
  for (auto& l : links_) {
    if (l->reader.joinable()) l->reader.join();
    ::close(l->master_fd);
    ::close(l->worker_fd);
  }
}

SocketTransport::Link& SocketTransport::link(std::size_t k) {
  if (k >= links_.size()) throw std::out_of_range("no worker " + std::to_string(k));
  return *links_[k];
}

void SocketTransport::read_loop(std::size_t k) {
  const int fd = links_[k]->master_fd;
  try {
    while (auto m = read_frame(fd, k)) master_.push(Envelope{k, std::move(*m)});
    master_.fail(k, "disconnected");
  } catch (const TransportError& e) {
    master_.fail(k, e.what());
  } catch (const std::exception& e) {
    master_.fail(k, std::string("malformed frame: ") + e.what());
  }
}

void SocketTransport::send_to_worker(std::size_t k, const Message& message) {
  auto& l = link(k);
  const auto bytes = encode_message(message);
  std::lock_guard lock(l.master_write);
  write_all(l.master_fd, bytes, k);
}

Envelope SocketTransport::receive_any() { return master_.pop_any(); }

Message SocketTransport::receive_from(std::size_t k) {
  link(k);
  return master_.pop_from(k);
}

void SocketTransport::send_to_master(std::size_t k, const Message& message) {
  auto& l = link(k);
  const auto bytes = encode_message(message);
  std::lock_guard lock(l.worker_write);
  write_all(l.worker_fd, bytes, k);
}

Message SocketTransport::worker_receive(std::size_t k) {
  auto m = read_frame(link(k).worker_fd, k);
  if (!m) throw TransportError(k, "connection closed");
  return std::move(*m);
}

void SocketTransport::report_failure(std::size_t k, const std::string& what) {
  master_.fail(k, what);
  ::shutdown(link(k).worker_fd, SHUT_RDWR);
}

void SocketTransport::close() {
  std::call_once(closed_, [this] {
    master_.close();
    for (auto& l : links_) {
      ::shutdown(l->master_fd, SHUT_RDWR);
      ::shutdown(l->worker_fd, SHUT_RDWR);
    }
  });
}

std::unique_ptr<Transport> make_transport(TransportKind kind, std::size_t workers) {
  if (kind == TransportKind::kSocket) return std::make_unique<SocketTransport>(workers);
  return std::make_unique<InProcessTransport>(workers);
}

}  // namespace asyvrsc
