#include "planrisk/wire.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstring>
#include <future>
#include <map>
#include <mutex>
#include <thread>

#include "planrisk/errors.hpp"

namespace planrisk {

namespace wire {

namespace {

constexpr char kMagic[4] = {'P', 'L', 'N', 'R'};
constexpr std::size_t kMaxBody = 1ull << 28;  // 256 MiB guard

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::vector<std::uint8_t> encode_frame(std::uint8_t type, std::uint64_t request_id,
                                       const std::vector<std::uint8_t>& body) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + body.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(type);
  put_u64(out, request_id);
  put_u32(out, static_cast<std::uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_request(std::uint64_t request_id, const ViewTensor& x) {
  std::vector<std::uint8_t> body;
  body.reserve(8 + x.data.size() * 4);
  put_u16(body, static_cast<std::uint16_t>(x.cameras));
  put_u16(body, static_cast<std::uint16_t>(x.channels));
  put_u16(body, static_cast<std::uint16_t>(x.height));
  put_u16(body, static_cast<std::uint16_t>(x.width));
  for (float f : x.data) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(body, bits);
  }
  return encode_frame(kRequest, request_id, body);
}

std::vector<std::uint8_t> encode_response(std::uint64_t request_id, const Trajectory& t) {
  std::vector<std::uint8_t> body;
  body.reserve(2 + t.size() * 16);
  put_u16(body, static_cast<std::uint16_t>(t.size()));
  for (const auto& w : t) {
    std::uint64_t bits;
    std::memcpy(&bits, &w.x, 8);
    put_u64(body, bits);
    std::memcpy(&bits, &w.y, 8);
    put_u64(body, bits);
  }
  return encode_frame(kResponse, request_id, body);
}

std::vector<std::uint8_t> encode_error(std::uint64_t request_id, std::uint16_t code,
                                       const std::string& message) {
  std::vector<std::uint8_t> body;
  put_u16(body, code);
  body.insert(body.end(), message.begin(), message.end());
  return encode_frame(kError, request_id, body);
}

ViewTensor decode_request_body(const std::vector<std::uint8_t>& body) {
  if (body.size() < 8) throw FormatError("request body shorter than shape header");
  ViewTensor x;
  x.cameras = get_u16(body.data());
  x.channels = get_u16(body.data() + 2);
  x.height = get_u16(body.data() + 4);
  x.width = get_u16(body.data() + 6);
  const std::size_t numel = x.size();
  if (x.cameras == 0 || x.channels == 0 || x.height == 0 || x.width == 0 ||
      body.size() != 8 + numel * 4) {
    throw FormatError("request body length does not match declared shape");
  }
  x.data.resize(numel);
  for (std::size_t i = 0; i < numel; ++i) {
    const std::uint32_t bits = get_u32(body.data() + 8 + i * 4);
    std::memcpy(&x.data[i], &bits, 4);
  }
  return x;
}

Trajectory decode_response_body(const std::vector<std::uint8_t>& body) {
  if (body.size() < 2) throw FormatError("response body shorter than horizon header");
  const std::uint16_t T = get_u16(body.data());
  if (body.size() != 2 + static_cast<std::size_t>(T) * 16) {
    throw FormatError("response body length does not match horizon");
  }
  Trajectory t(T);
  for (std::uint16_t i = 0; i < T; ++i) {
    std::uint64_t bits = get_u64(body.data() + 2 + i * 16);
    std::memcpy(&t[i].x, &bits, 8);
    bits = get_u64(body.data() + 2 + i * 16 + 8);
    std::memcpy(&t[i].y, &bits, 8);
  }
  return t;
}

std::pair<std::uint16_t, std::string> decode_error_body(const std::vector<std::uint8_t>& body) {
  if (body.size() < 2) throw FormatError("error body shorter than code");
  return {get_u16(body.data()),
          std::string(body.begin() + 2, body.end())};
}

}  // namespace wire

namespace {

// read/write helpers over blocking sockets

bool read_exact(int fd, void* dst, std::size_t n) {
  auto* p = static_cast<std::uint8_t*>(dst);
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, p + got, n - got, 0);
    if (r <= 0) return false;
    got += static_cast<std::size_t>(r);
  }
  return true;
}

bool write_all(int fd, const void* src, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(src);
  std::size_t sent = 0;
  while (sent < n) {
    const ssize_t r = ::send(fd, p + sent, n - sent, MSG_NOSIGNAL);
    if (r <= 0) return false;
    sent += static_cast<std::size_t>(r);
  }
  return true;
}

enum class ReadFrameResult { kOk, kClosed, kBadHeader };

ReadFrameResult read_frame(int fd, wire::Frame& frame) {
  std::uint8_t header[wire::kHeaderBytes];
  if (!read_exact(fd, header, sizeof(header))) return ReadFrameResult::kClosed;
  if (std::memcmp(header, "PLNR", 4) != 0) return ReadFrameResult::kBadHeader;
  frame.version = header[4];
  frame.type = header[5];
  std::uint64_t id = 0;
  for (int i = 13; i >= 6; --i) id = (id << 8) | header[i];
  frame.request_id = id;
  const std::uint32_t body_len = static_cast<std::uint32_t>(header[14]) |
                                 (static_cast<std::uint32_t>(header[15]) << 8) |
                                 (static_cast<std::uint32_t>(header[16]) << 16) |
                                 (static_cast<std::uint32_t>(header[17]) << 24);
  if (body_len > (1ull << 28)) return ReadFrameResult::kBadHeader;
  frame.body.resize(body_len);
  if (body_len > 0 && !read_exact(fd, frame.body.data(), body_len)) {
    return ReadFrameResult::kClosed;
  }
  return ReadFrameResult::kOk;
}

int connect_loopback(const std::string& host, int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw TransportError("bad host address: " + host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw TransportError("connect failed: " + host + ":" + std::to_string(port));
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

}  // namespace

struct PlannerServer::Impl {
  std::shared_ptr<Planner> backend;
  int listen_fd = -1;
  int workers = 4;
  std::atomic<bool> running{true};
  std::thread accept_thread;
  std::mutex conn_mutex;
  std::vector<std::thread> conn_threads;

  void handle_connection(int fd) {
    std::mutex write_mutex;
    std::vector<std::thread> in_flight;
    std::atomic<int> active{0};

    auto send_frame = [&](const std::vector<std::uint8_t>& f) {
      std::lock_guard<std::mutex> lock(write_mutex);
      write_all(fd, f.data(), f.size());
    };

    for (;;) {
      wire::Frame frame;
      const ReadFrameResult res = read_frame(fd, frame);
      if (res == ReadFrameResult::kClosed) break;
      if (res == ReadFrameResult::kBadHeader) {
        // framing is lost; answer once and drop the connection
        send_frame(wire::encode_error(0, wire::kMalformedFrame, "bad frame header"));
        break;
      }
      if (frame.version != wire::kVersion) {
        send_frame(wire::encode_error(frame.request_id, wire::kUnsupported,
                                      "unsupported protocol version"));
        continue;
      }
      if (frame.type != wire::kRequest) {
        send_frame(wire::encode_error(frame.request_id, wire::kUnsupported,
                                      "expected a request frame"));
        continue;
      }

      // bounded per-connection concurrency so pipelined clients overlap work
      while (active.load() >= workers) std::this_thread::yield();
      active.fetch_add(1);
      in_flight.emplace_back([this, &send_frame, &active, frame = std::move(frame)] {
        try {
          const ViewTensor x = wire::decode_request_body(frame.body);
          const Trajectory t = backend->plan(x, nullptr);
          send_frame(wire::encode_response(frame.request_id, t));
        } catch (const FormatError& e) {
          send_frame(wire::encode_error(frame.request_id, wire::kMalformedFrame, e.what()));
        } catch (const ArgumentError& e) {
          send_frame(wire::encode_error(frame.request_id, wire::kBadShape, e.what()));
        } catch (const std::exception& e) {
          send_frame(wire::encode_error(frame.request_id, wire::kPlannerFailure, e.what()));
        }
        active.fetch_sub(1);
      });
    }
    for (auto& t : in_flight) t.join();
    ::close(fd);
  }

  void accept_loop() {
    for (;;) {
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) {
        if (!running.load()) return;
        continue;
      }
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      std::lock_guard<std::mutex> lock(conn_mutex);
      conn_threads.emplace_back([this, fd] { handle_connection(fd); });
    }
  }
};

PlannerServer::PlannerServer(std::shared_ptr<Planner> backend, const std::string& host, int port,
                             int workers)
    : impl_(std::make_unique<Impl>()) {
  impl_->backend = std::move(backend);
  impl_->workers = std::max(1, workers);

  impl_->listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (impl_->listen_fd < 0) throw TransportError("socket() failed");
  int one = 1;
  ::setsockopt(impl_->listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(impl_->listen_fd);
    throw TransportError("bad host address: " + host);
  }
  if (::bind(impl_->listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(impl_->listen_fd);
    throw TransportError("bind failed on " + host + ":" + std::to_string(port));
  }
  if (::listen(impl_->listen_fd, 64) != 0) {
    ::close(impl_->listen_fd);
    throw TransportError("listen failed");
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(impl_->listen_fd, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);

  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void PlannerServer::stop() {
  if (!impl_ || !impl_->running.exchange(false)) return;
  ::shutdown(impl_->listen_fd, SHUT_RDWR);
  ::close(impl_->listen_fd);
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  std::lock_guard<std::mutex> lock(impl_->conn_mutex);
  for (auto& t : impl_->conn_threads) {
    if (t.joinable()) t.join();
  }
}

PlannerServer::~PlannerServer() { stop(); }

namespace {

// Single pipelined connection; a reader thread routes responses to pending
// promises by request id.
class RemotePlanner : public Planner {
 public:
  RemotePlanner(std::string host, int port, int horizon)
      : host_(std::move(host)), port_(port), horizon_(horizon) {}

  ~RemotePlanner() override { disconnect(); }

  Trajectory plan(const ViewTensor& x, const RegionSet* /*kept*/) override {
    try {
      return round_trip(x);
    } catch (const TransportError&) {
      // one retry after a reconnect, then give up
      disconnect();
      return round_trip(x);
    }
  }

  int horizon() const override { return horizon_; }

 private:
  struct Pending {
    std::promise<Trajectory> promise;
  };

  void ensure_connected() {
    std::lock_guard<std::mutex> lock(state_mutex_);
    if (fd_ >= 0) return;
    fd_ = connect_loopback(host_, port_);
    reader_ = std::thread([this, fd = fd_] { read_loop(fd); });
  }

  void disconnect() {
    std::thread to_join;
    {
      std::lock_guard<std::mutex> lock(state_mutex_);
      if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
      }
      to_join = std::move(reader_);
    }
    if (to_join.joinable()) to_join.join();
  }

  void read_loop(int fd) {
    for (;;) {
      wire::Frame frame;
      if (read_frame(fd, frame) != ReadFrameResult::kOk) break;
      std::shared_ptr<Pending> pending;
      {
        std::lock_guard<std::mutex> lock(pending_mutex_);
        auto it = pending_.find(frame.request_id);
        if (it == pending_.end()) continue;  // stale or unsolicited
        pending = it->second;
        pending_.erase(it);
      }
      try {
        if (frame.type == wire::kResponse) {
          pending->promise.set_value(wire::decode_response_body(frame.body));
        } else if (frame.type == wire::kError) {
          const auto [code, msg] = wire::decode_error_body(frame.body);
          if (code == wire::kBadShape) {
            pending->promise.set_exception(
                std::make_exception_ptr(ArgumentError("planner rejected shape: " + msg)));
          } else {
            pending->promise.set_exception(std::make_exception_ptr(
                TransportError("planner error " + std::to_string(code) + ": " + msg)));
          }
        } else {
          pending->promise.set_exception(
              std::make_exception_ptr(TransportError("unexpected frame type from server")));
        }
      } catch (const std::exception& e) {
        pending->promise.set_exception(std::make_exception_ptr(TransportError(e.what())));
      }
    }
    // connection is gone: fail everything still pending
    std::lock_guard<std::mutex> lock(pending_mutex_);
    for (auto& [id, p] : pending_) {
      p->promise.set_exception(std::make_exception_ptr(TransportError("connection closed")));
    }
    pending_.clear();
  }

  Trajectory round_trip(const ViewTensor& x) {
    ensure_connected();
    const std::uint64_t id = next_id_.fetch_add(1);
    auto pending = std::make_shared<Pending>();
    auto future = pending->promise.get_future();
    {
      std::lock_guard<std::mutex> lock(pending_mutex_);
      pending_[id] = pending;
    }
    const auto frame = wire::encode_request(id, x);
    {
      std::lock_guard<std::mutex> lock(write_mutex_);
      int fd;
      {
        std::lock_guard<std::mutex> state(state_mutex_);
        fd = fd_;
      }
      if (fd < 0 || !write_all(fd, frame.data(), frame.size())) {
        std::lock_guard<std::mutex> plock(pending_mutex_);
        pending_.erase(id);
        throw TransportError("send failed");
      }
    }
    return future.get();
  }

  std::string host_;
  int port_;
  int horizon_;
  std::mutex state_mutex_;
  std::mutex write_mutex_;
  std::mutex pending_mutex_;
  std::map<std::uint64_t, std::shared_ptr<Pending>> pending_;
  std::atomic<std::uint64_t> next_id_{1};
  int fd_ = -1;
  std::thread reader_;
};

}  // namespace

std::shared_ptr<Planner> make_remote_planner(const std::string& host, int port,
                                             int expected_horizon) {
  return std::make_shared<RemotePlanner>(host, port, expected_horizon);
}

}  // namespace planrisk
