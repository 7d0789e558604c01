#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>

#include "privimpute/common.hpp"

namespace privimpute::net {

// Protocol-level message tags, carried as the first payload byte of typed
// frames. The leakage audit whitelists these per protocol variant.
enum class MsgType : u8 {
  hello = 1,
  oprf_query = 2,
  oprf_resp = 3,
  opprf_hints = 4,
  sigma_sums = 5,     // plain horizontal only: Bob's expected sums in the clear
  share_input = 6,    // masked share material
  beaver_open = 7,    // masked arithmetic openings
  bool_open = 8,      // masked boolean openings
  reveal_out = 9,     // share of a declared output
  psi_prf_values = 10,  // plain PSI: sender's PRF list
  dh_point = 11,        // DH-PSI group elements
  packing_order = 12,   // blind-random horizontal: input-independent packing
  no_neighbor = 13,
  raw = 255,
};

inline const char* msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::hello: return "hello";
    case MsgType::oprf_query: return "oprf_query";
    case MsgType::oprf_resp: return "oprf_resp";
    case MsgType::opprf_hints: return "opprf_hints";
    case MsgType::sigma_sums: return "sigma_sums";
    case MsgType::share_input: return "share_input";
    case MsgType::beaver_open: return "beaver_open";
    case MsgType::bool_open: return "bool_open";
    case MsgType::reveal_out: return "reveal_out";
    case MsgType::psi_prf_values: return "psi_prf_values";
    case MsgType::dh_point: return "dh_point";
    case MsgType::packing_order: return "packing_order";
    case MsgType::no_neighbor: return "no_neighbor";
    case MsgType::raw: return "raw";
  }
  return "?";
}

struct ChannelError : Error {
  using Error::Error;
};

struct FrameRecord {
  std::string phase;
  char dir;  // 's' or 'r'
  MsgType type;
  u64 bytes;  // on-wire bytes incl. 4-byte prefix
};

struct Snapshot {
  std::string phase;
  u64 sent_bytes = 0;
  u64 received_bytes = 0;
  u64 rounds = 0;
  u64 wall_nanos = 0;
};

constexpr u64 kMaxFrame = 0x7fffffffULL;

// Two-party duplex byte transport. Frames are 4-byte big-endian length
// followed by payload; counters include the prefix.
class Channel {
 public:
  virtual ~Channel() = default;

  void send_frame(std::span<const u8> payload) { send_impl(payload, MsgType::raw); }
  Bytes recv_frame() {
    MsgType t;
    return recv_impl(&t);
  }

  void send_msg(MsgType type, std::span<const u8> body) {
    Bytes payload;
    payload.reserve(body.size() + 1);
    payload.push_back(u8(type));
    payload.insert(payload.end(), body.begin(), body.end());
    send_impl(payload, type);
  }
  Bytes recv_msg(MsgType expect) {
    MsgType got;
    Bytes payload = recv_impl(&got);
    if (payload.empty()) throw ChannelError("empty typed frame");
    if (got != expect)
      throw ChannelError(std::string("unexpected message type: got ") + msg_type_name(got) +
                         ", want " + msg_type_name(expect));
    return Bytes(payload.begin() + 1, payload.end());
  }

  u64 sent_bytes() const { return sent_; }
  u64 received_bytes() const { return received_; }
  u64 rounds() const { return rounds_; }

  void set_phase(std::string phase) { phase_ = std::move(phase); }
  const std::string& phase() const { return phase_; }

  Snapshot snapshot_counters(const std::string& phase) {
    Snapshot s{phase, sent_, received_, rounds_, elapsed_nanos()};
    snapshots_.push_back(s);
    return s;
  }
  const std::vector<Snapshot>& snapshots() const { return snapshots_; }
  const std::vector<FrameRecord>& frame_log() const { return frames_; }

  void add_phase_time(const std::string& phase, u64 nanos) { phase_nanos_[phase] += nanos; }
  u64 phase_time(const std::string& phase) const {
    auto it = phase_nanos_.find(phase);
    return it == phase_nanos_.end() ? 0 : it->second;
  }
  const std::map<std::string, u64>& phase_times() const { return phase_nanos_; }

  u64 elapsed_nanos() const {
    return u64(std::chrono::duration_cast<std::chrono::nanoseconds>(
                   std::chrono::steady_clock::now() - start_)
                   .count());
  }

  // Transcript CSV: phase, dir, bytes, rounds, wall_nanos (one send row and
  // one recv row per snapshot, cumulative counters).
  std::string transcript_csv() const {
    std::ostringstream os;
    os << "phase,dir,bytes,rounds,wall_nanos\n";
    for (const auto& s : snapshots_) {
      os << s.phase << ",s," << s.sent_bytes << "," << s.rounds << "," << s.wall_nanos << "\n";
      os << s.phase << ",r," << s.received_bytes << "," << s.rounds << "," << s.wall_nanos << "\n";
    }
    return os.str();
  }

 protected:
  virtual void write_bytes(const u8* p, size_t n) = 0;
  virtual void read_bytes(u8* p, size_t n) = 0;

 private:
  void send_impl(std::span<const u8> payload, MsgType type) {
    if (payload.size() > kMaxFrame) throw ChannelError("oversized frame");
    Bytes hdr;
    put_u32be(hdr, u32(payload.size()));
    write_bytes(hdr.data(), 4);
    if (!payload.empty()) write_bytes(payload.data(), payload.size());
    sent_ += 4 + payload.size();
    frames_.push_back({phase_, 's', type, 4 + payload.size()});
    last_was_send_ = true;
  }
  Bytes recv_impl(MsgType* type_out) {
    u8 hdr[4];
    read_bytes(hdr, 4);
    u32 len = get_u32be(hdr);
    if (len > kMaxFrame) throw ChannelError("oversized frame");
    Bytes payload(len);
    if (len) read_bytes(payload.data(), len);
    received_ += 4 + u64(len);
    if (last_was_send_) rounds_++;
    last_was_send_ = false;
    MsgType t = payload.empty() ? MsgType::raw : MsgType(payload[0]);
    *type_out = t;
    frames_.push_back({phase_, 'r', t, 4 + u64(len)});
    return payload;
  }

  u64 sent_ = 0, received_ = 0, rounds_ = 0;
  bool last_was_send_ = false;
  std::string phase_ = "setup";
  std::vector<Snapshot> snapshots_;
  std::vector<FrameRecord> frames_;
  std::map<std::string, u64> phase_nanos_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct PhaseTimer {
  Channel& ch;
  std::string phase;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  PhaseTimer(Channel& c, std::string p) : ch(c), phase(std::move(p)) { ch.set_phase(phase); }
  ~PhaseTimer() {
    ch.add_phase_time(phase, u64(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                     std::chrono::steady_clock::now() - t0)
                                     .count()));
  }
};

// ---- in-process backend ----

namespace detail {
struct Mailbox {
  std::mutex m;
  std::condition_variable cv;
  std::deque<u8> data;
  bool closed = false;
};
}  // namespace detail

class InProcessChannel : public Channel {
 public:
  InProcessChannel(std::shared_ptr<detail::Mailbox> in, std::shared_ptr<detail::Mailbox> out,
                   std::chrono::milliseconds timeout)
      : in_(std::move(in)), out_(std::move(out)), timeout_(timeout) {}
  ~InProcessChannel() override {
    std::lock_guard<std::mutex> lk(out_->m);
    out_->closed = true;
    out_->cv.notify_all();
  }

 protected:
  void write_bytes(const u8* p, size_t n) override {
    std::lock_guard<std::mutex> lk(out_->m);
    if (out_->closed) throw ChannelError("peer disconnected");
    out_->data.insert(out_->data.end(), p, p + n);
    out_->cv.notify_all();
  }
  void read_bytes(u8* p, size_t n) override {
    std::unique_lock<std::mutex> lk(in_->m);
    size_t got = 0;
    while (got < n) {
      if (!in_->cv.wait_for(lk, timeout_, [&] { return !in_->data.empty() || in_->closed; }))
        throw ChannelError("recv timeout");
      if (in_->data.empty() && in_->closed) throw ChannelError("peer disconnected");
      while (got < n && !in_->data.empty()) {
        p[got++] = in_->data.front();
        in_->data.pop_front();
      }
    }
  }

 private:
  std::shared_ptr<detail::Mailbox> in_, out_;
  std::chrono::milliseconds timeout_;
};

inline std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_in_process_pair(
    std::chrono::milliseconds timeout = std::chrono::milliseconds(120000)) {
  auto a2b = std::make_shared<detail::Mailbox>();
  auto b2a = std::make_shared<detail::Mailbox>();
  auto a = std::make_unique<InProcessChannel>(b2a, a2b, timeout);
  auto b = std::make_unique<InProcessChannel>(a2b, b2a, timeout);
  return {std::move(a), std::move(b)};
}

// ---- socket backend (plain TCP, no encryption: semi-honest model) ----

class SocketChannel : public Channel {
 public:
  // server side: listen on port (0 = ephemeral), accept one peer
  static std::unique_ptr<SocketChannel> listen(u16 port, int timeout_ms = 120000,
                                               u16* bound_port = nullptr) {
    int ls = ::socket(AF_INET, SOCK_STREAM, 0);
    if (ls < 0) throw ChannelError("socket() failed");
    int one = 1;
    ::setsockopt(ls, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port);
    if (::bind(ls, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      ::close(ls);
      throw ChannelError("bind() failed");
    }
    if (::listen(ls, 1) != 0) {
      ::close(ls);
      throw ChannelError("listen() failed");
    }
    if (bound_port) {
      socklen_t alen = sizeof addr;
      ::getsockname(ls, reinterpret_cast<sockaddr*>(&addr), &alen);
      *bound_port = ntohs(addr.sin_port);
    }
    int fd = ::accept(ls, nullptr, nullptr);
    ::close(ls);
    if (fd < 0) throw ChannelError("accept() failed");
    return std::unique_ptr<SocketChannel>(new SocketChannel(fd, timeout_ms));
  }

  static std::unique_ptr<SocketChannel> connect(const std::string& host, u16 port,
                                                int timeout_ms = 120000) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
      throw ChannelError("bad host address: " + host);
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
      int fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) throw ChannelError("socket() failed");
      if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0)
        return std::unique_ptr<SocketChannel>(new SocketChannel(fd, timeout_ms));
      ::close(fd);
      if (std::chrono::steady_clock::now() > deadline) throw ChannelError("connect timeout");
      ::usleep(50 * 1000);  // peer may not be listening yet
    }
  }

  ~SocketChannel() override {
    if (fd_ >= 0) ::close(fd_);
  }

 protected:
  void write_bytes(const u8* p, size_t n) override {
    size_t off = 0;
    while (off < n) {
      ssize_t w = ::send(fd_, p + off, n - off, MSG_NOSIGNAL);
      if (w <= 0) throw ChannelError("send failed (peer disconnect?)");
      off += size_t(w);
    }
  }
  void read_bytes(u8* p, size_t n) override {
    size_t off = 0;
    while (off < n) {
      ssize_t r = ::recv(fd_, p + off, n - off, 0);
      if (r == 0) throw ChannelError("peer disconnected");
      if (r < 0) throw ChannelError("recv failed or timed out");
      off += size_t(r);
    }
  }

 private:
  SocketChannel(int fd, int timeout_ms) : fd_(fd) {
    timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  int fd_;
};

}  // namespace privimpute::net
