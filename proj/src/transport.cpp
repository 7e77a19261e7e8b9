#include "rsp/transport.hpp"

#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

namespace rsp::transport {

namespace {

std::string encode_length(std::uint32_t n) {
  std::string out(4, '\0');
  for (int i = 0; i < 4; ++i) out[i] = static_cast<char>((n >> (8 * i)) & 0xff);
  return out;
}

std::uint32_t decode_length(const char* bytes) {
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) {
    n |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return n;
}

}  // namespace

std::string Channel::frame_bytes(const std::string& payload) {
  if (payload.size() > kMaxFramePayload) {
    throw TransportError("frame exceeds size cap");
  }
  return encode_length(static_cast<std::uint32_t>(payload.size())) + payload;
}

void Channel::send_frame(const Json& msg) {
  std::string framed = frame_bytes(msg.dump());
  sent_.push_back(framed);
  write_bytes(framed);
}

Json Channel::recv_frame() {
  std::string framed = read_framed();
  recv_.push_back(framed);
  try {
    return Json::parse(framed.substr(4));
  } catch (const Json::parse_error& e) {
    throw TransportError(std::string("malformed frame: ") + e.what());
  }
}

namespace {

struct QueuePair {
  std::mutex m;
  std::condition_variable cv;
  std::deque<std::string> to_prover;
  std::deque<std::string> to_verifier;
  bool closed = false;

  void close() {
    std::lock_guard lk(m);
    closed = true;
    cv.notify_all();
  }
};

class InProcChannel : public Channel {
 public:
  InProcChannel(std::shared_ptr<QueuePair> shared, bool is_verifier)
      : shared_(std::move(shared)), is_verifier_(is_verifier) {}

  ~InProcChannel() override { shared_->close(); }

 protected:
  void write_bytes(const std::string& framed) override {
    std::lock_guard lk(shared_->m);
    if (shared_->closed) throw TransportError("channel closed");
    (is_verifier_ ? shared_->to_prover : shared_->to_verifier).push_back(framed);
    shared_->cv.notify_all();
  }

  std::string read_framed() override {
    std::unique_lock lk(shared_->m);
    auto& q = is_verifier_ ? shared_->to_verifier : shared_->to_prover;
    shared_->cv.wait(lk, [&] { return !q.empty() || shared_->closed; });
    if (q.empty()) throw TransportError("channel closed");
    std::string framed = std::move(q.front());
    q.pop_front();
    std::uint32_t n = decode_length(framed.data());
    if (n > kMaxFramePayload) throw TransportError("frame exceeds size cap");
    return framed;
  }

 private:
  std::shared_ptr<QueuePair> shared_;
  bool is_verifier_;
};

class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {}

  ~TcpChannel() override {
    if (fd_ >= 0) ::close(fd_);
  }

 protected:
  void write_bytes(const std::string& framed) override {
    std::size_t sent = 0;
    while (sent < framed.size()) {
      ssize_t n = ::send(fd_, framed.data() + sent, framed.size() - sent,
                         MSG_NOSIGNAL);
      if (n <= 0) throw TransportError("send failed");
      sent += static_cast<std::size_t>(n);
    }
  }

  std::string read_framed() override {
    char header[4];
    read_exact(header, 4);
    std::uint32_t n = decode_length(header);
    if (n > kMaxFramePayload) throw TransportError("frame exceeds size cap");
    std::string framed(header, 4);
    framed.resize(4 + n);
    read_exact(framed.data() + 4, n);
    return framed;
  }

 private:
  void read_exact(char* dst, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
      ssize_t r = ::recv(fd_, dst + got, n - got, 0);
      if (r <= 0) throw TransportError("connection dropped");
      got += static_cast<std::size_t>(r);
    }
  }

  int fd_;
};

}  // namespace

Pair make_pair(Mode mode) {
  if (mode == Mode::InProc) {
    auto shared = std::make_shared<QueuePair>();
    Pair pair;
    pair.verifier_end = std::make_unique<InProcChannel>(shared, true);
    pair.prover_end = std::make_unique<InProcChannel>(shared, false);
    return pair;
  }

  int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw TransportError("socket failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  int on = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &on, sizeof(on));
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(listener, 1) < 0) {
    ::close(listener);
    throw TransportError("bind/listen failed");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);

  int client = ::socket(AF_INET, SOCK_STREAM, 0);
  if (client < 0) {
    ::close(listener);
    throw TransportError("socket failed");
  }
  if (::connect(client, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(listener);
    ::close(client);
    throw TransportError("connect failed");
  }
  int server = ::accept(listener, nullptr, nullptr);
  ::close(listener);
  if (server < 0) {
    ::close(client);
    throw TransportError("accept failed");
  }
  for (int fd : {client, server}) {
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &on, sizeof(on));
  }
  Pair pair;
  pair.verifier_end = std::make_unique<TcpChannel>(server);
  pair.prover_end = std::make_unique<TcpChannel>(client);
  return pair;
}

}  // namespace rsp::transport
