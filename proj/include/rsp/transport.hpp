#pragma once

#include <json.hpp>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsp::transport {

using Json = nlohmann::json;

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { InProc, Tcp };

// One endpoint of an ordered, reliable, framed byte channel. A frame is a
// 4-byte little-endian payload length followed by one UTF-8 JSON object.
// Every framed byte string an endpoint sends or receives is logged verbatim,
// which is what transcript determinism checks compare across transports.
class Channel {
 public:
  static constexpr std::size_t kMaxFramePayload = 1 << 20;

  virtual ~Channel() = default;

  void send_frame(const Json& msg);
  Json recv_frame();

  const std::vector<std::string>& sent_log() const { return sent_; }
  const std::vector<std::string>& recv_log() const { return recv_; }

  static std::string frame_bytes(const std::string& payload);

 protected:
  virtual void write_bytes(const std::string& framed) = 0;
  virtual std::string read_framed() = 0;

 private:
  std::vector<std::string> sent_;
  std::vector<std::string> recv_;
};

struct Pair {
  std::unique_ptr<Channel> verifier_end;
  std::unique_ptr<Channel> prover_end;
};

// Connected endpoint pair. InProc uses in-memory queues; Tcp binds an
// ephemeral loopback port and connects across it. Both deliver the identical
// message sequence for identical seeds.
Pair make_pair(Mode mode);

}  // namespace rsp::transport
