#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "splitlab/defenses.hpp"
#include "splitlab/zoo.hpp"

namespace splitlab::wire {

// Frame layout (little-endian, normative):
//   magic "SIP1" | version u8 = 1 | msg_type u8 | dtype u8 = 1 | ndim u8 |
//   dims u32 x ndim | payload f32 x product(dims)
// ERROR frames carry a u16 code instead of dtype/ndim/dims/payload.
enum class MsgType : uint8_t { InferRequest = 1, InferResponse = 2, Error = 3 };

enum ErrorCode : uint16_t {
  kErrMalformed = 1,
  kErrShapeMismatch = 2,
  kErrInternal = 3,
};

constexpr int kMaxNdim = 8;
constexpr int64_t kMaxElements = 1 << 24;

std::vector<uint8_t> encode_tensor(const Tensor& t, MsgType type);
std::vector<uint8_t> encode_error(uint16_t code);

struct DecodedMessage {
  MsgType type;
  Tensor tensor;        // InferRequest / InferResponse
  uint16_t error_code = 0;  // Error
};

// One-shot decode of a complete frame; throws DecodeError otherwise.
DecodedMessage decode_message(const std::vector<uint8_t>& bytes);
std::pair<Tensor, uint8_t> decode_tensor(const std::vector<uint8_t>& bytes);

// Incremental parse for stream transports.
enum class ParseStatus { Ok, NeedMore, Bad };
struct ParseResult {
  ParseStatus status = ParseStatus::NeedMore;
  size_t consumed = 0;
  DecodedMessage msg;
  std::string error;
};
ParseResult try_parse(const uint8_t* data, size_t len);

// ---------------------------------------------------------------------------
// Capture file: concatenated u32-LE-length-prefixed raw frames.
// ---------------------------------------------------------------------------

struct CaptureRecord {
  uint64_t id = 0;  // contiguous from 0
  int64_t timestamp_us = 0;
  std::vector<uint8_t> frame;
};

class CaptureWriter {
 public:
  explicit CaptureWriter(std::string path);
  // Serialized append; returns the record id.
  uint64_t append(const std::vector<uint8_t>& frame);
  uint64_t count() const { return next_id_.load(); }

 private:
  std::string path_;
  std::mutex mu_;
  std::atomic<uint64_t> next_id_{0};
};

struct ReplayResult {
  std::vector<CaptureRecord> records;
  std::vector<Tensor> tensors;  // decoded h of every InferRequest record
  bool truncated_tail = false;
};
ReplayResult replay_capture(const std::string& path);

// ---------------------------------------------------------------------------
// Split-inference server and client over loopback/TCP.
// ---------------------------------------------------------------------------

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 0;  // 0: ephemeral
  int split_point = 0;  // 0: model default
  bool capture = false;
  std::string capture_path = "capture.bin";
};

class Server {
 public:
  Server(zoo::SplitModel model, ServerConfig cfg);
  ~Server();

  void start();
  void stop();
  int port() const { return port_; }
  long requests_served() const { return requests_.load(); }
  uint64_t captured() const { return capture_ ? capture_->count() : 0; }

 private:
  void accept_loop();
  void handle_connection(int fd);

  zoo::SplitModel model_;
  ServerConfig cfg_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::thread accept_thread_;
  std::vector<std::thread> workers_;
  std::mutex workers_mu_;
  std::atomic<bool> running_{false};
  std::atomic<long> requests_{0};
  std::unique_ptr<CaptureWriter> capture_;
};

// Sends one INFER_REQUEST and waits for the reply. Throws on transport
// failure; surfaces protocol ERROR replies as splitlab::Error.
Tensor request_inference(const std::string& host, int port, const Tensor& h);

// Full client pass: h = M_C(x), wire-boundary defense applied client-side,
// then remote inference.
struct ClientRun {
  std::vector<Tensor> logits;
  std::vector<Tensor> sent_h;
};
ClientRun run_client(const zoo::SplitModel& model, const std::vector<Tensor>& images,
                     const defenses::DefenseConfig& defense, const std::string& host, int port,
                     uint64_t seed = 0);

}  // namespace splitlab::wire
