#include "splitlab/wire.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <fstream>

#include "splitlab/checkpoint.hpp"

namespace splitlab::wire {

namespace {

constexpr char kMagic[4] = {'S', 'I', 'P', '1'};
constexpr uint8_t kVersion = 1;
constexpr uint8_t kDtypeF32 = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<uint8_t> encode_tensor(const Tensor& t, MsgType type) {
  if (type != MsgType::InferRequest && type != MsgType::InferResponse)
    throw Error("encode_tensor: tensor frames must be INFER_REQUEST or INFER_RESPONSE");
  if (t.ndim() > kMaxNdim) throw Error("encode_tensor: too many dimensions");
  std::vector<uint8_t> out;
  out.reserve(8 + t.shape.size() * 4 + t.data.size() * 4);
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(static_cast<uint8_t>(type));
  out.push_back(kDtypeF32);
  out.push_back(static_cast<uint8_t>(t.ndim()));
  for (int d : t.shape) put_u32(out, static_cast<uint32_t>(d));
  const size_t start = out.size();
  out.resize(start + t.data.size() * 4);
  static_assert(sizeof(float) == 4);
  std::memcpy(out.data() + start, t.data.data(), t.data.size() * 4);
  return out;
}

std::vector<uint8_t> encode_error(uint16_t code) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(static_cast<uint8_t>(MsgType::Error));
  out.push_back(static_cast<uint8_t>(code & 0xff));
  out.push_back(static_cast<uint8_t>(code >> 8));
  return out;
}

ParseResult try_parse(const uint8_t* data, size_t len) {
  ParseResult r;
  auto bad = [&](std::string why) {
    r.status = ParseStatus::Bad;
    r.error = std::move(why);
    return r;
  };
  if (len < 6) {
    r.status = ParseStatus::NeedMore;
    return r;
  }
  if (std::memcmp(data, kMagic, 4) != 0) return bad("bad magic");
  if (data[4] != kVersion) return bad("unsupported version " + std::to_string(data[4]));
  const uint8_t type = data[5];
  if (type == static_cast<uint8_t>(MsgType::Error)) {
    if (len < 8) {
      r.status = ParseStatus::NeedMore;
      return r;
    }
    r.status = ParseStatus::Ok;
    r.consumed = 8;
    r.msg.type = MsgType::Error;
    r.msg.error_code = static_cast<uint16_t>(data[6] | (data[7] << 8));
    return r;
  }
  if (type != static_cast<uint8_t>(MsgType::InferRequest) &&
      type != static_cast<uint8_t>(MsgType::InferResponse))
    return bad("unknown message type " + std::to_string(type));
  if (len < 8) {
    r.status = ParseStatus::NeedMore;
    return r;
  }
  if (data[6] != kDtypeF32) return bad("unsupported dtype " + std::to_string(data[6]));
  const int ndim = data[7];
  if (ndim == 0 || ndim > kMaxNdim) return bad("ndim out of range: " + std::to_string(ndim));
  const size_t dims_end = 8 + static_cast<size_t>(ndim) * 4;
  if (len < dims_end) {
    r.status = ParseStatus::NeedMore;
    return r;
  }
  std::vector<int> shape;
  int64_t count = 1;
  for (int i = 0; i < ndim; ++i) {
    const uint32_t d = get_u32(data + 8 + static_cast<size_t>(i) * 4);
    if (d == 0) return bad("zero dimension");
    count *= d;
    if (count > kMaxElements) return bad("dims overflow declared payload limit");
    shape.push_back(static_cast<int>(d));
  }
  const size_t total = dims_end + static_cast<size_t>(count) * 4;
  if (len < total) {
    r.status = ParseStatus::NeedMore;
    return r;
  }
  r.status = ParseStatus::Ok;
  r.consumed = total;
  r.msg.type = static_cast<MsgType>(type);
  r.msg.tensor = Tensor(shape);
  std::memcpy(r.msg.tensor.data.data(), data + dims_end, static_cast<size_t>(count) * 4);
  return r;
}

DecodedMessage decode_message(const std::vector<uint8_t>& bytes) {
  ParseResult r = try_parse(bytes.data(), bytes.size());
  if (r.status == ParseStatus::NeedMore) throw DecodeError("truncated frame", static_cast<long>(bytes.size()));
  if (r.status == ParseStatus::Bad) throw DecodeError(r.error, 0);
  if (r.consumed != bytes.size())
    throw DecodeError("trailing bytes after frame", static_cast<long>(r.consumed));
  return std::move(r.msg);
}

std::pair<Tensor, uint8_t> decode_tensor(const std::vector<uint8_t>& bytes) {
  DecodedMessage m = decode_message(bytes);
  if (m.type == MsgType::Error)
    throw DecodeError("expected tensor frame, got error frame", 5);
  return {std::move(m.tensor), static_cast<uint8_t>(m.type)};
}

// ---------------------------------------------------------------------------

CaptureWriter::CaptureWriter(std::string path) : path_(std::move(path)) {
  std::ofstream f(path_, std::ios::binary | std::ios::trunc);  // start empty
  if (!f) throw Error("cannot open capture file: " + path_);
}

uint64_t CaptureWriter::append(const std::vector<uint8_t>& frame) {
  std::lock_guard<std::mutex> lock(mu_);
  std::ofstream f(path_, std::ios::binary | std::ios::app);
  if (!f) throw Error("cannot append to capture file: " + path_);
  uint8_t len[4];
  const uint32_t n = static_cast<uint32_t>(frame.size());
  for (int i = 0; i < 4; ++i) len[i] = static_cast<uint8_t>((n >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(len), 4);
  f.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
  f.flush();
  return next_id_.fetch_add(1);
}

ReplayResult replay_capture(const std::string& path) {
  ReplayResult out;
  const auto bytes = io::read_file(path);
  size_t pos = 0;
  uint64_t id = 0;
  while (pos < bytes.size()) {
    if (pos + 4 > bytes.size()) {
      out.truncated_tail = true;
      break;
    }
    const uint32_t n = get_u32(bytes.data() + pos);
    if (pos + 4 + n > bytes.size()) {
      out.truncated_tail = true;
      break;
    }
    CaptureRecord rec;
    rec.id = id++;
    rec.frame.assign(bytes.begin() + static_cast<long>(pos) + 4,
                     bytes.begin() + static_cast<long>(pos) + 4 + n);
    DecodedMessage m = decode_message(rec.frame);
    if (m.type == MsgType::InferRequest) out.tensors.push_back(m.tensor);
    out.records.push_back(std::move(rec));
    pos += 4 + n;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool send_all(int fd, const uint8_t* data, size_t len) {
  size_t sent = 0;
  while (sent < len) {
    const ssize_t n = ::send(fd, data + sent, len - sent, MSG_NOSIGNAL);
    if (n <= 0) return false;
    sent += static_cast<size_t>(n);
  }
  return true;
}

}  // namespace

Server::Server(zoo::SplitModel model, ServerConfig cfg) : model_(std::move(model)), cfg_(std::move(cfg)) {
  if (cfg_.split_point) model_.config.split_point = cfg_.split_point;
}

Server::~Server() { stop(); }

void Server::start() {
  if (cfg_.capture) capture_ = std::make_unique<CaptureWriter>(cfg_.capture_path);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error("server: socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(cfg_.port));
  if (::inet_pton(AF_INET, cfg_.host.c_str(), &addr.sin_addr) != 1)
    throw Error("server: bad listen address " + cfg_.host);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw Error("server: bind failed on " + cfg_.host + ":" + std::to_string(cfg_.port));
  if (::listen(listen_fd_, 16) != 0) throw Error("server: listen failed");
  socklen_t alen = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &alen);
  port_ = ntohs(addr.sin_port);
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (accept_thread_.joinable()) accept_thread_.join();
  std::lock_guard<std::mutex> lock(workers_mu_);
  for (auto& t : workers_)
    if (t.joinable()) t.join();
  workers_.clear();
}

void Server::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_) break;
      continue;
    }
    std::lock_guard<std::mutex> lock(workers_mu_);
    workers_.emplace_back([this, fd] { handle_connection(fd); });
  }
}

void Server::handle_connection(int fd) {
  std::vector<uint8_t> buf;
  uint8_t chunk[4096];
  while (running_) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buf.insert(buf.end(), chunk, chunk + n);
    bool keep_reading = true;
    while (keep_reading && !buf.empty()) {
      ParseResult r = try_parse(buf.data(), buf.size());
      switch (r.status) {
        case ParseStatus::NeedMore:
          keep_reading = false;
          break;
        case ParseStatus::Bad: {
          // reply and resynchronize by dropping the buffered bytes
          const auto reply = encode_error(kErrMalformed);
          send_all(fd, reply.data(), reply.size());
          buf.clear();
          keep_reading = false;
          break;
        }
        case ParseStatus::Ok: {
          std::vector<uint8_t> frame(buf.begin(), buf.begin() + static_cast<long>(r.consumed));
          buf.erase(buf.begin(), buf.begin() + static_cast<long>(r.consumed));
          if (r.msg.type != MsgType::InferRequest) {
            const auto reply = encode_error(kErrMalformed);
            send_all(fd, reply.data(), reply.size());
            break;
          }
          // honest-but-curious: persist before computing
          if (capture_) capture_->append(frame);
          std::vector<uint8_t> reply;
          try {
            Tensor logits = model_.server_forward(r.msg.tensor);
            reply = encode_tensor(logits, MsgType::InferResponse);
          } catch (const ShapeError&) {
            reply = encode_error(kErrShapeMismatch);
          } catch (const std::exception&) {
            reply = encode_error(kErrInternal);
          }
          ++requests_;
          send_all(fd, reply.data(), reply.size());
          break;
        }
      }
    }
  }
  ::close(fd);
}

Tensor request_inference(const std::string& host, int port, const Tensor& h) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error("client: socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw Error("client: bad server address " + host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    throw Error("client: cannot connect to " + host + ":" + std::to_string(port));
  }
  const auto frame = encode_tensor(h, MsgType::InferRequest);
  if (!send_all(fd, frame.data(), frame.size())) {
    ::close(fd);
    throw Error("client: send failed");
  }
  std::vector<uint8_t> buf;
  uint8_t chunk[4096];
  while (true) {
    ParseResult r = try_parse(buf.data(), buf.size());
    if (r.status == ParseStatus::Ok) {
      ::close(fd);
      if (r.msg.type == MsgType::Error)
        throw Error("server replied with error code " + std::to_string(r.msg.error_code));
      return r.msg.tensor;
    }
    if (r.status == ParseStatus::Bad) {
      ::close(fd);
      throw DecodeError("client: malformed reply: " + r.error, 0);
    }
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) {
      ::close(fd);
      throw Error("client: connection closed before a full reply");
    }
    buf.insert(buf.end(), chunk, chunk + n);
  }
}

ClientRun run_client(const zoo::SplitModel& model, const std::vector<Tensor>& images,
                     const defenses::DefenseConfig& defense, const std::string& host, int port,
                     uint64_t seed) {
  defense.validate();
  ClientRun out;
  for (size_t i = 0; i < images.size(); ++i) {
    Tensor h = model.client_forward(images[i]);
    if (defense.kind == defenses::DefenseKind::Noise)
      h = defenses::noise_mask(h, defense.noise_scale,
                               derive_seed(seed ? seed : defense.seed, "noise-" + std::to_string(i)));
    else if (defense.kind == defenses::DefenseKind::Prune)
      h = defenses::disco_prune(h, defense.prune_ratio);
    out.sent_h.push_back(h);
    out.logits.push_back(request_inference(host, port, h));
  }
  return out;
}

}  // namespace splitlab::wire
