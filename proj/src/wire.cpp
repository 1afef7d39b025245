// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>

#include "skf/error.hpp"
#include "skf/guidance.hpp"
#include "skf/io.hpp"

namespace skf {

namespace {

using Clock = std::chrono::steady_clock;

size_t expected_payload(const nlohmann::json& h) {
  if (!h.contains("h") && !h.contains("w")) return 0;
  if (!h.contains("h") || !h.contains("w") || !h["h"].is_number_integer() || !h["w"].is_number_integer())
    throw Error(Errc::kMalformedFrame, "frame header needs integer h and w");
  const int64_t hh = h["h"].get<int64_t>(), ww = h["w"].get<int64_t>();
  if (hh < 0 || ww < 0) throw Error(Errc::kMalformedFrame, "negative frame size");
  if (hh > 8192 || ww > 8192) throw Error(Errc::kMalformedFrame, "frame image too large");
  return static_cast<size_t>(hh * ww * 3);
}

nlohmann::json parse_header(std::span<const uint8_t> bytes) {
  nlohmann::json h = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (h.is_discarded() || !h.is_object() || !h.contains("type") || !h["type"].is_string())
    throw Error(Errc::kMalformedFrame, "frame header is not a typed JSON object");
  return h;
}

}  // namespace

std::vector<uint8_t> encode_frame(const Frame& f) {
  const size_t n = expected_payload(f.header);
  if (n != f.payload.size())
    throw Error(Errc::kMalformedFrame, "payload has " + std::to_string(f.payload.size()) + " floats, header says " +
                                           std::to_string(n));
  const std::string header = f.header.dump();
  ByteWriter w;
  w.u32(static_cast<uint32_t>(header.size()));
  w.str(header);
  for (float v : f.payload) w.f32(v);
  return std::move(w.buffer());
}

Frame decode_frame(std::span<const uint8_t> bytes) {
  try {
    ByteReader r(bytes);
    const uint32_t len = r.u32();
    if (len == 0 || len > kMaxHeaderBytes) throw Error(Errc::kMalformedFrame, "bad header length");
    Frame f;
    f.header = parse_header(r.take(len));
    const size_t n = expected_payload(f.header);
    if (r.remaining() != n * 4) throw Error(Errc::kMalformedFrame, "payload length does not match header");
    f.payload.resize(n);
    for (auto& v : f.payload) v = r.f32();
    return f;
  } catch (const Error& e) {
    if (e.code() == Errc::kTruncatedFile) throw Error(Errc::kMalformedFrame, "frame truncated");
    throw;
  }
}

Frame score_request_frame(const ScoreRequest& req) {
  if (req.image.channels != 3) throw Error(Errc::kShapeMismatch, "score request image must have 3 channels");
  Frame f;
  f.header = {{"type", "score_request"},      {"h", req.image.height},
              {"w", req.image.width},         {"timestep", req.timestep},
              {"guidance_scale", req.guidance_scale}, {"prompt", req.prompt},
              {"seed", req.seed}};
  if (req.camera) f.header["camera"] = camera_to_json(*req.camera);
  f.payload = req.image.data;
  return f;
}

ScoreRequest score_request_from_frame(const Frame& f) {
  const auto& h = f.header;
  if (h.value("type", "") != "score_request") throw Error(Errc::kMalformedFrame, "expected score_request");
  ScoreRequest req;
  try {
    req.image = Image(h.at("w").get<int>(), h.at("h").get<int>(), 3);
    req.timestep = h.at("timestep").get<int>();
    req.guidance_scale = h.at("guidance_scale").get<double>();
    req.prompt = h.at("prompt").get<std::string>();
    req.seed = h.at("seed").get<uint64_t>();
    if (h.contains("camera")) req.camera = camera_from_json(h["camera"]);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kMalformedFrame, std::string("score_request header: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::kMalformedFrame, e.what());
  }
  req.image.data = f.payload;
  return req;
}

Frame score_response_frame(const ScoreResponse& resp) {
  Frame f;
  f.header = {{"type", "score_response"},
              {"h", resp.pixel_gradient.height},
              {"w", resp.pixel_gradient.width},
              {"provider_info", resp.provider_info}};
  f.payload = resp.pixel_gradient.data;
  return f;
}

WireConnection::~WireConnection() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<WireConnection> WireConnection::connect_to(const std::string& host, int port, double timeout_s) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
    throw Error(Errc::kProviderTimeout, "cannot resolve " + host);
  int fd = -1;
  for (addrinfo* a = res; a; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd < 0) continue;
    const int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, a->ai_addr, a->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd p{fd, POLLOUT, 0};
      if (::poll(&p, 1, static_cast<int>(timeout_s * 1000)) == 1) {
        int err = 0;
        socklen_t len = sizeof err;
        getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        rc = err == 0 ? 0 : -1;
      }
    }
    if (rc == 0) {
      fcntl(fd, F_SETFL, flags);
      int one = 1;
      setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      break;
    }
    ::close(fd);
    fd = -1;
  }
  freeaddrinfo(res);
  if (fd < 0) throw Error(Errc::kProviderTimeout, "cannot connect to " + host + ":" + std::to_string(port));
  return std::make_unique<WireConnection>(fd);
}

void WireConnection::send_bytes(std::span<const uint8_t> b) {
  size_t off = 0;
  while (off < b.size()) {
    const ssize_t n = ::send(fd_, b.data() + off, b.size() - off, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      throw Error(Errc::kIoError, "send failed: " + std::string(std::strerror(errno)));
    }
    off += static_cast<size_t>(n);
  }
}

void WireConnection::recv_exact(uint8_t* dst, size_t n, double timeout_s) {
  const auto deadline = Clock::now() + std::chrono::duration<double>(timeout_s);
  size_t off = 0;
  while (off < n) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) throw Error(Errc::kProviderTimeout, "read timed out");
    pollfd p{fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(left));
    if (rc == 0) throw Error(Errc::kProviderTimeout, "read timed out");
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::kIoError, "poll failed");
    }
    const ssize_t got = ::recv(fd_, dst + off, n - off, 0);
    if (got == 0) throw Error(Errc::kMalformedFrame, "connection closed mid-frame");
    if (got < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw Error(Errc::kIoError, "recv failed: " + std::string(std::strerror(errno)));
    }
    off += static_cast<size_t>(got);
  }
}

void WireConnection::expect_magic(double timeout_s) {
  uint8_t m[4];
  recv_exact(m, 4, timeout_s);
  if (std::memcmp(m, kWireMagic, 4) != 0) throw Error(Errc::kMalformedFrame, "bad stream magic");
}

void WireConnection::send_frame(const Frame& f) { send_bytes(encode_frame(f)); }

Frame WireConnection::recv_frame(double timeout_s) {
  uint8_t lenb[4];
  recv_exact(lenb, 4, timeout_s);
  const uint32_t len = static_cast<uint32_t>(lenb[0]) | (static_cast<uint32_t>(lenb[1]) << 8) |
                       (static_cast<uint32_t>(lenb[2]) << 16) | (static_cast<uint32_t>(lenb[3]) << 24);
  if (len == 0 || len > kMaxHeaderBytes) throw Error(Errc::kMalformedFrame, "bad header length");
  std::vector<uint8_t> buf(4 + len);
  std::memcpy(buf.data(), lenb, 4);
  recv_exact(buf.data() + 4, len, timeout_s);
  const size_t n = expected_payload(parse_header({buf.data() + 4, len}));
  buf.resize(4 + len + n * 4);
  recv_exact(buf.data() + 4 + len, n * 4, timeout_s);
  return decode_frame(buf);
}

ExternalProvider::ExternalProvider(std::string host, int port, double timeout_s)
    : host_(std::move(host)), port_(port), timeout_s_(timeout_s) {}

ScoreResponse ExternalProvider::attempt(const ScoreRequest& req) {
  if (!conn_) {
    conn_ = WireConnection::connect_to(host_, port_, timeout_s_);
    conn_->send_magic();
    conn_->send_frame({{{"type", "hello"}, {"version", kWireVersion}}, {}});
    conn_->expect_magic(timeout_s_);
    const Frame hello = conn_->recv_frame(timeout_s_);
    if (hello.header.value("type", "") != "hello" || !hello.header.contains("version") ||
        hello.header["version"] != kWireVersion) {
      conn_.reset();
      throw Error(Errc::kHandshakeVersionError, "guidance server did not confirm protocol version 1");
    }
  }
  conn_->send_frame(score_request_frame(req));
  const Frame f = conn_->recv_frame(timeout_s_);
  const std::string type = f.header.value("type", "");
  if (type == "error") throw Error(Errc::kMalformedFrame, "server error: " + f.header.value("message", ""));
  if (type != "score_response") throw Error(Errc::kMalformedFrame, "expected score_response, got " + type);
  ScoreResponse resp;
  resp.provider_info = f.header.value("provider_info", "");
  resp.pixel_gradient = Image(f.header["w"].get<int>(), f.header["h"].get<int>(), 3);
  if (resp.pixel_gradient.width != req.image.width || resp.pixel_gradient.height != req.image.height)
    throw Error(Errc::kShapeMismatch, "response is " + std::to_string(resp.pixel_gradient.width) + "x" +
                                          std::to_string(resp.pixel_gradient.height) + ", request was " +
                                          std::to_string(req.image.width) + "x" + std::to_string(req.image.height));
  resp.pixel_gradient.data = f.payload;
  for (float v : resp.pixel_gradient.data)
    if (!std::isfinite(v)) throw Error(Errc::kNonFinite, "guidance server returned a non-finite value");
  return resp;
}

ScoreResponse ExternalProvider::score(const ScoreRequest& req) {
  std::lock_guard lock(mu_);
  for (int tries = 0;; ++tries) {
    try {
      return attempt(req);
    } catch (const Error& e) {
      conn_.reset();
      const bool transient = e.code() == Errc::kProviderTimeout || e.code() == Errc::kIoError;
      if (!transient) throw;
      if (tries == 1) throw Error(Errc::kProviderTimeout, std::string("after 2 attempts: ") + e.what());
    }
  }
}

GuidanceServer::GuidanceServer(Handler handler, int port, int version)
    : handler_(std::move(handler)), version_(version) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw Error(Errc::kIoError, "socket failed");
  int one = 1;
  setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 8) != 0) {
    ::close(listen_fd_);
    throw Error(Errc::kIoError, "cannot listen on port " + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  thread_ = std::thread([this] { serve(); });
}

GuidanceServer::~GuidanceServer() { stop(); }

void GuidanceServer::stop() {
  if (stop_.exchange(true)) return;
  if (thread_.joinable()) thread_.join();
  ::close(listen_fd_);
}

void GuidanceServer::serve() {
  while (!stop_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    serve_connection(fd);
  }
}

void GuidanceServer::serve_connection(int fd) {
  WireConnection conn(fd);
  try {
    conn.expect_magic(5.0);
    const Frame hello = conn.recv_frame(5.0);
    if (hello.header.value("type", "") != "hello") return;
    conn.send_magic();
    conn.send_frame({{{"type", "hello"}, {"version", version_}}, {}});
    while (!stop_) {
      pollfd p{fd, POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) continue;
      const Frame f = conn.recv_frame(5.0);
      try {
        conn.send_frame(score_response_frame(handler_(score_request_from_frame(f))));
      } catch (const Error& e) {
        conn.send_frame({{{"type", "error"}, {"message", e.what()}}, {}});
      }
    }
  } catch (const Error&) {
    // Peer went away or spoke garbage; drop the connection.
  }
}

}  // namespace skf
