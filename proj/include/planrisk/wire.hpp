#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "planrisk/planner.hpp"
#include "planrisk/tensor.hpp"
#include "planrisk/types.hpp"

namespace planrisk {

// Frame: magic "PLNR" | version u8=1 | type u8 | request_id u64 | body_len u32 | body.
// Request body:  C u16 | ch u16 | H u16 | W u16 | float32 payload (row-major).
// Response body: T u16 | T x 2 float64 waypoints.
// Error body:    code u16 | UTF-8 message. All integers little-endian.
namespace wire {

enum FrameType : std::uint8_t {
  kRequest = 1,
  kResponse = 2,
  kError = 3,
};

enum ErrorCode : std::uint16_t {
  kMalformedFrame = 1,
  kBadShape = 2,
  kPlannerFailure = 3,
  kUnsupported = 4,
};

constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 18;

struct Frame {
  std::uint8_t version = kVersion;
  std::uint8_t type = 0;
  std::uint64_t request_id = 0;
  std::vector<std::uint8_t> body;
};

std::vector<std::uint8_t> encode_request(std::uint64_t request_id, const ViewTensor& x);
std::vector<std::uint8_t> encode_response(std::uint64_t request_id, const Trajectory& t);
std::vector<std::uint8_t> encode_error(std::uint64_t request_id, std::uint16_t code,
                                       const std::string& message);

ViewTensor decode_request_body(const std::vector<std::uint8_t>& body);
Trajectory decode_response_body(const std::vector<std::uint8_t>& body);
// (code, message)
std::pair<std::uint16_t, std::string> decode_error_body(const std::vector<std::uint8_t>& body);

}  // namespace wire

// Loopback reference server answering protocol requests with a backend
// planner's output. Malformed frames are answered with error frames; a
// malformed header tears down that connection only.
class PlannerServer {
 public:
  // port 0 binds an ephemeral port; see port() for the bound value.
  PlannerServer(std::shared_ptr<Planner> backend, const std::string& host, int port,
                int workers = 4);
  ~PlannerServer();

  int port() const { return port_; }
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

// Client-side planner speaking the wire protocol. Requests carry
// client-assigned ids so responses may arrive out of order; one transport
// retry per call, then TransportError.
std::shared_ptr<Planner> make_remote_planner(const std::string& host, int port,
                                             int expected_horizon);

}  // namespace planrisk
