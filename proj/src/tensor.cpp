#include "planrisk/tensor.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>
#include <string>

#include "planrisk/errors.hpp"

namespace planrisk {

namespace {

constexpr std::array<char, 4> kMagic = {'M', 'V', 'T', 'N'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeFloat32 = 1;
constexpr std::uint8_t kDtypeInt32 = 2;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_file(const std::filesystem::path& path, const std::string& header, const void* payload,
                std::size_t payload_bytes) {
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw Error("cannot open for writing: " + path.string());
  if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size() ||
      (payload_bytes > 0 && std::fwrite(payload, 1, payload_bytes, f.get()) != payload_bytes)) {
    throw Error("write failed: " + path.string());
  }
  if (std::fflush(f.get()) != 0) throw Error("flush failed: " + path.string());
}

std::string make_header(const std::vector<std::uint32_t>& dims, std::uint8_t dtype) {
  std::string h;
  h.append(kMagic.data(), kMagic.size());
  put_u32(h, kVersion);
  put_u32(h, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_u32(h, d);
  h.push_back(static_cast<char>(dtype));
  return h;
}

struct RawTensor {
  std::vector<std::uint32_t> dims;
  std::uint8_t dtype = 0;
  std::vector<float> f32;
  std::vector<std::int32_t> i32;
};

RawTensor read_raw(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw Error("cannot open for reading: " + path.string());

  auto read_exact = [&](void* dst, std::size_t n, const char* what) {
    if (std::fread(dst, 1, n, f.get()) != n) {
      throw TruncationError(std::string("truncated ") + what + ": " + path.string());
    }
  };

  unsigned char magic[4];
  read_exact(magic, 4, "magic");
  if (std::memcmp(magic, kMagic.data(), 4) != 0) {
    throw FormatError("bad magic in " + path.string());
  }
  unsigned char word[4];
  read_exact(word, 4, "version");
  if (get_u32(word) != kVersion) {
    throw FormatError("unsupported tensor version in " + path.string());
  }
  read_exact(word, 4, "rank");
  const std::uint32_t rank = get_u32(word);
  if (rank == 0 || rank > 8) throw FormatError("implausible rank in " + path.string());

  RawTensor raw;
  raw.dims.resize(rank);
  std::uint64_t numel = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    read_exact(word, 4, "dims");
    raw.dims[i] = get_u32(word);
    numel *= raw.dims[i];
    if (numel > (1ull << 33)) throw FormatError("tensor too large in " + path.string());
  }
  unsigned char dtype = 0;
  read_exact(&dtype, 1, "dtype");
  if (dtype != kDtypeFloat32 && dtype != kDtypeInt32) {
    throw FormatError("unknown dtype code in " + path.string());
  }
  raw.dtype = dtype;

  const std::size_t bytes = static_cast<std::size_t>(numel) * 4;
  std::vector<unsigned char> payload(bytes);
  if (bytes > 0) {
    const std::size_t got = std::fread(payload.data(), 1, bytes, f.get());
    if (got != bytes) {
      throw TruncationError("payload shorter than declared dims: " + path.string());
    }
  }
  unsigned char extra;
  if (std::fread(&extra, 1, 1, f.get()) == 1) {
    throw TruncationError("payload longer than declared dims: " + path.string());
  }

  if (dtype == kDtypeFloat32) {
    raw.f32.resize(static_cast<std::size_t>(numel));
    for (std::size_t i = 0; i < raw.f32.size(); ++i) {
      std::uint32_t bits = get_u32(payload.data() + i * 4);
      float v;
      std::memcpy(&v, &bits, 4);
      if (!std::isfinite(v)) {
        throw ValidationError("non-finite value in tensor payload: " + path.string());
      }
      raw.f32[i] = v;
    }
  } else {
    raw.i32.resize(static_cast<std::size_t>(numel));
    for (std::size_t i = 0; i < raw.i32.size(); ++i) {
      raw.i32[i] = static_cast<std::int32_t>(get_u32(payload.data() + i * 4));
    }
  }
  return raw;
}

void check_finite_f32(const std::vector<float>& data, const std::filesystem::path& path) {
  for (float v : data) {
    if (!std::isfinite(v)) {
      throw ValidationError("refusing to write non-finite tensor value: " + path.string());
    }
  }
}

std::vector<unsigned char> pack_f32(const std::vector<float>& data) {
  std::vector<unsigned char> out(data.size() * 4);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    out[i * 4 + 0] = static_cast<unsigned char>(bits & 0xff);
    out[i * 4 + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
    out[i * 4 + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
    out[i * 4 + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
  }
  return out;
}

std::vector<unsigned char> pack_i32(const std::vector<std::int32_t>& data) {
  std::vector<unsigned char> out(data.size() * 4);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(data[i]);
    out[i * 4 + 0] = static_cast<unsigned char>(bits & 0xff);
    out[i * 4 + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
    out[i * 4 + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
    out[i * 4 + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
  }
  return out;
}

void check_count(std::uint64_t declared, std::size_t actual, const char* kind) {
  if (declared != actual) {
    throw ArgumentError(std::string(kind) + " data length does not match dims");
  }
}

}  // namespace

void write_tensor(const ViewTensor& t, const std::filesystem::path& path) {
  check_count(static_cast<std::uint64_t>(t.cameras) * t.channels * t.height * t.width,
              t.data.size(), "view tensor");
  check_finite_f32(t.data, path);
  const auto header = make_header({static_cast<std::uint32_t>(t.cameras),
                                   static_cast<std::uint32_t>(t.channels),
                                   static_cast<std::uint32_t>(t.height),
                                   static_cast<std::uint32_t>(t.width)},
                                  kDtypeFloat32);
  const auto payload = pack_f32(t.data);
  write_file(path, header, payload.data(), payload.size());
}

void write_tensor(const SaliencyTensor& t, const std::filesystem::path& path) {
  check_count(static_cast<std::uint64_t>(t.cameras) * t.height * t.width, t.data.size(),
              "saliency tensor");
  check_finite_f32(t.data, path);
  const auto header = make_header({static_cast<std::uint32_t>(t.cameras),
                                   static_cast<std::uint32_t>(t.height),
                                   static_cast<std::uint32_t>(t.width)},
                                  kDtypeFloat32);
  const auto payload = pack_f32(t.data);
  write_file(path, header, payload.data(), payload.size());
}

void write_tensor(const LabelTensor& t, const std::filesystem::path& path) {
  check_count(static_cast<std::uint64_t>(t.cameras) * t.height * t.width, t.data.size(),
              "label tensor");
  const auto header = make_header({static_cast<std::uint32_t>(t.cameras),
                                   static_cast<std::uint32_t>(t.height),
                                   static_cast<std::uint32_t>(t.width)},
                                  kDtypeInt32);
  const auto payload = pack_i32(t.data);
  write_file(path, header, payload.data(), payload.size());
}

ViewTensor read_view_tensor(const std::filesystem::path& path) {
  RawTensor raw = read_raw(path);
  if (raw.dims.size() != 4 || raw.dtype != kDtypeFloat32) {
    throw FormatError("expected rank-4 float32 tensor: " + path.string());
  }
  ViewTensor t;
  t.cameras = static_cast<int>(raw.dims[0]);
  t.channels = static_cast<int>(raw.dims[1]);
  t.height = static_cast<int>(raw.dims[2]);
  t.width = static_cast<int>(raw.dims[3]);
  t.data = std::move(raw.f32);
  return t;
}

SaliencyTensor read_saliency_tensor(const std::filesystem::path& path) {
  RawTensor raw = read_raw(path);
  if (raw.dims.size() != 3 || raw.dtype != kDtypeFloat32) {
    throw FormatError("expected rank-3 float32 tensor: " + path.string());
  }
  SaliencyTensor t;
  t.cameras = static_cast<int>(raw.dims[0]);
  t.height = static_cast<int>(raw.dims[1]);
  t.width = static_cast<int>(raw.dims[2]);
  t.data = std::move(raw.f32);
  return t;
}

LabelTensor read_label_tensor(const std::filesystem::path& path) {
  RawTensor raw = read_raw(path);
  if (raw.dims.size() != 3 || raw.dtype != kDtypeInt32) {
    throw FormatError("expected rank-3 int32 tensor: " + path.string());
  }
  LabelTensor t;
  t.cameras = static_cast<int>(raw.dims[0]);
  t.height = static_cast<int>(raw.dims[1]);
  t.width = static_cast<int>(raw.dims[2]);
  t.data = std::move(raw.i32);
  return t;
}

}  // namespace planrisk
