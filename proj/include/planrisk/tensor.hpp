#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace planrisk {

// C-camera image stack, float32, row-major, camera-major ordering:
// data[((c*channels + k)*height + u)*width + v].
struct ViewTensor {
  int cameras = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  std::size_t size() const {
    return static_cast<std::size_t>(cameras) * channels * height * width;
  }
  std::size_t index(int c, int k, int u, int v) const {
    return ((static_cast<std::size_t>(c) * channels + k) * height + u) * width + v;
  }
  float at(int c, int k, int u, int v) const { return data[index(c, k, u, v)]; }
  float& at(int c, int k, int u, int v) { return data[index(c, k, u, v)]; }

  bool operator==(const ViewTensor&) const = default;
};

// Per-pixel attribution values, signed. Shape C x H x W.
struct SaliencyTensor {
  int cameras = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  std::size_t size() const {
    return static_cast<std::size_t>(cameras) * height * width;
  }
  std::size_t index(int c, int u, int v) const {
    return (static_cast<std::size_t>(c) * height + u) * width + v;
  }
  float at(int c, int u, int v) const { return data[index(c, u, v)]; }
  float& at(int c, int u, int v) { return data[index(c, u, v)]; }

  bool operator==(const SaliencyTensor&) const = default;
};

// int32 label map, shape C x H x W (partition serialization).
struct LabelTensor {
  int cameras = 0;
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> data;

  std::size_t size() const {
    return static_cast<std::size_t>(cameras) * height * width;
  }
  std::size_t index(int c, int u, int v) const {
    return (static_cast<std::size_t>(c) * height + u) * width + v;
  }
  std::int32_t at(int c, int u, int v) const { return data[index(c, u, v)]; }
  std::int32_t& at(int c, int u, int v) { return data[index(c, u, v)]; }

  bool operator==(const LabelTensor&) const = default;
};

// File layout: magic "MVTN" | version u32=1 | rank u32 | dims u32 x rank |
// dtype u8 (1=float32, 2=int32) | payload little-endian row-major.
// ViewTensor is rank 4, SaliencyTensor rank 3 float32, LabelTensor rank 3 int32.
void write_tensor(const ViewTensor& t, const std::filesystem::path& path);
void write_tensor(const SaliencyTensor& t, const std::filesystem::path& path);
void write_tensor(const LabelTensor& t, const std::filesystem::path& path);

ViewTensor read_view_tensor(const std::filesystem::path& path);
SaliencyTensor read_saliency_tensor(const std::filesystem::path& path);
LabelTensor read_label_tensor(const std::filesystem::path& path);

}  // namespace planrisk
