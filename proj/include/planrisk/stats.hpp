#pragma once

#include <vector>

#include "planrisk/tensor.hpp"

namespace planrisk {

// Normalized absolute-saliency distribution over the joint camera x pixel
// space: p(c,u,v) = |T| / sum|T|, factored into the camera marginal and the
// per-camera spatial conditionals.
struct SaliencyDistribution {
  int cameras = 0, height = 0, width = 0;
  std::vector<double> joint;       // p(c,u,v), size C*H*W
  std::vector<double> camera_marginal;  // p_cam(c)
  std::vector<double> camera_mass;      // m_c = sum |T^(c)|, unnormalized

  double joint_at(int c, int u, int v) const {
    return joint[(static_cast<std::size_t>(c) * height + u) * width + v];
  }
};

struct AttributionStats {
  double entropy = 0.0;           // nats
  double spatial_variance = 0.0;  // pixels^2
  double gini_cam = 0.0;
  std::vector<double> camera_mass;
  std::vector<double> camera_marginal;
};

// Throws ZeroMassError when the tensor is identically zero; the sample is
// flagged and excluded downstream rather than defaulted.
SaliencyDistribution normalize_saliency(const SaliencyTensor& t);

// Shannon entropy of the joint distribution, natural log, 0 log 0 = 0.
double attribution_entropy(const SaliencyDistribution& p);

// Camera-mass-weighted spatial second moment about each camera's saliency
// centroid. Coordinates are raw pixel indices (u = row, v = col) unless
// normalized_coords divides them by (H, W).
double spatial_variance(const SaliencyTensor& t, bool normalized_coords = false);

// Mean absolute pairwise difference over ordered pairs / (2 C sum).
double gini_coefficient(const std::vector<double>& masses);

AttributionStats attribution_stats(const SaliencyTensor& t, bool normalized_coords = false);

// Risk-aligned feature triple (-H, -sigma^2, +Gini): fixed signs so larger
// always means higher risk.
struct AlignedStats {
  double neg_entropy = 0.0;
  double neg_spatial_variance = 0.0;
  double gini_cam = 0.0;
};

AlignedStats sign_align(const AttributionStats& s);

}  // namespace planrisk
