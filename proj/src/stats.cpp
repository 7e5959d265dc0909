#include "planrisk/stats.hpp"

#include <cmath>

#include "planrisk/errors.hpp"

namespace planrisk {

SaliencyDistribution normalize_saliency(const SaliencyTensor& t) {
  SaliencyDistribution p;
  p.cameras = t.cameras;
  p.height = t.height;
  p.width = t.width;
  p.joint.resize(t.size());
  p.camera_mass.assign(t.cameras, 0.0);

  const std::size_t plane = static_cast<std::size_t>(t.height) * t.width;
  double total = 0.0;
  for (int c = 0; c < t.cameras; ++c) {
    double m = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double a = std::abs(static_cast<double>(t.data[c * plane + i]));
      p.joint[c * plane + i] = a;
      m += a;
    }
    p.camera_mass[c] = m;
    total += m;
  }
  if (total == 0.0) throw ZeroMassError("saliency tensor has zero total mass");
  for (auto& v : p.joint) v /= total;
  p.camera_marginal.resize(t.cameras);
  for (int c = 0; c < t.cameras; ++c) p.camera_marginal[c] = p.camera_mass[c] / total;
  return p;
}

double attribution_entropy(const SaliencyDistribution& p) {
  double h = 0.0;
  for (double v : p.joint) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double spatial_variance(const SaliencyTensor& t, bool normalized_coords) {
  const std::size_t plane = static_cast<std::size_t>(t.height) * t.width;
  const double su = normalized_coords ? 1.0 / t.height : 1.0;
  const double sv = normalized_coords ? 1.0 / t.width : 1.0;

  double total_mass = 0.0;
  std::vector<double> mass(t.cameras, 0.0), cu(t.cameras, 0.0), cv(t.cameras, 0.0);
  for (int c = 0; c < t.cameras; ++c) {
    for (int u = 0; u < t.height; ++u) {
      for (int v = 0; v < t.width; ++v) {
        const double a = std::abs(static_cast<double>(t.data[c * plane + u * t.width + v]));
        mass[c] += a;
        cu[c] += a * u * su;
        cv[c] += a * v * sv;
      }
    }
    total_mass += mass[c];
  }
  if (total_mass == 0.0) throw ZeroMassError("saliency tensor has zero total mass");

  double result = 0.0;
  for (int c = 0; c < t.cameras; ++c) {
    if (mass[c] == 0.0) continue;  // empty cameras contribute nothing
    const double mu_u = cu[c] / mass[c];
    const double mu_v = cv[c] / mass[c];
    double second = 0.0;
    for (int u = 0; u < t.height; ++u) {
      for (int v = 0; v < t.width; ++v) {
        const double a = std::abs(static_cast<double>(t.data[c * plane + u * t.width + v]));
        if (a == 0.0) continue;
        const double du = u * su - mu_u;
        const double dv = v * sv - mu_v;
        second += (a / mass[c]) * (du * du + dv * dv);
      }
    }
    result += (mass[c] / total_mass) * second;
  }
  return result;
}

double gini_coefficient(const std::vector<double>& masses) {
  double total = 0.0;
  for (double m : masses) total += m;
  if (total <= 0.0) throw ZeroMassError("gini over all-zero masses");
  double num = 0.0;
  for (double a : masses) {
    for (double b : masses) num += std::abs(a - b);
  }
  return num / (2.0 * static_cast<double>(masses.size()) * total);
}

AttributionStats attribution_stats(const SaliencyTensor& t, bool normalized_coords) {
  const SaliencyDistribution p = normalize_saliency(t);
  AttributionStats s;
  s.entropy = attribution_entropy(p);
  s.spatial_variance = spatial_variance(t, normalized_coords);
  s.gini_cam = gini_coefficient(p.camera_mass);
  s.camera_mass = p.camera_mass;
  s.camera_marginal = p.camera_marginal;
  return s;
}

AlignedStats sign_align(const AttributionStats& s) {
  return {-s.entropy, -s.spatial_variance, s.gini_cam};
}

}  // namespace planrisk
