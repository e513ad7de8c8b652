#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "son/core.hpp"

namespace son {

struct Feature {
  std::string name;
  double min = 0.0;
  double max = 1.0;
};

// Ordered normalization ranges, one per percept dimension.
struct FeatureSpec {
  std::vector<Feature> features;

  std::size_t size() const noexcept { return features.size(); }

  void validate() const {
    for (const auto& f : features)
      if (!(f.max > f.min)) throw Error("SpecValidation", "feature '" + f.name + "' needs max > min");
  }
};

// Normalized observation; every component lies in [0,1].
struct PerceptVector {
  std::vector<double> values;
  int t = 0;
  NodeId node{};
};

struct SimilarityScore {
  double m = 0.0;
};

enum class Decision { ReuseAction, RecomputeAction, RetainNew, Reject };

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::ReuseAction: return "reuse";
    case Decision::RecomputeAction: return "recompute";
    case Decision::RetainNew: return "retain";
    case Decision::Reject: return "reject";
  }
  return "?";
}

using RawMeasurements = std::map<std::string, double, std::less<>>;

inline double normalize_component(double raw, const Feature& f) {
  return std::clamp((raw - f.min) / (f.max - f.min), 0.0, 1.0);
}

// Raw values already aligned with the spec's order.
inline PerceptVector normalize(std::span<const double> raw, const FeatureSpec& spec) {
  if (raw.size() != spec.size()) throw Error("DimensionMismatch", "raw vector length does not match feature spec");
  PerceptVector p;
  p.values.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) p.values.push_back(normalize_component(raw[i], spec.features[i]));
  return p;
}

inline PerceptVector normalize(const RawMeasurements& raw, const FeatureSpec& spec) {
  PerceptVector p;
  p.values.reserve(spec.size());
  for (const auto& f : spec.features) {
    auto it = raw.find(f.name);
    if (it == raw.end()) throw Error("MissingFeature", "missing feature '" + f.name + "'");
    p.values.push_back(normalize_component(it->second, f));
  }
  return p;
}

inline double euclidean_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error("DimensionMismatch", "percept dimensions differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += (p[i] - q[i]) * (p[i] - q[i]);
  return std::sqrt(sum);
}

// Minimum-distance Euclidean similarity: m = 1 - d / sqrt(k), the farthest two
// points of [0,1]^k being sqrt(k) apart.
struct EuclideanSimilarity {
  SimilarityScore operator()(const PerceptVector& p, const PerceptVector& q) const {
    if (p.values.size() != q.values.size()) throw Error("DimensionMismatch", "percept dimensions differ");
    if (p.values.empty()) return {1.0};
    const double d_max = std::sqrt(static_cast<double>(p.values.size()));
    return {std::clamp(1.0 - euclidean_distance(p.values, q.values) / d_max, 0.0, 1.0)};
  }
};

inline SimilarityScore similarity(const PerceptVector& p, const PerceptVector& q) {
  return EuclideanSimilarity{}(p, q);
}

struct Thresholds {
  double similarity = 0.8;   // theta_m
  double coefficient = 0.7;  // theta_L
};

inline Decision classify(SimilarityScore m, double coefficient, Thresholds th, bool kb_full) {
  if (m.m >= th.similarity) return coefficient >= th.coefficient ? Decision::ReuseAction : Decision::RecomputeAction;
  return kb_full ? Decision::Reject : Decision::RetainNew;
}

}  // namespace son
