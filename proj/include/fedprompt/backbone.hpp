#pragma once

#include "fedprompt/encoder.hpp"

#include <vector>

namespace fedprompt {

struct DomainAffine {
  Matrix transform;  // d_v x d_v
  Vector shift;      // d_v
};

// Frozen stand-in for a pre-trained image encoder: every sample's feature is
// a deterministic function of (class anchor, domain affine, per-sample seed).
struct VisionBackbone {
  std::vector<Vector> anchors;  // per class, d_v
  std::vector<DomainAffine> domains;
  Scalar noise = 0.1;
  std::uint64_t seed = 0;

  int classes() const { return static_cast<int>(anchors.size()); }
  int domain_count() const { return static_cast<int>(domains.size()); }
};

// f_v = A_dom * (anchor_class + noise * eps(sample)) + b_dom, with eps drawn
// from a stream keyed by (backbone seed, sample id).
Vector vision_features(const VisionBackbone& backbone, int class_id, int domain,
                       long sample_id);

std::uint64_t backbone_checksum(const VisionBackbone& backbone);

// Minimum-norm least-squares fit of the projection head so that the
// no-prompt, causal-attention encoding of each class maps onto its target
// vector. This is what stands in for pre-trained text/vision alignment.
ProjectionHead fit_projection(const EncoderConfig& cfg, const TextEncoderWeights& weights,
                              const std::vector<std::vector<int>>& class_tokens,
                              const std::vector<Vector>& targets);

}  // namespace fedprompt
