#pragma once

#include "fedprompt/backbone.hpp"

#include <vector>

namespace fedprompt {

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TaskSpec {
  int classes = 10;
  int feature_dim = 16;  // d_v
  Scalar noise = 0.1;    // per-sample feature noise
  int domains = 1;
  Scalar domain_spread = 0.15;  // off-identity scale of domain transforms
  Scalar domain_shift = 0.1;    // scale of domain shift vectors
  int train_per_class_per_domain = 20;
  int test_per_class_per_domain = 20;
  Scalar anchor_separation = 1.0;  // minimum pairwise anchor distance
  // Jitter on the projection-fit targets; 0 means the no-prompt encoder
  // classifies exactly like the anchors do.
  Scalar alignment_noise = 0.0;

  void validate() const;
};

struct Sample {
  long id = 0;
  int class_id = 0;
  int domain = 0;
  bool test = false;
};

struct Dataset {
  TaskSpec spec;
  std::uint64_t seed = 0;
  std::vector<Sample> samples;   // sample id == index
  std::vector<Vector> features;  // cached vision_features per sample

  std::vector<long> train_ids() const;
  std::vector<long> test_ids() const;
};

struct GeneratedTask {
  Dataset dataset;
  VisionBackbone backbone;
};

// Deterministic in (spec, seed): anchors are rejection-sampled unit vectors
// at the required separation, domain 0 is the identity, and every sample
// feature is reproducible from (seed, sample id) alone.
GeneratedTask generate_task(const TaskSpec& spec, std::uint64_t seed);

}  // namespace fedprompt
