#include "fedprompt/task.hpp"

#include <string>

namespace fedprompt {

void TaskSpec::validate() const {
  if (classes < 2) throw ContractError("task: need at least two classes");
  if (feature_dim < 2) throw ContractError("task: feature_dim must be >= 2");
  if (noise < 0.0) throw ContractError("task: noise must be >= 0");
  if (domains < 1) throw ContractError("task: need at least one domain");
  if (train_per_class_per_domain < 1) throw ContractError("task: empty train split");
  if (test_per_class_per_domain < 0) throw ContractError("task: negative test split");
  if (anchor_separation < 0.0) throw ContractError("task: negative separation");
  if (alignment_noise < 0.0) throw ContractError("task: negative alignment noise");
}

std::vector<long> Dataset::train_ids() const {
  std::vector<long> ids;
  for (const Sample& s : samples) {
    if (!s.test) ids.push_back(s.id);
  }
  return ids;
}

std::vector<long> Dataset::test_ids() const {
  std::vector<long> ids;
  for (const Sample& s : samples) {
    if (s.test) ids.push_back(s.id);
  }
  return ids;
}

namespace {

std::vector<Vector> sample_anchors(const TaskSpec& spec, RngStream& rng) {
  constexpr int kMaxRestarts = 1000;
  for (int attempt = 0; attempt < kMaxRestarts; ++attempt) {
    std::vector<Vector> anchors;
    anchors.reserve(static_cast<std::size_t>(spec.classes));
    bool ok = true;
    for (int c = 0; c < spec.classes && ok; ++c) {
      Vector v = rng.gaussian_vector(spec.feature_dim);
      const Scalar n = v.norm();
      if (n == 0.0) {
        ok = false;
        break;
      }
      v /= n;
      for (const Vector& other : anchors) {
        if ((v - other).norm() < spec.anchor_separation) {
          ok = false;
          break;
        }
      }
      if (ok) anchors.push_back(std::move(v));
    }
    if (ok) return anchors;
  }
  throw GenerationError("generate_task: could not place " + std::to_string(spec.classes) +
                        " anchors at separation " + std::to_string(spec.anchor_separation));
}

}  // namespace

GeneratedTask generate_task(const TaskSpec& spec, std::uint64_t seed) {
  spec.validate();

  GeneratedTask task;
  VisionBackbone& backbone = task.backbone;
  backbone.noise = spec.noise;
  backbone.seed = seed;

  RngStream anchor_rng(seed, "task/anchors");
  backbone.anchors = sample_anchors(spec, anchor_rng);

  RngStream domain_rng(seed, "task/domains");
  backbone.domains.reserve(static_cast<std::size_t>(spec.domains));
  for (int d = 0; d < spec.domains; ++d) {
    DomainAffine aff;
    if (d == 0) {
      aff.transform = Matrix::Identity(spec.feature_dim, spec.feature_dim);
      aff.shift = Vector::Zero(spec.feature_dim);
    } else {
      const Scalar scale = spec.domain_spread / std::sqrt(static_cast<Scalar>(spec.feature_dim));
      aff.transform = Matrix::Identity(spec.feature_dim, spec.feature_dim) +
                      domain_rng.gaussian_matrix(spec.feature_dim, spec.feature_dim, scale);
      aff.shift = domain_rng.gaussian_vector(spec.feature_dim, spec.domain_shift);
    }
    backbone.domains.push_back(std::move(aff));
  }

  Dataset& data = task.dataset;
  data.spec = spec;
  data.seed = seed;
  long next_id = 0;
  for (int d = 0; d < spec.domains; ++d) {
    for (int c = 0; c < spec.classes; ++c) {
      for (int i = 0; i < spec.train_per_class_per_domain; ++i) {
        data.samples.push_back(Sample{next_id++, c, d, false});
      }
      for (int i = 0; i < spec.test_per_class_per_domain; ++i) {
        data.samples.push_back(Sample{next_id++, c, d, true});
      }
    }
  }
  data.features.reserve(data.samples.size());
  for (const Sample& s : data.samples) {
    data.features.push_back(vision_features(backbone, s.class_id, s.domain, s.id));
  }
  return task;
}

}  // namespace fedprompt
