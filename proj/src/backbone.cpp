#include "fedprompt/backbone.hpp"

#include <Eigen/QR>

#include <string>

namespace fedprompt {

Vector vision_features(const VisionBackbone& backbone, int class_id, int domain,
                       long sample_id) {
  if (class_id < 0 || class_id >= backbone.classes()) {
    throw ContractError("vision_features: class id out of range");
  }
  if (domain < 0 || domain >= backbone.domain_count()) {
    throw ContractError("vision_features: unknown domain " + std::to_string(domain));
  }
  const Vector& anchor = backbone.anchors[static_cast<std::size_t>(class_id)];
  RngStream rng(backbone.seed, "sample/" + std::to_string(sample_id));
  Vector eps = rng.gaussian_vector(anchor.size());
  const DomainAffine& aff = backbone.domains[static_cast<std::size_t>(domain)];
  return aff.transform * (anchor + backbone.noise * eps) + aff.shift;
}

std::uint64_t backbone_checksum(const VisionBackbone& backbone) {
  std::uint64_t h = 1469598103934665603ull;
  for (const Vector& a : backbone.anchors) {
    h = fnv1a(a.data(), sizeof(Scalar) * static_cast<std::size_t>(a.size()), h);
  }
  for (const DomainAffine& d : backbone.domains) {
    h = matrix_checksum(d.transform, h);
    h = fnv1a(d.shift.data(), sizeof(Scalar) * static_cast<std::size_t>(d.shift.size()), h);
  }
  h = fnv1a(&backbone.noise, sizeof(backbone.noise), h);
  h = fnv1a(backbone.seed, h);
  return h;
}

ProjectionHead fit_projection(const EncoderConfig& cfg, const TextEncoderWeights& weights,
                              const std::vector<std::vector<int>>& class_tokens,
                              const std::vector<Vector>& targets) {
  if (class_tokens.size() != targets.size() || targets.empty()) {
    throw ContractError("fit_projection: class/target count mismatch");
  }
  // The "pre-trained" encoder configuration: no prompt block, ordinary
  // causal attention, EOS free to attend to itself.
  EncoderConfig pre = cfg;
  pre.n_prompt = 0;
  pre.hard_masking = false;
  pre.reweighting = false;
  pre.causal = true;
  pre.eos_self_attention = true;

  EncoderContext ctx;
  ctx.config = pre;
  ctx.weights = weights;
  ctx.head.map = Matrix::Zero(cfg.d_t, cfg.d_v);
  ctx.mask = build_mask(0, pre.n_text, pre.mask_options());

  PromptState prompts;
  prompts.delta = Matrix::Zero(0, cfg.d_t);
  prompts.class_tokens = class_tokens;

  const Index classes = static_cast<Index>(targets.size());
  Matrix eos(classes, cfg.d_t);
  for (Index c = 0; c < classes; ++c) {
    Tape tape;
    Var seq = assemble_prompt(tape, ctx, prompts, static_cast<int>(c));
    EncodeResult enc = encode_text(tape, ctx, seq);
    eos.row(c) = tape.value(enc.eos).row(0);
  }
  Matrix target_rows(classes, cfg.d_v);
  for (Index c = 0; c < classes; ++c) {
    target_rows.row(c) = targets[static_cast<std::size_t>(c)].transpose();
  }
  ProjectionHead head;
  head.map = eos.completeOrthogonalDecomposition().solve(target_rows);
  return head;
}

}  // namespace fedprompt
