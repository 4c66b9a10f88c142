#include "fedprompt/mask.hpp"

namespace fedprompt {

AttentionMask build_mask(int n_prompt, int n_text, const MaskOptions& options) {
  if (n_text < 1) throw ContractError("build_mask: need at least one text token");
  if (n_prompt < 0) throw ContractError("build_mask: negative prompt length");
  if (options.lambda < 0.0) throw ContractError("build_mask: lambda must be >= 0");

  const int size = n_prompt + n_text + 1;
  const int eos = size - 1;
  Matrix bias = Matrix::Zero(size, size);

  if (options.hard_masking) {
    // Prompt queries never see text keys and vice versa.
    bias.block(0, n_prompt, n_prompt, n_text).setConstant(kHardMask);
    bias.block(n_prompt, 0, n_text, n_prompt).setConstant(kHardMask);
    // The EOS key column is blocked for every query.
    bias.col(eos).setConstant(kHardMask);
    if (options.eos_self_attention) bias(eos, eos) = 0.0;
  }
  if (options.reweighting) {
    // EOS query reweights text keys; its prompt-key entries stay at 0.
    bias.block(eos, n_prompt, 1, n_text).setConstant(options.lambda);
  }
  if (options.apply_causal) {
    for (int i = 0; i < size; ++i) {
      for (int j = i + 1; j < size; ++j) bias(i, j) = kHardMask;
    }
  }

  for (int i = 0; i < size; ++i) {
    bool open = false;
    for (int j = 0; j < size && !open; ++j) open = !is_hard_bias(bias(i, j));
    if (!open) throw ContractError("build_mask: row " + std::to_string(i) + " fully hard");
  }

  AttentionMask mask;
  mask.n_prompt = n_prompt;
  mask.n_text = n_text;
  mask.bias = std::move(bias);
  return mask;
}

AttentionMask build_niam_mask(int n_prompt, int n_text, Scalar lambda, bool apply_causal) {
  MaskOptions options;
  options.lambda = lambda;
  options.hard_masking = true;
  options.reweighting = true;
  options.apply_causal = apply_causal;
  options.eos_self_attention = false;
  return build_mask(n_prompt, n_text, options);
}

}  // namespace fedprompt
