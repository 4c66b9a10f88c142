#pragma once

#include "fedprompt/tape.hpp"

namespace fedprompt {

// Additive attention-bias matrix over a [prompt | text | EOS] sequence.
// Rows are queries, columns are keys. Entries are one of 0 (full attention),
// the hard-mask sentinel (blocked) or lambda (EOS-to-text reweighting).
struct AttentionMask {
  int n_prompt = 0;
  int n_text = 0;
  Matrix bias;
  int size() const { return n_prompt + n_text + 1; }
};

struct MaskOptions {
  Scalar lambda = 0.5;
  bool hard_masking = true;
  bool reweighting = true;
  bool apply_causal = true;
  // The stated mask formula hard-masks the EOS key column for every query,
  // including the EOS row itself. This override lets EOS keep its own key.
  bool eos_self_attention = false;
};

// General builder covering the ablation variants. With hard_masking and
// reweighting both off this degenerates to a plain causal mask.
AttentionMask build_mask(int n_prompt, int n_text, const MaskOptions& options);

// The full non-interfering mask: prompt<->text blocked, EOS key column
// blocked, EOS-to-text biased by lambda, everything else open; optionally
// composed with the causal triangle (strictly-upper entries forced hard).
AttentionMask build_niam_mask(int n_prompt, int n_text, Scalar lambda, bool apply_causal);

inline Var masked_softmax(Var logits, const AttentionMask& mask) {
  return masked_softmax(logits, mask.bias);
}

}  // namespace fedprompt
