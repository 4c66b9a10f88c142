#pragma once

#include "fedprompt/mask.hpp"
#include "fedprompt/rng.hpp"
#include "fedprompt/tape.hpp"

#include <optional>
#include <vector>

namespace fedprompt {

struct EncoderConfig {
  int layers = 2;
  int heads = 4;
  int d_t = 32;           // token embedding width
  int d_v = 16;           // shared embedding width (projection target)
  int n_prompt = 10;      // learnable prompt rows
  int n_text = 8;         // class token sequence length
  int mlp_hidden = 0;     // 0 -> 4 * d_t
  int vocab = 64;
  Scalar lambda = 0.5;
  bool hard_masking = true;
  bool reweighting = true;
  bool causal = true;
  bool eos_self_attention = false;
  bool final_layer_norm = true;
  Scalar ln_eps = 1e-5;
  int max_positions = 64;         // text + EOS positional table
  int max_prompt_positions = 64;  // auxiliary positional table for prompts

  int head_dim() const { return d_t / heads; }
  int mlp_dim() const { return mlp_hidden > 0 ? mlp_hidden : 4 * d_t; }
  int sequence_length() const { return n_prompt + n_text + 1; }
  void validate() const;
  MaskOptions mask_options() const;
};

struct LayerWeights {
  std::vector<Matrix> wq, wk, wv;  // per head, d_t x head_dim
  Matrix wo;                       // d_t x d_t
  Matrix ln1_gain, ln1_bias;       // 1 x d_t
  Matrix ln2_gain, ln2_bias;
  Matrix mlp_w1;                   // d_t x mlp_dim
  Matrix mlp_b1;                   // 1 x mlp_dim
  Matrix mlp_w2;                   // mlp_dim x d_t
  Matrix mlp_b2;                   // 1 x d_t
};

// Frozen transformer parameters. Nothing here ever receives gradients.
struct TextEncoderWeights {
  Matrix token_embedding;    // vocab x d_t
  Matrix text_positions;     // max_positions x d_t
  Matrix prompt_positions;   // max_prompt_positions x d_t
  Matrix eos_embedding;      // 1 x d_t
  std::vector<LayerWeights> layers;
  Matrix final_gain, final_bias;
};

TextEncoderWeights init_text_encoder(const EncoderConfig& cfg, RngStream& rng);
std::uint64_t weights_checksum(const TextEncoderWeights& w);

// Frozen linear map from encoder width to the shared embedding space.
struct ProjectionHead {
  Matrix map;  // d_t x d_v
};

// Learnable prompt matrix plus the frozen per-class token sequences that
// realize "a photo of <class>"-style inputs at a fixed length.
struct PromptState {
  Matrix delta;                                // n_prompt x d_t
  std::vector<std::vector<int>> class_tokens;  // per class, length n_text
};

// Deterministic synthetic tokenization of a class id.
std::vector<int> class_token_sequence(int class_id, int n_text, int vocab);
PromptState make_prompt_state(const EncoderConfig& cfg, int classes, Matrix delta0);

struct EncoderContext {
  EncoderConfig config;
  TextEncoderWeights weights;
  ProjectionHead head;
  AttentionMask mask;
};

EncoderContext make_encoder_context(const EncoderConfig& cfg, TextEncoderWeights weights,
                                    ProjectionHead head);

// Optional probe into the attention internals of a forward pass.
struct EncodeTrace {
  // One entry per (layer, head), in layer-major order: the post-softmax
  // attention probability matrix.
  std::vector<Matrix> attention;
};

struct EncodeResult {
  Var tokens;  // final-layer token embeddings, sequence x d_t
  Var eos;     // 1 x d_t
};

// Input sequence [delta rows; embedded class tokens; EOS], with text and EOS
// keeping the positional indices they would have with no prompt and prompt
// rows drawing from a disjoint auxiliary positional table.
Var assemble_prompt(Tape& tape, const EncoderContext& ctx, const PromptState& prompts,
                    Var delta, int class_id);
Var assemble_prompt(Tape& tape, const EncoderContext& ctx, const PromptState& prompts,
                    int class_id);

EncodeResult encode_text(Tape& tape, const EncoderContext& ctx, Var sequence,
                         EncodeTrace* trace = nullptr);

// H_t applied to the EOS slot of the encoded class prompt: 1 x d_v.
Var text_feature(Tape& tape, const EncoderContext& ctx, const PromptState& prompts,
                 Var delta, int class_id);

// Frozen-prompt text features for a list of classes, one row per class.
Matrix class_text_features(const EncoderContext& ctx, const PromptState& prompts,
                           const std::vector<int>& class_ids);

}  // namespace fedprompt
