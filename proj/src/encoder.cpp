#include "fedprompt/encoder.hpp"

#include <cmath>
#include <string>

namespace fedprompt {

void EncoderConfig::validate() const {
  if (layers < 1) throw ContractError("encoder: layers must be >= 1");
  if (heads < 1) throw ContractError("encoder: heads must be >= 1");
  if (d_t % heads != 0) throw ContractError("encoder: d_t must be divisible by heads");
  if (d_v < 1) throw ContractError("encoder: d_v must be >= 1");
  if (n_prompt < 0) throw ContractError("encoder: n_prompt must be >= 0");
  if (n_text < 1) throw ContractError("encoder: n_text must be >= 1");
  if (lambda < 0.0) throw ContractError("encoder: lambda must be >= 0");
  if (vocab < 8) throw ContractError("encoder: vocab too small");
  if (n_text + 1 > max_positions) throw ContractError("encoder: positional table too small");
  if (n_prompt > max_prompt_positions) {
    throw ContractError("encoder: prompt positional table too small");
  }
}

MaskOptions EncoderConfig::mask_options() const {
  MaskOptions options;
  options.lambda = lambda;
  options.hard_masking = hard_masking;
  options.reweighting = reweighting;
  options.apply_causal = causal;
  options.eos_self_attention = eos_self_attention;
  return options;
}

TextEncoderWeights init_text_encoder(const EncoderConfig& cfg, RngStream& rng) {
  cfg.validate();
  const int d = cfg.d_t;
  const int dk = cfg.head_dim();
  const int dm = cfg.mlp_dim();
  const Scalar w_std = 1.0 / std::sqrt(static_cast<Scalar>(d));

  TextEncoderWeights w;
  w.token_embedding = rng.gaussian_matrix(cfg.vocab, d);
  w.text_positions = rng.gaussian_matrix(cfg.max_positions, d);
  w.prompt_positions = rng.gaussian_matrix(cfg.max_prompt_positions, d);
  w.eos_embedding = rng.gaussian_matrix(1, d);
  w.layers.resize(static_cast<std::size_t>(cfg.layers));
  for (auto& layer : w.layers) {
    layer.ln1_gain = Matrix::Ones(1, d);
    layer.ln1_bias = Matrix::Zero(1, d);
    layer.wq.reserve(static_cast<std::size_t>(cfg.heads));
    layer.wk.reserve(static_cast<std::size_t>(cfg.heads));
    layer.wv.reserve(static_cast<std::size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
      layer.wq.push_back(rng.gaussian_matrix(d, dk, w_std));
      layer.wk.push_back(rng.gaussian_matrix(d, dk, w_std));
      layer.wv.push_back(rng.gaussian_matrix(d, dk, w_std));
    }
    layer.wo = rng.gaussian_matrix(d, d, w_std);
    layer.ln2_gain = Matrix::Ones(1, d);
    layer.ln2_bias = Matrix::Zero(1, d);
    layer.mlp_w1 = rng.gaussian_matrix(d, dm, w_std);
    layer.mlp_b1 = Matrix::Zero(1, dm);
    layer.mlp_w2 = rng.gaussian_matrix(dm, d, 1.0 / std::sqrt(static_cast<Scalar>(dm)));
    layer.mlp_b2 = Matrix::Zero(1, d);
  }
  w.final_gain = Matrix::Ones(1, d);
  w.final_bias = Matrix::Zero(1, d);
  return w;
}

std::uint64_t weights_checksum(const TextEncoderWeights& w) {
  std::uint64_t h = 1469598103934665603ull;
  h = matrix_checksum(w.token_embedding, h);
  h = matrix_checksum(w.text_positions, h);
  h = matrix_checksum(w.prompt_positions, h);
  h = matrix_checksum(w.eos_embedding, h);
  for (const auto& layer : w.layers) {
    for (const auto& m : layer.wq) h = matrix_checksum(m, h);
    for (const auto& m : layer.wk) h = matrix_checksum(m, h);
    for (const auto& m : layer.wv) h = matrix_checksum(m, h);
    h = matrix_checksum(layer.wo, h);
    h = matrix_checksum(layer.ln1_gain, h);
    h = matrix_checksum(layer.ln1_bias, h);
    h = matrix_checksum(layer.ln2_gain, h);
    h = matrix_checksum(layer.ln2_bias, h);
    h = matrix_checksum(layer.mlp_w1, h);
    h = matrix_checksum(layer.mlp_b1, h);
    h = matrix_checksum(layer.mlp_w2, h);
    h = matrix_checksum(layer.mlp_b2, h);
  }
  h = matrix_checksum(w.final_gain, h);
  h = matrix_checksum(w.final_bias, h);
  return h;
}

std::vector<int> class_token_sequence(int class_id, int n_text, int vocab) {
  if (class_id < 0) throw ContractError("class_token_sequence: negative class id");
  // Fixed template prefix ("a photo of ...") followed by class-derived ids,
  // padded with a PAD token to the fixed length. Token 0 is reserved for PAD
  // and the top of the vocabulary stays unused by classes.
  const int pad = 0;
  const std::vector<int> prefix = {2, 3, 4};
  std::vector<int> tokens;
  tokens.reserve(static_cast<std::size_t>(n_text));
  for (int t : prefix) {
    if (static_cast<int>(tokens.size()) >= n_text) break;
    tokens.push_back(t);
  }
  const int span = vocab - 8;
  int code = class_id;
  int emitted = 0;
  while (static_cast<int>(tokens.size()) < n_text && emitted < 4) {
    tokens.push_back(8 + (code + 31 * emitted) % span);
    code /= span > 1 ? span : 2;
    ++emitted;
  }
  while (static_cast<int>(tokens.size()) < n_text) tokens.push_back(pad);
  tokens.resize(static_cast<std::size_t>(n_text));
  return tokens;
}

PromptState make_prompt_state(const EncoderConfig& cfg, int classes, Matrix delta0) {
  if (delta0.rows() != cfg.n_prompt || delta0.cols() != cfg.d_t) {
    throw ShapeError("make_prompt_state: delta must be n_prompt x d_t");
  }
  PromptState state;
  state.delta = std::move(delta0);
  state.class_tokens.reserve(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    state.class_tokens.push_back(class_token_sequence(c, cfg.n_text, cfg.vocab));
  }
  return state;
}

EncoderContext make_encoder_context(const EncoderConfig& cfg, TextEncoderWeights weights,
                                    ProjectionHead head) {
  cfg.validate();
  EncoderContext ctx;
  ctx.config = cfg;
  ctx.weights = std::move(weights);
  ctx.head = std::move(head);
  ctx.mask = build_mask(cfg.n_prompt, cfg.n_text, cfg.mask_options());
  return ctx;
}

namespace {

// Embedded text tokens plus EOS with their no-prompt positional indices.
Matrix text_block(const EncoderContext& ctx, const std::vector<int>& tokens) {
  const EncoderConfig& cfg = ctx.config;
  const TextEncoderWeights& w = ctx.weights;
  Matrix block(cfg.n_text + 1, cfg.d_t);
  for (int j = 0; j < cfg.n_text; ++j) {
    const int tok = tokens[static_cast<std::size_t>(j)];
    if (tok < 0 || tok >= cfg.vocab) throw ContractError("text_block: token out of vocab");
    block.row(j) = w.token_embedding.row(tok) + w.text_positions.row(j);
  }
  block.row(cfg.n_text) = w.eos_embedding.row(0) + w.text_positions.row(cfg.n_text);
  return block;
}

}  // namespace

Var assemble_prompt(Tape& tape, const EncoderContext& ctx, const PromptState& prompts,
                    Var delta, int class_id) {
  const EncoderConfig& cfg = ctx.config;
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= prompts.class_tokens.size()) {
    throw ContractError("assemble_prompt: class id out of range");
  }
  const auto& tokens = prompts.class_tokens[static_cast<std::size_t>(class_id)];
  Var text = tape.constant(text_block(ctx, tokens));
  if (cfg.n_prompt == 0) return text;

  const Matrix& dv = tape.value(delta);
  if (dv.rows() != cfg.n_prompt || dv.cols() != cfg.d_t) {
    throw ShapeError("assemble_prompt: delta must be n_prompt x d_t");
  }
  Var prompt_pos = tape.constant(ctx.weights.prompt_positions.topRows(cfg.n_prompt));
  Var prompt_rows = add(delta, prompt_pos);
  const Var parts[] = {prompt_rows, text};
  return vcat(parts);
}

Var assemble_prompt(Tape& tape, const EncoderContext& ctx, const PromptState& prompts,
                    int class_id) {
  Var delta = tape.constant(prompts.delta);
  return assemble_prompt(tape, ctx, prompts, delta, class_id);
}

EncodeResult encode_text(Tape& tape, const EncoderContext& ctx, Var sequence,
                         EncodeTrace* trace) {
  const EncoderConfig& cfg = ctx.config;
  const Matrix& seq = tape.value(sequence);
  if (seq.rows() != ctx.mask.size() || seq.cols() != cfg.d_t) {
    throw ShapeError("encode_text: sequence is " + std::to_string(seq.rows()) + "x" +
                     std::to_string(seq.cols()) + ", mask expects " +
                     std::to_string(ctx.mask.size()) + "x" + std::to_string(cfg.d_t));
  }
  const Scalar inv_sqrt_dk = 1.0 / std::sqrt(static_cast<Scalar>(cfg.head_dim()));

  Var x = sequence;
  for (const LayerWeights& layer : ctx.weights.layers) {
    Var ln1g = tape.constant(layer.ln1_gain);
    Var ln1b = tape.constant(layer.ln1_bias);
    Var h = layer_norm(x, ln1g, ln1b, cfg.ln_eps);
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(cfg.heads));
    for (int hi = 0; hi < cfg.heads; ++hi) {
      Var q = h * tape.constant(layer.wq[static_cast<std::size_t>(hi)]);
      Var k = h * tape.constant(layer.wk[static_cast<std::size_t>(hi)]);
      Var v = h * tape.constant(layer.wv[static_cast<std::size_t>(hi)]);
      Var scores = scale(matmul_nt(q, k), inv_sqrt_dk);
      Var probs = masked_softmax(scores, ctx.mask);
      if (trace != nullptr) trace->attention.push_back(tape.value(probs));
      heads.push_back(probs * v);
    }
    Var attn = hcat(heads) * tape.constant(layer.wo);
    x = x + attn;

    Var ln2g = tape.constant(layer.ln2_gain);
    Var ln2b = tape.constant(layer.ln2_bias);
    Var h2 = layer_norm(x, ln2g, ln2b, cfg.ln_eps);
    Var m = add_rowvec(h2 * tape.constant(layer.mlp_w1), tape.constant(layer.mlp_b1));
    m = add_rowvec(gelu(m) * tape.constant(layer.mlp_w2), tape.constant(layer.mlp_b2));
    x = x + m;
  }
  if (cfg.final_layer_norm) {
    Var fg = tape.constant(ctx.weights.final_gain);
    Var fb = tape.constant(ctx.weights.final_bias);
    x = layer_norm(x, fg, fb, cfg.ln_eps);
  }
  EncodeResult result;
  result.tokens = x;
  result.eos = row(x, tape.value(x).rows() - 1);
  return result;
}

Var text_feature(Tape& tape, const EncoderContext& ctx, const PromptState& prompts,
                 Var delta, int class_id) {
  Var seq = assemble_prompt(tape, ctx, prompts, delta, class_id);
  EncodeResult enc = encode_text(tape, ctx, seq);
  return enc.eos * tape.constant(ctx.head.map);
}

Matrix class_text_features(const EncoderContext& ctx, const PromptState& prompts,
                           const std::vector<int>& class_ids) {
  Matrix features(static_cast<Index>(class_ids.size()), ctx.config.d_v);
  for (std::size_t i = 0; i < class_ids.size(); ++i) {
    Tape tape;
    Var delta = tape.constant(prompts.delta);
    Var f = text_feature(tape, ctx, prompts, delta, class_ids[i]);
    features.row(static_cast<Index>(i)) = tape.value(f).row(0);
  }
  return features;
}

}  // namespace fedprompt
