#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fedprompt/mask.hpp"

using namespace fedprompt;

namespace {

// Literal per-entry enumeration of the mask definition (1-based indices),
// kept independent of the block-fill builder it checks.
Matrix brute_force_mask(int np, int nt, Scalar lambda, bool causal) {
  const int size = np + nt + 1;
  Matrix m(size, size);
  for (int i = 1; i <= size; ++i) {
    for (int j = 1; j <= size; ++j) {
      const bool prompt_row = i >= 1 && i <= np;
      const bool text_row = i >= np + 1 && i <= np + nt;
      const bool prompt_col = j >= 1 && j <= np;
      const bool text_col = j >= np + 1 && j <= np + nt;
      const bool eos_row = i == np + nt + 1;
      const bool eos_col = j == np + nt + 1;
      Scalar v;
      if ((prompt_row && text_col) || (text_row && prompt_col) || eos_col) {
        v = kHardMask;
      } else if (eos_row && text_col) {
        v = lambda;
      } else {
        v = 0.0;
      }
      if (causal && j > i && !is_hard_bias(v)) v = kHardMask;
      m(i - 1, j - 1) = v;
    }
  }
  return m;
}

}  // namespace

TEST_CASE("stated mask entries for n_prompt=2, n_text=3, lambda=0.5") {
  AttentionMask m = build_niam_mask(2, 3, 0.5, /*apply_causal=*/false);
  CHECK(m.size() == 6);
  // 1-based (1,3): prompt query, first text key.
  CHECK(m.bias(0, 2) == kHardMask);
  // (3,1): first text query, prompt key.
  CHECK(m.bias(2, 0) == kHardMask);
  // (6,3): EOS query, first text key gets the reweighting bias.
  CHECK(m.bias(5, 2) == 0.5);
  // (6,1): EOS query, prompt key stays open.
  CHECK(m.bias(5, 0) == 0.0);
  // Column 6: EOS key blocked for every query.
  for (Index i = 0; i < 6; ++i) CHECK(m.bias(i, 5) == kHardMask);
}

TEST_CASE("no-prompt mask is causal plus a blocked EOS key column") {
  AttentionMask m = build_niam_mask(0, 4, 0.0, /*apply_causal=*/true);
  const int size = m.size();
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      if (j == size - 1 || j > i) {
        CHECK(is_hard_bias(m.bias(i, j)));
      } else {
        CHECK(m.bias(i, j) == 0.0);
      }
    }
  }
}

TEST_CASE("lambda only affects the EOS-to-text band") {
  AttentionMask a = build_niam_mask(3, 4, 0.0, true);
  AttentionMask b = build_niam_mask(3, 4, 0.5, true);
  const int size = a.size();
  const int eos = size - 1;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      if (i == eos && j >= 3 && j < 3 + 4) {
        CHECK(a.bias(i, j) == 0.0);
        CHECK(b.bias(i, j) == 0.5);
      } else {
        CHECK(a.bias(i, j) == b.bias(i, j));
      }
    }
  }
}

TEST_CASE("generator equals brute-force enumeration on the full small grid") {
  for (int np = 0; np <= 4; ++np) {
    for (int nt = 1; nt <= 4; ++nt) {
      for (Scalar lambda : {0.0, 0.5, 1.0}) {
        for (bool causal : {false, true}) {
          AttentionMask m = build_niam_mask(np, nt, lambda, causal);
          Matrix expected = brute_force_mask(np, nt, lambda, causal);
          CHECK(m.bias == expected);  // exact match
        }
      }
    }
  }
}

TEST_CASE("mask rows never end up fully hard") {
  for (int np = 0; np <= 6; ++np) {
    for (int nt = 1; nt <= 6; ++nt) {
      AttentionMask m = build_niam_mask(np, nt, 0.7, true);
      for (Index i = 0; i < m.bias.rows(); ++i) {
        bool open = false;
        for (Index j = 0; j < m.bias.cols(); ++j) open |= !is_hard_bias(m.bias(i, j));
        CHECK(open);
      }
    }
  }
}

TEST_CASE("contract errors and ablation degenerations") {
  CHECK_THROWS_AS(build_niam_mask(2, 0, 0.5, true), ContractError);
  CHECK_THROWS_AS(build_niam_mask(-1, 3, 0.5, true), ContractError);
  CHECK_THROWS_AS(build_niam_mask(2, 3, -0.1, true), ContractError);

  // Hard masking and reweighting both off: the plain causal triangle.
  MaskOptions off;
  off.hard_masking = false;
  off.reweighting = false;
  off.apply_causal = true;
  AttentionMask m = build_mask(2, 3, off);
  for (Index i = 0; i < m.bias.rows(); ++i) {
    for (Index j = 0; j < m.bias.cols(); ++j) {
      if (j > i) CHECK(is_hard_bias(m.bias(i, j)));
      else CHECK(m.bias(i, j) == 0.0);
    }
  }

  // EOS self-attention override keeps only the diagonal entry open.
  MaskOptions self;
  self.eos_self_attention = true;
  AttentionMask s = build_mask(2, 3, self);
  const Index eos = s.bias.rows() - 1;
  CHECK(s.bias(eos, eos) == 0.0);
  for (Index i = 0; i < eos; ++i) CHECK(is_hard_bias(s.bias(i, eos)));
}
