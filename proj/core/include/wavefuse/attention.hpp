#pragma once

#include "wavefuse/tensor.hpp"

namespace wavefuse {

struct AttentionOutput {
  Tensor output;   // n_q x d_v
  Tensor weights;  // n_q x n_kv, row-stochastic
};

/// softmax(q k^T * scale) v. Single head.
AttentionOutput scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale);

/// Same output as scaled_dot_attention, bit for bit, computed one query row
/// at a time without materialising the weight matrix.
Tensor scaled_dot_attention_values(const Tensor& q, const Tensor& k, const Tensor& v, double scale);

}  // namespace wavefuse
