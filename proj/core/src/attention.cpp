#include "wavefuse/attention.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "wavefuse/error.hpp"

namespace wavefuse {

namespace {

void check_operands(const Tensor& q, const Tensor& k, const Tensor& v) {
  require_rank(q, 2, "attention query");
  require_rank(k, 2, "attention key");
  require_rank(v, 2, "attention value");
  if (q.dim(1) != k.dim(1)) {
    throw ShapeError("attention: query width " + std::to_string(q.dim(1)) + " != key width " +
                     std::to_string(k.dim(1)));
  }
  if (k.dim(0) != v.dim(0)) {
    throw ShapeError("attention: " + std::to_string(k.dim(0)) + " keys but " +
                     std::to_string(v.dim(0)) + " values");
  }
  if (k.dim(0) == 0) throw ShapeError("attention: no key tokens");
}

}  // namespace

AttentionOutput scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale) {
  check_operands(q, k, v);
  Tensor logits = wavefuse::scale(matmul_bt(q, k), scale);
  Tensor weights = softmax_rows(logits);
  Tensor output = matmul(weights, v);
  return {std::move(output), std::move(weights)};
}

Tensor scaled_dot_attention_values(const Tensor& q, const Tensor& k, const Tensor& v, double scale) {
  check_operands(q, k, v);
  const std::size_t nq = q.dim(0), nk = k.dim(0), dk = q.dim(1), dv = v.dim(1);
  Tensor out({nq, dv});
  std::vector<double> w(nk);
  // Keys transposed so the logit loop runs across keys; each logit still
  // sums its products in feature order.
  const Tensor kt = transpose(k);
  const double* kd = kt.data().data();
  const double* vd = v.data().data();
  for (std::size_t i = 0; i < nq; ++i) {
    const double* qi = q.data().data() + i * dk;
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t p = 0; p < dk; ++p) {
      const double qp = qi[p];
      const double* krow = kd + p * nk;
      for (std::size_t j = 0; j < nk; ++j) w[j] += qp * krow[j];
    }
    for (double& x : w) x *= scale;
    const double peak = *std::max_element(w.begin(), w.end());
    double total = 0.0;
    for (double& x : w) {
      x = std::exp(x - peak);
      total += x;
    }
    double* o = out.data().data() + i * dv;
    for (std::size_t j = 0; j < nk; ++j) {
      const double wj = w[j] / total;
      for (std::size_t c = 0; c < dv; ++c) o[c] += wj * vd[j * dv + c];
    }
  }
  return out;
}

}  // namespace wavefuse
