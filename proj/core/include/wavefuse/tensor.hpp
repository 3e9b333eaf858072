#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace wavefuse {

class CounterRng;

/// Dense row-major array of doubles. Rank-3 tensors are laid out H x W x C
/// (channels fastest); matrices are rows x cols.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  Tensor(std::vector<std::size_t> dims, std::vector<double> data);

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor identity(std::size_t n);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * dims_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * dims_[1] + c]; }
  double& at(std::size_t h, std::size_t w, std::size_t c) {
    return data_[(h * dims_[1] + w) * dims_[2] + c];
  }
  double at(std::size_t h, std::size_t w, std::size_t c) const {
    return data_[(h * dims_[1] + w) * dims_[2] + c];
  }

  // Rank-3 accessors.
  std::size_t height() const { return dim(0); }
  std::size_t width() const { return dim(1); }
  std::size_t channels() const { return dim(2); }

  /// Same data, new dims; the element count must match.
  Tensor reshaped(std::vector<std::size_t> dims) const;

  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& dims);

/// Throws ShapeError unless `t` has exactly the given rank.
void require_rank(const Tensor& t, std::size_t rank, const char* what);

/// y = x W^T + b for x [n x in]; weight is [out x in].
struct LinearMap {
  Tensor weight;
  Tensor bias;

  std::size_t in_dim() const { return weight.dim(1); }
  std::size_t out_dim() const { return weight.dim(0); }

  Tensor apply(const Tensor& x) const;

  static LinearMap zeros(std::size_t in_dim, std::size_t out_dim);
  /// Weights uniform in +-1/sqrt(in_dim), zero bias.
  static LinearMap random(std::size_t in_dim, std::size_t out_dim, CounterRng& rng);
};

/// Cross-correlation kernel, weight [out_ch x in_ch x kh x kw].
struct ConvKernel {
  Tensor weight;
  Tensor bias;
  int stride = 1;
  int padding = 0;

  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t kernel_h() const { return weight.dim(2); }
  std::size_t kernel_w() const { return weight.dim(3); }

  static ConvKernel zeros(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
                          int stride = 1, int padding = 0);
  /// Weights uniform in +-1/sqrt(in_ch*kh*kw), zero bias.
  static ConvKernel random(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
                           CounterRng& rng, int stride = 1, int padding = 0);
  /// Channel-identity at the kernel centre (kh, kw odd, in_ch == out_ch), or
  /// for 2x2 kernels every tap, which makes tconv2 a nearest upsample.
  static ConvKernel identity(std::size_t channels, std::size_t kh, std::size_t kw,
                             int stride = 1, int padding = 0);
};

Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T without materialising the transpose.
Tensor matmul_bt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& m);

Tensor softmax_rows(const Tensor& m);

Tensor conv2d(const Tensor& input, const ConvKernel& kernel);

Tensor maxpool2(const Tensor& input);
Tensor nearest_up2(const Tensor& input);
/// Stride-2 transposed convolution with a 2x2 kernel:
/// out[2i+a, 2j+b, o] = bias[o] + sum_c in[i, j, c] * w[o, c, a, b].
Tensor tconv2(const Tensor& input, const ConvKernel& kernel);

struct MaxPool2 {};
struct NearestUp2 {};
struct TransposedConv2 {
  ConvKernel kernel;
};
using ResampleMode = std::variant<MaxPool2, NearestUp2, TransposedConv2>;

Tensor resample(const Tensor& input, const ResampleMode& mode);

Tensor relu(Tensor t);
/// Per-row zero-mean unit-variance normalisation (no affine), eps 1e-6.
Tensor layer_norm_rows(const Tensor& m);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(Tensor t, double factor);
/// Concatenates rank-3 tensors (or matrices) along the last axis.
Tensor concat_channels(std::span<const Tensor> parts);
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// H x W x C -> (H*W) x C and back.
Tensor to_tokens(const Tensor& hwc);
Tensor from_tokens(const Tensor& tokens, std::size_t height, std::size_t width);

double max_abs_diff(const Tensor& a, const Tensor& b);
double sum_squares(const Tensor& t);
double mean_squared_error(const Tensor& a, const Tensor& b);

}  // namespace wavefuse
