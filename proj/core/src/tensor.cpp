#include "wavefuse/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "wavefuse/error.hpp"
#include "wavefuse/rng.hpp"

namespace wavefuse {

namespace {

std::size_t element_count(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

void require_same_dims(const Tensor& a, const Tensor& b, const char* what) {
  if (a.dims() != b.dims()) {
    throw ShapeError(std::string(what) + ": " + shape_string(a.dims()) + " vs " +
                     shape_string(b.dims()));
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : dims_(std::move(dims)), data_(element_count(dims_), fill) {}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (data_.size() != element_count(dims_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match dims " + shape_string(dims_));
  }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw ShapeError("matrix: no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw ShapeError("matrix: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= dims_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(dims_));
  }
  return dims_[axis];
}

Tensor Tensor::reshaped(std::vector<std::size_t> dims) const {
  return Tensor(std::move(dims), data_);
}

std::string shape_string(const std::vector<std::size_t>& dims) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out << 'x';
    out << dims[i];
  }
  out << ']';
  return out.str();
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.dims()));
  }
}

// ---------------------------------------------------------------------------
// LinearMap / ConvKernel

Tensor LinearMap::apply(const Tensor& x) const {
  require_rank(x, 2, "LinearMap::apply");
  if (x.dim(1) != in_dim()) {
    throw ShapeError("LinearMap::apply: input " + shape_string(x.dims()) + " vs weight " +
                     shape_string(weight.dims()));
  }
  Tensor y = matmul_bt(x, weight);
  if (!bias.empty()) {
    const std::size_t n = y.dim(0), out = y.dim(1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < out; ++o) y.at(i, o) += bias[o];
  }
  return y;
}

LinearMap LinearMap::zeros(std::size_t in_dim, std::size_t out_dim) {
  return {Tensor({out_dim, in_dim}), Tensor({out_dim})};
}

LinearMap LinearMap::random(std::size_t in_dim, std::size_t out_dim, CounterRng& rng) {
  LinearMap map = zeros(in_dim, out_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (auto& w : map.weight.data()) w = rng.uniform(-bound, bound);
  return map;
}

ConvKernel ConvKernel::zeros(std::size_t in_ch, std::size_t out_ch, std::size_t kh,
                             std::size_t kw, int stride, int padding) {
  return {Tensor({out_ch, in_ch, kh, kw}), Tensor({out_ch}), stride, padding};
}

ConvKernel ConvKernel::random(std::size_t in_ch, std::size_t out_ch, std::size_t kh,
                              std::size_t kw, CounterRng& rng, int stride, int padding) {
  ConvKernel k = zeros(in_ch, out_ch, kh, kw, stride, padding);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch * kh * kw));
  for (auto& w : k.weight.data()) w = rng.uniform(-bound, bound);
  return k;
}

ConvKernel ConvKernel::identity(std::size_t channels, std::size_t kh, std::size_t kw, int stride,
                                int padding) {
  ConvKernel k = zeros(channels, channels, kh, kw, stride, padding);
  const bool every_tap = (kh == 2 && kw == 2);
  if (!every_tap && (kh % 2 == 0 || kw % 2 == 0)) {
    throw ShapeError("ConvKernel::identity: kernel must be odd-sized or 2x2");
  }
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t a = 0; a < kh; ++a) {
      for (std::size_t b = 0; b < kw; ++b) {
        if (every_tap || (a == kh / 2 && b == kw / 2)) {
          k.weight[((c * channels + c) * kh + a) * kw + b] = 1.0;
        }
      }
    }
  }
  return k;
}

// ---------------------------------------------------------------------------
// Dense kernels

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: " + shape_string(a.dims()) + " x " + shape_string(b.dims()));
  }
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.data().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a.at(i, p);
      const double* brow = b.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_bt lhs");
  require_rank(b, 2, "matmul_bt rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw ShapeError("matmul_bt: " + shape_string(a.dims()) + " x " + shape_string(b.dims()) +
                     "^T");
  }
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data().data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data().data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c.at(i, j) = acc;
    }
  }
  return c;
}

Tensor transpose(const Tensor& m) {
  require_rank(m, 2, "transpose");
  Tensor t({m.dim(1), m.dim(0)});
  for (std::size_t i = 0; i < m.dim(0); ++i)
    for (std::size_t j = 0; j < m.dim(1); ++j) t.at(j, i) = m.at(i, j);
  return t;
}

Tensor softmax_rows(const Tensor& m) {
  if (m.rank() != 2) throw ShapeError("softmax_rows: expected a matrix, got " + shape_string(m.dims()));
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  if (cols == 0) throw ShapeError("softmax_rows: empty row dimension");
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    const double* in = &m.data()[i * cols];
    double* o = &out.at(i, 0);
    const double peak = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      o[j] = std::exp(in[j] - peak);
      total += o[j];
    }
    for (std::size_t j = 0; j < cols; ++j) o[j] /= total;
  }
  return out;
}

Tensor conv2d(const Tensor& input, const ConvKernel& k) {
  require_rank(input, 3, "conv2d input");
  require_rank(k.weight, 4, "conv2d kernel");
  const std::size_t H = input.height(), W = input.width(), Cin = input.channels();
  const std::size_t Cout = k.out_channels(), kh = k.kernel_h(), kw = k.kernel_w();
  if (k.in_channels() != Cin) {
    throw ShapeError("conv2d: input has " + std::to_string(Cin) + " channels, kernel expects " +
                     std::to_string(k.in_channels()));
  }
  if (k.stride < 1 || k.padding < 0) throw ShapeError("conv2d: stride must be >= 1, padding >= 0");
  const auto s = static_cast<std::size_t>(k.stride);
  const auto p = static_cast<std::size_t>(k.padding);
  if (H + 2 * p < kh || W + 2 * p < kw || (H + 2 * p - kh) % s != 0 || (W + 2 * p - kw) % s != 0) {
    throw ShapeError("conv2d: non-integral output size for input " + shape_string(input.dims()) +
                     " kernel " + shape_string(k.weight.dims()) + " stride " +
                     std::to_string(s) + " padding " + std::to_string(p));
  }
  const std::size_t Ho = (H + 2 * p - kh) / s + 1;
  const std::size_t Wo = (W + 2 * p - kw) / s + 1;

  // Repack weights as [kh][kw][cin][cout] so the innermost loop is contiguous.
  std::vector<double> packed(kh * kw * Cin * Cout);
  for (std::size_t o = 0; o < Cout; ++o)
    for (std::size_t c = 0; c < Cin; ++c)
      for (std::size_t a = 0; a < kh; ++a)
        for (std::size_t b = 0; b < kw; ++b)
          packed[((a * kw + b) * Cin + c) * Cout + o] = k.weight[((o * Cin + c) * kh + a) * kw + b];

  Tensor out({Ho, Wo, Cout});
  const bool has_bias = !k.bias.empty();
  for (std::size_t y = 0; y < Ho; ++y) {
    for (std::size_t x = 0; x < Wo; ++x) {
      double* o = &out.at(y, x, 0);
      if (has_bias)
        for (std::size_t oc = 0; oc < Cout; ++oc) o[oc] = k.bias[oc];
      for (std::size_t a = 0; a < kh; ++a) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * s + a) - static_cast<std::ptrdiff_t>(p);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
        for (std::size_t b = 0; b < kw; ++b) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * s + b) - static_cast<std::ptrdiff_t>(p);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
          const double* in = input.data().data() + (static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * Cin;
          const double* w = &packed[(a * kw + b) * Cin * Cout];
          for (std::size_t c = 0; c < Cin; ++c) {
            const double v = in[c];
            if (v == 0.0) continue;
            const double* wc = w + c * Cout;
            for (std::size_t oc = 0; oc < Cout; ++oc) o[oc] += v * wc[oc];
          }
        }
      }
    }
  }
  return out;
}

Tensor maxpool2(const Tensor& input) {
  require_rank(input, 3, "maxpool2");
  const std::size_t H = input.height(), W = input.width(), C = input.channels();
  if (H % 2 || W % 2) throw ShapeError("maxpool2: odd spatial dims " + shape_string(input.dims()));
  Tensor out({H / 2, W / 2, C});
  for (std::size_t y = 0; y < H / 2; ++y)
    for (std::size_t x = 0; x < W / 2; ++x)
      for (std::size_t c = 0; c < C; ++c)
        out.at(y, x, c) = std::max({input.at(2 * y, 2 * x, c), input.at(2 * y, 2 * x + 1, c),
                                    input.at(2 * y + 1, 2 * x, c), input.at(2 * y + 1, 2 * x + 1, c)});
  return out;
}

Tensor nearest_up2(const Tensor& input) {
  require_rank(input, 3, "nearest_up2");
  const std::size_t H = input.height(), W = input.width(), C = input.channels();
  Tensor out({2 * H, 2 * W, C});
  for (std::size_t y = 0; y < 2 * H; ++y)
    for (std::size_t x = 0; x < 2 * W; ++x)
      for (std::size_t c = 0; c < C; ++c) out.at(y, x, c) = input.at(y / 2, x / 2, c);
  return out;
}

Tensor tconv2(const Tensor& input, const ConvKernel& k) {
  require_rank(input, 3, "tconv2 input");
  require_rank(k.weight, 4, "tconv2 kernel");
  const std::size_t H = input.height(), W = input.width(), Cin = input.channels();
  if (k.in_channels() != Cin || k.kernel_h() != 2 || k.kernel_w() != 2) {
    throw ShapeError("tconv2: kernel " + shape_string(k.weight.dims()) + " incompatible with " +
                     shape_string(input.dims()));
  }
  const std::size_t Cout = k.out_channels();
  Tensor out({2 * H, 2 * W, Cout});
  const bool has_bias = !k.bias.empty();
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const double* in = input.data().data() + (y * W + x) * Cin;
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 2; ++b) {
          double* o = &out.at(2 * y + a, 2 * x + b, 0);
          for (std::size_t oc = 0; oc < Cout; ++oc) {
            double acc = has_bias ? k.bias[oc] : 0.0;
            for (std::size_t c = 0; c < Cin; ++c) acc += in[c] * k.weight[((oc * Cin + c) * 2 + a) * 2 + b];
            o[oc] = acc;
          }
        }
      }
    }
  }
  return out;
}

Tensor resample(const Tensor& input, const ResampleMode& mode) {
  struct Visitor {
    const Tensor& in;
    Tensor operator()(const MaxPool2&) const { return maxpool2(in); }
    Tensor operator()(const NearestUp2&) const { return nearest_up2(in); }
    Tensor operator()(const TransposedConv2& t) const { return tconv2(in, t.kernel); }
  };
  return std::visit(Visitor{input}, mode);
}

// ---------------------------------------------------------------------------
// Elementwise and layout helpers

Tensor relu(Tensor t) {
  for (auto& v : t.data()) v = v > 0.0 ? v : 0.0;
  return t;
}

Tensor layer_norm_rows(const Tensor& m) {
  require_rank(m, 2, "layer_norm_rows");
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  if (cols == 0) throw ShapeError("softmax_rows: empty row dimension");
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mean += m.at(i, j);
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) var += (m.at(i, j) - mean) * (m.at(i, j) - mean);
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + 1e-6);
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = (m.at(i, j) - mean) * inv;
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor scale(Tensor t, double factor) {
  for (auto& v : t.data()) v *= factor;
  return t;
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: nothing to concatenate");
  const std::size_t rank = parts[0].rank();
  std::vector<std::size_t> lead(parts[0].dims().begin(), parts[0].dims().end() - 1);
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank || !std::equal(lead.begin(), lead.end(), p.dims().begin())) {
      throw ShapeError("concat_channels: leading dims differ: " + shape_string(parts[0].dims()) +
                       " vs " + shape_string(p.dims()));
    }
    total += p.dims().back();
  }
  std::vector<std::size_t> dims = lead;
  dims.push_back(total);
  Tensor out(dims);
  const std::size_t cells = out.size() / total;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.dims().back();
    for (std::size_t i = 0; i < cells; ++i)
      std::copy_n(p.data().data() + i * c, c, out.data().data() + i * total + offset);
    offset += c;
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat_channels(parts);
}

Tensor to_tokens(const Tensor& hwc) {
  require_rank(hwc, 3, "to_tokens");
  return hwc.reshaped({hwc.height() * hwc.width(), hwc.channels()});
}

Tensor from_tokens(const Tensor& tokens, std::size_t height, std::size_t width) {
  require_rank(tokens, 2, "from_tokens");
  if (tokens.dim(0) != height * width) {
    throw ShapeError("from_tokens: " + std::to_string(tokens.dim(0)) + " tokens for a " +
                     std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  return tokens.reshaped({height, width, tokens.dim(1)});
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

double sum_squares(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return s;
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "mean_squared_error");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace wavefuse
