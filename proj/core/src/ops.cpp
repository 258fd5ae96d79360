#include "gseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace gseg {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

template <typename F>
void accumulate(Tensor t, F&& fn) {
  if (t.requires_grad()) fn(t.mutable_grad());
}

constexpr double kGeluTanhScale = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluCubic = 0.044715;

double gelu_derivative(double x, GeluMode mode) {
  if (mode == GeluMode::tanh) {
    const double u = kGeluTanhScale * (x + kGeluCubic * x * x * x);
    const double t = std::tanh(u);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluTanhScale * (1.0 + 3.0 * kGeluCubic * x * x);
  }
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace

double gelu_value(double x, GeluMode mode) {
  if (mode == GeluMode::tanh) {
    return 0.5 * x * (1.0 + std::tanh(kGeluTanhScale * (x + kGeluCubic * x * x * x)));
  }
  return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    accumulate(a, [&](std::span<double> ga) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
    accumulate(b, [&](std::span<double> gb) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    });
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    accumulate(a, [&](std::span<double> ga) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
    accumulate(b, [&](std::span<double> gb) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    });
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  std::vector<double> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    const auto av = a.data();
    const auto bv = b.data();
    accumulate(a, [&](std::span<double> ga) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    });
    accumulate(b, [&](std::span<double> gb) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    });
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [a, factor](std::span<const double> g) {
    accumulate(a, [&](std::span<double> ga) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return Tensor::make_result({}, {total}, {a}, [a](std::span<const double> g) {
    accumulate(a, [&](std::span<double> ga) {
      for (double& v : ga) v += g[0];
    });
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(a.shape()) + " as " + shape_to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {a}, [a](std::span<const double> g) {
    accumulate(a, [&](std::span<double> ga) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  });
}

Tensor gather(const Tensor& a, Shape out_shape, std::vector<std::size_t> index) {
  if (shape_numel(out_shape) != index.size()) {
    throw ShapeError("gather: index length " + std::to_string(index.size()) + " does not fill " +
                     shape_to_string(out_shape));
  }
  const auto av = a.data();
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= av.size()) throw ShapeError("gather: index out of range");
    out[i] = av[index[i]];
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), {a},
                             [a, index = std::move(index)](std::span<const double> g) {
                               accumulate(a, [&](std::span<double> ga) {
                                 for (std::size_t i = 0; i < g.size(); ++i) ga[index[i]] += g[i];
                               });
                             });
}

namespace {

// c[b] = a[b] * m[b], accumulating over k in increasing order from 0.
void matmul_kernel(const double* a, const double* m, double* c, std::size_t p, std::size_t q, std::size_t s) {
  for (std::size_t i = 0; i < p; ++i) {
    double* row = c + i * s;
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = a[i * q + k];
      const double* mrow = m + k * s;
      for (std::size_t j = 0; j < s; ++j) row[j] += aik * mrow[j];
    }
  }
}

// ga += g * m^T ; gm += a^T * g
void matmul_backward(const double* a, const double* m, const double* g, double* ga, double* gm, std::size_t p,
                     std::size_t q, std::size_t s) {
  if (ga) {
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t k = 0; k < q; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < s; ++j) acc += g[i * s + j] * m[k * s + j];
        ga[i * q + k] += acc;
      }
    }
  }
  if (gm) {
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t k = 0; k < q; ++k) {
        const double aik = a[i * q + k];
        for (std::size_t j = 0; j < s; ++j) gm[k * s + j] += aik * g[i * s + j];
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }
  const std::size_t p = a.dim(0), q = a.dim(1), s = b.dim(1);
  std::vector<double> out(p * s, 0.0);
  matmul_kernel(a.data().data(), b.data().data(), out.data(), p, q, s);
  return Tensor::make_result({p, s}, std::move(out), {a, b}, [a, b, p, q, s](std::span<const double> g) {
    Tensor ta = a, tb = b;
    double* ga = ta.requires_grad() ? ta.mutable_grad().data() : nullptr;
    double* gb = tb.requires_grad() ? tb.mutable_grad().data() : nullptr;
    matmul_backward(a.data().data(), b.data().data(), g.data(), ga, gb, p, q, s);
  });
}

Tensor batched_matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw ShapeError("batched_matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }
  const std::size_t batch = a.dim(0), p = a.dim(1), q = a.dim(2), s = b.dim(2);
  std::vector<double> out(batch * p * s, 0.0);
  for (std::size_t n = 0; n < batch; ++n) {
    matmul_kernel(a.data().data() + n * p * q, b.data().data() + n * q * s, out.data() + n * p * s, p, q, s);
  }
  return Tensor::make_result({batch, p, s}, std::move(out), {a, b},
                             [a, b, batch, p, q, s](std::span<const double> g) {
                               Tensor ta = a, tb = b;
                               double* ga = ta.requires_grad() ? ta.mutable_grad().data() : nullptr;
                               double* gb = tb.requires_grad() ? tb.mutable_grad().data() : nullptr;
                               for (std::size_t n = 0; n < batch; ++n) {
                                 matmul_backward(a.data().data() + n * p * q, b.data().data() + n * q * s,
                                                 g.data() + n * p * s, ga ? ga + n * p * q : nullptr,
                                                 gb ? gb + n * q * s : nullptr, p, q, s);
                               }
                             });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2 && a.rank() != 3) {
    throw ShapeError("transpose: expected rank 2 or 3, got " + shape_to_string(a.shape()));
  }
  const std::size_t batch = a.rank() == 3 ? a.dim(0) : 1;
  const std::size_t rows = a.dim(a.rank() - 2), cols = a.dim(a.rank() - 1);
  std::vector<std::size_t> index(a.numel());
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t i = 0; i < rows; ++i) {
        index[n * rows * cols + j * rows + i] = n * rows * cols + i * cols + j;
      }
    }
  }
  Shape out = a.shape();
  std::swap(out[out.size() - 1], out[out.size() - 2]);
  return gather(a, std::move(out), std::move(index));
}

Tensor softmax_rows(const Tensor& a) {
  if (a.rank() < 1) throw ShapeError("softmax_rows: scalar input");
  const std::size_t cols = a.dim(a.rank() - 1);
  const std::size_t rows = cols == 0 ? 0 : a.numel() / cols;
  const auto av = a.data();
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = av.data() + r * cols;
    double* o = out.data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < cols; ++j) o[j] /= total;
  }
  auto probs = out;
  return Tensor::make_result(a.shape(), std::move(out), {a},
                             [a, probs = std::move(probs), rows, cols](std::span<const double> g) {
                               accumulate(a, [&](std::span<double> ga) {
                                 for (std::size_t r = 0; r < rows; ++r) {
                                   const double* p = probs.data() + r * cols;
                                   const double* gr = g.data() + r * cols;
                                   double dot = 0.0;
                                   for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * p[j];
                                   for (std::size_t j = 0; j < cols; ++j) ga[r * cols + j] += p[j] * (gr[j] - dot);
                                 }
                               });
                             });
}

Tensor gelu(const Tensor& x, GeluMode mode) {
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = gelu_value(xv[i], mode);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [x, mode](std::span<const double> g) {
    const auto xv = x.data();
    accumulate(x, [&](std::span<double> gx) {
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * gelu_derivative(xv[i], mode);
    });
  });
}

Tensor sigmoid(const Tensor& x) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    out[i] = std::clamp(1.0 / (1.0 + std::exp(-xv[i])), lo, hi);
  }
  auto values = out;
  return Tensor::make_result(x.shape(), std::move(out), {x}, [x, values = std::move(values)](std::span<const double> g) {
    accumulate(x, [&](std::span<double> gx) {
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * values[i] * (1.0 - values[i]);
    });
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w) {
  if (x.rank() != 3) throw ShapeError("conv2d: input must be [C x H x W], got " + shape_to_string(x.shape()));
  if (w.rank() != 4) throw ShapeError("conv2d: weight must be [Cout x Cin x k x k], got " + shape_to_string(w.shape()));
  const std::size_t cin = x.dim(0), height = x.dim(1), width = x.dim(2);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin) {
    throw ShapeError("conv2d: weight expects " + std::to_string(w.dim(1)) + " input channels, input has " +
                     std::to_string(cin));
  }
  if (w.dim(3) != k) throw ShapeError("conv2d: kernel must be square, got " + shape_to_string(w.shape()));
  if (k % 2 == 0) throw ShapeError("conv2d: kernel size must be odd, got " + std::to_string(k));
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(height), W = static_cast<std::ptrdiff_t>(width);

  const double* xv = x.data().data();
  const double* wv = w.data().data();
  std::vector<double> out(cout * height * width, 0.0);

  // Visits every (output pixel, input pixel, weight) triple inside the image.
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t o = 0; o < cout; ++o) {
      for (std::size_t c = 0; c < cin; ++c) {
        for (std::size_t dy = 0; dy < k; ++dy) {
          for (std::size_t dx = 0; dx < k; ++dx) {
            const std::size_t widx = ((o * cin + c) * k + dy) * k + dx;
            const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(dy) - pad;
            const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(dx) - pad;
            const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -oy), y1 = std::min(H, H - oy);
            const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -ox), x1 = std::min(W, W - ox);
            for (std::ptrdiff_t y = y0; y < y1; ++y) {
              const std::size_t orow = (o * height + static_cast<std::size_t>(y)) * width;
              const std::size_t irow = (c * height + static_cast<std::size_t>(y + oy)) * width;
              for (std::ptrdiff_t xx = x0; xx < x1; ++xx) {
                fn(orow + static_cast<std::size_t>(xx), irow + static_cast<std::size_t>(xx + ox), widx);
              }
            }
          }
        }
      }
    }
  };

  for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t wi) { out[oi] += wv[wi] * xv[ii]; });

  return Tensor::make_result({cout, height, width}, std::move(out), {x, w},
                             [x, w, for_each_tap](std::span<const double> g) {
                               Tensor tx = x, tw = w;
                               const double* xv = x.data().data();
                               const double* wv = w.data().data();
                               double* gx = tx.requires_grad() ? tx.mutable_grad().data() : nullptr;
                               double* gw = tw.requires_grad() ? tw.mutable_grad().data() : nullptr;
                               for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t wi) {
                                 if (gx) gx[ii] += g[oi] * wv[wi];
                                 if (gw) gw[wi] += g[oi] * xv[ii];
                               });
                             });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels) {
  if (logits.rank() != 3) {
    throw ShapeError("cross_entropy: logits must be [classes x H x W], got " + shape_to_string(logits.shape()));
  }
  const std::size_t classes = logits.dim(0);
  const std::size_t pixels = logits.dim(1) * logits.dim(2);
  if (labels.size() != pixels) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(pixels) +
                     " pixels");
  }
  const auto lv = logits.data();
  std::vector<double> probs(lv.size());
  double loss = 0.0;
  for (std::size_t p = 0; p < pixels; ++p) {
    const auto label = labels[p];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
    double mx = lv[p];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, lv[c * pixels + p]);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(lv[c * pixels + p] - mx);
    const double log_total = std::log(total);
    for (std::size_t c = 0; c < classes; ++c) probs[c * pixels + p] = std::exp(lv[c * pixels + p] - mx - log_total);
    loss -= lv[static_cast<std::size_t>(label) * pixels + p] - mx - log_total;
  }
  loss /= static_cast<double>(pixels);
  std::vector<std::int32_t> targets(labels.begin(), labels.end());
  return Tensor::make_result(
      {}, {loss}, {logits},
      [logits, probs = std::move(probs), targets = std::move(targets), classes, pixels](std::span<const double> g) {
        accumulate(logits, [&](std::span<double> gl) {
          const double s = g[0] / static_cast<double>(pixels);
          for (std::size_t c = 0; c < classes; ++c) {
            for (std::size_t p = 0; p < pixels; ++p) {
              const double onehot = static_cast<std::size_t>(targets[p]) == c ? 1.0 : 0.0;
              gl[c * pixels + p] += s * (probs[c * pixels + p] - onehot);
            }
          }
        });
      });
}

}  // namespace gseg
