#include "yieldnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kernels.hpp"
#include "yieldnet/error.hpp"

namespace yieldnet::ad {
namespace {

Tape& common_tape(std::initializer_list<Var> vars) {
  Tape* tape = nullptr;
  for (const Var& v : vars) {
    require(v.valid(), "operation received an empty variable");
    if (tape == nullptr) tape = &v.tape();
    require(&v.tape() == tape, "operation inputs live on different tapes");
  }
  return *tape;
}

// Splits a [C, L] or [B, C, L] shape into (B, C, L).
struct SeriesDims {
  std::size_t batch;
  std::size_t channels;
  std::size_t length;
  bool batched;
};

SeriesDims series_dims(const Shape& shape, const char* op) {
  require(shape.size() == 2 || shape.size() == 3,
          std::string(op) + " expects [C, L] or [B, C, L], got " + shape_string(shape));
  if (shape.size() == 2) return {1, shape[0], shape[1], false};
  return {shape[0], shape[1], shape[2], true};
}

// Splits a shape into (rows, last-axis width).
std::pair<std::size_t, std::size_t> row_dims(const Shape& shape) {
  const std::size_t width = shape.back();
  return {element_count(shape) / width, width};
}

Shape with_last(const Shape& shape, std::size_t last) {
  Shape out = shape;
  out.back() = last;
  return out;
}

template <typename Forward, typename Derivative>
Var unary(Var x, Forward forward, Derivative derivative) {
  Tape& tape = x.tape();
  auto in = x.value();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  const std::size_t xid = x.id();
  return tape.record(x.shape(), std::move(out), [xid, derivative](Tape& t, std::size_t self) {
    auto g = t.upstream(self);
    auto y = t.value_of(self);
    auto xv = t.value_of(xid);
    auto gx = t.grad_of(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * derivative(xv[i], y[i]);
  });
}

}  // namespace

Var conv1d(Var input, Var kernels, Var bias) {
  Tape& tape = common_tape({input, kernels, bias});
  const SeriesDims d = series_dims(input.shape(), "conv1d");
  const Shape& ks = kernels.shape();
  require(ks.size() == 3, "conv1d kernels must be [C_out, C_in, k], got " + shape_string(ks));
  require(ks[1] == d.channels, "conv1d kernel C_in " + std::to_string(ks[1]) +
                                   " does not match input channels " + std::to_string(d.channels));
  require(ks[2] % 2 == 1, "conv1d kernel width must be odd");
  const std::size_t c_out = ks[0];
  const std::size_t width = ks[2];
  require(bias.shape() == Shape{c_out}, "conv1d bias must be [C_out]");

  const std::size_t c_in = d.channels;
  const std::size_t len = d.length;
  const std::size_t batch = d.batch;
  // Receptive-field rows r = ci * k + j against all batch positions m = s * L + i:
  // cols[r, m] = x[s, ci, i + j - pad] (zero outside). out[co, m] = W[co, :] . cols[:, m].
  const std::size_t rows = c_in * width;
  const std::size_t positions = batch * len;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(width / 2);
  const std::ptrdiff_t slen = static_cast<std::ptrdiff_t>(len);

  auto x = input.value();
  std::vector<double> cols(rows * positions, 0.0);
  for (std::size_t ci = 0; ci < c_in; ++ci) {
    for (std::size_t j = 0; j < width; ++j) {
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(slen, slen - shift);
      if (hi <= lo) continue;
      double* dst = cols.data() + (ci * width + j) * positions;
      for (std::size_t s = 0; s < batch; ++s) {
        const double* src = x.data() + (s * c_in + ci) * len;
        std::copy(src + lo + shift, src + hi + shift, dst + s * len + lo);
      }
    }
  }

  auto w = kernels.value();
  auto b = bias.value();
  std::vector<double> channel_major(c_out * positions);
  for (std::size_t co = 0; co < c_out; ++co) {
    double* o = channel_major.data() + co * positions;
    std::fill(o, o + positions, b[co]);
    for (std::size_t r = 0; r < rows; ++r) {
      kernels::axpy(w[co * rows + r], cols.data() + r * positions, o, positions);
    }
  }
  std::vector<double> out(batch * c_out * len);
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t co = 0; co < c_out; ++co)
      std::copy_n(channel_major.data() + co * positions + s * len, len, out.data() + (s * c_out + co) * len);

  Shape shape = d.batched ? Shape{batch, c_out, len} : Shape{c_out, len};
  const std::size_t xid = input.id(), wid = kernels.id(), bid = bias.id();
  return tape.record(
      std::move(shape), std::move(out), [=, cols = std::move(cols)](Tape& t, std::size_t self) {
        auto g = t.upstream(self);
        auto wv = t.value_of(wid);
        auto gw = t.grad_of(wid);
        auto gb = t.grad_of(bid);
        std::vector<double> g_cm(c_out * positions);
        for (std::size_t s = 0; s < batch; ++s)
          for (std::size_t co = 0; co < c_out; ++co)
            std::copy_n(g.data() + (s * c_out + co) * len, len, g_cm.data() + co * positions + s * len);

        std::vector<double> g_cols(rows * positions, 0.0);
        for (std::size_t co = 0; co < c_out; ++co) {
          const double* grow = g_cm.data() + co * positions;
          gb[co] += kernels::sum(grow, positions);
          for (std::size_t r = 0; r < rows; ++r) {
            gw[co * rows + r] += kernels::dot(grow, cols.data() + r * positions, positions);
            kernels::axpy(wv[co * rows + r], grow, g_cols.data() + r * positions, positions);
          }
        }
        auto gx = t.grad_of(xid);
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          for (std::size_t j = 0; j < width; ++j) {
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
            const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
            const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(slen, slen - shift);
            if (hi <= lo) continue;
            const double* src = g_cols.data() + (ci * width + j) * positions;
            for (std::size_t s = 0; s < batch; ++s) {
              double* dst = gx.data() + (s * c_in + ci) * len;
              for (std::ptrdiff_t i = lo; i < hi; ++i) dst[i + shift] += src[s * len + static_cast<std::size_t>(i)];
            }
          }
        }
      });
}

Var avgpool1d(Var input) {
  Tape& tape = input.tape();
  const SeriesDims d = series_dims(input.shape(), "avgpool1d");
  require(d.length >= 2, "avgpool1d requires length >= 2");
  const std::size_t half = d.length / 2;
  const std::size_t rows = d.batch * d.channels;
  auto x = input.value();
  std::vector<double> out(rows * half);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < half; ++i) {
      out[r * half + i] = 0.5 * (x[r * d.length + 2 * i] + x[r * d.length + 2 * i + 1]);
    }
  }
  Shape shape = d.batched ? Shape{d.batch, d.channels, half} : Shape{d.channels, half};
  const std::size_t xid = input.id();
  const std::size_t len = d.length;
  return tape.record(std::move(shape), std::move(out), [=](Tape& t, std::size_t self) {
    auto g = t.upstream(self);
    auto gx = t.grad_of(xid);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < half; ++i) {
        const double share = 0.5 * g[r * half + i];
        gx[r * len + 2 * i] += share;
        gx[r * len + 2 * i + 1] += share;
      }
    }
  });
}

Var affine(Var input, Var weights, Var bias) {
  Tape& tape = common_tape({input, weights, bias});
  const Shape& in = input.shape();
  require(in.size() == 1 || in.size() == 2,
          "affine expects [n] or [B, n], got " + shape_string(in));
  const Shape& ws = weights.shape();
  require(ws.size() == 2, "affine weights must be [m, n]");
  const std::size_t m = ws[0];
  const std::size_t n = ws[1];
  require(in.back() == n, "affine input width " + std::to_string(in.back()) +
                              " does not match weight columns " + std::to_string(n));
  require(bias.shape() == Shape{m}, "affine bias must be [m]");
  const std::size_t batch = in.size() == 2 ? in[0] : 1;

  auto x = input.value();
  auto w = weights.value();
  auto b = bias.value();
  std::vector<double> out(batch * m);
  for (std::size_t r = 0; r < m; ++r) {
    const double* wrow = w.data() + r * n;
    for (std::size_t s = 0; s < batch; ++s) {
      out[s * m + r] = b[r] + kernels::dot(wrow, x.data() + s * n, n);
    }
  }

  Shape shape = in.size() == 2 ? Shape{batch, m} : Shape{m};
  const std::size_t xid = input.id(), wid = weights.id(), bid = bias.id();
  return tape.record(std::move(shape), std::move(out), [=](Tape& t, std::size_t self) {
    auto g = t.upstream(self);
    auto xv = t.value_of(xid);
    auto wv = t.value_of(wid);
    auto gx = t.grad_of(xid);
    auto gw = t.grad_of(wid);
    auto gb = t.grad_of(bid);
    for (std::size_t r = 0; r < m; ++r) {
      const double* wrow = wv.data() + r * n;
      double* gwrow = gw.data() + r * n;
      for (std::size_t s = 0; s < batch; ++s) {
        const double gr = g[s * m + r];
        if (gr == 0.0) continue;
        gb[r] += gr;
        kernels::axpy(gr, xv.data() + s * n, gwrow, n);
        kernels::axpy(gr, wrow, gx.data() + s * n, n);
      }
    }
  });
}

Var relu(Var x) {
  Tape& tape = x.tape();
  auto in = x.value();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  const std::size_t xid = x.id();
  return tape.record(x.shape(), std::move(out), [xid](Tape& t, std::size_t self) {
    auto g = t.upstream(self);
    auto xv = t.value_of(xid);
    auto gx = t.grad_of(xid);
    const bool guided = t.mode() == GradMode::guided;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0 && (!guided || g[i] > 0.0)) gx[i] += g[i];
    }
  });
}

Var sigmoid(Var x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var add(Var a, Var b) {
  Tape& tape = common_tape({a, b});
  require(a.shape() == b.shape(), "add requires equal shapes, got " + shape_string(a.shape()) +
                                      " and " + shape_string(b.shape()));
  auto av = a.value();
  auto bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  const std::size_t aid = a.id(), bid = b.id();
  return tape.record(a.shape(), std::move(out), [aid, bid](Tape& t, std::size_t self) {
    auto g = t.upstream(self);
    auto ga = t.grad_of(aid);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    auto gb = t.grad_of(bid);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

Var mul(Var a, Var b) {
  Tape& tape = common_tape({a, b});
  require(a.shape() == b.shape(), "mul requires equal shapes, got " + shape_string(a.shape()) +
                                      " and " + shape_string(b.shape()));
  auto av = a.value();
  auto bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t aid = a.id(), bid = b.id();
  return tape.record(a.shape(), std::move(out), [aid, bid](Tape& t, std::size_t self) {
    auto g = t.upstream(self);
    auto avv = t.value_of(aid);
    auto bvv = t.value_of(bid);
    auto ga = t.grad_of(aid);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bvv[i];
    auto gb = t.grad_of(bid);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * avv[i];
  });
}

Var scale_shift(Var x, double scale, double shift) {
  Tape& tape = x.tape();
  auto in = x.value();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = scale * in[i] + shift;
  const std::size_t xid = x.id();
  return tape.record(x.shape(), std::move(out), [xid, scale](Tape& t, std::size_t self) {
    auto g = t.upstream(self);
    auto gx = t.grad_of(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += scale * g[i];
  });
}

Var concat(std::span<const Var> parts) {
  require(!parts.empty(), "concat requires at least one part");
  Tape& tape = parts.front().tape();
  const Shape& first = parts.front().shape();
  const std::size_t rows = row_dims(first).first;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& part : parts) {
    require(part.valid() && &part.tape() == &tape, "concat parts live on different tapes");
    const Shape& s = part.shape();
    require(s.size() == first.size(), "concat parts must have equal rank");
    for (std::size_t axis = 0; axis + 1 < s.size(); ++axis) {
      require(s[axis] == first[axis], "concat parts must agree on leading extents");
    }
    ids.push_back(part.id());
    widths.push_back(s.back());
    total += s.back();
  }

  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto v = parts[p].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * widths[p], widths[p], out.data() + r * total + offset);
    }
    offset += widths[p];
  }
  return tape.record(with_last(first, total), std::move(out),
                     [ids, widths, rows, total](Tape& t, std::size_t self) {
                       auto g = t.upstream(self);
                       std::size_t off = 0;
                       for (std::size_t p = 0; p < ids.size(); ++p) {
                         auto gp = t.grad_of(ids[p]);
                         for (std::size_t r = 0; r < rows; ++r) {
                           const double* src = g.data() + r * total + off;
                           double* dst = gp.data() + r * widths[p];
                           for (std::size_t i = 0; i < widths[p]; ++i) dst[i] += src[i];
                         }
                         off += widths[p];
                       }
                     });
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice(Var x, std::size_t offset, std::size_t length) {
  Tape& tape = x.tape();
  const auto [rows, width] = row_dims(x.shape());
  require(length > 0 && offset + length <= width, "slice range exceeds the last axis");
  auto v = x.value();
  std::vector<double> out(rows * length);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(v.data() + r * width + offset, length, out.data() + r * length);
  }
  const std::size_t xid = x.id();
  return tape.record(with_last(x.shape(), length), std::move(out),
                     [xid, rows = rows, width = width, offset, length](Tape& t, std::size_t self) {
                       auto g = t.upstream(self);
                       auto gx = t.grad_of(xid);
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t i = 0; i < length; ++i) {
                           gx[r * width + offset + i] += g[r * length + i];
                         }
                       }
                     });
}

Var reshape(Var x, Shape shape) {
  require(element_count(shape) == x.size(), "reshape to " + shape_string(shape) +
                                                " changes the element count of " +
                                                shape_string(x.shape()));
  auto v = x.value();
  const std::size_t xid = x.id();
  return x.tape().record(std::move(shape), std::vector<double>(v.begin(), v.end()),
                         [xid](Tape& t, std::size_t self) {
                           auto g = t.upstream(self);
                           auto gx = t.grad_of(xid);
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                         });
}

Var dot(Var x, std::span<const double> weights) {
  require(weights.size() == x.size(), "dot weights must match the variable's size");
  auto v = x.value();
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) total += v[i] * weights[i];
  std::vector<double> w(weights.begin(), weights.end());
  const std::size_t xid = x.id();
  return x.tape().record({1}, {total}, [xid, w = std::move(w)](Tape& t, std::size_t self) {
    const double g = t.upstream(self)[0];
    auto gx = t.grad_of(xid);
    for (std::size_t i = 0; i < w.size(); ++i) gx[i] += g * w[i];
  });
}

Var sum(Var x) {
  auto v = x.value();
  double total = 0.0;
  for (double e : v) total += e;
  const std::size_t xid = x.id();
  return x.tape().record({1}, {total}, [xid](Tape& t, std::size_t self) {
    const double g = t.upstream(self)[0];
    auto gx = t.grad_of(xid);
    for (double& e : gx) e += g;
  });
}

Var mse_loss(Var predictions, std::span<const double> targets) {
  require(!targets.empty(), "mse_loss requires at least one target");
  require(predictions.size() == targets.size(), "mse_loss lengths differ");
  auto p = predictions.value();
  const double n = static_cast<double>(targets.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double diff = p[i] - targets[i];
    total += diff * diff;
  }
  std::vector<double> t_copy(targets.begin(), targets.end());
  const std::size_t pid = predictions.id();
  return predictions.tape().record(
      {1}, {total / n}, [pid, n, t_copy = std::move(t_copy)](Tape& t, std::size_t self) {
        const double g = t.upstream(self)[0];
        auto pv = t.value_of(pid);
        auto gp = t.grad_of(pid);
        for (std::size_t i = 0; i < t_copy.size(); ++i) gp[i] += g * 2.0 * (pv[i] - t_copy[i]) / n;
      });
}

LstmState lstm_cell_step(Var x, Var h_prev, Var c_prev, const LstmParams& params) {
  common_tape({x, h_prev, c_prev, params.weight, params.bias});
  const Shape& hs = h_prev.shape();
  require(hs == c_prev.shape(), "lstm hidden and cell states must have equal shapes");
  require(x.shape().size() == hs.size(), "lstm input and state must share batch layout");
  const std::size_t hidden = hs.back();
  const std::size_t in_dim = x.shape().back();
  const Shape& ws = params.weight.shape();
  require(ws.size() == 2 && ws[0] == 4 * hidden && ws[1] == in_dim + hidden,
          "lstm weight must be [4H, d + H] = [" + std::to_string(4 * hidden) + "," +
              std::to_string(in_dim + hidden) + "], got " + shape_string(ws));
  require(params.bias.shape() == Shape{4 * hidden}, "lstm bias must be [4H]");

  Var z = affine(concat({x, h_prev}), params.weight, params.bias);
  Var input_gate = sigmoid(slice(z, 0, hidden));
  Var forget_gate = sigmoid(slice(z, hidden, hidden));
  Var candidate = tanh(slice(z, 2 * hidden, hidden));
  Var output_gate = sigmoid(slice(z, 3 * hidden, hidden));
  Var c = add(mul(forget_gate, c_prev), mul(input_gate, candidate));
  Var h = mul(output_gate, tanh(c));
  return {h, c};
}

Var batch_norm_train(Var x, Var gamma, Var beta, double eps, BatchNormStats* stats) {
  Tape& tape = common_tape({x, gamma, beta});
  const Shape& xs = x.shape();
  require(xs.size() == 2, "batch_norm expects [B, m]");
  const std::size_t batch = xs[0];
  const std::size_t m = xs[1];
  require(gamma.shape() == Shape{m} && beta.shape() == Shape{m}, "batch_norm scale/shift must be [m]");
  require(eps > 0.0, "batch_norm eps must be positive");

  auto xv = x.value();
  auto gv = gamma.value();
  auto bv = beta.value();
  std::vector<double> mean(m, 0.0), var(m, 0.0), inv_std(m);
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t j = 0; j < m; ++j) mean[j] += xv[s * m + j];
  for (std::size_t j = 0; j < m; ++j) mean[j] /= static_cast<double>(batch);
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t j = 0; j < m; ++j) {
      const double dev = xv[s * m + j] - mean[j];
      var[j] += dev * dev;
    }
  for (std::size_t j = 0; j < m; ++j) {
    var[j] /= static_cast<double>(batch);
    inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
  }
  std::vector<double> xhat(batch * m), out(batch * m);
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t k = s * m + j;
      xhat[k] = (xv[k] - mean[j]) * inv_std[j];
      out[k] = gv[j] * xhat[k] + bv[j];
    }
  if (stats != nullptr) {
    stats->mean = mean;
    stats->variance = var;
  }

  const std::size_t xid = x.id(), gid = gamma.id(), bid = beta.id();
  return tape.record(xs, std::move(out),
                     [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
                       auto g = t.upstream(self);
                       auto gamma_v = t.value_of(gid);
                       auto gg = t.grad_of(gid);
                       auto gb = t.grad_of(bid);
                       auto gx = t.grad_of(xid);
                       const double nb = static_cast<double>(batch);
                       for (std::size_t j = 0; j < m; ++j) {
                         double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                         for (std::size_t s = 0; s < batch; ++s) {
                           const std::size_t k = s * m + j;
                           gb[j] += g[k];
                           gg[j] += g[k] * xhat[k];
                           const double dxhat = g[k] * gamma_v[j];
                           sum_dxhat += dxhat;
                           sum_dxhat_xhat += dxhat * xhat[k];
                         }
                         for (std::size_t s = 0; s < batch; ++s) {
                           const std::size_t k = s * m + j;
                           const double dxhat = g[k] * gamma_v[j];
                           gx[k] += inv_std[j] / nb * (nb * dxhat - sum_dxhat - xhat[k] * sum_dxhat_xhat);
                         }
                       }
                     });
}

Var batch_norm_infer(Var x, Var gamma, Var beta, std::span<const double> running_mean,
                     std::span<const double> running_var, double eps) {
  Tape& tape = common_tape({x, gamma, beta});
  const auto [rows, m] = row_dims(x.shape());
  require(gamma.shape() == Shape{m} && beta.shape() == Shape{m}, "batch_norm scale/shift must be [m]");
  require(running_mean.size() == m && running_var.size() == m, "running statistics must be [m]");
  auto xv = x.value();
  auto gv = gamma.value();
  auto bv = beta.value();
  std::vector<double> inv_std(m), xhat(rows * m), out(rows * m);
  for (std::size_t j = 0; j < m; ++j) inv_std[j] = 1.0 / std::sqrt(running_var[j] + eps);
  for (std::size_t s = 0; s < rows; ++s)
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t k = s * m + j;
      xhat[k] = (xv[k] - running_mean[j]) * inv_std[j];
      out[k] = gv[j] * xhat[k] + bv[j];
    }
  const std::size_t xid = x.id(), gid = gamma.id(), bid = beta.id();
  return tape.record(x.shape(), std::move(out),
                     [=, rows = rows, m = m, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                         Tape& t, std::size_t self) {
                       auto g = t.upstream(self);
                       auto gamma_v = t.value_of(gid);
                       auto gg = t.grad_of(gid);
                       auto gb = t.grad_of(bid);
                       auto gx = t.grad_of(xid);
                       for (std::size_t s = 0; s < rows; ++s)
                         for (std::size_t j = 0; j < m; ++j) {
                           const std::size_t k = s * m + j;
                           gb[j] += g[k];
                           gg[j] += g[k] * xhat[k];
                           gx[k] += g[k] * gamma_v[j] * inv_std[j];
                         }
                     });
}

}  // namespace yieldnet::ad
