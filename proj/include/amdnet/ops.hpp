#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "amdnet/tape.hpp"
#include "amdnet/tensor.hpp"

namespace amdnet {
namespace detail {

// C += A(m x k) * B(k x n)
template <typename T>
void mm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ar = a + i * k;
    T* cr = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ar[p];
      if (av == T(0)) continue;
      const T* br = b + p * n;
      for (std::size_t j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

// C += A(m x k) * B(n x k)^T
template <typename T>
void mm_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ar = a + i * k;
    T* cr = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const T* br = b + j * k;
      T acc = T(0);
      for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
      cr[j] += acc;
    }
  }
}

// C += A(m x k)^T * B(m x n)
template <typename T>
void mm_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ar = a + i * k;
    const T* br = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ar[p];
      if (av == T(0)) continue;
      T* cr = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

template <typename T>
Tensor<T> matmul_value(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows())
    throw input_error("matmul: inner dimensions disagree: " + a.shape_str() + " vs " + b.shape_str());
  Tensor<T> out(a.rows(), b.cols());
  mm_acc(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
  return out;
}

template <typename T>
void softmax_rows_inplace(Tensor<T>& x) {
  const std::size_t m = x.rows(), n = x.cols();
  for (std::size_t i = 0; i < m; ++i) {
    T* r = x.data() + i * n;
    T mx = r[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, r[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    for (std::size_t j = 0; j < n; ++j) r[j] /= sum;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tape kernels. Every op returns a new node; pull closures capture Vars (not
// tensor references: the node vector may grow) and re-fetch values at pull
// time.
// ---------------------------------------------------------------------------

template <typename T>
Var matmul(Tape<T>& t, Var a, Var b) {
  Tensor<T> out = detail::matmul_value(t.value(a), t.value(b));
  return t.push(std::move(out), [a, b](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    const Tensor<T>& A = t.value(a);
    const Tensor<T>& B = t.value(b);
    detail::mm_nt_acc(g->data(), B.data(), t.grad(a).data(), A.rows(), B.cols(), A.cols());
    detail::mm_tn_acc(A.data(), g->data(), t.grad(b).data(), A.rows(), A.cols(), B.cols());
  });
}

/// a * b^T with b stored row-major (n x k).
template <typename T>
Var matmul_nt(Tape<T>& t, Var a, Var b) {
  const Tensor<T>& A = t.value(a);
  const Tensor<T>& B = t.value(b);
  if (A.cols() != B.cols())
    throw input_error("matmul_nt: inner dimensions disagree: " + A.shape_str() + " vs " + B.shape_str());
  Tensor<T> out(A.rows(), B.rows());
  detail::mm_nt_acc(A.data(), B.data(), out.data(), A.rows(), A.cols(), B.rows());
  return t.push(std::move(out), [a, b](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    const Tensor<T>& A = t.value(a);
    const Tensor<T>& B = t.value(b);
    // dA += G * B ; dB += G^T * A
    detail::mm_acc(g->data(), B.data(), t.grad(a).data(), A.rows(), B.rows(), A.cols());
    detail::mm_tn_acc(g->data(), A.data(), t.grad(b).data(), A.rows(), B.rows(), A.cols());
  });
}

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
  const Tensor<T>& A = t.value(a);
  const Tensor<T>& B = t.value(b);
  if (!A.same_shape(B))
    throw input_error("add: shape mismatch: " + A.shape_str() + " vs " + B.shape_str());
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  return t.push(std::move(out), [a, b](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    Tensor<T>& ga = t.grad(a);
    Tensor<T>& gb = t.grad(b);
    for (std::size_t i = 0; i < g->size(); ++i) {
      ga[i] += (*g)[i];
      gb[i] += (*g)[i];
    }
  });
}

/// Adds a 1 x n bias row to every row of x.
template <typename T>
Var bias_add_rows(Tape<T>& t, Var x, Var bias) {
  const Tensor<T>& X = t.value(x);
  const Tensor<T>& B = t.value(bias);
  if (B.rows() != 1 || B.cols() != X.cols())
    throw input_error("bias_add_rows: bias " + B.shape_str() + " does not match " + X.shape_str());
  Tensor<T> out = X;
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) += B[j];
  return t.push(std::move(out), [x, bias](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    Tensor<T>& gx = t.grad(x);
    Tensor<T>& gb = t.grad(bias);
    const std::size_t n = gb.size();
    for (std::size_t i = 0; i < g->size(); ++i) {
      gx[i] += (*g)[i];
      gb[i % n] += (*g)[i];
    }
  });
}

template <typename T>
Var scale(Tape<T>& t, Var x, T s) {
  Tensor<T> out = t.value(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  return t.push(std::move(out), [x, s](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g->size(); ++i) gx[i] += s * (*g)[i];
  });
}

template <typename T>
Var relu(Tape<T>& t, Var x) {
  Tensor<T> out = t.value(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], T(0));
  return t.push(std::move(out), [x](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    const Tensor<T>& X = t.value(x);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g->size(); ++i)
      if (X[i] > T(0)) gx[i] += (*g)[i];
  });
}

template <typename T>
Var sigmoid(Tape<T>& t, Var x) {
  Tensor<T> out = t.value(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-out[i]));
  return t.push(std::move(out), [x](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    const Tensor<T>& Y = t.value(self);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g->size(); ++i) gx[i] += (*g)[i] * Y[i] * (T(1) - Y[i]);
  });
}

/// Elementwise clamp; gradient passes only through the interior.
template <typename T>
Var clamp(Tape<T>& t, Var x, T lo, T hi) {
  Tensor<T> out = t.value(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(std::max(out[i], lo), hi);
  return t.push(std::move(out), [x, lo, hi](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    const Tensor<T>& X = t.value(x);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g->size(); ++i)
      if (X[i] > lo && X[i] < hi) gx[i] += (*g)[i];
  });
}

/// Row-wise softmax with max subtraction.
template <typename T>
Var softmax_rows(Tape<T>& t, Var x) {
  Tensor<T> out = t.value(x);
  detail::softmax_rows_inplace(out);
  return t.push(std::move(out), [x](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    const Tensor<T>& Y = t.value(self);
    Tensor<T>& gx = t.grad(x);
    const std::size_t m = Y.rows(), n = Y.cols();
    for (std::size_t i = 0; i < m; ++i) {
      T dot = T(0);
      for (std::size_t j = 0; j < n; ++j) dot += (*g)[i * n + j] * Y[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        gx[i * n + j] += Y[i * n + j] * ((*g)[i * n + j] - dot);
    }
  });
}

/// Row-wise layer norm with affine gain/bias (both 1 x n).
template <typename T>
Var layer_norm_rows(Tape<T>& t, Var x, Var gain, Var bias, T eps) {
  const Tensor<T>& X = t.value(x);
  const Tensor<T>& G = t.value(gain);
  const Tensor<T>& B = t.value(bias);
  const std::size_t m = X.rows(), n = X.cols();
  if (G.cols() != n || B.cols() != n)
    throw input_error("layer_norm_rows: affine shape mismatch vs " + X.shape_str());
  Tensor<T> out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    T mean = T(0);
    for (std::size_t j = 0; j < n; ++j) mean += X(i, j);
    mean /= T(n);
    T var = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      const T d = X(i, j) - mean;
      var += d * d;
    }
    var /= T(n);
    const T inv = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) out(i, j) = G[j] * ((X(i, j) - mean) * inv) + B[j];
  }
  return t.push(std::move(out), [x, gain, bias, eps](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    const Tensor<T>& X = t.value(x);
    const Tensor<T>& G = t.value(gain);
    Tensor<T>& gx = t.grad(x);
    Tensor<T>& gg = t.grad(gain);
    Tensor<T>& gb = t.grad(bias);
    const std::size_t m = X.rows(), n = X.cols();
    std::vector<T> xhat(n);
    for (std::size_t i = 0; i < m; ++i) {
      T mean = T(0);
      for (std::size_t j = 0; j < n; ++j) mean += X(i, j);
      mean /= T(n);
      T var = T(0);
      for (std::size_t j = 0; j < n; ++j) {
        const T d = X(i, j) - mean;
        var += d * d;
      }
      var /= T(n);
      const T inv = T(1) / std::sqrt(var + eps);
      for (std::size_t j = 0; j < n; ++j) xhat[j] = (X(i, j) - mean) * inv;
      T sum_dh = T(0), sum_dh_x = T(0);
      for (std::size_t j = 0; j < n; ++j) {
        const T go = (*g)[i * n + j];
        gg[j] += go * xhat[j];
        gb[j] += go;
        const T dh = go * G[j];
        sum_dh += dh;
        sum_dh_x += dh * xhat[j];
      }
      for (std::size_t j = 0; j < n; ++j) {
        const T dh = (*g)[i * n + j] * G[j];
        gx[i * n + j] += inv * (dh - sum_dh / T(n) - xhat[j] * sum_dh_x / T(n));
      }
    }
  });
}

/// Mean over rows: m x n -> 1 x n.
template <typename T>
Var mean_rows(Tape<T>& t, Var x) {
  const Tensor<T>& X = t.value(x);
  const std::size_t m = X.rows(), n = X.cols();
  Tensor<T> out(1, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += X(i, j);
  for (std::size_t j = 0; j < n; ++j) out[j] /= T(m);
  return t.push(std::move(out), [x, m, n](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += (*g)[j] / T(m);
  });
}

/// Max over each row: m x n -> m x 1. Gradient routes to the first argmax.
template <typename T>
Var row_max(Tape<T>& t, Var x) {
  const Tensor<T>& X = t.value(x);
  const std::size_t m = X.rows(), n = X.cols();
  Tensor<T> out(m, 1);
  std::vector<std::size_t> arg(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (X(i, j) > X(i, best)) best = j;
    arg[i] = best;
    out[i] = X(i, best);
  }
  return t.push(std::move(out), [x, arg = std::move(arg), n](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < arg.size(); ++i) gx[i * n + arg[i]] += (*g)[i];
  });
}

/// Column-concatenate equally-tall parts.
template <typename T>
Var concat_cols(Tape<T>& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw input_error("concat_cols: no parts");
  const std::size_t m = t.value(parts[0]).rows();
  std::size_t total = 0;
  for (Var p : parts) {
    if (t.value(p).rows() != m) throw input_error("concat_cols: row count mismatch");
    total += t.value(p).cols();
  }
  Tensor<T> out(m, total);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor<T>& P = t.value(p);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < P.cols(); ++j) out(i, off + j) = P(i, j);
    off += P.cols();
  }
  return t.push(std::move(out), [parts, m](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    std::size_t off = 0;
    for (Var p : parts) {
      Tensor<T>& gp = t.grad(p);
      const std::size_t c = gp.cols();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) gp(i, j) += (*g)(i, off + j);
      off += c;
    }
  });
}

template <typename T>
Var col_slice(Tape<T>& t, Var x, std::size_t start, std::size_t len) {
  const Tensor<T>& X = t.value(x);
  if (start + len > X.cols()) throw input_error("col_slice: out of range for " + X.shape_str());
  Tensor<T> out(X.rows(), len);
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = 0; j < len; ++j) out(i, j) = X(i, start + j);
  return t.push(std::move(out), [x, start, len](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g->rows(); ++i)
      for (std::size_t j = 0; j < len; ++j) gx(i, start + j) += (*g)(i, j);
  });
}

template <typename T>
Var row_slice(Tape<T>& t, Var x, std::size_t row) {
  const Tensor<T>& X = t.value(x);
  if (row >= X.rows()) throw input_error("row_slice: out of range for " + X.shape_str());
  Tensor<T> out(1, X.cols());
  for (std::size_t j = 0; j < X.cols(); ++j) out[j] = X(row, j);
  return t.push(std::move(out), [x, row](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    Tensor<T>& gx = t.grad(x);
    for (std::size_t j = 0; j < g->size(); ++j) gx(row, j) += (*g)[j];
  });
}

/// L2-normalize each row; all-zero rows stay zero (their gradient is zero).
template <typename T>
Var l2_normalize_rows(Tape<T>& t, Var x) {
  const Tensor<T>& X = t.value(x);
  const std::size_t m = X.rows(), n = X.cols();
  Tensor<T> out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    T sq = T(0);
    for (std::size_t j = 0; j < n; ++j) sq += X(i, j) * X(i, j);
    if (sq > T(0)) {
      const T inv = T(1) / std::sqrt(sq);
      for (std::size_t j = 0; j < n; ++j) out(i, j) = X(i, j) * inv;
    }
  }
  return t.push(std::move(out), [x](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    const Tensor<T>& X = t.value(x);
    const Tensor<T>& Y = t.value(self);
    Tensor<T>& gx = t.grad(x);
    const std::size_t m = X.rows(), n = X.cols();
    for (std::size_t i = 0; i < m; ++i) {
      T sq = T(0);
      for (std::size_t j = 0; j < n; ++j) sq += X(i, j) * X(i, j);
      if (sq == T(0)) continue;
      const T inv = T(1) / std::sqrt(sq);
      T ydotg = T(0);
      for (std::size_t j = 0; j < n; ++j) ydotg += Y(i, j) * (*g)(i, j);
      for (std::size_t j = 0; j < n; ++j)
        gx(i, j) += inv * ((*g)(i, j) - Y(i, j) * ydotg);
    }
  });
}

/// Normalize each row to unit sum. Rows must have positive sums.
template <typename T>
Var l1_normalize_rows(Tape<T>& t, Var x) {
  const Tensor<T>& X = t.value(x);
  const std::size_t m = X.rows(), n = X.cols();
  Tensor<T> out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    T sum = T(0);
    for (std::size_t j = 0; j < n; ++j) sum += X(i, j);
    if (!(sum > T(0))) throw input_error("l1_normalize_rows: nonpositive row sum");
    for (std::size_t j = 0; j < n; ++j) out(i, j) = X(i, j) / sum;
  }
  return t.push(std::move(out), [x](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    const Tensor<T>& X = t.value(x);
    const Tensor<T>& Y = t.value(self);
    Tensor<T>& gx = t.grad(x);
    const std::size_t m = X.rows(), n = X.cols();
    for (std::size_t i = 0; i < m; ++i) {
      T sum = T(0), gy = T(0);
      for (std::size_t j = 0; j < n; ++j) {
        sum += X(i, j);
        gy += (*g)(i, j) * Y(i, j);
      }
      for (std::size_t j = 0; j < n; ++j) gx(i, j) += ((*g)(i, j) - gy) / sum;
    }
  });
}

/// Multiply column j of x by s[j] (s is 1 x n). This is the mask broadcast in
/// masked attention: every row of the score matrix sees the same mask row.
template <typename T>
Var scale_cols(Tape<T>& t, Var x, Var s) {
  const Tensor<T>& X = t.value(x);
  const Tensor<T>& S = t.value(s);
  if (S.rows() != 1 || S.cols() != X.cols())
    throw input_error("scale_cols: scale " + S.shape_str() + " does not match " + X.shape_str());
  Tensor<T> out = X;
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) *= S[j];
  return t.push(std::move(out), [x, s](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    const Tensor<T>& X = t.value(x);
    const Tensor<T>& S = t.value(s);
    Tensor<T>& gx = t.grad(x);
    Tensor<T>& gs = t.grad(s);
    for (std::size_t i = 0; i < X.rows(); ++i)
      for (std::size_t j = 0; j < X.cols(); ++j) {
        gx(i, j) += (*g)(i, j) * S[j];
        gs[j] += (*g)(i, j) * X(i, j);
      }
  });
}

/// Sum of squared entries -> scalar.
template <typename T>
Var frobenius_sq(Tape<T>& t, Var x) {
  const Tensor<T>& X = t.value(x);
  T acc = T(0);
  for (std::size_t i = 0; i < X.size(); ++i) acc += X[i] * X[i];
  Tensor<T> out(1, 1);
  out[0] = acc;
  return t.push(std::move(out), [x](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    const Tensor<T>& X = t.value(x);
    Tensor<T>& gx = t.grad(x);
    const T go = (*g)[0];
    for (std::size_t i = 0; i < X.size(); ++i) gx[i] += T(2) * go * X[i];
  });
}

/// x - alpha * I for square x.
template <typename T>
Var sub_scaled_identity(Tape<T>& t, Var x, T alpha) {
  const Tensor<T>& X = t.value(x);
  if (X.rows() != X.cols()) throw input_error("sub_scaled_identity: not square: " + X.shape_str());
  Tensor<T> out = X;
  for (std::size_t i = 0; i < X.rows(); ++i) out(i, i) -= alpha;
  return t.push(std::move(out), [x](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g->size(); ++i) gx[i] += (*g)[i];
  });
}

/// sum(x .* weights) -> scalar, weights constant.
template <typename T>
Var weighted_sum(Tape<T>& t, Var x, Tensor<T> weights) {
  const Tensor<T>& X = t.value(x);
  if (!X.same_shape(weights) && X.size() != weights.size())
    throw input_error("weighted_sum: weight shape mismatch: " + X.shape_str() + " vs " + weights.shape_str());
  T acc = T(0);
  for (std::size_t i = 0; i < X.size(); ++i) acc += X[i] * weights[i];
  Tensor<T> out(1, 1);
  out[0] = acc;
  return t.push(std::move(out), [x, w = std::move(weights)](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    Tensor<T>& gx = t.grad(x);
    const T go = (*g)[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go * w[i];
  });
}

/// bias + sum_i weights[i] * scalars[i] -> scalar.
template <typename T>
Var affine_combine(Tape<T>& t, const std::vector<Var>& scalars, const std::vector<T>& weights, T bias = T(0)) {
  if (scalars.size() != weights.size()) throw input_error("affine_combine: size mismatch");
  T acc = bias;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (t.value(scalars[i]).size() != 1) throw input_error("affine_combine: non-scalar operand");
    acc += weights[i] * t.value(scalars[i])[0];
  }
  Tensor<T> out(1, 1);
  out[0] = acc;
  return t.push(std::move(out), [scalars, weights](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    for (std::size_t i = 0; i < scalars.size(); ++i) t.grad(scalars[i])[0] += (*g)[0] * weights[i];
  });
}

/// Mean of all entries -> scalar.
template <typename T>
Var mean_all(Tape<T>& t, Var x) {
  const std::size_t n = t.value(x).size();
  Tensor<T> w(t.value(x).shape());
  w.fill(T(1) / T(n));
  return weighted_sum(t, x, std::move(w));
}

}  // namespace amdnet
