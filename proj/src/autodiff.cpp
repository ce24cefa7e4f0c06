#include "sparsepat/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace sparsepat {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using MapC = Eigen::Map<const MatRM<T>>;

template <typename T>
void ensure_grad(Node<T>& n) {
  if (!n.grad_live) {
    n.grad = Tensor<T>(n.value.shape());
    n.grad_live = true;
  }
}

template <typename T>
void check_4d(const Var<T>& v, const char* what) {
  if (v->value.rank() != 4)
    throw InvalidArgument(std::string(what) + " must be rank-4 (b,c,h,w), got " +
                          v->value.shape_string());
}

// Gathers conv patches: cols is (Cin*kh*kw) x (Ho*Wo), row-major.
template <typename T>
void im2col(const Tensor<T>& x, int64_t b, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
            int64_t ho, int64_t wo, AlignedVec<T>& cols) {
  const int64_t ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t l = ho * wo;
  cols.assign(static_cast<size_t>(ci * kh * kw * l), T(0));
  const T* src = x.data() + b * ci * h * w;
  for (int64_t c = 0; c < ci; ++c) {
    for (int64_t ky = 0; ky < kh; ++ky) {
      for (int64_t kx = 0; kx < kw; ++kx) {
        T* row = cols.data() + ((c * kh + ky) * kw + kx) * l;
        for (int64_t oy = 0; oy < ho; ++oy) {
          int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const T* in_row = src + (c * h + iy) * w;
          T* out_row = row + oy * wo;
          for (int64_t ox = 0; ox < wo; ++ox) {
            int64_t ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) out_row[ox] = in_row[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds column gradients back into dx.
template <typename T>
void col2im_add(const AlignedVec<T>& cols, int64_t b, int64_t kh, int64_t kw, int64_t stride,
                int64_t pad, int64_t ho, int64_t wo, Tensor<T>& dx) {
  const int64_t ci = dx.dim(1), h = dx.dim(2), w = dx.dim(3);
  const int64_t l = ho * wo;
  T* dst = dx.data() + b * ci * h * w;
  for (int64_t c = 0; c < ci; ++c) {
    for (int64_t ky = 0; ky < kh; ++ky) {
      for (int64_t kx = 0; kx < kw; ++kx) {
        const T* row = cols.data() + ((c * kh + ky) * kw + kx) * l;
        for (int64_t oy = 0; oy < ho; ++oy) {
          int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          T* out_row = dst + (c * h + iy) * w;
          const T* in_row = row + oy * wo;
          for (int64_t ox = 0; ox < wo; ++ox) {
            int64_t ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) out_row[ix] += in_row[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Var<T> Tape<T>::record(Var<T> node) {
  order_.push_back(node);
  return node;
}

template <typename T>
Var<T> Tape<T>::value(Tensor<T> v) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(v);
  n->requires_grad = false;
  return record(n);
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> v, bool requires_grad) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(v);
  n->requires_grad = requires_grad;
  return record(n);
}

template <typename T>
Var<T> Tape<T>::param(Parameter<T>& p) {
  auto it = param_cache_.find(&p);
  if (it != param_cache_.end()) return it->second;
  auto n = std::make_shared<Node<T>>();
  n->value = p.value;
  n->requires_grad = p.trainable;
  n->bound = &p;
  param_cache_[&p] = n;
  bound_params_.push_back(&p);
  return record(n);
}

template <typename T>
Var<T> Tape<T>::conv2d(Var<T> x, Var<T> w, Var<T> b, int stride, int pad) {
  check_4d(x, "conv2d input");
  check_4d(w, "conv2d weight");
  if (stride < 1) throw InvalidArgument("conv2d stride must be >= 1");
  if (pad < 0) throw InvalidArgument("conv2d pad must be >= 0");
  const int64_t bs = x->value.dim(0), ci = x->value.dim(1);
  const int64_t h = x->value.dim(2), wd = x->value.dim(3);
  const int64_t co = w->value.dim(0), wci = w->value.dim(1);
  const int64_t kh = w->value.dim(2), kw = w->value.dim(3);
  if (ci != wci)
    throw InvalidArgument("conv2d channel mismatch: input " + x->value.shape_string() +
                          " vs weight " + w->value.shape_string());
  if (b->value.rank() != 1 || b->value.dim(0) != co)
    throw InvalidArgument("conv2d bias must have length " + std::to_string(co) + ", got " +
                          b->value.shape_string());
  const int64_t ho = (h + 2 * pad - kh) / stride + 1;
  const int64_t wo = (wd + 2 * pad - kw) / stride + 1;
  if (h + 2 * pad < kh || wd + 2 * pad < kw || ho < 1 || wo < 1)
    throw InvalidArgument("conv2d kernel " + w->value.shape_string() +
                          " does not fit input " + x->value.shape_string() + " with pad " +
                          std::to_string(pad));

  auto n = std::make_shared<Node<T>>();
  n->value = Tensor<T>({bs, co, ho, wo});
  n->inputs = {x, w, b};
  n->requires_grad = x->requires_grad || w->requires_grad || b->requires_grad;

  const int64_t k = ci * kh * kw, l = ho * wo;
  {
    AlignedVec<T> cols;
    MapC<T> wm(w->value.data(), co, k);
    for (int64_t bi = 0; bi < bs; ++bi) {
      im2col(x->value, bi, kh, kw, stride, pad, ho, wo, cols);
      MapC<T> cm(cols.data(), k, l);
      MapM<T> om(n->value.data() + bi * co * l, co, l);
      om.noalias() = wm * cm;
      for (int64_t c = 0; c < co; ++c) om.row(c).array() += b->value[c];
    }
  }

  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>*xp = x.get(), *wp = w.get(), *bp = b.get();
    int64_t s = stride, p = pad;
    n->backward_fn = [self, xp, wp, bp, s, p, bs, ci, co, kh, kw, ho, wo, k, l]() {
      AlignedVec<T> cols, dcols(static_cast<size_t>(k * l));
      MapC<T> wm(wp->value.data(), co, k);
      for (int64_t bi = 0; bi < bs; ++bi) {
        MapC<T> dym(self->grad.data() + bi * co * l, co, l);
        if (wp->requires_grad || bp->requires_grad) {
          im2col(xp->value, bi, kh, kw, s, p, ho, wo, cols);
          MapC<T> cm(cols.data(), k, l);
          if (wp->requires_grad) {
            ensure_grad(*wp);
            MapM<T> dwm(wp->grad.data(), co, k);
            dwm.noalias() += dym * cm.transpose();
          }
          if (bp->requires_grad) {
            ensure_grad(*bp);
            for (int64_t c = 0; c < co; ++c) bp->grad[c] += dym.row(c).sum();
          }
        }
        if (xp->requires_grad) {
          ensure_grad(*xp);
          MapM<T> dcm(dcols.data(), k, l);
          dcm.noalias() = wm.transpose() * dym;
          col2im_add(dcols, bi, kh, kw, s, p, ho, wo, xp->grad);
        }
      }
    };
  }
  return record(n);
}

template <typename T>
Var<T> Tape<T>::batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, BatchNormState<T>& state,
                           Mode mode, T momentum, T eps) {
  check_4d(x, "batch_norm input");
  const int64_t bs = x->value.dim(0), ch = x->value.dim(1);
  const int64_t h = x->value.dim(2), w = x->value.dim(3);
  if (gamma->value.numel() != ch || beta->value.numel() != ch)
    throw InvalidArgument("batch_norm gamma/beta must have length " + std::to_string(ch));
  if (mode == Mode::kEval && !state.initialized)
    throw InvalidArgument("batch_norm eval mode requires populated running statistics");

  const int64_t plane = h * w, n_per_ch = bs * plane;
  std::vector<T> mean(static_cast<size_t>(ch)), inv_std(static_cast<size_t>(ch));

  if (mode == Mode::kTrain) {
    if (state.mean.empty()) {
      state.mean.assign(static_cast<size_t>(ch), T(0));
      state.var.assign(static_cast<size_t>(ch), T(1));
    }
    for (int64_t c = 0; c < ch; ++c) {
      double sum = 0.0;
      for (int64_t b = 0; b < bs; ++b) {
        const T* p = x->value.data() + (b * ch + c) * plane;
        for (int64_t i = 0; i < plane; ++i) sum += p[i];
      }
      double mu = sum / static_cast<double>(n_per_ch);
      double ss = 0.0;
      for (int64_t b = 0; b < bs; ++b) {
        const T* p = x->value.data() + (b * ch + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          double d = p[i] - mu;
          ss += d * d;
        }
      }
      double var = ss / static_cast<double>(n_per_ch);
      mean[c] = static_cast<T>(mu);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      double unbiased = n_per_ch > 1 ? ss / static_cast<double>(n_per_ch - 1) : var;
      state.mean[c] = static_cast<T>((1.0 - momentum) * state.mean[c] + momentum * mu);
      state.var[c] = static_cast<T>((1.0 - momentum) * state.var[c] + momentum * unbiased);
    }
    state.initialized = true;
  } else {
    for (int64_t c = 0; c < ch; ++c) {
      mean[c] = state.mean[c];
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(state.var[c]) +
                                                  static_cast<double>(eps)));
    }
  }

  auto n = std::make_shared<Node<T>>();
  n->value = Tensor<T>(x->value.shape());
  n->inputs = {x, gamma, beta};
  n->requires_grad = x->requires_grad || gamma->requires_grad || beta->requires_grad;
  for (int64_t b = 0; b < bs; ++b) {
    for (int64_t c = 0; c < ch; ++c) {
      const T* src = x->value.data() + (b * ch + c) * plane;
      T* dst = n->value.data() + (b * ch + c) * plane;
      T g = gamma->value[c], bt = beta->value[c], mu = mean[c], is = inv_std[c];
      for (int64_t i = 0; i < plane; ++i) dst[i] = (src[i] - mu) * is * g + bt;
    }
  }

  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>*xp = x.get(), *gp = gamma.get(), *bp = beta.get();
    bool train = mode == Mode::kTrain;
    n->backward_fn = [self, xp, gp, bp, mean, inv_std, train, bs, ch, plane, n_per_ch]() {
      for (int64_t c = 0; c < ch; ++c) {
        T mu = mean[c], is = inv_std[c], g = gp->value[c];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int64_t b = 0; b < bs; ++b) {
          const T* dy = self->grad.data() + (b * ch + c) * plane;
          const T* xv = xp->value.data() + (b * ch + c) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            sum_dy += dy[i];
            sum_dy_xhat += dy[i] * (xv[i] - mu) * is;
          }
        }
        if (gp->requires_grad) {
          ensure_grad(*gp);
          gp->grad[c] += static_cast<T>(sum_dy_xhat);
        }
        if (bp->requires_grad) {
          ensure_grad(*bp);
          bp->grad[c] += static_cast<T>(sum_dy);
        }
        if (xp->requires_grad) {
          ensure_grad(*xp);
          T mean_dy = static_cast<T>(sum_dy / n_per_ch);
          T mean_dy_xhat = static_cast<T>(sum_dy_xhat / n_per_ch);
          for (int64_t b = 0; b < bs; ++b) {
            const T* dy = self->grad.data() + (b * ch + c) * plane;
            const T* xv = xp->value.data() + (b * ch + c) * plane;
            T* dx = xp->grad.data() + (b * ch + c) * plane;
            if (train) {
              for (int64_t i = 0; i < plane; ++i) {
                T xhat = (xv[i] - mu) * is;
                dx[i] += g * is * (dy[i] - mean_dy - xhat * mean_dy_xhat);
              }
            } else {
              for (int64_t i = 0; i < plane; ++i) dx[i] += g * is * dy[i];
            }
          }
        }
      }
    };
  }
  return record(n);
}

template <typename T>
Var<T> Tape<T>::relu(Var<T> x) {
  auto n = std::make_shared<Node<T>>();
  n->value = Tensor<T>(x->value.shape());
  n->inputs = {x};
  n->requires_grad = x->requires_grad;
  for (int64_t i = 0; i < x->value.numel(); ++i)
    n->value[i] = x->value[i] > T(0) ? x->value[i] : T(0);
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* xp = x.get();
    n->backward_fn = [self, xp]() {
      ensure_grad(*xp);
      for (int64_t i = 0; i < xp->value.numel(); ++i)
        if (xp->value[i] > T(0)) xp->grad[i] += self->grad[i];
    };
  }
  return record(n);
}

template <typename T>
Var<T> Tape<T>::max_pool2(Var<T> x) {
  check_4d(x, "max_pool2 input");
  const int64_t bs = x->value.dim(0), ch = x->value.dim(1);
  const int64_t h = x->value.dim(2), w = x->value.dim(3);
  if (h % 2 != 0 || w % 2 != 0)
    throw InvalidArgument("max_pool2 requires even spatial dimensions, got " +
                          x->value.shape_string());
  const int64_t ho = h / 2, wo = w / 2;
  auto n = std::make_shared<Node<T>>();
  n->value = Tensor<T>({bs, ch, ho, wo});
  n->inputs = {x};
  n->requires_grad = x->requires_grad;
  // argmax is first occurrence in row-major window order, which fixes the
  // tie-break deterministically.
  auto argmax = std::make_shared<std::vector<int64_t>>(
      static_cast<size_t>(bs * ch * ho * wo));
  for (int64_t b = 0; b < bs; ++b) {
    for (int64_t c = 0; c < ch; ++c) {
      const T* src = x->value.data() + (b * ch + c) * h * w;
      T* dst = n->value.data() + (b * ch + c) * ho * wo;
      int64_t* am = argmax->data() + (b * ch + c) * ho * wo;
      for (int64_t oy = 0; oy < ho; ++oy) {
        for (int64_t ox = 0; ox < wo; ++ox) {
          int64_t base = 2 * oy * w + 2 * ox;
          int64_t best = base;
          T bv = src[base];
          const int64_t cand[3] = {base + 1, base + w, base + w + 1};
          for (int64_t idx : cand) {
            if (src[idx] > bv) {
              bv = src[idx];
              best = idx;
            }
          }
          dst[oy * wo + ox] = bv;
          am[oy * wo + ox] = best;
        }
      }
    }
  }
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* xp = x.get();
    n->backward_fn = [self, xp, argmax, bs, ch, h, w, ho, wo]() {
      ensure_grad(*xp);
      for (int64_t bc = 0; bc < bs * ch; ++bc) {
        const T* dy = self->grad.data() + bc * ho * wo;
        const int64_t* am = argmax->data() + bc * ho * wo;
        T* dx = xp->grad.data() + bc * h * w;
        for (int64_t i = 0; i < ho * wo; ++i) dx[am[i]] += dy[i];
      }
    };
  }
  return record(n);
}

template <typename T>
Var<T> Tape<T>::up_conv2(Var<T> x, Var<T> w, Var<T> b) {
  check_4d(x, "up_conv2 input");
  check_4d(w, "up_conv2 weight");
  const int64_t bs = x->value.dim(0), ci = x->value.dim(1);
  const int64_t h = x->value.dim(2), wd = x->value.dim(3);
  if (w->value.dim(0) != ci || w->value.dim(2) != 2 || w->value.dim(3) != 2)
    throw InvalidArgument("up_conv2 weight must be (in=" + std::to_string(ci) +
                          ", out, 2, 2), got " + w->value.shape_string());
  const int64_t co = w->value.dim(1);
  if (b->value.rank() != 1 || b->value.dim(0) != co)
    throw InvalidArgument("up_conv2 bias must have length " + std::to_string(co));

  auto n = std::make_shared<Node<T>>();
  n->value = Tensor<T>({bs, co, 2 * h, 2 * wd});
  n->inputs = {x, w, b};
  n->requires_grad = x->requires_grad || w->requires_grad || b->requires_grad;

  const int64_t l = h * wd;
  {
    // cols = W^T * in, cols row (oc,ky,kx) scatters to the (2y+ky, 2x+kx) grid.
    MapC<T> wm(w->value.data(), ci, co * 4);
    AlignedVec<T> cols(static_cast<size_t>(co * 4 * l));
    for (int64_t bi = 0; bi < bs; ++bi) {
      MapC<T> im(x->value.data() + bi * ci * l, ci, l);
      MapM<T> cm(cols.data(), co * 4, l);
      cm.noalias() = wm.transpose() * im;
      for (int64_t oc = 0; oc < co; ++oc) {
        T* dst = n->value.data() + (bi * co + oc) * 4 * l;
        for (int64_t ky = 0; ky < 2; ++ky) {
          for (int64_t kx = 0; kx < 2; ++kx) {
            const T* row = cols.data() + ((oc * 2 + ky) * 2 + kx) * l;
            for (int64_t y = 0; y < h; ++y) {
              T* out_row = dst + (2 * y + ky) * 2 * wd;
              const T* in_row = row + y * wd;
              for (int64_t xx = 0; xx < wd; ++xx)
                out_row[2 * xx + kx] = in_row[xx] + b->value[oc];
            }
          }
        }
      }
    }
  }

  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>*xp = x.get(), *wp = w.get(), *bp = b.get();
    n->backward_fn = [self, xp, wp, bp, bs, ci, co, h, wd, l]() {
      AlignedVec<T> dcols(static_cast<size_t>(co * 4 * l));
      MapC<T> wm(wp->value.data(), ci, co * 4);
      for (int64_t bi = 0; bi < bs; ++bi) {
        // gather output grads back into the (oc,ky,kx) x (h*w) layout
        for (int64_t oc = 0; oc < co; ++oc) {
          const T* dy = self->grad.data() + (bi * co + oc) * 4 * l;
          for (int64_t ky = 0; ky < 2; ++ky) {
            for (int64_t kx = 0; kx < 2; ++kx) {
              T* row = dcols.data() + ((oc * 2 + ky) * 2 + kx) * l;
              for (int64_t y = 0; y < h; ++y) {
                const T* dy_row = dy + (2 * y + ky) * 2 * wd;
                T* out_row = row + y * wd;
                for (int64_t xx = 0; xx < wd; ++xx) out_row[xx] = dy_row[2 * xx + kx];
              }
            }
          }
        }
        MapC<T> dcm(dcols.data(), co * 4, l);
        if (xp->requires_grad) {
          ensure_grad(*xp);
          MapM<T> dxm(xp->grad.data() + bi * ci * l, ci, l);
          dxm.noalias() += wm * dcm;
        }
        if (wp->requires_grad) {
          ensure_grad(*wp);
          MapC<T> im(xp->value.data() + bi * ci * l, ci, l);
          MapM<T> dwm(wp->grad.data(), ci, co * 4);
          dwm.noalias() += im * dcm.transpose();
        }
        if (bp->requires_grad) {
          ensure_grad(*bp);
          for (int64_t oc = 0; oc < co; ++oc) {
            double s = 0.0;
            const T* dy = self->grad.data() + (bi * co + oc) * 4 * l;
            for (int64_t i = 0; i < 4 * l; ++i) s += dy[i];
            bp->grad[oc] += static_cast<T>(s);
          }
        }
      }
    };
  }
  return record(n);
}

template <typename T>
Var<T> Tape<T>::concat_channels(Var<T> a, Var<T> b) {
  check_4d(a, "concat_channels input");
  check_4d(b, "concat_channels input");
  const auto& sa = a->value.shape();
  const auto& sb = b->value.shape();
  if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3])
    throw InvalidArgument("concat_channels batch/spatial mismatch: " + a->value.shape_string() +
                          " vs " + b->value.shape_string());
  const int64_t bs = sa[0], ca = sa[1], cb = sb[1], h = sa[2], w = sa[3];
  auto n = std::make_shared<Node<T>>();
  n->value = Tensor<T>({bs, ca + cb, h, w});
  n->inputs = {a, b};
  n->requires_grad = a->requires_grad || b->requires_grad;
  const int64_t plane = h * w;
  for (int64_t bi = 0; bi < bs; ++bi) {
    std::copy_n(a->value.data() + bi * ca * plane, ca * plane,
                n->value.data() + bi * (ca + cb) * plane);
    std::copy_n(b->value.data() + bi * cb * plane, cb * plane,
                n->value.data() + (bi * (ca + cb) + ca) * plane);
  }
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>*ap = a.get(), *bp = b.get();
    n->backward_fn = [self, ap, bp, bs, ca, cb, plane]() {
      for (int64_t bi = 0; bi < bs; ++bi) {
        const T* dy = self->grad.data() + bi * (ca + cb) * plane;
        if (ap->requires_grad) {
          ensure_grad(*ap);
          T* da = ap->grad.data() + bi * ca * plane;
          for (int64_t i = 0; i < ca * plane; ++i) da[i] += dy[i];
        }
        if (bp->requires_grad) {
          ensure_grad(*bp);
          T* db = bp->grad.data() + bi * cb * plane;
          for (int64_t i = 0; i < cb * plane; ++i) db[i] += dy[ca * plane + i];
        }
      }
    };
  }
  return record(n);
}

template <typename T>
Var<T> Tape<T>::add(Var<T> a, Var<T> b) {
  if (!a->value.same_shape(b->value))
    throw InvalidArgument("add shape mismatch: " + a->value.shape_string() + " vs " +
                          b->value.shape_string());
  auto n = std::make_shared<Node<T>>();
  n->value = Tensor<T>(a->value.shape());
  n->inputs = {a, b};
  n->requires_grad = a->requires_grad || b->requires_grad;
  for (int64_t i = 0; i < n->value.numel(); ++i) n->value[i] = a->value[i] + b->value[i];
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>*ap = a.get(), *bp = b.get();
    n->backward_fn = [self, ap, bp]() {
      if (ap->requires_grad) {
        ensure_grad(*ap);
        for (int64_t i = 0; i < self->grad.numel(); ++i) ap->grad[i] += self->grad[i];
      }
      if (bp->requires_grad) {
        ensure_grad(*bp);
        for (int64_t i = 0; i < self->grad.numel(); ++i) bp->grad[i] += self->grad[i];
      }
    };
  }
  return record(n);
}

template <typename T>
Var<T> Tape<T>::mse_loss(Var<T> prediction, Var<T> target) {
  if (!prediction->value.same_shape(target->value))
    throw InvalidArgument("mse_loss shape mismatch: " + prediction->value.shape_string() +
                          " vs " + target->value.shape_string());
  const int64_t n_el = prediction->value.numel();
  if (n_el == 0) throw InvalidArgument("mse_loss on empty tensors");
  auto n = std::make_shared<Node<T>>();
  n->value = Tensor<T>(std::vector<int64_t>{});
  n->inputs = {prediction, target};
  n->requires_grad = prediction->requires_grad || target->requires_grad;
  double acc = 0.0;
  for (int64_t i = 0; i < n_el; ++i) {
    double d = static_cast<double>(prediction->value[i]) - static_cast<double>(target->value[i]);
    acc += d * d;
  }
  n->value[0] = static_cast<T>(acc / static_cast<double>(n_el));
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>*pp = prediction.get(), *tp = target.get();
    n->backward_fn = [self, pp, tp, n_el]() {
      T scale = self->grad[0] * T(2) / static_cast<T>(n_el);
      if (pp->requires_grad) {
        ensure_grad(*pp);
        for (int64_t i = 0; i < n_el; ++i)
          pp->grad[i] += scale * (pp->value[i] - tp->value[i]);
      }
      if (tp->requires_grad) {
        ensure_grad(*tp);
        for (int64_t i = 0; i < n_el; ++i)
          tp->grad[i] -= scale * (pp->value[i] - tp->value[i]);
      }
    };
  }
  return record(n);
}

template <typename T>
Var<T> Tape<T>::sum(Var<T> x) {
  auto n = std::make_shared<Node<T>>();
  n->value = Tensor<T>(std::vector<int64_t>{});
  n->inputs = {x};
  n->requires_grad = x->requires_grad;
  double acc = 0.0;
  for (int64_t i = 0; i < x->value.numel(); ++i) acc += x->value[i];
  n->value[0] = static_cast<T>(acc);
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* xp = x.get();
    n->backward_fn = [self, xp]() {
      ensure_grad(*xp);
      for (int64_t i = 0; i < xp->grad.numel(); ++i) xp->grad[i] += self->grad[0];
    };
  }
  return record(n);
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss->value.numel() != 1)
    throw InvalidArgument("backward requires a scalar root, got shape " +
                          loss->value.shape_string());
  for (Parameter<T>* p : bound_params_) p->grad = Tensor<T>(p->value.shape());
  for (auto& n : order_) n->grad_live = false;
  ensure_grad(*loss);
  loss->grad[0] = T(1);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node<T>& n = **it;
    if (n.grad_live && n.backward_fn) n.backward_fn();
  }
  for (auto& [p, node] : param_cache_) {
    if (node->grad_live) p->grad = node->grad;
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace sparsepat
