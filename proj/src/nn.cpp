#include "zipfls/nn.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace zipfls {
namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

int conv_out_size(int in, int stride) { return (in - 1) / stride + 1; }

// 3x3 convolution, padding 1. out must be pre-sized; contents overwritten.
// Stride 1 runs a fused 3-tap row kernel; stride 2 takes the generic path.
template <typename T>
void conv_forward(const typename MiniNet<T>::Conv& layer, const Tensor4<T>& in,
                  Tensor4<T>& out) {
  const int s = layer.stride;
  const int hi = in.h, wi = in.w;
  const int ho = out.h, wo = out.w;
  for (int n = 0; n < in.n; ++n) {
    for (int co = 0; co < layer.cout; ++co) {
      T* __restrict dst = out.at(n, co);
      const T bias = layer.b[co];
      for (std::size_t i = 0; i < out.plane(); ++i) dst[i] = bias;
      for (int ci = 0; ci < layer.cin; ++ci) {
        const T* __restrict src = in.at(n, ci);
        const T* wk = layer.w.data() + (static_cast<std::size_t>(co) * layer.cin + ci) * 9;
        if (s == 1) {
          for (int kh = 0; kh < 3; ++kh) {
            const T w0 = wk[kh * 3], w1 = wk[kh * 3 + 1], w2 = wk[kh * 3 + 2];
            const int oh_lo = kh == 0 ? 1 : 0;
            const int oh_hi = std::min(ho - 1, hi - kh);
            for (int oh = oh_lo; oh <= oh_hi; ++oh) {
              const T* __restrict row = src + static_cast<std::size_t>(oh + kh - 1) * wi;
              T* __restrict drow = dst + static_cast<std::size_t>(oh) * wo;
              if (wo == 1) {
                drow[0] += w1 * row[0];
                continue;
              }
              drow[0] += w1 * row[0] + w2 * row[1];
              for (int ow = 1; ow < wo - 1; ++ow) {
                drow[ow] += w0 * row[ow - 1] + w1 * row[ow] + w2 * row[ow + 1];
              }
              drow[wo - 1] += w0 * row[wo - 2] + w1 * row[wo - 1];
            }
          }
        } else {
          for (int kh = 0; kh < 3; ++kh) {
            const int oh_lo = kh == 0 ? 1 : 0;
            const int oh_hi = std::min(ho - 1, (hi - kh) / s);
            for (int kw = 0; kw < 3; ++kw) {
              const T wv = wk[kh * 3 + kw];
              const int ow_lo = kw == 0 ? 1 : 0;
              const int ow_hi = std::min(wo - 1, (wi - kw) / s);
              const int off = kw - 1;
              for (int oh = oh_lo; oh <= oh_hi; ++oh) {
                const T* __restrict row = src + static_cast<std::size_t>(oh * s + kh - 1) * wi;
                T* __restrict drow = dst + static_cast<std::size_t>(oh) * wo;
                for (int ow = ow_lo; ow <= ow_hi; ++ow) drow[ow] += wv * row[ow * s + off];
              }
            }
          }
        }
      }
    }
  }
}

// Accumulates weight/bias gradients and (optionally) the input gradient.
template <typename T>
void conv_backward(typename MiniNet<T>::Conv& layer, const Tensor4<T>& in,
                   const Tensor4<T>& dout, Tensor4<T>* din) {
  const int s = layer.stride;
  const int hi = in.h, wi = in.w;
  const int ho = dout.h, wo = dout.w;

  for (int co = 0; co < layer.cout; ++co) {
    double bacc = 0.0;
    for (int n = 0; n < in.n; ++n) {
      const T* __restrict d = dout.at(n, co);
      for (std::size_t i = 0; i < dout.plane(); ++i) bacc += d[i];
    }
    layer.gb[co] += static_cast<T>(bacc);
  }

  for (int co = 0; co < layer.cout; ++co) {
    for (int ci = 0; ci < layer.cin; ++ci) {
      T* gw = layer.gw.data() + (static_cast<std::size_t>(co) * layer.cin + ci) * 9;
      if (s == 1 && wo >= 2) {
        for (int kh = 0; kh < 3; ++kh) {
          const int oh_lo = kh == 0 ? 1 : 0;
          const int oh_hi = std::min(ho - 1, hi - kh);
          double a0 = 0.0, a1 = 0.0, a2 = 0.0;
          for (int n = 0; n < in.n; ++n) {
            const T* __restrict src = in.at(n, ci);
            const T* __restrict d = dout.at(n, co);
            for (int oh = oh_lo; oh <= oh_hi; ++oh) {
              const T* __restrict row = src + static_cast<std::size_t>(oh + kh - 1) * wi;
              const T* __restrict drow = d + static_cast<std::size_t>(oh) * wo;
              T l0 = T(0), l1 = T(0), l2 = T(0);
              for (int ow = 1; ow < wo - 1; ++ow) {
                const T dv = drow[ow];
                l0 += dv * row[ow - 1];
                l1 += dv * row[ow];
                l2 += dv * row[ow + 1];
              }
              l1 += drow[0] * row[0];
              l2 += drow[0] * row[1];
              l0 += drow[wo - 1] * row[wo - 2];
              l1 += drow[wo - 1] * row[wo - 1];
              a0 += static_cast<double>(l0);
              a1 += static_cast<double>(l1);
              a2 += static_cast<double>(l2);
            }
          }
          gw[kh * 3] += static_cast<T>(a0);
          gw[kh * 3 + 1] += static_cast<T>(a1);
          gw[kh * 3 + 2] += static_cast<T>(a2);
        }
      } else {
        for (int kh = 0; kh < 3; ++kh) {
          const int oh_lo = kh == 0 ? 1 : 0;
          const int oh_hi = std::min(ho - 1, (hi - kh) / s);
          for (int kw = 0; kw < 3; ++kw) {
            const int ow_lo = kw == 0 ? 1 : 0;
            const int ow_hi = std::min(wo - 1, (wi - kw) / s);
            const int off = kw - 1;
            double acc = 0.0;
            for (int n = 0; n < in.n; ++n) {
              const T* __restrict src = in.at(n, ci);
              const T* __restrict d = dout.at(n, co);
              for (int oh = oh_lo; oh <= oh_hi; ++oh) {
                const T* __restrict row = src + static_cast<std::size_t>(oh * s + kh - 1) * wi;
                const T* __restrict drow = d + static_cast<std::size_t>(oh) * wo;
                T lane = T(0);
                for (int ow = ow_lo; ow <= ow_hi; ++ow) lane += drow[ow] * row[ow * s + off];
                acc += static_cast<double>(lane);
              }
            }
            gw[kh * 3 + kw] += static_cast<T>(acc);
          }
        }
      }
    }
  }

  if (din == nullptr) return;
  din->resize(in.n, in.c, in.h, in.w);
  for (int n = 0; n < in.n; ++n) {
    for (int ci = 0; ci < layer.cin; ++ci) {
      T* __restrict dst = din->at(n, ci);
      for (int co = 0; co < layer.cout; ++co) {
        const T* __restrict d = dout.at(n, co);
        const T* wk = layer.w.data() + (static_cast<std::size_t>(co) * layer.cin + ci) * 9;
        if (s == 1 && wi >= 2) {
          // gather form: din[ih][iw] += w0*dout[ih-kh+1][iw+1] + w1*[iw] + w2*[iw-1]
          for (int kh = 0; kh < 3; ++kh) {
            const T w0 = wk[kh * 3], w1 = wk[kh * 3 + 1], w2 = wk[kh * 3 + 2];
            const int ih_lo = std::max(0, kh - 1);
            const int ih_hi = std::min(hi - 1, ho - 2 + kh);
            for (int ih = ih_lo; ih <= ih_hi; ++ih) {
              T* __restrict row = dst + static_cast<std::size_t>(ih) * wi;
              const T* __restrict drow = d + static_cast<std::size_t>(ih - kh + 1) * wo;
              row[0] += w0 * drow[1] + w1 * drow[0];
              for (int iw = 1; iw < wi - 1; ++iw) {
                row[iw] += w0 * drow[iw + 1] + w1 * drow[iw] + w2 * drow[iw - 1];
              }
              row[wi - 1] += w1 * drow[wi - 1] + w2 * drow[wi - 2];
            }
          }
        } else {
          for (int kh = 0; kh < 3; ++kh) {
            const int oh_lo = kh == 0 ? 1 : 0;
            const int oh_hi = std::min(ho - 1, (hi - kh) / s);
            for (int kw = 0; kw < 3; ++kw) {
              const T wv = wk[kh * 3 + kw];
              const int ow_lo = kw == 0 ? 1 : 0;
              const int ow_hi = std::min(wo - 1, (wi - kw) / s);
              const int off = kw - 1;
              for (int oh = oh_lo; oh <= oh_hi; ++oh) {
                T* __restrict row = dst + static_cast<std::size_t>(oh * s + kh - 1) * wi;
                const T* __restrict drow = d + static_cast<std::size_t>(oh) * wo;
                for (int ow = ow_lo; ow <= ow_hi; ++ow) row[ow * s + off] += wv * drow[ow];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
DenseLogitsMap dense_map_from(const Tensor4<T>& t, int sample,
                              const typename MiniNet<T>::Fc& fc) {
  DenseLogitsMap map;
  map.height = t.h;
  map.width = t.w;
  map.num_classes = fc.out;
  map.scores.resize(static_cast<std::size_t>(t.h) * t.w * fc.out);
  const std::size_t plane = t.plane();
  for (std::size_t k = 0; k < plane; ++k) {
    double* row = map.scores.data() + k * fc.out;
    for (int c = 0; c < fc.out; ++c) {
      // Same accumulation order as the pooled FC so a spatially constant map
      // reproduces the pooled logits bit for bit.
      T acc = fc.b[c];
      const T* wrow = fc.w.data() + static_cast<std::size_t>(c) * fc.in;
      for (int j = 0; j < fc.in; ++j) acc += wrow[j] * t.at(sample, j)[k];
      row[c] = static_cast<double>(acc);
    }
  }
  return map;
}

}  // namespace

template <typename T>
MiniNet<T>::MiniNet(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
  if (cfg.in_channels < 1) throw std::invalid_argument("in_channels must be >= 1");
  for (int w : cfg.widths) {
    if (w < 1) throw std::invalid_argument("stage widths must be >= 1");
  }
  if (cfg.widths[1] != cfg.widths[2]) {
    throw std::invalid_argument("stage 2 and stage 3 widths must match for the shared classifier");
  }

  const int w1 = cfg.widths[0], w2 = cfg.widths[1], w3 = cfg.widths[2];
  auto setup_conv = [](Conv& conv, int cin, int cout, int stride) {
    conv.cin = cin;
    conv.cout = cout;
    conv.stride = stride;
    conv.w.assign(static_cast<std::size_t>(cout) * cin * 9, T(0));
    conv.b.assign(cout, T(0));
    conv.gw.assign(conv.w.size(), T(0));
    conv.gb.assign(conv.b.size(), T(0));
  };
  setup_conv(stem, cfg.in_channels, w1, 1);
  setup_conv(convs[0], w1, w1, 1);
  setup_conv(convs[1], w1, w1, 1);
  setup_conv(convs[2], w1, w2, 2);
  setup_conv(convs[3], w2, w2, 1);
  setup_conv(convs[4], w2, w3, 2);
  setup_conv(convs[5], w3, w3, 1);
  for (int i = 0; i < 6; ++i) {
    BatchNorm& bn = bns[i];
    bn.ch = convs[i].cout;
    bn.gamma.assign(bn.ch, T(1));
    bn.beta.assign(bn.ch, T(0));
    bn.ggamma.assign(bn.ch, T(0));
    bn.gbeta.assign(bn.ch, T(0));
    bn.run_mean.assign(bn.ch, T(0));
    bn.run_var.assign(bn.ch, T(1));
  }
  fc.in = w3;
  fc.out = cfg.num_classes;
  fc.w.assign(static_cast<std::size_t>(fc.out) * fc.in, T(0));
  fc.b.assign(fc.out, T(0));
  fc.gw.assign(fc.w.size(), T(0));
  fc.gb.assign(fc.b.size(), T(0));

  std::mt19937_64 rng(seed);
  auto msra_fill = [&rng](std::vector<T>& w, int fan_in) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (T& v : w) v = static_cast<T>(dist(rng));
  };
  msra_fill(stem.w, stem.cin * 9);
  for (Conv& conv : convs) msra_fill(conv.w, conv.cin * 9);
  msra_fill(fc.w, fc.in);
}

template <typename T>
ForwardTaps MiniNet<T>::forward(const Tensor4<T>& x, NetMode mode, Cache* cache,
                                bool want_dense) {
  if (x.n < 1 || x.c != cfg_.in_channels || x.h < 1 || x.w < 1 ||
      x.v.size() != static_cast<std::size_t>(x.n) * x.c * x.h * x.w) {
    throw std::invalid_argument("input batch shape mismatch");
  }
  Cache local;
  Cache& cc = cache ? *cache : local;
  cc.n = x.n;
  cc.mode = mode;
  cc.input = x;

  cc.out[0].ensure(x.n, stem.cout, conv_out_size(x.h, stem.stride),
                   conv_out_size(x.w, stem.stride));
  conv_forward<T>(stem, x, cc.out[0]);

  for (int li = 0; li < 6; ++li) {
    const Conv& conv = convs[li];
    BatchNorm& bn = bns[li];
    const Tensor4<T>& in = cc.out[li];
    Tensor4<T>& z = cc.xhat[li];  // conv output, normalized in place below
    z.ensure(in.n, conv.cout, conv_out_size(in.h, conv.stride),
             conv_out_size(in.w, conv.stride));
    conv_forward<T>(conv, in, z);

    const std::size_t plane = z.plane();
    const double m = static_cast<double>(z.n) * plane;
    cc.inv_std[li].assign(bn.ch, T(0));
    Tensor4<T>& y = cc.out[li + 1];
    y.ensure(z.n, z.c, z.h, z.w);
    for (int ch = 0; ch < bn.ch; ++ch) {
      double mean, var;
      if (mode == NetMode::Train) {
        double sum = 0.0, sq = 0.0;
        for (int n = 0; n < z.n; ++n) {
          const T* row = z.at(n, ch);
          for (std::size_t i = 0; i < plane; ++i) {
            sum += row[i];
            sq += static_cast<double>(row[i]) * row[i];
          }
        }
        mean = sum / m;
        var = std::max(sq / m - mean * mean, 0.0);
        bn.run_mean[ch] = static_cast<T>((1.0 - kBnMomentum) * bn.run_mean[ch] +
                                         kBnMomentum * mean);
        bn.run_var[ch] = static_cast<T>((1.0 - kBnMomentum) * bn.run_var[ch] +
                                        kBnMomentum * var);
      } else {
        mean = bn.run_mean[ch];
        var = bn.run_var[ch];
      }
      const T inv = static_cast<T>(1.0 / std::sqrt(var + kBnEps));
      cc.inv_std[li][ch] = inv;
      const T mu = static_cast<T>(mean);
      const T g = bn.gamma[ch], be = bn.beta[ch];
      for (int n = 0; n < z.n; ++n) {
        T* __restrict zr = z.at(n, ch);
        T* __restrict yr = y.at(n, ch);
        for (std::size_t i = 0; i < plane; ++i) {
          const T xh = (zr[i] - mu) * inv;
          zr[i] = xh;
          const T act = g * xh + be;
          yr[i] = act > T(0) ? act : T(0);
        }
      }
    }
  }

  const Tensor4<T>& s3 = cc.out[6];
  const std::size_t plane3 = s3.plane();
  cc.gap.assign(static_cast<std::size_t>(x.n) * fc.in, T(0));
  for (int n = 0; n < x.n; ++n) {
    for (int ch = 0; ch < fc.in; ++ch) {
      const T* row = s3.at(n, ch);
      T acc = T(0);
      for (std::size_t i = 0; i < plane3; ++i) acc += row[i];
      cc.gap[static_cast<std::size_t>(n) * fc.in + ch] =
          acc / static_cast<T>(plane3);
    }
  }

  ForwardTaps taps;
  taps.pooled.resize(x.n);
  for (int n = 0; n < x.n; ++n) {
    const T* g = cc.gap.data() + static_cast<std::size_t>(n) * fc.in;
    Logits& out = taps.pooled[n];
    out.resize(fc.out);
    for (int c = 0; c < fc.out; ++c) {
      T acc = fc.b[c];
      const T* wrow = fc.w.data() + static_cast<std::size_t>(c) * fc.in;
      for (int j = 0; j < fc.in; ++j) acc += wrow[j] * g[j];
      out[c] = static_cast<double>(acc);
    }
  }

  if (want_dense) {
    taps.dense1.reserve(x.n);
    taps.dense2.reserve(x.n);
    for (int n = 0; n < x.n; ++n) {
      taps.dense1.push_back(dense_map_from<T>(cc.out[6], n, fc));
      taps.dense2.push_back(dense_map_from<T>(cc.out[4], n, fc));
    }
  }

  cc.seq = ++forward_seq_;
  return taps;
}

template <typename T>
void MiniNet<T>::backward(const std::vector<Logits>& dpooled, const Cache& cache) {
  if (cache.seq != forward_seq_ || cache.seq == 0) {
    throw std::runtime_error("stale forward cache");
  }
  if (cache.mode != NetMode::Train) {
    // the BN backward below assumes batch statistics
    throw std::runtime_error("backward requires a train-mode forward cache");
  }
  const int n_batch = cache.n;
  if (static_cast<int>(dpooled.size()) != n_batch) {
    throw std::invalid_argument("gradient batch size mismatch");
  }
  for (const Logits& g : dpooled) {
    if (static_cast<int>(g.size()) != fc.out) {
      throw std::invalid_argument("gradient class count mismatch");
    }
  }

  // FC backward, then spread through GAP.
  const Tensor4<T>& s3 = cache.out[6];
  const std::size_t plane3 = s3.plane();
  std::vector<T> dgap(static_cast<std::size_t>(n_batch) * fc.in, T(0));
  for (int n = 0; n < n_batch; ++n) {
    const T* g = cache.gap.data() + static_cast<std::size_t>(n) * fc.in;
    T* dg = dgap.data() + static_cast<std::size_t>(n) * fc.in;
    for (int c = 0; c < fc.out; ++c) {
      const T d = static_cast<T>(dpooled[n][c]);
      fc.gb[c] += d;
      T* gw = fc.gw.data() + static_cast<std::size_t>(c) * fc.in;
      const T* w = fc.w.data() + static_cast<std::size_t>(c) * fc.in;
      for (int j = 0; j < fc.in; ++j) {
        gw[j] += d * g[j];
        dg[j] += w[j] * d;
      }
    }
  }

  Tensor4<T>& dcur = scratch_a_;
  dcur.ensure(s3.n, s3.c, s3.h, s3.w);
  const T inv_plane = T(1) / static_cast<T>(plane3);
  for (int n = 0; n < n_batch; ++n) {
    for (int ch = 0; ch < fc.in; ++ch) {
      const T d = dgap[static_cast<std::size_t>(n) * fc.in + ch] * inv_plane;
      T* row = dcur.at(n, ch);
      for (std::size_t i = 0; i < plane3; ++i) row[i] = d;
    }
  }

  Tensor4<T>& dprev = scratch_b_;
  for (int li = 5; li >= 0; --li) {
    Conv& conv = convs[li];
    BatchNorm& bn = bns[li];
    const Tensor4<T>& y = cache.out[li + 1];
    const Tensor4<T>& xhat = cache.xhat[li];
    const std::size_t plane = y.plane();
    const double m = static_cast<double>(y.n) * plane;

    // ReLU mask, then batch-norm backward with batch-statistic coupling:
    // dx = gamma * inv_std * (dy - mean(dy) - xhat * mean(dy * xhat))
    for (int ch = 0; ch < bn.ch; ++ch) {
      double s1 = 0.0, s2 = 0.0;
      for (int n = 0; n < y.n; ++n) {
        T* __restrict d = dcur.at(n, ch);
        const T* __restrict act = y.at(n, ch);
        const T* __restrict xh = xhat.at(n, ch);
        for (std::size_t i = 0; i < plane; ++i) {
          const T dv = act[i] > T(0) ? d[i] : T(0);
          d[i] = dv;
          s1 += dv;
          s2 += static_cast<double>(dv) * xh[i];
        }
      }
      bn.gbeta[ch] += static_cast<T>(s1);
      bn.ggamma[ch] += static_cast<T>(s2);
      const T k = bn.gamma[ch] * cache.inv_std[li][ch];
      const T mean_d = static_cast<T>(s1 / m);
      const T mean_dx = static_cast<T>(s2 / m);
      for (int n = 0; n < y.n; ++n) {
        T* __restrict d = dcur.at(n, ch);
        const T* __restrict xh = xhat.at(n, ch);
        for (std::size_t i = 0; i < plane; ++i) {
          d[i] = k * (d[i] - mean_d - xh[i] * mean_dx);
        }
      }
    }

    conv_backward<T>(conv, cache.out[li], dcur, &dprev);
    std::swap(dcur, dprev);
  }

  conv_backward<T>(stem, cache.input, dcur, nullptr);
}

template <typename T>
std::vector<ParamRef<T>> MiniNet<T>::params() {
  std::vector<ParamRef<T>> out;
  out.push_back({"stem.w", &stem.w, &stem.gw});
  out.push_back({"stem.b", &stem.b, &stem.gb});
  for (int i = 0; i < 6; ++i) {
    const std::string tag = "conv" + std::to_string(i);
    out.push_back({tag + ".w", &convs[i].w, &convs[i].gw});
    out.push_back({tag + ".b", &convs[i].b, &convs[i].gb});
    const std::string bn = "bn" + std::to_string(i);
    out.push_back({bn + ".gamma", &bns[i].gamma, &bns[i].ggamma});
    out.push_back({bn + ".beta", &bns[i].beta, &bns[i].gbeta});
  }
  out.push_back({"fc.w", &fc.w, &fc.gw});
  out.push_back({"fc.b", &fc.b, &fc.gb});
  return out;
}

template <typename T>
std::vector<ParamRef<T>> MiniNet<T>::buffers() {
  std::vector<ParamRef<T>> out;
  for (int i = 0; i < 6; ++i) {
    const std::string bn = "bn" + std::to_string(i);
    out.push_back({bn + ".run_mean", &bns[i].run_mean, nullptr});
    out.push_back({bn + ".run_var", &bns[i].run_var, nullptr});
  }
  return out;
}

template <typename T>
void MiniNet<T>::zero_grad() {
  for (ParamRef<T>& p : params()) {
    std::fill(p.grad->begin(), p.grad->end(), T(0));
  }
}

template class MiniNet<float>;
template class MiniNet<double>;

}  // namespace zipfls
