#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "zipfls/optim.hpp"
#include "zipfls/ranking.hpp"
#include "zipfls/types.hpp"

namespace zipfls {

struct NetConfig {
  int num_classes = 10;
  int in_channels = 3;
  // Stage widths. Stage 2 and stage 3 share a width so the single classifier
  // FC applies to both dense maps.
  std::array<int, 3> widths{16, 32, 32};
};

// Dense NCHW tensor.
template <typename T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  // Sized and zero-filled; for accumulator use.
  void resize(int n_, int c_, int h_, int w_) {
    n = n_;
    c = c_;
    h = h_;
    w = w_;
    v.assign(static_cast<std::size_t>(n) * c * h * w, T(0));
  }
  // Sized only; caller overwrites every element.
  void ensure(int n_, int c_, int h_, int w_) {
    n = n_;
    c = c_;
    h = h_;
    w = w_;
    v.resize(static_cast<std::size_t>(n) * c * h * w);
  }
  T* at(int ni, int ci) {
    return v.data() + (static_cast<std::size_t>(ni) * c + ci) * h * w;
  }
  const T* at(int ni, int ci) const {
    return v.data() + (static_cast<std::size_t>(ni) * c + ci) * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
};

enum class NetMode { Train, Eval };

// Per-sample classifier outputs of one forward pass. Dense maps carry the
// same classifier applied at every spatial location; they feed ranking only
// and never receive gradient.
struct ForwardTaps {
  std::vector<Logits> pooled;
  std::vector<DenseLogitsMap> dense1;  // last-stage map
  std::vector<DenseLogitsMap> dense2;  // penultimate-stage map
};

// Small fixed-topology classifier: conv stem, three stages of two
// conv-BN-ReLU layers, x2 spatial downsample between stages (stride-2 on the
// first conv of stages 2 and 3), GAP + shared FC.
template <typename T>
class MiniNet {
 public:
  struct Conv {
    int cin = 0, cout = 0, stride = 1;
    std::vector<T> w, b;    // w laid out [cout][cin][3][3]
    std::vector<T> gw, gb;
  };
  struct BatchNorm {
    int ch = 0;
    std::vector<T> gamma, beta;
    std::vector<T> ggamma, gbeta;
    std::vector<T> run_mean, run_var;
  };
  struct Fc {
    int in = 0, out = 0;
    std::vector<T> w, b;  // w laid out [out][in]
    std::vector<T> gw, gb;
  };

  struct Cache {
    Tensor4<T> input;
    std::array<Tensor4<T>, 7> out;   // stem output, then post-ReLU outputs
    std::array<Tensor4<T>, 6> xhat;  // BN-normalized activations
    std::array<std::vector<T>, 6> inv_std;
    std::vector<T> gap;  // n x widths[2]
    std::uint64_t seq = 0;
    int n = 0;
    NetMode mode = NetMode::Train;
  };

  MiniNet(const NetConfig& cfg, std::uint64_t seed);  // MSRA init

  const NetConfig& config() const { return cfg_; }

  // Train mode normalizes with batch statistics and updates running stats.
  // want_dense=false skips the dense taps (they never affect training math).
  ForwardTaps forward(const Tensor4<T>& x, NetMode mode, Cache* cache = nullptr,
                      bool want_dense = true);

  // dpooled: per-sample d loss / d pooled logit, already carrying any batch
  // scaling. Accumulates into parameter gradients; call zero_grad() first.
  void backward(const std::vector<Logits>& dpooled, const Cache& cache);

  std::vector<ParamRef<T>> params();   // learnable tensors, declaration order
  std::vector<ParamRef<T>> buffers();  // BN running stats
  void zero_grad();

  Conv stem;
  std::array<Conv, 6> convs;  // pairs: (0,1) stage 1, (2,3) stage 2, (4,5) stage 3
  std::array<BatchNorm, 6> bns;
  Fc fc;

 private:
  NetConfig cfg_;
  std::uint64_t forward_seq_ = 0;
  Tensor4<T> scratch_a_, scratch_b_;  // backward activation-grad buffers
};

extern template class MiniNet<float>;
extern template class MiniNet<double>;

}  // namespace zipfls
