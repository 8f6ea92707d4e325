#pragma once

#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wblift/skeleton.hpp"

namespace wblift {

/// One learnable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  Param(std::string n, int rows, int cols)
      : name(std::move(n)),
        value(Eigen::MatrixXd::Zero(rows, cols)),
        grad(Eigen::MatrixXd::Zero(rows, cols)) {}
};

using ParamRefs = std::vector<Param*>;
using Rng = std::mt19937_64;

/// Fills a tensor with U(-1/sqrt(fan_in), 1/sqrt(fan_in)) in a fixed
/// element order, so initialization is bit-reproducible per seed.
void fan_in_init(Eigen::MatrixXd& m, int fan_in, Rng& rng);

double gelu(double x);
double gelu_grad(double x);

/// Affine map applied rowwise: Y = X W + b. Rows may stack batch x tokens.
class Linear {
 public:
  Linear(std::string name, int in_dim, int out_dim);

  void init(Rng& rng);       // fan-in scaled weights, zero bias
  void init_zero();          // residual-branch output projections

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);
  ParamRefs params() { return {&w_, &b_}; }

  Param& weight() { return w_; }
  Param& bias() { return b_; }

 private:
  Param w_, b_;
  Eigen::MatrixXd x_cache_;
};

/// Per-row layer normalization over the feature dimension, with gain/bias.
class LayerNorm {
 public:
  LayerNorm(std::string name, int dim);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);
  ParamRefs params() { return {&gain_, &bias_}; }

 private:
  Param gain_, bias_;
  Eigen::MatrixXd xhat_cache_;
  Eigen::VectorXd inv_std_cache_;
};

/// Inverted dropout; identity in eval mode.
class Dropout {
 public:
  explicit Dropout(double rate) : rate_(rate) {}

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool train, Rng* rng);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);

 private:
  double rate_;
  bool active_ = false;
  Eigen::MatrixXd mask_;
};

/// Scaled dot-product multi-head self-attention over all tokens (no mask).
/// Input rows stack batch x tokens; `tokens` gives the per-sample count.
class MultiHeadSelfAttention {
 public:
  MultiHeadSelfAttention(std::string name, int dim, int heads);

  void init(Rng& rng);  // output projection zero-initialized

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, int tokens);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);
  ParamRefs params();

  /// Attention probabilities from the last forward, indexed [sample*heads+h].
  const std::vector<Eigen::MatrixXd>& attention_probs() const { return probs_; }

 private:
  int dim_, heads_, head_dim_;
  Linear q_, k_, v_, o_;
  int tokens_ = 0, batch_ = 0;
  Eigen::MatrixXd q_cache_, k_cache_, v_cache_;
  std::vector<Eigen::MatrixXd> probs_;
};

/// Pre-normalization residual attention block: y = x + drop(attn(ln(x))).
class SelfAttentionBlock {
 public:
  SelfAttentionBlock(std::string name, int dim, int heads, double dropout);

  void init(Rng& rng);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, int tokens, bool train,
                          Rng* rng);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);
  ParamRefs params();

  MultiHeadSelfAttention& attention() { return attn_; }

 private:
  LayerNorm ln_;
  MultiHeadSelfAttention attn_;
  Dropout drop_;
};

/// Graph convolution with learnable input-independent edge weights,
/// softmax-normalized over each node's masked neighborhood:
///   out_i = act( x_i W_self + sum_j S_ij (x_j W_neigh) + b )
/// where S = row softmax of the edge logits restricted to the mask.
class SemGcn {
 public:
  SemGcn(std::string name, int nodes, int in_dim, int out_dim,
         const AdjacencyMask& mask, bool activated);

  void init(Rng& rng);
  void init_zero();  // residual-branch use

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);
  ParamRefs params() { return {&w_self_, &w_neigh_, &b_, &edge_logits_}; }

  /// Row-softmaxed edge weights (zero outside the mask).
  Eigen::MatrixXd edge_softmax() const;

 private:
  int nodes_, in_dim_, out_dim_;
  bool activated_;
  AdjacencyMask mask_;
  Param w_self_, w_neigh_, b_, edge_logits_;
  Eigen::MatrixXd x_cache_, hn_cache_, pre_cache_, s_cache_;
};

}  // namespace wblift
