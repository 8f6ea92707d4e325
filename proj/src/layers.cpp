#include "wblift/layers.hpp"

#include <cmath>

namespace wblift {

void fan_in_init(Eigen::MatrixXd& m, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::string name, int in_dim, int out_dim)
    : w_(name + ".w", in_dim, out_dim), b_(name + ".b", 1, out_dim) {}

void Linear::init(Rng& rng) {
  fan_in_init(w_.value, static_cast<int>(w_.value.rows()), rng);
  b_.value.setZero();
}

void Linear::init_zero() {
  w_.value.setZero();
  b_.value.setZero();
}

Eigen::MatrixXd Linear::forward(const Eigen::MatrixXd& x) {
  if (x.cols() != w_.value.rows())
    throw ValidationError("linear " + w_.name + ": input dim " +
                          std::to_string(x.cols()) + " != " +
                          std::to_string(w_.value.rows()));
  x_cache_ = x;
  return (x * w_.value).rowwise() + b_.value.row(0);
}

Eigen::MatrixXd Linear::backward(const Eigen::MatrixXd& dy) {
  w_.grad.noalias() += x_cache_.transpose() * dy;
  b_.grad.row(0) += dy.colwise().sum();
  return dy * w_.value.transpose();
}

// -------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(std::string name, int dim)
    : gain_(name + ".gain", 1, dim), bias_(name + ".bias", 1, dim) {
  gain_.value.setOnes();
}

Eigen::MatrixXd LayerNorm::forward(const Eigen::MatrixXd& x) {
  constexpr double eps = 1e-6;
  const Eigen::Index d = x.cols();
  xhat_cache_.resize(x.rows(), d);
  inv_std_cache_.resize(x.rows());
  Eigen::MatrixXd y(x.rows(), d);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    Eigen::RowVectorXd centered = x.row(r).array() - mean;
    const double var = centered.squaredNorm() / static_cast<double>(d);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    inv_std_cache_[r] = inv_std;
    xhat_cache_.row(r) = centered * inv_std;
    y.row(r) = xhat_cache_.row(r).cwiseProduct(gain_.value.row(0)) +
               bias_.value.row(0);
  }
  return y;
}

Eigen::MatrixXd LayerNorm::backward(const Eigen::MatrixXd& dy) {
  const Eigen::Index d = dy.cols();
  Eigen::MatrixXd dx(dy.rows(), d);
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(gain_.value.row(0));
    gain_.grad.row(0) += dy.row(r).cwiseProduct(xhat_cache_.row(r));
    bias_.grad.row(0) += dy.row(r);
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(xhat_cache_.row(r)).mean();
    dx.row(r) =
        inv_std_cache_[r] *
        (dxhat.array() - m1 - xhat_cache_.row(r).array() * m2).matrix();
  }
  return dx;
}

// ---------------------------------------------------------------- Dropout

Eigen::MatrixXd Dropout::forward(const Eigen::MatrixXd& x, bool train,
                                 Rng* rng) {
  active_ = train && rate_ > 0.0;
  if (!active_) return x;
  if (!rng) throw ValidationError("dropout: train mode requires an RNG");
  const double keep = 1.0 - rate_;
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  mask_.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      mask_(i, j) = dist(*rng) < keep ? 1.0 / keep : 0.0;
  return x.cwiseProduct(mask_);
}

Eigen::MatrixXd Dropout::backward(const Eigen::MatrixXd& dy) {
  if (!active_) return dy;
  return dy.cwiseProduct(mask_);
}

// ---------------------------------------- MultiHeadSelfAttention

MultiHeadSelfAttention::MultiHeadSelfAttention(std::string name, int dim,
                                               int heads)
    : dim_(dim),
      heads_(heads),
      head_dim_(dim / heads),
      q_(name + ".q", dim, dim),
      k_(name + ".k", dim, dim),
      v_(name + ".v", dim, dim),
      o_(name + ".o", dim, dim) {
  if (dim % heads != 0)
    throw ValidationError("attention " + name + ": dim " + std::to_string(dim) +
                          " not divisible by heads " + std::to_string(heads));
}

void MultiHeadSelfAttention::init(Rng& rng) {
  q_.init(rng);
  k_.init(rng);
  v_.init(rng);
  o_.init_zero();
}

ParamRefs MultiHeadSelfAttention::params() {
  ParamRefs out;
  for (Linear* l : {&q_, &k_, &v_, &o_})
    for (Param* p : l->params()) out.push_back(p);
  return out;
}

Eigen::MatrixXd MultiHeadSelfAttention::forward(const Eigen::MatrixXd& x,
                                                int tokens) {
  if (x.rows() % tokens != 0)
    throw ValidationError("attention: rows not a multiple of token count");
  tokens_ = tokens;
  batch_ = static_cast<int>(x.rows()) / tokens;
  q_cache_ = q_.forward(x);
  k_cache_ = k_.forward(x);
  v_cache_ = v_.forward(x);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));

  probs_.assign(static_cast<size_t>(batch_) * heads_, {});
  Eigen::MatrixXd ctx(x.rows(), dim_);
  for (int b = 0; b < batch_; ++b) {
    for (int h = 0; h < heads_; ++h) {
      auto qh = q_cache_.block(b * tokens, h * head_dim_, tokens, head_dim_);
      auto kh = k_cache_.block(b * tokens, h * head_dim_, tokens, head_dim_);
      auto vh = v_cache_.block(b * tokens, h * head_dim_, tokens, head_dim_);
      Eigen::MatrixXd scores = (qh * kh.transpose()) * scale;
      Eigen::MatrixXd& a = probs_[static_cast<size_t>(b) * heads_ + h];
      a.resize(tokens, tokens);
      for (int r = 0; r < tokens; ++r) {
        Eigen::RowVectorXd row = scores.row(r);
        double mx = row.maxCoeff();
        Eigen::RowVectorXd e = (row.array() - mx).exp();
        a.row(r) = e / e.sum();
      }
      ctx.block(b * tokens, h * head_dim_, tokens, head_dim_) = a * vh;
    }
  }
  return o_.forward(ctx);
}

Eigen::MatrixXd MultiHeadSelfAttention::backward(const Eigen::MatrixXd& dy) {
  Eigen::MatrixXd dctx = o_.backward(dy);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  Eigen::MatrixXd dq(dy.rows(), dim_), dk(dy.rows(), dim_), dv(dy.rows(), dim_);
  for (int b = 0; b < batch_; ++b) {
    for (int h = 0; h < heads_; ++h) {
      const Eigen::MatrixXd& a = probs_[static_cast<size_t>(b) * heads_ + h];
      auto qh = q_cache_.block(b * tokens_, h * head_dim_, tokens_, head_dim_);
      auto kh = k_cache_.block(b * tokens_, h * head_dim_, tokens_, head_dim_);
      auto vh = v_cache_.block(b * tokens_, h * head_dim_, tokens_, head_dim_);
      auto dctx_h =
          dctx.block(b * tokens_, h * head_dim_, tokens_, head_dim_);
      Eigen::MatrixXd da = dctx_h * vh.transpose();
      dv.block(b * tokens_, h * head_dim_, tokens_, head_dim_).noalias() =
          a.transpose() * dctx_h;
      // softmax backward per row: ds = a .* (da - rowsum(da .* a))
      Eigen::MatrixXd ds(tokens_, tokens_);
      for (int r = 0; r < tokens_; ++r) {
        double dot = a.row(r).dot(da.row(r));
        ds.row(r) = a.row(r).array() * (da.row(r).array() - dot);
      }
      dq.block(b * tokens_, h * head_dim_, tokens_, head_dim_).noalias() =
          ds * kh * scale;
      dk.block(b * tokens_, h * head_dim_, tokens_, head_dim_).noalias() =
          ds.transpose() * qh * scale;
    }
  }
  return q_.backward(dq) + k_.backward(dk) + v_.backward(dv);
}

// ------------------------------------------------ SelfAttentionBlock

SelfAttentionBlock::SelfAttentionBlock(std::string name, int dim, int heads,
                                       double dropout)
    : ln_(name + ".ln", dim), attn_(name + ".attn", dim, heads), drop_(dropout) {}

void SelfAttentionBlock::init(Rng& rng) { attn_.init(rng); }

ParamRefs SelfAttentionBlock::params() {
  ParamRefs out = ln_.params();
  for (Param* p : attn_.params()) out.push_back(p);
  return out;
}

Eigen::MatrixXd SelfAttentionBlock::forward(const Eigen::MatrixXd& x,
                                            int tokens, bool train, Rng* rng) {
  return x + drop_.forward(attn_.forward(ln_.forward(x), tokens), train, rng);
}

Eigen::MatrixXd SelfAttentionBlock::backward(const Eigen::MatrixXd& dy) {
  return dy + ln_.backward(attn_.backward(drop_.backward(dy)));
}

// ----------------------------------------------------------------- SemGcn

SemGcn::SemGcn(std::string name, int nodes, int in_dim, int out_dim,
               const AdjacencyMask& mask, bool activated)
    : nodes_(nodes),
      in_dim_(in_dim),
      out_dim_(out_dim),
      activated_(activated),
      mask_(mask),
      w_self_(name + ".w_self", in_dim, out_dim),
      w_neigh_(name + ".w_neigh", in_dim, out_dim),
      b_(name + ".b", 1, out_dim),
      edge_logits_(name + ".edges", nodes, nodes) {
  if (mask.rows() != nodes || mask.cols() != nodes)
    throw ValidationError("semgcn " + name + ": mask shape mismatch");
  for (int i = 0; i < nodes; ++i)
    if (!mask.row(i).any())
      throw ValidationError("semgcn " + name + ": mask row " +
                            std::to_string(i) + " has no neighbors");
}

void SemGcn::init(Rng& rng) {
  fan_in_init(w_self_.value, in_dim_, rng);
  fan_in_init(w_neigh_.value, in_dim_, rng);
  b_.value.setZero();
  edge_logits_.value.setZero();
}

void SemGcn::init_zero() {
  w_self_.value.setZero();
  w_neigh_.value.setZero();
  b_.value.setZero();
  edge_logits_.value.setZero();
}

Eigen::MatrixXd SemGcn::edge_softmax() const {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(nodes_, nodes_);
  for (int i = 0; i < nodes_; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < nodes_; ++j)
      if (mask_(i, j)) mx = std::max(mx, edge_logits_.value(i, j));
    double sum = 0;
    for (int j = 0; j < nodes_; ++j)
      if (mask_(i, j)) {
        s(i, j) = std::exp(edge_logits_.value(i, j) - mx);
        sum += s(i, j);
      }
    s.row(i) /= sum;
  }
  return s;
}

Eigen::MatrixXd SemGcn::forward(const Eigen::MatrixXd& x) {
  if (x.rows() % nodes_ != 0 || x.cols() != in_dim_)
    throw ValidationError("semgcn: input shape mismatch");
  const int batch = static_cast<int>(x.rows()) / nodes_;
  x_cache_ = x;
  s_cache_ = edge_softmax();
  Eigen::MatrixXd hs = x * w_self_.value;
  hn_cache_ = x * w_neigh_.value;
  pre_cache_.resize(x.rows(), out_dim_);
  for (int b = 0; b < batch; ++b) {
    pre_cache_.middleRows(b * nodes_, nodes_).noalias() =
        s_cache_ * hn_cache_.middleRows(b * nodes_, nodes_);
  }
  pre_cache_ += hs;
  pre_cache_.rowwise() += b_.value.row(0);
  if (!activated_) return pre_cache_;
  return pre_cache_.unaryExpr([](double v) { return gelu(v); });
}

Eigen::MatrixXd SemGcn::backward(const Eigen::MatrixXd& dy) {
  const int batch = static_cast<int>(dy.rows()) / nodes_;
  Eigen::MatrixXd dpre = dy;
  if (activated_)
    dpre = dy.cwiseProduct(
        pre_cache_.unaryExpr([](double v) { return gelu_grad(v); }));

  b_.grad.row(0) += dpre.colwise().sum();
  w_self_.grad.noalias() += x_cache_.transpose() * dpre;
  Eigen::MatrixXd dx = dpre * w_self_.value.transpose();

  Eigen::MatrixXd ds = Eigen::MatrixXd::Zero(nodes_, nodes_);
  Eigen::MatrixXd dhn(dpre.rows(), out_dim_);
  for (int b = 0; b < batch; ++b) {
    auto dagg = dpre.middleRows(b * nodes_, nodes_);
    auto hn = hn_cache_.middleRows(b * nodes_, nodes_);
    ds.noalias() += dagg * hn.transpose();
    dhn.middleRows(b * nodes_, nodes_).noalias() = s_cache_.transpose() * dagg;
  }
  w_neigh_.grad.noalias() += x_cache_.transpose() * dhn;
  dx.noalias() += dhn * w_neigh_.value.transpose();

  // Softmax backward per row, restricted to the mask support; the logit
  // gradient is zero off-mask so the support invariant is preserved.
  for (int i = 0; i < nodes_; ++i) {
    double dot = s_cache_.row(i).dot(ds.row(i));
    for (int j = 0; j < nodes_; ++j)
      if (mask_(i, j))
        edge_logits_.grad(i, j) += s_cache_(i, j) * (ds(i, j) - dot);
  }
  return dx;
}

}  // namespace wblift
