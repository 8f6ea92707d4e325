#include "wblift/model.hpp"

namespace wblift {

void ModelConfig::validate() const {
  if (feature_dim <= 0 || feature_dim % attention_heads != 0)
    throw ValidationError("model config: feature_dim must be positive and divisible by attention_heads");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ValidationError("model config: dropout must be in [0,1)");
  if (encoder_layers < 1 || decoder_blocks_per_part < 1)
    throw ValidationError("model config: layer counts must be >= 1");
  if (output_scale <= 0)
    throw ValidationError("model config: output_scale must be positive");
}

Eigen::MatrixXd stack_batch(const PoseBatch& batch) {
  if (batch.empty()) throw ValidationError("stack_batch: empty batch");
  const Eigen::Index j = batch[0].rows(), c = batch[0].cols();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(batch.size()) * j, c);
  for (size_t b = 0; b < batch.size(); ++b)
    out.middleRows(static_cast<Eigen::Index>(b) * j, j) = batch[b];
  return out;
}

PoseBatch unstack_batch(const Eigen::MatrixXd& stacked, int joints) {
  if (stacked.rows() % joints != 0)
    throw ValidationError("unstack_batch: rows not a multiple of joint count");
  PoseBatch out(stacked.rows() / joints);
  for (size_t b = 0; b < out.size(); ++b)
    out[b] = stacked.middleRows(static_cast<Eigen::Index>(b) * joints, joints);
  return out;
}

// --------------------------------------------------------- JointEmbedding

JointEmbedding::JointEmbedding(std::string name, int joints, int dim)
    : joints_(joints),
      lin_(name + ".lin", 3, dim),
      joint_emb_(name + ".joint_emb", joints, dim) {}

void JointEmbedding::init(Rng& rng) {
  lin_.init(rng);
  fan_in_init(joint_emb_.value, static_cast<int>(joint_emb_.value.cols()), rng);
}

ParamRefs JointEmbedding::params() {
  ParamRefs out = lin_.params();
  out.push_back(&joint_emb_);
  return out;
}

Eigen::MatrixXd JointEmbedding::forward(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = lin_.forward(x);
  const int batch = static_cast<int>(y.rows()) / joints_;
  for (int b = 0; b < batch; ++b)
    y.middleRows(b * joints_, joints_) += joint_emb_.value;
  return y;
}

Eigen::MatrixXd JointEmbedding::backward(const Eigen::MatrixXd& dy) {
  const int batch = static_cast<int>(dy.rows()) / joints_;
  for (int b = 0; b < batch; ++b)
    joint_emb_.grad += dy.middleRows(b * joints_, joints_);
  return lin_.backward(dy);
}

// ------------------------------------------------------------ SemGanLayer

SemGanLayer::SemGanLayer(std::string name, const ModelConfig& cfg,
                         const AdjacencyMask& mask, bool use_gcn)
    : use_gcn_(use_gcn),
      attn_(name + ".sa", cfg.feature_dim, cfg.attention_heads, cfg.dropout),
      drop_(cfg.dropout) {
  if (use_gcn_) {
    ln2_ = std::make_unique<LayerNorm>(name + ".ln2", cfg.feature_dim);
    gcn_ = std::make_unique<SemGcn>(name + ".gcn",
                                    static_cast<int>(mask.rows()),
                                    cfg.feature_dim, cfg.feature_dim, mask,
                                    /*activated=*/true);
  }
}

void SemGanLayer::init(Rng& rng) {
  attn_.init(rng);
  if (use_gcn_) gcn_->init_zero();  // residual branch starts as identity
}

ParamRefs SemGanLayer::params() {
  ParamRefs out = attn_.params();
  if (use_gcn_) {
    for (Param* p : ln2_->params()) out.push_back(p);
    for (Param* p : gcn_->params()) out.push_back(p);
  }
  return out;
}

Eigen::MatrixXd SemGanLayer::forward(const Eigen::MatrixXd& x, int tokens,
                                     bool train, Rng* rng) {
  Eigen::MatrixXd h = attn_.forward(x, tokens, train, rng);
  if (!use_gcn_) return h;
  return h + drop_.forward(gcn_->forward(ln2_->forward(h)), train, rng);
}

Eigen::MatrixXd SemGanLayer::backward(const Eigen::MatrixXd& dy) {
  Eigen::MatrixXd dh = dy;
  if (use_gcn_)
    dh += ln2_->backward(gcn_->backward(drop_.backward(dy)));
  return attn_.backward(dh);
}

// ---------------------------------------------------------------- Encoder

Encoder::Encoder(const ModelConfig& cfg, const SkeletonTopology& topo,
                 const AdjacencyMask& mask)
    : joints_(topo.num_joints),
      emb_("encoder.embed", topo.num_joints, cfg.feature_dim) {
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    const bool use_gcn =
        !cfg.semgcn_last_layer_only || l == cfg.encoder_layers - 1;
    layers_.push_back(std::make_unique<SemGanLayer>(
        "encoder.layer" + std::to_string(l), cfg, mask, use_gcn));
  }
}

void Encoder::init(Rng& rng) {
  emb_.init(rng);
  for (auto& l : layers_) l->init(rng);
}

ParamRefs Encoder::params() {
  ParamRefs out = emb_.params();
  for (auto& l : layers_)
    for (Param* p : l->params()) out.push_back(p);
  return out;
}

Eigen::MatrixXd Encoder::forward(const Eigen::MatrixXd& input, int batch,
                                 bool train, Rng* rng) {
  if (input.rows() != static_cast<Eigen::Index>(batch) * joints_ ||
      input.cols() != 3)
    throw ValidationError("encoder: expected (" + std::to_string(batch) + "*" +
                          std::to_string(joints_) + ") x 3 input");
  if (!input.allFinite())
    throw ValidationError("encoder: non-finite input");
  Eigen::MatrixXd h = emb_.forward(input);
  for (auto& l : layers_) h = l->forward(h, joints_, train, rng);
  return h;
}

Eigen::MatrixXd Encoder::backward(const Eigen::MatrixXd& dy) {
  Eigen::MatrixXd d = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    d = (*it)->backward(d);
  return emb_.backward(d);
}

// ---------------------------------------------------------------- Decoder

Decoder::Decoder(const ModelConfig& cfg, const SkeletonTopology& topo,
                 const AdjacencyMask& mask)
    : joints_(topo.num_joints),
      output_scale_(cfg.output_scale),
      error_head_("decoder.error_head", cfg.feature_dim, 3) {
  ranges_ = {topo.part_ranges.body, topo.part_ranges.face,
             topo.part_ranges.hands};
  const char* part_names[3] = {"body", "face", "hands"};
  part_blocks_.resize(3);
  for (int p = 0; p < 3; ++p) {
    for (int k = 0; k < cfg.decoder_blocks_per_part; ++k) {
      part_blocks_[p].push_back(std::make_unique<SelfAttentionBlock>(
          std::string("decoder.") + part_names[p] + ".sa" + std::to_string(k),
          cfg.feature_dim, cfg.attention_heads, cfg.dropout));
    }
  }
  out_gcn_ = std::make_unique<SemGcn>("decoder.gcn", topo.num_joints,
                                      cfg.feature_dim, 3, mask,
                                      /*activated=*/false);
}

void Decoder::init(Rng& rng) {
  for (auto& part : part_blocks_)
    for (auto& blk : part) blk->init(rng);
  out_gcn_->init(rng);
  error_head_.init(rng);
}

ParamRefs Decoder::params() {
  ParamRefs out;
  for (auto& part : part_blocks_)
    for (auto& blk : part)
      for (Param* p : blk->params()) out.push_back(p);
  for (Param* p : out_gcn_->params()) out.push_back(p);
  for (Param* p : error_head_.params()) out.push_back(p);
  return out;
}

ModelOutput Decoder::forward(const Eigen::MatrixXd& h, int batch, bool train,
                             Rng* rng) {
  batch_ = batch;
  const Eigen::Index dim = h.cols();
  feat_cache_.resize(h.rows(), dim);
  for (int p = 0; p < 3; ++p) {
    const auto [rb, re] = ranges_[p];
    const int np = re - rb;
    Eigen::MatrixXd slab(static_cast<Eigen::Index>(batch) * np, dim);
    for (int b = 0; b < batch; ++b)
      slab.middleRows(static_cast<Eigen::Index>(b) * np, np) =
          h.middleRows(static_cast<Eigen::Index>(b) * joints_ + rb, np);
    for (auto& blk : part_blocks_[p])
      slab = blk->forward(slab, np, train, rng);
    for (int b = 0; b < batch; ++b)
      feat_cache_.middleRows(static_cast<Eigen::Index>(b) * joints_ + rb, np) =
          slab.middleRows(static_cast<Eigen::Index>(b) * np, np);
  }
  ModelOutput out;
  out.joints_3d = output_scale_ * out_gcn_->forward(feat_cache_);
  out.error_pred = output_scale_ * error_head_.forward(feat_cache_);
  return out;
}

Eigen::MatrixXd Decoder::backward(const Eigen::MatrixXd& d_joints,
                                  const Eigen::MatrixXd& d_error) {
  Eigen::MatrixXd dfeat = out_gcn_->backward(output_scale_ * d_joints);
  dfeat += error_head_.backward(output_scale_ * d_error);
  Eigen::MatrixXd dh(dfeat.rows(), dfeat.cols());
  for (int p = 0; p < 3; ++p) {
    const auto [rb, re] = ranges_[p];
    const int np = re - rb;
    Eigen::MatrixXd dslab(static_cast<Eigen::Index>(batch_) * np,
                          dfeat.cols());
    for (int b = 0; b < batch_; ++b)
      dslab.middleRows(static_cast<Eigen::Index>(b) * np, np) =
          dfeat.middleRows(static_cast<Eigen::Index>(b) * joints_ + rb, np);
    for (auto it = part_blocks_[p].rbegin(); it != part_blocks_[p].rend(); ++it)
      dslab = (*it)->backward(dslab);
    for (int b = 0; b < batch_; ++b)
      dh.middleRows(static_cast<Eigen::Index>(b) * joints_ + rb, np) =
          dslab.middleRows(static_cast<Eigen::Index>(b) * np, np);
  }
  return dh;
}

// ------------------------------------------------------------------ Model

Model::Model(const ModelConfig& cfg, const SkeletonTopology& topo)
    : cfg_(cfg),
      mask_(build_adjacency(topo)),
      encoder_(cfg, topo, mask_),
      decoder_(cfg, topo, mask_) {
  cfg.validate();
}

void Model::init_params(uint64_t seed) {
  Rng rng(seed);
  encoder_.init(rng);
  decoder_.init(rng);
}

ModelOutput Model::forward(const Eigen::MatrixXd& input, int batch, bool train,
                           Rng* rng) {
  enc_cache_ = encoder_.forward(input, batch, train, rng);
  ModelOutput out = decoder_.forward(enc_cache_, batch, train, rng);
  if (!out.joints_3d.allFinite() || !out.error_pred.allFinite())
    throw ValidationError("model: non-finite output");
  return out;
}

Eigen::MatrixXd Model::backward(const Eigen::MatrixXd& d_joints,
                                const Eigen::MatrixXd& d_error) {
  return encoder_.backward(decoder_.backward(d_joints, d_error));
}

ParamRefs Model::params() {
  ParamRefs out = encoder_.params();
  for (Param* p : decoder_.params()) out.push_back(p);
  return out;
}

void Model::zero_grad() {
  for (Param* p : params()) p->grad.setZero();
}

std::int64_t Model::num_params() {
  std::int64_t n = 0;
  for (Param* p : params()) n += p->value.size();
  return n;
}

}  // namespace wblift
