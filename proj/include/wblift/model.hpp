#pragma once

#include <cstdint>
#include <memory>

#include "wblift/layers.hpp"
#include "wblift/losses.hpp"
#include "wblift/skeleton.hpp"

namespace wblift {

struct ModelConfig {
  int feature_dim = 256;
  int encoder_layers = 4;
  int attention_heads = 8;
  double dropout = 0.1;
  int decoder_blocks_per_part = 2;
  // When true, only the last encoder layer carries the graph-conv sublayer;
  // the default attaches one to every layer.
  bool semgcn_last_layer_only = false;
  // Network outputs are in units of output_scale millimeters.
  double output_scale = 1000.0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Stacked batch outputs: rows are batch x 133.
struct ModelOutput {
  Eigen::MatrixXd joints_3d;   // (B*133) x 3, root-relative mm
  Eigen::MatrixXd error_pred;  // (B*133) x 3
};

Eigen::MatrixXd stack_batch(const PoseBatch& batch);
PoseBatch unstack_batch(const Eigen::MatrixXd& stacked, int joints);

/// Shared per-joint affine map 3 -> feature_dim plus an additive learned
/// joint-index embedding.
class JointEmbedding {
 public:
  JointEmbedding(std::string name, int joints, int dim);

  void init(Rng& rng);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);
  ParamRefs params();

 private:
  int joints_;
  Linear lin_;
  Param joint_emb_;
};

/// Encoder unit: global self-attention followed by a residual graph-conv
/// sublayer with its own normalization.
class SemGanLayer {
 public:
  SemGanLayer(std::string name, const ModelConfig& cfg,
              const AdjacencyMask& mask, bool use_gcn);

  void init(Rng& rng);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, int tokens, bool train,
                          Rng* rng);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);
  ParamRefs params();

  SelfAttentionBlock& attention_block() { return attn_; }
  SemGcn& gcn() { return *gcn_; }
  bool has_gcn() const { return use_gcn_; }

 private:
  bool use_gcn_;
  SelfAttentionBlock attn_;
  std::unique_ptr<LayerNorm> ln2_;
  std::unique_ptr<SemGcn> gcn_;
  Dropout drop_;
};

class Encoder {
 public:
  Encoder(const ModelConfig& cfg, const SkeletonTopology& topo,
          const AdjacencyMask& mask);

  void init(Rng& rng);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, int batch, bool train,
                          Rng* rng);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);
  ParamRefs params();

  SemGanLayer& layer(int i) { return *layers_[i]; }
  JointEmbedding& embedding() { return emb_; }

 private:
  int joints_;
  JointEmbedding emb_;
  std::vector<std::unique_ptr<SemGanLayer>> layers_;
};

/// Splits features into body/face/hands slabs, runs part-specific attention
/// stacks, reassembles, then maps to 3D via a full-graph SemGCN plus a
/// parallel error head.
class Decoder {
 public:
  Decoder(const ModelConfig& cfg, const SkeletonTopology& topo,
          const AdjacencyMask& mask);

  void init(Rng& rng);
  ModelOutput forward(const Eigen::MatrixXd& h, int batch, bool train,
                      Rng* rng);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& d_joints,
                           const Eigen::MatrixXd& d_error);
  ParamRefs params();

  /// Reassembled part features from the last forward (before the heads).
  const Eigen::MatrixXd& part_features() const { return feat_cache_; }
  SelfAttentionBlock& part_block(int part, int block) {
    return *part_blocks_[part][block];
  }
  SemGcn& output_gcn() { return *out_gcn_; }

 private:
  int joints_;
  double output_scale_;
  std::array<std::pair<int, int>, 3> ranges_;
  std::vector<std::vector<std::unique_ptr<SelfAttentionBlock>>> part_blocks_;
  std::unique_ptr<SemGcn> out_gcn_;
  Linear error_head_;
  Eigen::MatrixXd feat_cache_;
  int batch_ = 0;
};

class Model {
 public:
  Model(const ModelConfig& cfg, const SkeletonTopology& topo);

  /// Deterministic parameter initialization from a seed.
  void init_params(uint64_t seed);

  /// input: (B*133) x 3 stacked (x, y, d) rows.
  ModelOutput forward(const Eigen::MatrixXd& input, int batch, bool train,
                      Rng* rng = nullptr);
  /// Returns d(loss)/d(input).
  Eigen::MatrixXd backward(const Eigen::MatrixXd& d_joints,
                           const Eigen::MatrixXd& d_error);

  ParamRefs params();
  void zero_grad();
  std::int64_t num_params();

  const ModelConfig& config() const { return cfg_; }
  const Eigen::MatrixXd& encoder_output() const { return enc_cache_; }
  Encoder& encoder() { return encoder_; }
  Decoder& decoder() { return decoder_; }

 private:
  ModelConfig cfg_;
  AdjacencyMask mask_;
  Encoder encoder_;
  Decoder decoder_;
  Eigen::MatrixXd enc_cache_;
};

}  // namespace wblift
