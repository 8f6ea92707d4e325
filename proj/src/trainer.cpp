#include "wblift/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace wblift {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
  if (!(base_lr > 0)) throw ValidationError("train config: base_lr must be > 0");
  if (min_lr < 0 || min_lr > base_lr)
    throw ValidationError("train config: min_lr must be in [0, base_lr]");
  loss_weights.validate();
  model.validate();
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError("config: malformed JSON in '" + path + "': " + e.what());
  }
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("base_lr", c.base_lr);
  get("min_lr", c.min_lr);
  get("weight_decay", c.weight_decay);
  get("adam_beta1", c.adam_beta1);
  get("adam_beta2", c.adam_beta2);
  get("adam_eps", c.adam_eps);
  get("grad_clip", c.grad_clip);
  get("seed", c.seed);
  get("eval_interval", c.eval_interval);
  get("checkpoint_dir", c.checkpoint_dir);
  if (j.contains("loss_weights")) {
    const auto& w = j["loss_weights"];
    if (w.contains("alpha")) c.loss_weights.alpha = w["alpha"];
    if (w.contains("beta")) c.loss_weights.beta = w["beta"];
    if (w.contains("gamma")) c.loss_weights.gamma = w["gamma"];
    if (w.contains("delta")) c.loss_weights.delta = w["delta"];
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    auto getm = [&](const char* key, auto& field) {
      if (m.contains(key)) field = m.at(key).get<std::decay_t<decltype(field)>>();
    };
    getm("feature_dim", c.model.feature_dim);
    getm("encoder_layers", c.model.encoder_layers);
    getm("attention_heads", c.model.attention_heads);
    getm("dropout", c.model.dropout);
    getm("decoder_blocks_per_part", c.model.decoder_blocks_per_part);
    getm("semgcn_last_layer_only", c.model.semgcn_last_layer_only);
    getm("output_scale", c.model.output_scale);
  }
  c.validate();
  return c;
}

std::string TrainConfig::to_json() const {
  json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["base_lr"] = base_lr;
  j["min_lr"] = min_lr;
  j["weight_decay"] = weight_decay;
  j["adam_beta1"] = adam_beta1;
  j["adam_beta2"] = adam_beta2;
  j["adam_eps"] = adam_eps;
  j["grad_clip"] = grad_clip;
  j["seed"] = seed;
  j["eval_interval"] = eval_interval;
  j["checkpoint_dir"] = checkpoint_dir;
  j["loss_weights"] = {{"alpha", loss_weights.alpha},
                       {"beta", loss_weights.beta},
                       {"gamma", loss_weights.gamma},
                       {"delta", loss_weights.delta}};
  j["model"] = {{"feature_dim", model.feature_dim},
                {"encoder_layers", model.encoder_layers},
                {"attention_heads", model.attention_heads},
                {"dropout", model.dropout},
                {"decoder_blocks_per_part", model.decoder_blocks_per_part},
                {"semgcn_last_layer_only", model.semgcn_last_layer_only},
                {"output_scale", model.output_scale}};
  return j.dump(1);
}

double cosine_lr(long step, long total_steps, double base_lr, double min_lr) {
  if (total_steps <= 0) throw ValidationError("cosine_lr: total_steps must be > 0");
  if (step < 0 || step > total_steps)
    throw ValidationError("cosine_lr: step out of [0, total_steps]");
  return min_lr + 0.5 * (base_lr - min_lr) *
                      (1.0 + std::cos(M_PI * static_cast<double>(step) /
                                      static_cast<double>(total_steps)));
}

AdamW::AdamW(const ParamRefs& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (Param* p : params) {
    m_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::step(const ParamRefs& params, double lr, double weight_decay) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    // Decoupled decay: shrink parameters directly, not through the gradient.
    p.value *= (1.0 - lr * weight_decay);
    p.value.array() -=
        lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
  }
}

namespace {

std::string log_line(long step, double lr, const LossReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"step\":" << step << ",\"lr\":" << lr << ",\"l3d\":" << r.l3d
     << ",\"lerror\":" << r.lerror << ",\"lnormal\":" << r.lnormal
     << ",\"lbone\":" << r.lbone << ",\"total\":" << r.total << "}";
  return os.str();
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const SkeletonTopology& topo,
                  const std::string& topology_version) {
  config.validate();
  if (dataset.size() == 0) throw ValidationError("train: empty dataset");
  for (const auto& s : dataset.samples)
    if (!s.joints_3d_gt)
      throw ValidationError("train: sample '" + s.frame_id +
                            "' has no 3D target");

  namespace fs = std::filesystem;
  fs::create_directories(config.checkpoint_dir);

  Model model(config.model, topo);
  model.init_params(config.seed);
  AdamW opt(model.params(), config.adam_beta1, config.adam_beta2,
            config.adam_eps);
  Rng dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  const long batches_per_epoch =
      (dataset.size() + config.batch_size - 1) / config.batch_size;
  const long total_steps = static_cast<long>(config.epochs) * batches_per_epoch;

  TrainResult result;
  result.log_path = config.checkpoint_dir + "/train_log.jsonl";
  std::ofstream log(result.log_path);
  if (!log) throw ValidationError("train: cannot write log '" + result.log_path + "'");

  std::string last_good = "";
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const uint64_t epoch_seed =
        config.seed * 1000003ULL + static_cast<uint64_t>(epoch);
    auto batches = shuffled_batches(dataset.size(), config.batch_size, epoch_seed);
    for (const auto& indices : batches) {
      Batch batch = make_batch(dataset, indices, topo);
      const double lr =
          cosine_lr(step, total_steps, config.base_lr, config.min_lr);

      model.zero_grad();
      ModelOutput out = model.forward(batch.input,
                                      static_cast<int>(indices.size()),
                                      /*train=*/true, &dropout_rng);
      PoseBatch pred = unstack_batch(out.joints_3d, topo.num_joints);
      PoseBatch err = unstack_batch(out.error_pred, topo.num_joints);
      PoseBatch grad_pred, grad_err;
      LossReport report = total_loss(pred, err, batch.target, topo,
                                     config.loss_weights, &grad_pred, &grad_err);
      if (!std::isfinite(report.total)) {
        log << log_line(step, lr, report) << "\n";
        throw std::runtime_error(
            "train: non-finite loss at step " + std::to_string(step) +
            (last_good.empty() ? " (no checkpoint written yet)"
                               : "; last-good checkpoint: " + last_good));
      }
      if (step == 0) result.first_report = report;
      result.final_report = report;
      log << log_line(step, lr, report) << "\n";

      model.backward(stack_batch(grad_pred), stack_batch(grad_err));
      if (config.grad_clip > 0) {
        double norm2 = 0;
        for (Param* p : model.params()) norm2 += p->grad.squaredNorm();
        const double norm = std::sqrt(norm2);
        if (norm > config.grad_clip) {
          const double scale = config.grad_clip / norm;
          for (Param* p : model.params()) p->grad *= scale;
        }
      }
      opt.step(model.params(), lr, config.weight_decay);
      ++step;
    }
    if (config.eval_interval > 0 && (epoch + 1) % config.eval_interval == 0 &&
        epoch + 1 < config.epochs) {
      const std::string path = config.checkpoint_dir + "/epoch_" +
                               std::to_string(epoch + 1) + ".ckpt";
      save_checkpoint(model, topology_version, path);
      last_good = path;
    }
  }

  result.checkpoint_path = config.checkpoint_dir + "/final.ckpt";
  save_checkpoint(model, topology_version, result.checkpoint_path);
  result.steps = step;
  return result;
}

Predictor make_model_predictor(Model& model, const SkeletonTopology& topo) {
  return [&model, &topo](const std::vector<Pose2d>& norm_2d) {
    const int batch = static_cast<int>(norm_2d.size());
    Eigen::MatrixXd input(static_cast<Eigen::Index>(batch) * topo.num_joints, 3);
    for (int b = 0; b < batch; ++b) {
      input.block(static_cast<Eigen::Index>(b) * topo.num_joints, 0,
                  topo.num_joints, 2) = norm_2d[b];
      input.block(static_cast<Eigen::Index>(b) * topo.num_joints, 2,
                  topo.num_joints, 1) = compute_distances(norm_2d[b], topo);
    }
    ModelOutput out = model.forward(input, batch, /*train=*/false);
    return unstack_batch(out.joints_3d, topo.num_joints);
  };
}

PoseBatch predict_with_tta(const Predictor& predictor,
                           const std::vector<Pose2d>& norm_2d,
                           const SkeletonTopology& topo, bool tta) {
  PoseBatch direct = predictor(norm_2d);
  if (!tta) return direct;
  std::vector<Pose2d> flipped;
  flipped.reserve(norm_2d.size());
  for (const auto& p : norm_2d) flipped.push_back(flip_2d(p, topo));
  PoseBatch mirrored = predictor(flipped);
  PoseBatch out(direct.size());
  for (size_t b = 0; b < direct.size(); ++b)
    out[b] = 0.5 * (direct[b] + flip_3d(mirrored[b], topo));
  return out;
}

MetricReport evaluate_with_tta(const Predictor& predictor, const Dataset& ds,
                               const SkeletonTopology& topo, bool tta,
                               int batch_size) {
  if (ds.size() == 0) throw ValidationError("evaluate: empty dataset");
  PoseBatch all_pred, all_gt;
  for (int start = 0; start < ds.size(); start += batch_size) {
    const int end = std::min(ds.size(), start + batch_size);
    std::vector<Pose2d> norm;
    for (int i = start; i < end; ++i) {
      const auto& s = ds.samples[i];
      if (!s.joints_3d_gt)
        throw ValidationError("evaluate: sample '" + s.frame_id +
                              "' has no ground truth");
      norm.push_back(normalize_2d(s.joints_2d, ds.image_w, ds.image_h));
      all_gt.push_back(*s.joints_3d_gt);
    }
    PoseBatch pred = predict_with_tta(predictor, norm, topo, tta);
    all_pred.insert(all_pred.end(), pred.begin(), pred.end());
  }
  return evaluate(all_pred, all_gt, topo);
}

}  // namespace wblift
