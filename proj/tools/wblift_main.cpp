// wblift command-line entry point.
//
// Exit codes: 0 success, 2 usage error, 3 validation error, 4 runtime error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "wblift/checkpoint.hpp"
#include "wblift/data.hpp"
#include "wblift/metrics.hpp"
#include "wblift/model.hpp"
#include "wblift/trainer.hpp"

namespace {

using namespace wblift;
namespace fs = std::filesystem;

SkeletonTopology load_topology(const std::string& path) {
  if (path.empty()) return SkeletonTopology::shipped();
  return SkeletonTopology::load(path);
}

CameraSpec load_camera(const std::string& path) {
  CameraSpec cam;
  if (path.empty()) return cam;
  std::ifstream in(path);
  if (!in) throw ValidationError("camera: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("camera: malformed JSON in '" + path + "': " +
                          e.what());
  }
  auto get = [&](const char* key, double& field) {
    if (j.contains(key)) field = j.at(key).get<double>();
  };
  get("fx", cam.fx);
  get("fy", cam.fy);
  get("cx", cam.cx);
  get("cy", cam.cy);
  get("image_w", cam.image_w);
  get("image_h", cam.image_h);
  return cam;
}

int cmd_synth(int n, uint64_t seed, const std::string& out,
              const std::string& topology, const std::string& camera_path) {
  SkeletonTopology topo = load_topology(topology);
  Dataset ds = synthesize(n, seed, load_camera(camera_path), topo);
  save_dataset(ds, out);
  std::cout << "wrote " << ds.size() << " samples to " << out << "\n";
  return 0;
}

int cmd_convert(const std::string& in, const std::string& out,
                const std::string& topology) {
  SkeletonTopology topo = load_topology(topology);
  if (fs::is_directory(in)) {
    fs::create_directories(out);
    int files = 0;
    std::vector<fs::path> inputs;
    for (const auto& e : fs::directory_iterator(in))
      if (e.path().extension() == ".json") inputs.push_back(e.path());
    std::sort(inputs.begin(), inputs.end());
    for (const auto& p : inputs) {
      convert_h3wb(p.string(), (fs::path(out) / p.filename()).string(), topo);
      ++files;
    }
    if (files == 0)
      throw ValidationError("convert: no .json files in '" + in + "'");
    std::cout << "converted " << files << " file(s) into " << out << "\n";
    return 0;
  }
  convert_h3wb(in, out, topo);
  std::cout << "converted " << in << " -> " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config, const std::string& data,
              const std::string& out, bool seed_set, uint64_t seed,
              const std::string& topology) {
  SkeletonTopology topo = load_topology(topology);
  TrainConfig cfg = config.empty() ? TrainConfig{}
                                   : TrainConfig::from_json_file(config);
  if (!out.empty()) cfg.checkpoint_dir = out;
  if (seed_set) cfg.seed = seed;
  Dataset ds = load_h3wb(data, {});
  TrainResult r = train(cfg, ds, topo, topo.version);
  std::cout << "trained " << r.steps << " steps\n"
            << "final total loss " << r.final_report.total << " (first "
            << r.first_report.total << ")\n"
            << "checkpoint: " << r.checkpoint_path << "\n"
            << "log: " << r.log_path << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, bool tta,
             const std::string& out, const std::string& topology) {
  SkeletonTopology topo = load_topology(topology);
  ModelConfig cfg = peek_checkpoint_config(ckpt);
  Model model(cfg, topo);
  model.init_params(0);
  load_checkpoint(model, topo.version, ckpt);
  Dataset ds = load_h3wb(data, {});
  Predictor predictor = make_model_predictor(model, topo);
  MetricReport report = evaluate_with_tta(predictor, ds, topo, tta);
  std::cout << report.to_table();
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw ValidationError("eval: cannot write '" + out + "'");
    f << report.to_json() << "\n";
    std::cout << "report written to " << out << "\n";
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& files) {
  std::cout << "MPJPE (mm)";
  std::cout << std::string(22, ' ')
            << "All     Body    Face/Aligned    Hands/Aligned\n";
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw ValidationError("report: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    MetricReport r = MetricReport::from_json(ss.str());
    std::string label = fs::path(path).stem().string();
    if (label.size() > 30) label = label.substr(0, 30);
    std::ostringstream row;
    row.setf(std::ios::fixed);
    row.precision(2);
    row << label << std::string(32 - label.size(), ' ') << r.mpjpe_all
        << "   " << r.mpjpe_body << "   " << r.mpjpe_face << "/"
        << r.mpjpe_face_aligned << "     " << r.mpjpe_hands << "/"
        << r.mpjpe_hands_aligned << "\n";
    std::cout << row.str();
  }
  return 0;
}

// ------------------------------------------------------------- gradcheck

struct GradCheck {
  bool all_pass = true;

  void record(const std::string& name, double max_err, double tol) {
    const bool pass = max_err < tol;
    all_pass = all_pass && pass;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << name << "  (max rel err "
              << max_err << ", tol " << tol << ")\n";
  }
};

double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

template <typename F>
double central_diff(F&& f, double& x, double h) {
  const double orig = x;
  x = orig + h;
  const double fp = f();
  x = orig - h;
  const double fm = f();
  x = orig;
  return (fp - fm) / (2.0 * h);
}

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

// Worst relative error over sampled parameter entries and input entries of
// a sublayer, comparing backward() against central differences of a random
// linear probe of the output.
template <typename Fwd, typename Bwd>
double check_sublayer(ParamRefs params, Eigen::MatrixXd& x, Fwd&& fwd,
                      Bwd&& bwd, Rng& rng, int probes_per_param = 3,
                      double h = 1e-5) {
  Eigen::MatrixXd out = fwd();
  Eigen::MatrixXd w = random_matrix(static_cast<int>(out.rows()),
                                    static_cast<int>(out.cols()), rng, 1.0);
  for (Param* p : params) p->grad.setZero();
  Eigen::MatrixXd dx = bwd(w);
  auto loss = [&] { return (fwd().array() * w.array()).sum(); };

  double worst = 0;
  for (Param* p : params) {
    for (int k = 0; k < probes_per_param; ++k) {
      int i = static_cast<int>(rng() % p->value.rows());
      int j = static_cast<int>(rng() % p->value.cols());
      double fd = central_diff(loss, p->value(i, j), h);
      if (std::abs(fd - p->grad(i, j)) < 1e-8) continue;
      worst = std::max(worst, rel_err(fd, p->grad(i, j)));
    }
  }
  for (int k = 0; k < 2 * probes_per_param; ++k) {
    int i = static_cast<int>(rng() % x.rows());
    int j = static_cast<int>(rng() % x.cols());
    double fd = central_diff(loss, x(i, j), h);
    if (std::abs(fd - dx(i, j)) < 1e-8) continue;
    worst = std::max(worst, rel_err(fd, dx(i, j)));
  }
  return worst;
}

int cmd_gradcheck(uint64_t seed, const std::string& topology) {
  const SkeletonTopology topo = load_topology(topology);
  const AdjacencyMask mask = build_adjacency(topo);
  const ModelConfig cfg;  // default architecture
  const int d = cfg.feature_dim;
  Rng rng(seed ^ 0x5bf03635ULL);
  GradCheck gc;

  // ---- loss terms ----
  auto rand_batch = [&](int b, double scale) {
    PoseBatch out(b);
    for (auto& p : out) p = random_matrix(topo.num_joints, 3, rng, scale);
    return out;
  };
  PoseBatch gt = rand_batch(2, 100), pred = rand_batch(2, 100);
  PoseBatch ep = rand_batch(2, 10);

  {
    PoseBatch grad;
    l3d_loss(pred, gt, &grad);
    double worst = 0;
    for (int k = 0; k < 12; ++k) {
      int b = k % 2, i = static_cast<int>(rng() % 133), c = k % 3;
      double fd = central_diff([&] { return l3d_loss(pred, gt); },
                               pred[b](i, c), 1e-2);
      worst = std::max(worst, rel_err(fd, grad[b](i, c)));
    }
    gc.record("loss/l3d", worst, 1e-4);
  }
  {
    PoseBatch grad;
    lerror_loss(ep, pred, gt, &grad);
    double worst = 0;
    for (int k = 0; k < 12; ++k) {
      int b = k % 2, i = static_cast<int>(rng() % 133), c = k % 3;
      double fd = central_diff([&] { return lerror_loss(ep, pred, gt); },
                               ep[b](i, c), 1e-2);
      worst = std::max(worst, rel_err(fd, grad[b](i, c)));
    }
    gc.record("loss/lerror", worst, 1e-4);
  }
  {
    PoseBatch grad;
    lnormal_loss(pred, gt, topo, &grad);
    double worst = 0;
    for (const auto& tri : topo.limb_triangles)
      for (int v : tri)
        for (int c = 0; c < 3; ++c) {
          double fd = central_diff([&] { return lnormal_loss(pred, gt, topo); },
                                   pred[0](v, c), 1e-4);
          if (std::abs(fd - grad[0](v, c)) < 1e-9) continue;
          worst = std::max(worst, rel_err(fd, grad[0](v, c)));
        }
    gc.record("loss/lnormal", worst, 1e-4);
  }
  {
    PoseBatch grad;
    lbone_loss(pred, gt, topo, &grad);
    Eigen::MatrixXd diff =
        bone_vectors(gt[0], topo) - bone_vectors(pred[0], topo);
    double worst = 0;
    for (int k = 0; k < 24; ++k) {
      int i = static_cast<int>(rng() % 133), c = k % 3;
      // Stay away from the L1 kinks of every bone this coordinate touches.
      bool margin = topo.parent[i] == i || std::abs(diff(i, c)) > 1e-3;
      for (int j = 0; j < 133 && margin; ++j)
        if (topo.parent[j] == i && j != i && std::abs(diff(j, c)) < 1e-3)
          margin = false;
      if (!margin) continue;
      double fd = central_diff([&] { return lbone_loss(pred, gt, topo); },
                               pred[0](i, c), 1e-6);
      if (std::abs(fd - grad[0](i, c)) < 1e-7) continue;
      worst = std::max(worst, rel_err(fd, grad[0](i, c)));
    }
    gc.record("loss/lbone", worst, 1e-4);
  }

  // ---- sublayers at the default width ----
  auto wake = [&](ParamRefs ps) {
    for (Param* p : ps)
      if (p->name.find(".o.w") != std::string::npos)
        p->value = random_matrix(d, d, rng, 1.0 / std::sqrt(double(d)));
  };

  {
    JointEmbedding emb("gc.emb", topo.num_joints, d);
    emb.init(rng);
    Eigen::MatrixXd x = random_matrix(topo.num_joints, 3, rng, 1.0);
    gc.record("model/embedding",
              check_sublayer(
                  emb.params(), x, [&] { return emb.forward(x); },
                  [&](const Eigen::MatrixXd& w) { return emb.backward(w); },
                  rng),
              1e-4);
  }
  {
    SelfAttentionBlock blk("gc.attn", d, cfg.attention_heads, 0.0);
    blk.init(rng);
    wake(blk.params());
    Eigen::MatrixXd x = random_matrix(topo.num_joints, d, rng, 1.0);
    gc.record(
        "model/self-attention",
        check_sublayer(
            blk.params(), x,
            [&] { return blk.forward(x, topo.num_joints, false, nullptr); },
            [&](const Eigen::MatrixXd& w) { return blk.backward(w); }, rng),
        1e-4);
  }
  {
    SemGcn gcn("gc.gcn", topo.num_joints, d, d, mask, true);
    gcn.init(rng);
    Eigen::MatrixXd x = random_matrix(topo.num_joints, d, rng, 1.0);
    gc.record("model/semgcn",
              check_sublayer(
                  gcn.params(), x, [&] { return gcn.forward(x); },
                  [&](const Eigen::MatrixXd& w) { return gcn.backward(w); },
                  rng),
              1e-4);
  }
  {
    SemGanLayer layer("gc.gan", cfg, mask, true);
    Rng lr(seed + 5);
    layer.init(lr);
    wake(layer.params());
    Eigen::MatrixXd x = random_matrix(topo.num_joints, d, rng, 1.0);
    gc.record(
        "model/semgan-layer",
        check_sublayer(
            layer.params(), x,
            [&] { return layer.forward(x, topo.num_joints, false, nullptr); },
            [&](const Eigen::MatrixXd& w) { return layer.backward(w); }, rng),
        1e-4);
  }
  {
    Decoder dec(cfg, topo, mask);
    Rng dr(seed + 7);
    dec.init(dr);
    wake(dec.params());
    Eigen::MatrixXd x = random_matrix(topo.num_joints, d, rng, 1.0);
    // Keep the probe loss O(1) despite the mm output scale, so central
    // differences stay above round-off.
    const double ws = 1.0 / cfg.output_scale;
    Eigen::MatrixXd wj = random_matrix(topo.num_joints, 3, rng, ws);
    Eigen::MatrixXd we = random_matrix(topo.num_joints, 3, rng, ws);
    auto loss = [&] {
      ModelOutput out = dec.forward(x, 1, false, nullptr);
      return (out.joints_3d.array() * wj.array()).sum() +
             (out.error_pred.array() * we.array()).sum();
    };
    loss();
    for (Param* p : dec.params()) p->grad.setZero();
    Eigen::MatrixXd dx = dec.backward(wj, we);

    double worst_dec = 0, worst_err = 0;
    for (Param* p : dec.params()) {
      const bool is_error_head = p->name.find("error") != std::string::npos;
      const int probes = is_error_head ? 6 : 2;
      for (int k = 0; k < probes; ++k) {
        int i = static_cast<int>(rng() % p->value.rows());
        int j = static_cast<int>(rng() % p->value.cols());
        double fd = central_diff(loss, p->value(i, j), 1e-5);
        if (std::abs(fd - p->grad(i, j)) < 1e-8) continue;
        double e = rel_err(fd, p->grad(i, j));
        (is_error_head ? worst_err : worst_dec) =
            std::max(is_error_head ? worst_err : worst_dec, e);
      }
    }
    for (int k = 0; k < 6; ++k) {
      int i = static_cast<int>(rng() % x.rows());
      int j = static_cast<int>(rng() % x.cols());
      double fd = central_diff(loss, x(i, j), 1e-5);
      if (std::abs(fd - dx(i, j)) < 1e-8) continue;
      worst_dec = std::max(worst_dec, rel_err(fd, dx(i, j)));
    }
    gc.record("model/decoder", worst_dec, 1e-4);
    gc.record("model/error-head", worst_err, 1e-4);
  }

  // ---- end to end ----
  {
    Model model(cfg, topo);
    model.init_params(seed);
    wake(model.params());
    Eigen::MatrixXd input = random_matrix(topo.num_joints, 3, rng, 1.0);
    const double ws = 1.0 / cfg.output_scale;
    Eigen::MatrixXd wj = random_matrix(topo.num_joints, 3, rng, ws);
    Eigen::MatrixXd we = random_matrix(topo.num_joints, 3, rng, ws);
    auto loss = [&] {
      ModelOutput out = model.forward(input, 1, false);
      return (out.joints_3d.array() * wj.array()).sum() +
             (out.error_pred.array() * we.array()).sum();
    };
    loss();
    model.zero_grad();
    Eigen::MatrixXd dinput = model.backward(wj, we);
    ParamRefs ps = model.params();
    double worst = 0;
    int checked = 0;
    for (int trial = 0; checked < 10 && trial < 100; ++trial) {
      Param* p = ps[rng() % ps.size()];
      int i = static_cast<int>(rng() % p->value.rows());
      int j = static_cast<int>(rng() % p->value.cols());
      double fd = central_diff(loss, p->value(i, j), 1e-5);
      if (std::abs(fd) < 1e-7 && std::abs(p->grad(i, j)) < 1e-7) continue;
      worst = std::max(worst, rel_err(fd, p->grad(i, j)));
      ++checked;
    }
    for (int k = 0; k < 5; ++k) {
      int i = static_cast<int>(rng() % input.rows());
      int j = static_cast<int>(rng() % 3);
      double fd = central_diff(loss, input(i, j), 1e-5);
      if (std::abs(fd - dinput(i, j)) < 1e-7) continue;
      worst = std::max(worst, rel_err(fd, dinput(i, j)));
    }
    gc.record("model/end-to-end", worst, 1e-3);
  }

  if (!gc.all_pass) {
    std::cerr << "gradcheck: at least one check failed\n";
    return 4;
  }
  std::cout << "gradcheck: all checks passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D->3D whole-body pose lifting toolkit"};
  app.require_subcommand(1);

  std::string topology;
  app.add_option("--topology", topology, "Topology asset override (JSON)")
      ->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  int synth_n = 64;
  uint64_t synth_seed = 0;
  std::string synth_out, synth_camera;
  synth->add_option("--n", synth_n, "Number of samples")->capture_default_str();
  synth->add_option("--seed", synth_seed, "RNG seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output dataset file")->required();
  synth->add_option("--camera", synth_camera, "Camera spec JSON file");

  // convert-h3wb
  auto* conv = app.add_subcommand("convert-h3wb",
                                  "Convert upstream H3WB files to the "
                                  "internal dataset format");
  std::string conv_in, conv_out;
  conv->add_option("--in", conv_in, "Upstream file or directory")->required();
  conv->add_option("--out", conv_out, "Output file or directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_config, tr_data, tr_out;
  uint64_t tr_seed = 0;
  tr->add_option("--config", tr_config, "Training config JSON");
  tr->add_option("--data", tr_data, "Training dataset file")->required();
  tr->add_option("--out", tr_out, "Checkpoint directory override");
  auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "Seed override");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_ckpt, ev_data, ev_out;
  bool ev_tta = false;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint file")->required();
  ev->add_option("--data", ev_data, "Evaluation dataset file")->required();
  ev->add_option("--out", ev_out, "Write the metric report JSON here");
  ev->add_flag("--tta", ev_tta, "Average with the horizontally flipped input");

  // gradcheck
  auto* gcsub = app.add_subcommand(
      "gradcheck", "Finite-difference checks over losses and sublayers");
  uint64_t gc_seed = 0;
  gcsub->add_option("--seed", gc_seed, "RNG seed")->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report",
                                 "Render a comparison table from metric "
                                 "report files");
  std::vector<std::string> rep_files;
  rep->add_option("files", rep_files, "Metric report JSON files")
      ->required()
      ->expected(-1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_n, synth_seed, synth_out, topology, synth_camera);
    if (conv->parsed()) return cmd_convert(conv_in, conv_out, topology);
    if (tr->parsed())
      return cmd_train(tr_config, tr_data, tr_out, tr_seed_opt->count() > 0,
                       tr_seed, topology);
    if (ev->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_tta, ev_out, topology);
    if (gcsub->parsed()) return cmd_gradcheck(gc_seed, topology);
    if (rep->parsed()) return cmd_report(rep_files);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
