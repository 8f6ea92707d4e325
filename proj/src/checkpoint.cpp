#include "wblift/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace wblift {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'W', 'B', 'L', 'C', 'K', 'P', 'T', '1'};

json config_to_json(const ModelConfig& c) {
  return {{"feature_dim", c.feature_dim},
          {"encoder_layers", c.encoder_layers},
          {"attention_heads", c.attention_heads},
          {"dropout", c.dropout},
          {"decoder_blocks_per_part", c.decoder_blocks_per_part},
          {"semgcn_last_layer_only", c.semgcn_last_layer_only},
          {"output_scale", c.output_scale}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.feature_dim = j.at("feature_dim");
  c.encoder_layers = j.at("encoder_layers");
  c.attention_heads = j.at("attention_heads");
  c.dropout = j.at("dropout");
  c.decoder_blocks_per_part = j.at("decoder_blocks_per_part");
  c.semgcn_last_layer_only = j.at("semgcn_last_layer_only");
  c.output_scale = j.at("output_scale");
  return c;
}

json read_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw ValidationError("checkpoint: '" + path + "' is not a checkpoint file");
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ValidationError("checkpoint: truncated header in '" + path + "'");
  return json::parse(header);
}

}  // namespace

void save_checkpoint(Model& model, const std::string& topology_version,
                     const std::string& path) {
  json header;
  header["format_version"] = "wblift-checkpoint/v1";
  header["config"] = config_to_json(model.config());
  header["topology_version"] = topology_version;
  json tensors = json::array();
  for (Param* p : model.params())
    tensors.push_back({{"name", p->name},
                       {"rows", p->value.rows()},
                       {"cols", p->value.cols()}});
  header["tensors"] = std::move(tensors);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("checkpoint: cannot write '" + path + "'");
  const std::string h = header.dump();
  const std::uint64_t header_len = h.size();
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (Param* p : model.params())
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  if (!out) throw ValidationError("checkpoint: write failed for '" + path + "'");
}

void load_checkpoint(Model& model, const std::string& topology_version,
                     const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("checkpoint: cannot open '" + path + "'");
  json header = read_header(in, path);

  if (header.at("topology_version").get<std::string>() != topology_version)
    throw ValidationError("checkpoint: topology version mismatch ('" +
                          header["topology_version"].get<std::string>() +
                          "' vs '" + topology_version + "')");
  if (config_from_json(header.at("config")) != model.config())
    throw ValidationError("checkpoint: model config mismatch in '" + path + "'");

  const auto& tensors = header.at("tensors");
  ParamRefs params = model.params();
  if (tensors.size() != params.size())
    throw ValidationError("checkpoint: tensor count mismatch in '" + path + "'");
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != params[i]->name ||
        t.at("rows").get<Eigen::Index>() != params[i]->value.rows() ||
        t.at("cols").get<Eigen::Index>() != params[i]->value.cols())
      throw ValidationError("checkpoint: tensor '" + params[i]->name +
                            "' does not match '" +
                            t.at("name").get<std::string>() + "'");
    in.read(reinterpret_cast<char*>(params[i]->value.data()),
            static_cast<std::streamsize>(params[i]->value.size() *
                                         sizeof(double)));
  }
  if (!in) throw ValidationError("checkpoint: truncated tensor data in '" + path + "'");
}

ModelConfig peek_checkpoint_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("checkpoint: cannot open '" + path + "'");
  return config_from_json(read_header(in, path).at("config"));
}

}  // namespace wblift
