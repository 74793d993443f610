#include "cmim/checkpoint.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

namespace cmim {

namespace {

constexpr std::array<char, 4> kMagic{'C', 'M', 'M', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint64_t get_le(const unsigned char* p, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

nlohmann::json meta_to_json(const CheckpointMeta& m, const ModelBundle& model) {
  nlohmann::json j;
  j["variant"] = std::string(variant_name(m.variant));
  j["input_dim"] = m.dims.input_dim;
  j["latent_dim"] = m.dims.latent_dim;
  j["hidden"] = m.dims.hidden;
  j["tau"] = m.tau;
  j["step"] = m.step;
  if (std::isfinite(m.val_loss)) {
    j["val_loss"] = m.val_loss;
  } else {
    j["val_loss"] = nullptr;
  }
  j["seed"] = m.seed;
  j["batch_size"] = m.batch_size;
  j["dataset"] = m.dataset;
  j["run_name"] = m.run_name;
  j["encoder_params"] = model.encoder.num_parameters();
  j["decoder_params"] = model.decoder ? model.decoder->num_parameters() : 0;
  return j;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& model,
                     const CheckpointMeta& meta) {
  model.validate();
  const std::string doc = meta_to_json(meta, model).dump();
  std::string bytes(kMagic.begin(), kMagic.end());
  put_u32(bytes, static_cast<std::uint32_t>(doc.size()));
  bytes += doc;
  for (double p : model.encoder.parameters()) put_f64(bytes, p);
  if (model.decoder) {
    for (double p : model.decoder->parameters()) put_f64(bytes, p);
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw CheckpointError("not a CMM1 checkpoint: " + path.string());
  }
  const auto doc_len = static_cast<std::size_t>(get_le(bytes.data() + 4, 4));
  if (bytes.size() < 8 + doc_len) throw CheckpointError("truncated checkpoint metadata");

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin() + 8,
                              bytes.begin() + 8 + static_cast<std::ptrdiff_t>(doc_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint metadata: ") + e.what());
  }

  Checkpoint ck;
  try {
    auto& m = ck.meta;
    m.variant = parse_variant(j.at("variant").get<std::string>());
    m.dims.input_dim = j.at("input_dim").get<int>();
    m.dims.latent_dim = j.at("latent_dim").get<int>();
    m.dims.hidden = j.at("hidden").get<std::vector<int>>();
    m.tau = j.at("tau").get<double>();
    m.step = j.at("step").get<long>();
    m.val_loss = j.at("val_loss").is_null() ? std::numeric_limits<double>::infinity()
                                            : j.at("val_loss").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.batch_size = j.value("batch_size", 0);
    m.dataset = j.value("dataset", std::string());
    m.run_name = j.value("run_name", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("incomplete checkpoint metadata: ") + e.what());
  }

  auto& model = ck.model;
  model.variant = ck.meta.variant;
  model.sim = SimilarityConfig(ck.meta.tau);
  model.dims = ck.meta.dims;
  model.encoder = DenseNet::mlp(model.dims.input_dim, model.dims.hidden, 2 * model.dims.latent_dim);
  if (has_decoder(model.variant)) {
    model.decoder = DenseNet::mlp(model.dims.latent_dim, model.dims.hidden, model.dims.input_dim);
  }

  const Eigen::Index n_enc = model.encoder.num_parameters();
  const Eigen::Index n_dec = model.decoder ? model.decoder->num_parameters() : 0;
  const std::size_t expected = 8 + doc_len + 8 * static_cast<std::size_t>(n_enc + n_dec);
  if (bytes.size() != expected) {
    throw CheckpointError("checkpoint payload size " + std::to_string(bytes.size()) +
                          " does not match metadata (expected " + std::to_string(expected) + ")");
  }
  const unsigned char* p = bytes.data() + 8 + doc_len;
  auto read_into = [&p](Vector& dst) {
    for (Eigen::Index i = 0; i < dst.size(); ++i, p += 8) {
      dst[i] = std::bit_cast<double>(get_le(p, 8));
    }
  };
  read_into(model.encoder.parameters());
  if (model.decoder) read_into(model.decoder->parameters());
  model.validate();
  return ck;
}

}  // namespace cmim
