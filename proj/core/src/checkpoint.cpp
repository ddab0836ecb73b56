#include "hvf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hvf/errors.hpp"
#include "json.hpp"

namespace hvf {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'H', 'V', 'F', '1'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes = 8) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p, int bytes = 8) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

json config_to_json(const ModelConfig& c) {
  return json{{"n_past", c.n_past},   {"n_future", c.n_future}, {"past_features", c.past_features},
              {"future_features", c.future_features},
              {"zones", c.zones},     {"units", c.units},       {"heads", c.heads},
              {"d_model", c.d_model}, {"dropout", c.dropout},   {"quantiles", c.quantiles},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.n_past = j.at("n_past").get<std::size_t>();
  c.n_future = j.at("n_future").get<std::size_t>();
  c.past_features = j.at("past_features").get<std::size_t>();
  c.future_features = j.at("future_features").get<std::size_t>();
  c.zones = j.at("zones").get<std::size_t>();
  c.units = j.at("units").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.quantiles = j.at("quantiles").get<std::vector<double>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

Checkpoint make_checkpoint(const Model& model, const ScalerSpec& scaler, const WindowOptions& window,
                           const SplitFractions& fractions, std::uint64_t seed,
                           std::map<std::string, std::string> metadata) {
  Checkpoint c;
  c.config = model.config();
  for (const auto& p : model.params()) c.tensors.emplace_back(p.name, p.value);
  c.scaler = scaler;
  c.window = window;
  c.fractions = fractions;
  c.seed = seed;
  c.metadata = std::move(metadata);
  return c;
}

Model restore_model(const Checkpoint& ckpt) {
  Model model(ckpt.config);
  ParameterStore& store = model.params();
  if (ckpt.tensors.size() != store.size()) {
    throw ParseError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                     std::to_string(store.size()));
  }
  for (const auto& [name, value] : ckpt.tensors) {
    const Parameter* p = store.find(name);
    if (!p) throw ParseError("checkpoint tensor '" + name + "' does not belong to the model");
    if (p->value.shape() != value.shape()) {
      throw ParseError("checkpoint tensor '" + name + "' has shape " + shape_string(value.shape()) + ", expected " +
                       shape_string(p->value.shape()));
    }
    store[store.id_of(name)].value = value;
  }
  return model;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  json header;
  header["format"] = "hvf-checkpoint";
  header["config"] = config_to_json(ckpt.config);
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    tensors.push_back(json{{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size() * sizeof(double);
  }
  header["tensors"] = tensors;
  header["payload_bytes"] = offset;
  json scaler = json::array();
  for (const auto& r : ckpt.scaler.features()) scaler.push_back(json{{"name", r.name}, {"min", r.min}, {"max", r.max}});
  header["scaler"] = scaler;
  header["window"] = json{{"n_past", ckpt.window.n_past},
                          {"n_future", ckpt.window.n_future},
                          {"stride", ckpt.window.stride},
                          {"noise_sd", ckpt.window.noise_sd},
                          {"seed", ckpt.window.seed}};
  header["fractions"] = json{{"train", ckpt.fractions.train},
                             {"validation", ckpt.fractions.validation},
                             {"test", ckpt.fractions.test}};
  header["seed"] = ckpt.seed;
  header["metadata"] = ckpt.metadata;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u64(out, kCheckpointVersion, 4);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& entry : ckpt.tensors) {
    for (double v : entry.second.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  constexpr std::size_t prefix = 4 + 4 + 8;
  if (bytes.size() < prefix) throw ParseError("checkpoint truncated: missing preamble");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError("not a checkpoint: bad magic bytes");
  const auto version = static_cast<std::uint32_t>(get_u64(bytes.data() + 4, 4));
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                     std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (header_len > bytes.size() - prefix) throw ParseError("checkpoint truncated: header incomplete");
  const std::string text(bytes.begin() + prefix, bytes.begin() + static_cast<std::ptrdiff_t>(prefix + header_len));

  Checkpoint c;
  try {
    const json h = json::parse(text);
    c.config = config_from_json(h.at("config"));
    const std::uint64_t payload = h.at("payload_bytes").get<std::uint64_t>();
    const std::size_t base = prefix + header_len;
    if (bytes.size() - base < payload) throw ParseError("checkpoint truncated: payload incomplete");
    if (bytes.size() - base > payload) throw ParseError("checkpoint has trailing bytes after the payload");
    for (const auto& t : h.at("tensors")) {
      const Shape shape = t.at("shape").get<Shape>();
      const std::uint64_t off = t.at("offset").get<std::uint64_t>();
      const std::size_t n = shape_size(shape);
      if (off + n * sizeof(double) > payload) throw ParseError("checkpoint tensor extends past the payload");
      std::vector<double> data(n);
      const std::uint8_t* p = bytes.data() + base + off;
      for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(get_u64(p + 8 * i));
      c.tensors.emplace_back(t.at("name").get<std::string>(), Tensor(shape, std::move(data)));
    }
    std::vector<FeatureRange> ranges;
    for (const auto& r : h.at("scaler")) {
      ranges.push_back({r.at("name").get<std::string>(), r.at("min").get<double>(), r.at("max").get<double>()});
    }
    c.scaler = ScalerSpec(std::move(ranges));
    const json& w = h.at("window");
    c.window.n_past = w.at("n_past").get<std::size_t>();
    c.window.n_future = w.at("n_future").get<std::size_t>();
    c.window.stride = w.at("stride").get<std::size_t>();
    c.window.noise_sd = w.at("noise_sd").get<std::array<double, 5>>();
    c.window.seed = w.at("seed").get<std::uint64_t>();
    const json& f = h.at("fractions");
    c.fractions = {f.at("train").get<double>(), f.at("validation").get<double>(), f.at("test").get<double>()};
    c.seed = h.at("seed").get<std::uint64_t>();
    c.metadata = h.at("metadata").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("invalid checkpoint content: ") + e.what());
  } catch (const DimensionError& e) {
    throw ParseError(std::string("invalid checkpoint tensor: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace hvf
