#include "lexisafe/checkpoint.hpp"

#include <json.hpp>

#include "lexisafe/binio.hpp"
#include "lexisafe/errors.hpp"

namespace lexisafe {

using nlohmann::json;

const NamedNetwork& Checkpoint::network(const std::string& name) const {
  for (const auto& n : networks) {
    if (n.name == name) return n;
  }
  throw DataError(DataErrorKind::bad_header, "checkpoint has no network named '" + name + "'");
}

double Checkpoint::scalar(const std::string& name) const {
  for (const auto& [key, value] : scalars) {
    if (key == name) return value;
  }
  throw DataError(DataErrorKind::bad_header, "checkpoint has no scalar named '" + name + "'");
}

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
  json nets = json::array();
  binio::ByteWriter w;
  for (const auto& n : ckpt.networks) {
    if (n.params.size() != n.spec.param_count()) {
      throw ConfigError("checkpoint network '" + n.name + "' has wrong parameter count");
    }
    nets.push_back({{"name", n.name},
                    {"input_dim", n.spec.input_dim},
                    {"hidden_dims", n.spec.hidden_dims},
                    {"output_dim", n.spec.output_dim},
                    {"activation", to_string(n.spec.activation)},
                    {"n_params", n.params.size()}});
    w.put_array<double>(n.params.span());
  }
  // Scalars are kept as raw doubles in the payload so they round-trip exactly.
  json scalar_names = json::array();
  for (const auto& [key, value] : ckpt.scalars) {
    scalar_names.push_back(key);
    w.put_bytes(&value, sizeof value);
  }
  const json header = {{"kind", ckpt.kind}, {"networks", nets}, {"scalars", scalar_names}};
  return binio::encode_container(kCheckpointMagic, kCheckpointVersion, header.dump(), w.bytes());
}

namespace {

struct ParsedHeader {
  std::string kind;
  std::vector<NamedNetwork> networks;
  std::vector<std::string> scalar_names;
};

ParsedHeader parse_header(const std::string& text) {
  try {
    const json j = json::parse(text);
    ParsedHeader h;
    h.kind = j.at("kind").get<std::string>();
    for (const auto& n : j.at("networks")) {
      NamedNetwork net;
      net.name = n.at("name").get<std::string>();
      net.spec.input_dim = n.at("input_dim").get<std::size_t>();
      net.spec.hidden_dims = n.at("hidden_dims").get<std::vector<std::size_t>>();
      net.spec.output_dim = n.at("output_dim").get<std::size_t>();
      net.spec.activation = activation_from_string(n.at("activation").get<std::string>());
      if (n.at("n_params").get<std::size_t>() != net.spec.param_count()) {
        throw DataError(DataErrorKind::bad_header, "network '" + net.name + "' parameter count disagrees with shape");
      }
      h.networks.push_back(std::move(net));
    }
    h.scalar_names = j.at("scalars").get<std::vector<std::string>>();
    return h;
  } catch (const json::exception& e) {
    throw DataError(DataErrorKind::bad_header, e.what());
  } catch (const ConfigError& e) {
    throw DataError(DataErrorKind::bad_header, e.what());
  }
}

std::size_t payload_bytes(const ParsedHeader& h) {
  std::size_t n = h.scalar_names.size();
  for (const auto& net : h.networks) n += net.spec.param_count();
  return n * sizeof(double);
}

}  // namespace

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
  const auto container = binio::decode_container(bytes, kCheckpointMagic, kCheckpointVersion,
                                                 [](const std::string& text) { return payload_bytes(parse_header(text)); });
  ParsedHeader h = parse_header(container.header_json);
  binio::ByteReader r(container.payload);
  Checkpoint ckpt;
  ckpt.kind = h.kind;
  for (auto& net : h.networks) {
    {
      const auto raw = r.get_array<double>(net.spec.param_count());
      net.params.values.assign(raw.begin(), raw.end());
    }
    ckpt.networks.push_back(std::move(net));
  }
  for (const auto& name : h.scalar_names) ckpt.scalars.emplace_back(name, r.get_array<double>(1)[0]);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  binio::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(binio::read_file(path)); }

}  // namespace lexisafe
