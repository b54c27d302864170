#include "rmf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "rmf/error.hpp"

namespace rmf {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'R', 'M', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <class T>
  void put(const T& v) { out_.write(reinterpret_cast<const char*>(&v), sizeof(T)); }
  void put_bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void put_vec(const Vec& v) { put_bytes(v.data(), sizeof(double) * static_cast<std::size_t>(v.size())); }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(const std::vector<char>& buf, const std::string& path) : buf_(buf), path_(path) {}
  void get_bytes(void* p, std::size_t n) {
    if (n > buf_.size() - pos_) throw Error(ErrorCode::FormatError, path_ + ": truncated checkpoint");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <class T>
  T get() {
    T v;
    get_bytes(&v, sizeof(T));
    return v;
  }
  void get_vec(Vec& v) { get_bytes(v.data(), sizeof(double) * static_cast<std::size_t>(v.size())); }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  const std::vector<char>& buf_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

}  // namespace

nlohmann::json to_json(const NetConfig& c) {
  return {{"ambient_dim", c.ambient_dim},       {"hidden_dim", c.hidden_dim},
          {"num_layers", c.num_layers},         {"time_embed_dim", c.time_embed_dim},
          {"num_classes", c.num_classes},       {"activation", to_string(c.activation)},
          {"seed", c.seed},                     {"orientation", to_string(c.orientation)}};
}

NetConfig net_config_from_json(const nlohmann::json& j, NetConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "net: expected an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "ambient_dim") c.ambient_dim = value.get<int>();
      else if (key == "hidden_dim") c.hidden_dim = value.get<int>();
      else if (key == "num_layers") c.num_layers = value.get<int>();
      else if (key == "time_embed_dim") c.time_embed_dim = value.get<int>();
      else if (key == "num_classes") c.num_classes = value.get<int>();
      else if (key == "activation") c.activation = parse_activation(value.get<std::string>());
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "orientation") c.orientation = parse_orientation(value.get<std::string>());
      else throw Error(ErrorCode::ConfigError, "net: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConfigError, "net." + key + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigError) throw;
      throw Error(ErrorCode::ConfigError, "net." + key + ": " + e.what());
    }
  }
  return c;
}

void save_checkpoint(const std::string& path, const VelocityNet& net, const Rng::State& rng_state) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + tmp + " for writing");
    Writer w(out);
    const std::string header =
        nlohmann::json{{"manifold", net.manifold().name()}, {"net", to_json(net.config())}}.dump();
    w.put_bytes(kMagic, 4);
    w.put(kVersion);
    w.put(static_cast<std::uint32_t>(header.size()));
    w.put_bytes(header.data(), header.size());
    const AdamState& adam = net.optimizer_state();
    w.put(static_cast<std::uint64_t>(net.parameter_count()));
    w.put_vec(net.parameters());
    w.put_vec(adam.m);
    w.put_vec(adam.v);
    w.put(adam.step);
    w.put(rng_state[0]);
    w.put(rng_state[1]);
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp + " to " + path + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path, const std::optional<Manifold>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open checkpoint " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(buf, path);

  char magic[4];
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::FormatError, path + ": bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw Error(ErrorCode::FormatError, path + ": unsupported version " + std::to_string(version));
  }
  const auto len = r.get<std::uint32_t>();
  std::string header(len, '\0');
  r.get_bytes(header.data(), len);

  Manifold manifold = Manifold::euclidean(1);
  NetConfig cfg;
  try {
    const auto j = nlohmann::json::parse(header);
    manifold = Manifold::parse(j.at("manifold").get<std::string>());
    cfg = net_config_from_json(j.at("net"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, path + ": bad header: " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::FormatError, path + ": bad header: " + e.what());
  }
  if (expected && !(*expected == manifold)) {
    throw Error(ErrorCode::ConfigMismatch, path + " was trained on " + manifold.name() +
                                               ", expected " + expected->name());
  }

  Checkpoint ck{VelocityNet(manifold, cfg), {}};
  const auto count = r.get<std::uint64_t>();
  if (count != ck.net.parameter_count()) {
    throw Error(ErrorCode::ConfigMismatch, path + ": parameter count " + std::to_string(count) +
                                               " does not match its config");
  }
  AdamState& adam = ck.net.optimizer_state();
  r.get_vec(ck.net.parameters());
  r.get_vec(adam.m);
  r.get_vec(adam.v);
  adam.step = r.get<std::uint64_t>();
  ck.rng_state[0] = r.get<std::uint64_t>();
  ck.rng_state[1] = r.get<std::uint64_t>();
  if (!r.at_end()) throw Error(ErrorCode::FormatError, path + ": trailing bytes");
  return ck;
}

}  // namespace rmf
