#include "rmf/config.hpp"

#include <fstream>
#include <sstream>

#include "rmf/checkpoint.hpp"
#include "rmf/error.hpp"

namespace rmf {
namespace {

using nlohmann::json;

long line_of(std::string_view text, std::size_t offset) {
  long line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

// Best effort: the line of the first occurrence of "key" in the source.
long line_of_key(std::string_view text, const std::string& key) {
  if (text.empty()) return 0;
  const std::size_t pos = text.find("\"" + key + "\"");
  return pos == std::string_view::npos ? 0 : line_of(text, pos);
}

[[noreturn]] void config_error(std::string_view text, const std::string& key, const std::string& msg) {
  const long line = line_of_key(text, key);
  if (line > 0) throw LineError(ErrorCode::ConfigError, line, key + ": " + msg);
  throw Error(ErrorCode::ConfigError, key + ": " + msg);
}

// Visits each key of an object section, turning library errors into ConfigError.
template <class F>
void for_keys(const json& j, const std::string& section, std::string_view text, F&& f) {
  if (!j.is_object()) config_error(text, section, "expected an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (!f(key, value)) config_error(text, key, "unknown key in '" + section + "'");
    } catch (const json::exception& e) {
      config_error(text, key, e.what());
    } catch (const LineError&) {
      throw;
    } catch (const Error& e) {
      config_error(text, key, e.what());
    }
  }
}

DatasetSpec parse_dataset(const json& j, std::string_view text) {
  DatasetSpec d;
  for_keys(j, "dataset", text, [&](const std::string& k, const json& v) {
    if (k == "name") d.name = v.get<std::string>();
    else if (k == "generator") d.generator = parse_generator(v.get<std::string>());
    else if (k == "dim") d.dim = v.get<int>();
    else if (k == "n") d.n = v.get<int>();
    else if (k == "seed") d.seed = v.get<std::uint64_t>();
    else if (k == "split") {
      const auto s = v.get<std::vector<double>>();
      if (s.size() != 3) throw Error(ErrorCode::ConfigError, "split needs 3 fractions");
      d.split = {s[0], s[1], s[2]};
    } else if (k == "components") d.components = v.get<int>();
    else if (k == "centers") d.centers = v.get<std::vector<std::vector<double>>>();
    else if (k == "concentration") d.concentration = v.get<double>();
    else if (k == "noise") d.noise = v.get<double>();
    else if (k == "path") d.path = v.get<std::string>();
    else if (k == "layout") d.layout = parse_layout(v.get<std::string>());
    else if (k == "manifold") d.csv_manifold = v.get<std::string>();
    else return false;
    return true;
  });
  if (!j.contains("name")) d.name = to_string(d.generator);
  try {
    d.validate();
  } catch (const Error& e) {
    config_error(text, "dataset", e.what());
  }
  return d;
}

}  // namespace

std::string to_string(Objective o) {
  switch (o) {
    case Objective::RmfMt: return "rmf_mt";
    case Objective::RmfSum: return "rmf_sum";
    case Objective::RmfDirect: return "rmf_direct";
    case Objective::AlphaRmf: return "alpha_rmf";
    case Objective::Imf: return "imf";
    case Objective::Rfm: return "rfm";
    case Objective::Cfg: return "cfg";
  }
  return "unknown";
}

Objective parse_objective(std::string_view text) {
  for (Objective o : {Objective::RmfMt, Objective::RmfSum, Objective::RmfDirect, Objective::AlphaRmf,
                      Objective::Imf, Objective::Rfm, Objective::Cfg}) {
    if (text == to_string(o)) return o;
  }
  throw Error(ErrorCode::ConfigError, "unknown objective '" + std::string(text) + "'");
}

void apply_manifold_defaults(const Manifold& m, NetConfig& net, TrainConfig& train) {
  net.ambient_dim = m.ambient_dim();
  switch (m.kind()) {
    case ManifoldKind::Sphere:
      net.hidden_dim = 2048;
      net.num_layers = 10;
      train.batch_size = 4096;
      train.epochs = 700;
      train.p_eq = 0.75;
      break;
    case ManifoldKind::Torus:
      net.hidden_dim = 512;
      net.num_layers = 4;
      train.batch_size = 2048;
      train.epochs = 5000;
      train.p_eq = 0.75;
      break;
    case ManifoldKind::SO3:
      net.hidden_dim = 512;
      net.num_layers = 4;
      train.batch_size = 1024;
      train.epochs = 200;
      train.p_eq = 0.10;
      break;
    case ManifoldKind::Euclidean:
      net.hidden_dim = 512;
      net.num_layers = 4;
      train.batch_size = 1024;
      train.epochs = 200;
      train.p_eq = 0.75;
      break;
  }
  train.lr = 5e-4;
  train.weight_decay = 0.01;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
  dataset.validate();
  net.validate();
  if (net.ambient_dim != dataset.manifold().ambient_dim()) fail("net.ambient_dim does not match the dataset manifold");
  if (train.epochs < 1) fail("train.epochs must be >= 1");
  if (train.batch_size < 1) fail("train.batch_size must be >= 1");
  if (!(train.lr > 0.0)) fail("train.lr must be positive");
  if (!(train.weight_decay >= 0.0)) fail("train.weight_decay must be >= 0");
  if (!(train.beta1 >= 0.0 && train.beta1 < 1.0 && train.beta2 >= 0.0 && train.beta2 < 1.0)) {
    fail("train.betas must lie in [0, 1)");
  }
  if (!(train.eps > 0.0)) fail("train.eps must be positive");
  if (!(train.p_eq >= 0.0 && train.p_eq <= 1.0)) fail("train.p_eq must lie in [0, 1]");
  if (objective == Objective::AlphaRmf && !(train.alpha > 0.0 && train.alpha <= 1.0)) {
    fail("train.alpha must lie in (0, 1]");
  }
  if (objective == Objective::Cfg) {
    if (!(train.p_drop >= 0.0 && train.p_drop <= 1.0)) fail("train.p_drop must lie in [0, 1]");
    if (net.num_classes < 1) fail("objective cfg needs net.num_classes >= 1");
  }
  if (train.val_samples < 2) fail("train.val_samples must be >= 2");
  Schedule::parse(train.schedule);
  sample.validate();
  eval.mmd.validate();
  if (eval.seeds.empty()) fail("eval.seeds must be nonempty");
  if (eval.steps.empty()) fail("eval.steps must be nonempty");
  for (int k : eval.steps) {
    if (k < 1) fail("eval.steps entries must be >= 1");
  }
  if (eval.n_samples < 2) fail("eval.n_samples must be >= 2");
}

RunConfig run_config_from_json(const json& j, std::string_view text) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config root must be an object");
  RunConfig c;
  if (j.contains("dataset")) c.dataset = parse_dataset(j.at("dataset"), text);
  const Manifold m = c.dataset.manifold();
  apply_manifold_defaults(m, c.net, c.train);

  if (j.contains("objective")) {
    const json& o = j.at("objective");
    if (o.is_string()) {
      try {
        c.objective = parse_objective(o.get<std::string>());
      } catch (const Error& e) {
        config_error(text, "objective", e.what());
      }
    } else {
      for_keys(o, "objective", text, [&](const std::string& k, const json& v) {
        if (k == "name") c.objective = parse_objective(v.get<std::string>());
        else if (k == "alpha") c.train.alpha = v.get<double>();
        else if (k == "p_drop") c.train.p_drop = v.get<double>();
        else return false;
        return true;
      });
    }
  }
  if (c.objective == Objective::Cfg && c.dataset.generator != Generator::Csv) {
    c.net.num_classes = c.dataset.centers.empty() ? c.dataset.components
                                                  : static_cast<int>(c.dataset.centers.size());
  }
  if (j.contains("net")) {
    try {
      c.net = net_config_from_json(j.at("net"), c.net);
      c.net.validate();
    } catch (const Error& e) {
      config_error(text, "net", e.what());
    }
  }
  if (j.contains("train")) {
    for_keys(j.at("train"), "train", text, [&](const std::string& k, const json& v) {
      TrainConfig& t = c.train;
      if (k == "epochs") t.epochs = v.get<int>();
      else if (k == "batch_size") t.batch_size = v.get<int>();
      else if (k == "lr") t.lr = v.get<double>();
      else if (k == "weight_decay") t.weight_decay = v.get<double>();
      else if (k == "betas") {
        const auto b = v.get<std::vector<double>>();
        if (b.size() != 2) throw Error(ErrorCode::ConfigError, "betas needs 2 values");
        t.beta1 = b[0];
        t.beta2 = b[1];
      } else if (k == "eps") t.eps = v.get<double>();
      else if (k == "p_eq") t.p_eq = v.get<double>();
      else if (k == "seed") t.seed = v.get<std::uint64_t>();
      else if (k == "schedule") t.schedule = Schedule::parse(v.get<std::string>()).name();
      else if (k == "alpha") t.alpha = v.get<double>();
      else if (k == "p_drop") t.p_drop = v.get<double>();
      else if (k == "track_val") t.track_val = v.get<bool>();
      else if (k == "val_samples") t.val_samples = v.get<int>();
      else return false;
      return true;
    });
  }
  if (j.contains("sample")) {
    for_keys(j.at("sample"), "sample", text, [&](const std::string& k, const json& v) {
      if (k == "steps") c.sample.steps = v.get<int>();
      else if (k == "grid") c.sample.grid = v.get<std::vector<double>>();
      else if (k == "omega") c.sample.omega = v.get<double>();
      else if (k == "label") c.sample.label = v.get<int>();
      else return false;
      return true;
    });
  }
  if (j.contains("eval")) {
    for_keys(j.at("eval"), "eval", text, [&](const std::string& k, const json& v) {
      if (k == "lambda") c.eval.mmd.lambda = v.get<double>();
      else if (k == "max_points") c.eval.mmd.max_points = v.get<int>();
      else if (k == "seeds") c.eval.seeds = v.get<std::vector<std::uint64_t>>();
      else if (k == "steps") c.eval.steps = v.get<std::vector<int>>();
      else if (k == "n_samples") c.eval.n_samples = v.get<int>();
      else return false;
      return true;
    });
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "output_dir") {
      if (!value.is_string()) config_error(text, key, "expected a string");
      c.output_dir = value.get<std::string>();
    } else if (key != "dataset" && key != "objective" && key != "net" && key != "train" &&
               key != "sample" && key != "eval") {
      config_error(text, key, "unknown top-level key");
    }
  }
  try {
    c.validate();
  } catch (const LineError&) {
    throw;
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw LineError(ErrorCode::ConfigError, line_of(text, e.byte == 0 ? 0 : e.byte - 1),
                    path + ": " + e.what());
  }
  return run_config_from_json(j, text);
}

json to_json(const RunConfig& c) {
  const DatasetSpec& d = c.dataset;
  json dataset = {{"name", d.name},
                  {"generator", to_string(d.generator)},
                  {"dim", d.dim},
                  {"n", d.n},
                  {"seed", d.seed},
                  {"split", d.split},
                  {"components", d.components},
                  {"centers", d.centers},
                  {"concentration", d.concentration},
                  {"noise", d.noise}};
  if (d.generator == Generator::Csv) {
    dataset["path"] = d.path;
    dataset["layout"] = to_string(d.layout);
    dataset["manifold"] = d.csv_manifold;
  }
  const TrainConfig& t = c.train;
  json objective = {{"name", to_string(c.objective)}};
  if (c.objective == Objective::AlphaRmf) objective["alpha"] = t.alpha;
  if (c.objective == Objective::Cfg) objective["p_drop"] = t.p_drop;
  return {{"dataset", dataset},
          {"net", to_json(c.net)},
          {"objective", objective},
          {"train",
           {{"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"lr", t.lr},
            {"weight_decay", t.weight_decay},
            {"betas", {t.beta1, t.beta2}},
            {"eps", t.eps},
            {"p_eq", t.p_eq},
            {"seed", t.seed},
            {"schedule", t.schedule},
            {"alpha", t.alpha},
            {"p_drop", t.p_drop},
            {"track_val", t.track_val},
            {"val_samples", t.val_samples}}},
          {"sample",
           {{"steps", c.sample.steps}, {"grid", c.sample.grid}, {"omega", c.sample.omega}, {"label", c.sample.label}}},
          {"eval",
           {{"lambda", c.eval.mmd.lambda},
            {"max_points", c.eval.mmd.max_points},
            {"seeds", c.eval.seeds},
            {"steps", c.eval.steps},
            {"n_samples", c.eval.n_samples}}},
          {"output_dir", c.output_dir}};
}

}  // namespace rmf
