#include "pgn/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pgn {

const std::vector<ConfigKey>& config_registry() {
  static const std::vector<ConfigKey> keys = {
      // frozen encoder
      {"encoder.image_h", ConfigType::Int, "32", 8, 512, {}, "input image height in pixels"},
      {"encoder.image_w", ConfigType::Int, "32", 8, 512, {}, "input image width in pixels"},
      {"encoder.patch_size", ConfigType::Int, "4", 2, 64, {}, "patch side length"},
      {"encoder.embed_dim", ConfigType::Int, "48", 4, 2048, {}, "token channel dimension"},
      {"encoder.depth", ConfigType::Int, "4", 1, 48, {}, "transformer block count"},
      {"encoder.heads", ConfigType::Int, "4", 1, 64, {}, "attention head count"},
      {"encoder.mlp_ratio", ConfigType::Float, "4.0", 0.25, 16.0, {}, "MLP hidden width ratio"},
      {"encoder.r_max", ConfigType::Int, "2", 0, 32, {}, "appended patch rows covered by the positional table"},
      {"encoder.cls_first", ConfigType::Bool, "false", 0, 0, {}, "place the CLS token first instead of last"},
      // prompt generator
      {"pgn.prompts", ConfigType::Int, "8", 1, 1024, {}, "number of generated prompts"},
      {"pgn.library", ConfigType::Int, "64", 1, 65536, {}, "token library size"},
      {"pgn.backbone", ConfigType::Choice, "resnet10", 0, 0, {"mlp", "resnet10", "resnet18"},
       "feature backbone"},
      {"pgn.head", ConfigType::Choice, "linear", 0, 0, {"linear", "mlp", "direct"},
       "projection head type"},
      {"pgn.input_resolution", ConfigType::Int, "32", 10, 512, {}, "backbone input resolution"},
      {"pgn.iip", ConfigType::Bool, "false", 0, 0, {}, "input-independent prompts baseline"},
      // training
      {"train.lr", ConfigType::Float, "0.1", 0.0, 100.0, {}, "base learning rate"},
      {"train.momentum", ConfigType::Float, "0.9", 0.0, 1.0, {}, "SGD momentum"},
      {"train.epochs", ConfigType::Int, "100", 1, 100000, {}, "total epochs"},
      {"train.warmup_epochs", ConfigType::Int, "10", 0, 100000, {}, "linear warmup epochs"},
      {"train.batch", ConfigType::Int, "64", 1, 4096, {}, "batch size"},
      {"train.eval_every", ConfigType::Int, "1", 0, 100000, {}, "epochs between test evaluations (0 = only at the end)"},
      {"train.classifier", ConfigType::Choice, "fixed", 0, 0, {"fixed", "trainable"},
       "classifier head mode"},
      {"train.threads", ConfigType::Int, "0", -1, 256, {}, "kernel threads (0 = serial, -1 = hardware)"},
      // data
      {"data.source", ConfigType::Choice, "synthetic", 0, 0, {"synthetic", "cifar10", "cifar100"},
       "dataset"},
      {"data.path", ConfigType::Str, "", 0, 0, {}, "binary file for cifar sources"},
      {"data.test_path", ConfigType::Str, "", 0, 0, {}, "binary test file for cifar sources"},
      {"data.classes", ConfigType::Int, "10", 2, 1000, {}, "synthetic classes per domain"},
      {"data.domains", ConfigType::Int, "1", 1, 16, {}, "synthetic domain count"},
      {"data.train_samples", ConfigType::Int, "5000", 1, 10000000, {}, "synthetic train split size"},
      {"data.test_samples", ConfigType::Int, "1000", 1, 10000000, {}, "synthetic test split size"},
      {"data.image_size", ConfigType::Int, "32", 8, 512, {}, "synthetic image side length"},
      {"data.cue", ConfigType::Choice, "global_hue", 0, 0, {"global_hue", "texture", "layout"},
       "synthetic class cue"},
      // serving
      {"serve.host", ConfigType::Str, "127.0.0.1", 0, 0, {}, "bind address"},
      {"serve.port", ConfigType::Int, "7461", 0, 65535, {}, "bind port (0 = ephemeral)"},
      {"client.host", ConfigType::Str, "127.0.0.1", 0, 0, {}, "server address"},
      {"client.port", ConfigType::Int, "7461", 0, 65535, {}, "server port"},
      {"client.pixels", ConfigType::Choice, "f32", 0, 0, {"f32", "u8"},
       "wire pixel format (u8 is lossy)"},
  };
  return keys;
}

namespace {

const ConfigKey* find_key(const std::string& name) {
  for (const auto& k : config_registry())
    if (k.name == name) return &k;
  return nullptr;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

void validate(const ConfigKey& key, const std::string& value) {
  switch (key.type) {
    case ConfigType::Int: {
      char* end = nullptr;
      const long long v = std::strtoll(value.c_str(), &end, 10);
      require(end && *end == '\0' && !value.empty(), ErrorCode::BadConfig,
              key.name + " expects an integer, got '" + value + "'");
      require(v >= key.min && v <= key.max, ErrorCode::BadConfig,
              key.name + "=" + value + " outside [" + std::to_string((long long)key.min) + ", " +
                  std::to_string((long long)key.max) + "]");
      break;
    }
    case ConfigType::Float: {
      char* end = nullptr;
      const double v = std::strtod(value.c_str(), &end);
      require(end && *end == '\0' && !value.empty(), ErrorCode::BadConfig,
              key.name + " expects a number, got '" + value + "'");
      require(v >= key.min && v <= key.max, ErrorCode::BadConfig,
              key.name + "=" + value + " outside range");
      break;
    }
    case ConfigType::Bool:
      require(value == "true" || value == "false", ErrorCode::BadConfig,
              key.name + " expects true/false, got '" + value + "'");
      break;
    case ConfigType::Str:
      break;
    case ConfigType::Choice: {
      for (const auto& c : key.choices)
        if (c == value) return;
      std::string opts;
      for (const auto& c : key.choices) opts += (opts.empty() ? "" : "|") + c;
      fail(ErrorCode::BadConfig, key.name + " expects one of {" + opts + "}, got '" + value + "'");
    }
  }
}

}  // namespace

Config::Config() = default;

Config Config::from_file(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorCode::BadConfig, "cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_string(ss.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::BadConfig,
            "line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
  const ConfigKey* k = find_key(key);
  require(k != nullptr, ErrorCode::BadConfig, "unknown key '" + key + "'");
  validate(*k, value);
  values_[key] = value;
}

const std::string& Config::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  const ConfigKey* k = find_key(key);
  require(k != nullptr, ErrorCode::BadConfig, "unknown key '" + key + "'");
  return k->def;
}

bool Config::is_default(const std::string& key) const { return values_.find(key) == values_.end(); }

int64_t Config::get_int(const std::string& key) const {
  return std::strtoll(raw(key).c_str(), nullptr, 10);
}

double Config::get_float(const std::string& key) const {
  return std::strtod(raw(key).c_str(), nullptr);
}

bool Config::get_bool(const std::string& key) const { return raw(key) == "true"; }

const std::string& Config::get_str(const std::string& key) const { return raw(key); }

std::string Config::describe_keys() {
  std::string out;
  for (const auto& k : config_registry()) {
    out += "  " + k.name;
    switch (k.type) {
      case ConfigType::Int: out += " <int>"; break;
      case ConfigType::Float: out += " <float>"; break;
      case ConfigType::Bool: out += " <true|false>"; break;
      case ConfigType::Str: out += " <string>"; break;
      case ConfigType::Choice: {
        out += " <";
        for (size_t i = 0; i < k.choices.size(); ++i) out += (i ? "|" : "") + k.choices[i];
        out += ">";
        break;
      }
    }
    out += " (default " + (k.def.empty() ? std::string("\"\"") : k.def) + ") — " + k.help + "\n";
  }
  return out;
}

}  // namespace pgn
