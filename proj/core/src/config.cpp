#include "mfegan/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "mfegan/errors.hpp"

namespace mfegan {

const char* method_name(Method m) {
  switch (m) {
    case Method::Cnn:
      return "cnn";
    case Method::RoCnn:
      return "ro+cnn";
    case Method::Acgan:
      return "acgan";
    case Method::Mfegan:
      return "mfegan";
  }
  throw ContractError("unknown method enumerator");
}

Method method_from_name(const std::string& token) {
  if (token == "cnn") return Method::Cnn;
  if (token == "ro+cnn") return Method::RoCnn;
  if (token == "acgan") return Method::Acgan;
  if (token == "mfegan") return Method::Mfegan;
  throw FormatError("unknown method '" + token +
                    "' (expected cnn, ro+cnn, acgan or mfegan)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

// Parser state shared by the per-key handlers below.
struct Cursor {
  std::string origin;
  int line = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(origin + ":" + std::to_string(line) + ": " + msg);
  }

  long long integer(const std::string& key, const std::string& value) const {
    long long v = 0;
    const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
    if (r.ec != std::errc{} || r.ptr != value.data() + value.size()) {
      fail("key '" + key + "' needs an integer, got '" + value + "'");
    }
    return v;
  }

  std::uint64_t unsigned64(const std::string& key,
                           const std::string& value) const {
    std::uint64_t v = 0;
    const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
    if (r.ec != std::errc{} || r.ptr != value.data() + value.size()) {
      fail("key '" + key + "' needs a non-negative integer, got '" + value +
           "'");
    }
    return v;
  }

  double real(const std::string& key, const std::string& value) const {
    double v = 0;
    const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
    if (r.ec != std::errc{} || r.ptr != value.data() + value.size()) {
      fail("key '" + key + "' needs a number, got '" + value + "'");
    }
    return v;
  }

  bool boolean(const std::string& key, const std::string& value) const {
    if (value == "true") return true;
    if (value == "false") return false;
    fail("key '" + key + "' needs true or false, got '" + value + "'");
  }
};

}  // namespace

void ExperimentConfig::validate() const {
  const bool has_files = !cube_path.empty() || !labels_path.empty();
  if (synthetic && has_files) {
    throw FormatError(
        "config: choose either synthetic data or cube/labels files, not both");
  }
  if (!synthetic) {
    if (cube_path.empty()) throw FormatError("config: missing key 'cube'");
    if (labels_path.empty()) throw FormatError("config: missing key 'labels'");
  } else {
    if (synth.height < 1 || synth.width < 1) {
      throw FormatError("config: synthetic data needs synth_height and synth_width");
    }
    if (synth.bands < 1) throw FormatError("config: missing key 'synth_bands'");
    if (synth.class_sizes.empty()) {
      throw FormatError("config: missing key 'synth_classes'");
    }
  }
  if (sp < 4 || sp % 4 != 0) {
    throw FormatError("config: sp must be a positive multiple of 4, got " +
                      std::to_string(sp));
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw FormatError("config: train_fraction must lie strictly in (0,1)");
  }
  for (const auto& [cls, count] : train_count_overrides) {
    if (cls < 1 || count < 1) {
      throw FormatError(
          "config: train_count_overrides entries need class >= 1 and count >= "
          "1");
    }
  }
  if (methods.empty()) throw FormatError("config: empty variants list");
  if (knn_k < 1) throw FormatError("config: knn_k must be at least 1");
  if (out_dir.empty()) throw FormatError("config: missing key 'dir'");
  try {
    train.validate();
  } catch (const ParameterError& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
}

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin) {
  ExperimentConfig cfg;
  cfg.methods.clear();  // the file decides; restored to the default if absent

  Cursor at{origin, 0};
  std::string section;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;

  while (std::getline(in, raw)) {
    ++at.line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') at.fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "data" && section != "train" && section != "output") {
        at.fail("unknown section '" + section + "'");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) at.fail("expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) at.fail("empty key");
    if (section.empty()) at.fail("key '" + key + "' appears before any section");
    if (!seen.insert(section + "." + key).second) {
      at.fail("duplicate key '" + key + "' in section [" + section + "]");
    }

    if (section == "data") {
      if (key == "cube") {
        cfg.cube_path = value;
      } else if (key == "labels") {
        cfg.labels_path = value;
      } else if (key == "synthetic") {
        cfg.synthetic = at.boolean(key, value);
      } else if (key == "synth_height") {
        cfg.synth.height = static_cast<int>(at.integer(key, value));
      } else if (key == "synth_width") {
        cfg.synth.width = static_cast<int>(at.integer(key, value));
      } else if (key == "synth_bands") {
        cfg.synth.bands = static_cast<int>(at.integer(key, value));
      } else if (key == "synth_classes") {
        for (const std::string& item : split(value, ',')) {
          const long long n = at.integer(key, item);
          if (n < 1) at.fail("class sizes must be positive, got '" + item + "'");
          cfg.synth.class_sizes.push_back(static_cast<int>(n));
        }
        cfg.synth.n_classes = static_cast<int>(cfg.synth.class_sizes.size());
      } else if (key == "synth_noise") {
        cfg.synth.noise = static_cast<float>(at.real(key, value));
      } else if (key == "sp") {
        cfg.sp = static_cast<int>(at.integer(key, value));
      } else if (key == "train_fraction") {
        cfg.train_fraction = at.real(key, value);
      } else if (key == "train_count_overrides") {
        for (const std::string& item : split(value, ',')) {
          const auto colon = item.find(':');
          if (colon == std::string::npos) {
            at.fail("override '" + item + "' must look like class:count");
          }
          const int cls =
              static_cast<int>(at.integer(key, trim(item.substr(0, colon))));
          const int count =
              static_cast<int>(at.integer(key, trim(item.substr(colon + 1))));
          if (!cfg.train_count_overrides.emplace(cls, count).second) {
            at.fail("class " + std::to_string(cls) + " overridden twice");
          }
        }
      } else if (key == "seed") {
        cfg.seed = at.unsigned64(key, value);
      } else {
        at.fail("unknown key '" + key + "' in section [data]");
      }
    } else if (section == "train") {
      if (key == "variants") {
        for (const std::string& item : split(value, ',')) {
          Method m;
          try {
            m = method_from_name(item);
          } catch (const FormatError& e) {
            at.fail(e.what());
          }
          if (std::find(cfg.methods.begin(), cfg.methods.end(), m) !=
              cfg.methods.end()) {
            at.fail("variant '" + item + "' listed twice");
          }
          cfg.methods.push_back(m);
        }
      } else if (key == "batch") {
        cfg.train.batch = static_cast<int>(at.integer(key, value));
      } else if (key == "epochs") {
        cfg.train.epochs = static_cast<int>(at.integer(key, value));
      } else if (key == "lambda") {
        cfg.train.lambda = at.real(key, value);
      } else if (key == "d_steps") {
        cfg.train.d_steps = static_cast<int>(at.integer(key, value));
      } else if (key == "lr_g") {
        cfg.train.adam_g.lr = static_cast<float>(at.real(key, value));
      } else if (key == "lr_d") {
        cfg.train.adam_d.lr = static_cast<float>(at.real(key, value));
      } else if (key == "beta1") {
        cfg.train.adam_g.beta1 = static_cast<float>(at.real(key, value));
        cfg.train.adam_d.beta1 = cfg.train.adam_g.beta1;
      } else if (key == "beta2") {
        cfg.train.adam_g.beta2 = static_cast<float>(at.real(key, value));
        cfg.train.adam_d.beta2 = cfg.train.adam_g.beta2;
      } else if (key == "oversample") {
        cfg.train.oversample = at.boolean(key, value);
      } else if (key == "gen_class_term") {
        if (value == "real-slot") {
          cfg.train.gen_class_term = GenClassTerm::RealSlotProb;
        } else if (value == "one-minus-real") {
          cfg.train.gen_class_term = GenClassTerm::OneMinusRealSlotProb;
        } else {
          at.fail("key 'gen_class_term' takes real-slot or one-minus-real");
        }
      } else if (key == "knn_k") {
        cfg.knn_k = static_cast<int>(at.integer(key, value));
      } else {
        at.fail("unknown key '" + key + "' in section [train]");
      }
    } else {  // output
      if (key == "dir") {
        cfg.out_dir = value;
      } else {
        at.fail("unknown key '" + key + "' in section [output]");
      }
    }
  }

  if (cfg.methods.empty()) cfg.methods = {Method::Mfegan};
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open config file " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.string());
}

}  // namespace mfegan
