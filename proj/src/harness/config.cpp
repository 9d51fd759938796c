#include "fedthe/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fedthe::harness {

void ExperimentConfig::validate() const {
  if (data.num_classes < 2 || data.input_dim < 1 || data.n_per_class < 1) {
    throw ConfigError("config: data block invalid");
  }
  if (data.within_class_std < 0.0 || data.mean_scale <= 0.0 ||
      data.natural_shift_ratio < 0.0) {
    throw ConfigError("config: data scales invalid");
  }
  if (partition.clients < 1) {
    throw ConfigError("config: partition.clients must be >= 1");
  }
  if (partition.alpha <= 0.0) {
    throw ConfigError("config: partition.alpha must be > 0");
  }
  if (feature_dim < 1) {
    throw ConfigError("config: model.feature_dim must be >= 1");
  }
  if (severity < 1 || severity > 5) {
    throw ConfigError("config: bench.severity must be in 1..5");
  }
  if (methods.empty()) {
    throw ConfigError("config: run.methods must not be empty");
  }
  if (streams.empty()) {
    throw ConfigError("config: run.streams must not be empty");
  }
  if (seeds.empty()) {
    throw ConfigError("config: run.seeds must not be empty");
  }
  train.validate();
  adapt.validate();
}

fl::ModelConfig ExperimentConfig::model_config() const {
  fl::ModelConfig mc;
  mc.extractor_dims.push_back(static_cast<std::size_t>(data.input_dim));
  for (std::size_t h : hidden_dims) {
    mc.extractor_dims.push_back(h);
  }
  mc.extractor_dims.push_back(feature_dim);
  mc.num_classes = static_cast<std::size_t>(data.num_classes);
  return mc;
}

data::GeneratorSpec ExperimentConfig::generator_for_seed(std::uint64_t seed) const {
  return data::GeneratorSpec::make_random(data.num_classes, data.input_dim,
                                          data.mean_scale, data.within_class_std,
                                          data.natural_shift_ratio, seed);
}

ExperimentConfig default_config() {
  ExperimentConfig config;
  config.methods = {tta::Method::Global,  tta::Method::FedavgFt, tta::Method::MemoG,
                    tta::Method::MemoP,   tta::Method::FedThe,   tta::Method::FedThePlus};
  config.streams = {data::StreamKind::Id, data::StreamKind::Corrupted,
                    data::StreamKind::NaturalShift, data::StreamKind::OutOfClient,
                    data::StreamKind::Mixture};
  config.seeds = {1, 2, 3};
  return config;
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) {
      items.push_back(item);
    }
  }
  return items;
}

class KeyTable {
 public:
  using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

  void add(const std::string& key, Setter setter) { setters_[key] = std::move(setter); }

  void apply(ExperimentConfig& config, const std::string& key, const std::string& value,
             int line) const {
    auto it = setters_.find(key);
    if (it == setters_.end()) {
      throw ConfigError("config line " + std::to_string(line) + ": unknown key '" +
                        key + "'");
    }
    try {
      it->second(config, value);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("config line " + std::to_string(line) + ": bad value for '" +
                        key + "': " + e.what());
    }
  }

 private:
  std::map<std::string, Setter> setters_;
};

int to_int(const std::string& v) {
  std::size_t pos = 0;
  const int out = std::stoi(v, &pos);
  if (pos != v.size()) {
    throw std::invalid_argument("trailing characters in integer");
  }
  return out;
}

double to_double(const std::string& v) {
  std::size_t pos = 0;
  const double out = std::stod(v, &pos);
  if (pos != v.size()) {
    throw std::invalid_argument("trailing characters in number");
  }
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true/false");
}

const KeyTable& key_table() {
  static const KeyTable table = [] {
    KeyTable t;
    t.add("data.num_classes", [](auto& c, const auto& v) { c.data.num_classes = to_int(v); });
    t.add("data.input_dim", [](auto& c, const auto& v) { c.data.input_dim = to_int(v); });
    t.add("data.n_per_class", [](auto& c, const auto& v) { c.data.n_per_class = to_int(v); });
    t.add("data.mean_scale", [](auto& c, const auto& v) { c.data.mean_scale = to_double(v); });
    t.add("data.within_class_std",
          [](auto& c, const auto& v) { c.data.within_class_std = to_double(v); });
    t.add("data.natural_shift_ratio",
          [](auto& c, const auto& v) { c.data.natural_shift_ratio = to_double(v); });
    t.add("partition.clients", [](auto& c, const auto& v) { c.partition.clients = to_int(v); });
    t.add("partition.alpha", [](auto& c, const auto& v) { c.partition.alpha = to_double(v); });
    t.add("model.hidden_dims", [](auto& c, const auto& v) {
      c.hidden_dims.clear();
      for (const std::string& item : split_list(v)) {
        c.hidden_dims.push_back(static_cast<std::size_t>(to_int(item)));
      }
    });
    t.add("model.feature_dim",
          [](auto& c, const auto& v) { c.feature_dim = static_cast<std::size_t>(to_int(v)); });
    t.add("train.rounds", [](auto& c, const auto& v) { c.train.rounds = to_int(v); });
    t.add("train.participation_ratio",
          [](auto& c, const auto& v) { c.train.participation_ratio = to_double(v); });
    t.add("train.local_epochs", [](auto& c, const auto& v) { c.train.local_epochs = to_int(v); });
    t.add("train.personalization_epochs",
          [](auto& c, const auto& v) { c.train.personalization_epochs = to_int(v); });
    t.add("train.batch_size", [](auto& c, const auto& v) { c.train.batch_size = to_int(v); });
    t.add("train.lr", [](auto& c, const auto& v) { c.train.lr = to_double(v); });
    t.add("train.weight_decay",
          [](auto& c, const auto& v) { c.train.weight_decay = to_double(v); });
    t.add("train.balanced_softmax",
          [](auto& c, const auto& v) { c.train.balanced_softmax = to_bool(v); });
    t.add("train.reinit_personal_head",
          [](auto& c, const auto& v) { c.train.reinit_personal_head = to_bool(v); });
    t.add("adapt.e_steps", [](auto& c, const auto& v) { c.adapt.e_steps = to_int(v); });
    t.add("adapt.e_lr", [](auto& c, const auto& v) { c.adapt.e_lr = to_double(v); });
    t.add("adapt.alpha", [](auto& c, const auto& v) { c.adapt.alpha = to_double(v); });
    t.add("adapt.beta", [](auto& c, const auto& v) { c.adapt.beta = to_double(v); });
    t.add("adapt.loss_mode",
          [](auto& c, const auto& v) { c.adapt.loss_mode = tta::loss_mode_from_string(v); });
    t.add("adapt.use_history",
          [](auto& c, const auto& v) { c.adapt.use_history = to_bool(v); });
    t.add("adapt.batch_wise", [](auto& c, const auto& v) { c.adapt.batch_wise = to_bool(v); });
    t.add("adapt.batch_size", [](auto& c, const auto& v) { c.adapt.batch_size = to_int(v); });
    t.add("adapt.ft_enabled", [](auto& c, const auto& v) { c.adapt.ft_enabled = to_bool(v); });
    t.add("adapt.ft_steps", [](auto& c, const auto& v) { c.adapt.ft_steps = to_int(v); });
    t.add("adapt.ft_lr", [](auto& c, const auto& v) { c.adapt.ft_lr = to_double(v); });
    t.add("adapt.ft_augments", [](auto& c, const auto& v) { c.adapt.ft_augments = to_int(v); });
    t.add("bench.severity", [](auto& c, const auto& v) { c.severity = to_int(v); });
    t.add("run.methods", [](auto& c, const auto& v) {
      c.methods.clear();
      for (const std::string& item : split_list(v)) {
        c.methods.push_back(tta::method_from_string(item));
      }
    });
    t.add("run.streams", [](auto& c, const auto& v) {
      c.streams.clear();
      for (const std::string& item : split_list(v)) {
        c.streams.push_back(data::stream_kind_from_string(item));
      }
    });
    t.add("run.seeds", [](auto& c, const auto& v) {
      c.seeds.clear();
      for (const std::string& item : split_list(v)) {
        c.seeds.push_back(static_cast<std::uint64_t>(std::stoull(item)));
      }
    });
    t.add("run.out", [](auto& c, const auto& v) { c.out_dir = v; });
    return t;
  }();
  return table;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config = default_config();
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) {
      line = line.substr(0, comment);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    key_table().apply(config, key, value, line_no);
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T, typename Fn>
std::string join(const std::vector<T>& items, Fn&& fn) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) {
      out += ", ";
    }
    out += fn(items[i]);
  }
  return out;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "data.num_classes = " << c.data.num_classes << "\n";
  out << "data.input_dim = " << c.data.input_dim << "\n";
  out << "data.n_per_class = " << c.data.n_per_class << "\n";
  out << "data.mean_scale = " << format_double(c.data.mean_scale) << "\n";
  out << "data.within_class_std = " << format_double(c.data.within_class_std) << "\n";
  out << "data.natural_shift_ratio = " << format_double(c.data.natural_shift_ratio)
      << "\n";
  out << "partition.clients = " << c.partition.clients << "\n";
  out << "partition.alpha = " << format_double(c.partition.alpha) << "\n";
  out << "model.hidden_dims = "
      << join(c.hidden_dims, [](std::size_t v) { return std::to_string(v); }) << "\n";
  out << "model.feature_dim = " << c.feature_dim << "\n";
  out << "train.rounds = " << c.train.rounds << "\n";
  out << "train.participation_ratio = " << format_double(c.train.participation_ratio)
      << "\n";
  out << "train.local_epochs = " << c.train.local_epochs << "\n";
  out << "train.personalization_epochs = " << c.train.personalization_epochs << "\n";
  out << "train.batch_size = " << c.train.batch_size << "\n";
  out << "train.lr = " << format_double(c.train.lr) << "\n";
  out << "train.weight_decay = " << format_double(c.train.weight_decay) << "\n";
  out << "train.balanced_softmax = " << (c.train.balanced_softmax ? "true" : "false")
      << "\n";
  out << "train.reinit_personal_head = "
      << (c.train.reinit_personal_head ? "true" : "false") << "\n";
  out << "adapt.e_steps = " << c.adapt.e_steps << "\n";
  out << "adapt.e_lr = " << format_double(c.adapt.e_lr) << "\n";
  out << "adapt.alpha = " << format_double(c.adapt.alpha) << "\n";
  out << "adapt.beta = " << format_double(c.adapt.beta) << "\n";
  out << "adapt.loss_mode = " << tta::to_string(c.adapt.loss_mode) << "\n";
  out << "adapt.use_history = " << (c.adapt.use_history ? "true" : "false") << "\n";
  out << "adapt.batch_wise = " << (c.adapt.batch_wise ? "true" : "false") << "\n";
  out << "adapt.batch_size = " << c.adapt.batch_size << "\n";
  out << "adapt.ft_enabled = " << (c.adapt.ft_enabled ? "true" : "false") << "\n";
  out << "adapt.ft_steps = " << c.adapt.ft_steps << "\n";
  out << "adapt.ft_lr = " << format_double(c.adapt.ft_lr) << "\n";
  out << "adapt.ft_augments = " << c.adapt.ft_augments << "\n";
  out << "bench.severity = " << c.severity << "\n";
  out << "run.methods = "
      << join(c.methods, [](tta::Method m) { return tta::to_string(m); }) << "\n";
  out << "run.streams = "
      << join(c.streams, [](data::StreamKind s) { return data::to_string(s); }) << "\n";
  out << "run.seeds = "
      << join(c.seeds, [](std::uint64_t s) { return std::to_string(s); }) << "\n";
  out << "run.out = " << c.out_dir << "\n";
  return out.str();
}

}  // namespace fedthe::harness
