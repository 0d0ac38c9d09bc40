#include "geossl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "geossl/error.hpp"

namespace geossl::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_integer(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("'" + std::string(key) + "': expected a nonnegative integer, got '" + std::string(value) + "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("'" + std::string(key) + "': expected a number, got '" + std::string(value) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("'" + std::string(key) + "': expected true or false, got '" + std::string(value) + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

template <typename T>
std::vector<T> parse_integer_list(std::string_view key, std::string_view value) {
  std::vector<T> out;
  for (auto item : split_list(value)) out.push_back(parse_integer<T>(key, item));
  return out;
}

// Library parse errors become config errors that name the key.
template <typename F>
auto as_config(std::string_view key, F&& parse) {
  try {
    return parse();
  } catch (const ParameterError& e) {
    throw ConfigError("'" + std::string(key) + "': " + e.what());
  }
}

struct Field {
  std::string_view key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define GEOSSL_SIZE_FIELD(name)                                                                  \
  Field{#name, [](ExperimentConfig& c, std::string_view v) { c.name = parse_integer<std::size_t>(#name, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.name); }}
#define GEOSSL_DOUBLE_FIELD(name)                                                                \
  Field{#name, [](ExperimentConfig& c, std::string_view v) { c.name = parse_double(#name, v); }, \
        [](const ExperimentConfig& c) { return format_double(c.name); }}
#define GEOSSL_STRING_FIELD(name)                                                                \
  Field{#name, [](ExperimentConfig& c, std::string_view v) { c.name = std::string(v); },        \
        [](const ExperimentConfig& c) { return c.name; }}
#define GEOSSL_ENUM_FIELD(name, parser)                                                          \
  Field{#name, [](ExperimentConfig& c, std::string_view v) { c.name = as_config(#name, [&] { return parser(v); }); }, \
        [](const ExperimentConfig& c) { return std::string(to_string(c.name)); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      GEOSSL_ENUM_FIELD(dataset, parse_dataset_kind),
      GEOSSL_STRING_FIELD(embeddings_path),
      GEOSSL_STRING_FIELD(data_dir),
      GEOSSL_SIZE_FIELD(pca_components),
      GEOSSL_STRING_FIELD(label_rule),
      Field{"classes", [](ExperimentConfig& c, std::string_view v) { c.classes = parse_integer<int>("classes", v); },
            [](const ExperimentConfig& c) { return std::to_string(c.classes); }},
      GEOSSL_SIZE_FIELD(n),
      GEOSSL_DOUBLE_FIELD(train_fraction),
      GEOSSL_DOUBLE_FIELD(sigma),
      GEOSSL_SIZE_FIELD(k),
      GEOSSL_ENUM_FIELD(graph_mode, graph::parse_construction_mode),
      GEOSSL_DOUBLE_FIELD(weight_floor),
      GEOSSL_SIZE_FIELD(ann_trees),
      GEOSSL_SIZE_FIELD(ann_leaf_size),
      GEOSSL_SIZE_FIELD(ann_refine_iterations),
      GEOSSL_SIZE_FIELD(ann_refine_fanout),
      GEOSSL_ENUM_FIELD(laplacian_scale, nn::parse_laplacian_scale),
      GEOSSL_SIZE_FIELD(matrix_free_above),
      GEOSSL_ENUM_FIELD(arch, nn::parse_architecture),
      Field{"hidden",
            [](ExperimentConfig& c, std::string_view v) { c.hidden = parse_integer_list<std::size_t>("hidden", v); },
            [](const ExperimentConfig& c) { return join(c.hidden); }},
      GEOSSL_SIZE_FIELD(taps),
      GEOSSL_ENUM_FIELD(activation, nn::parse_activation),
      GEOSSL_ENUM_FIELD(loss, nn::parse_loss_kind),
      GEOSSL_ENUM_FIELD(optimizer, nn::parse_optimizer_kind),
      GEOSSL_DOUBLE_FIELD(lr),
      GEOSSL_SIZE_FIELD(steps),
      GEOSSL_SIZE_FIELD(batch_size),
      GEOSSL_SIZE_FIELD(eval_interval),
      GEOSSL_SIZE_FIELD(n0),
      GEOSSL_SIZE_FIELD(delta_n),
      GEOSSL_SIZE_FIELD(delta_t),
      GEOSSL_ENUM_FIELD(growth_style, train::parse_growth_style),
      Field{"adaptive", [](ExperimentConfig& c, std::string_view v) { c.adaptive = parse_bool("adaptive", v); },
            [](const ExperimentConfig& c) { return std::string(c.adaptive ? "true" : "false"); }},
      Field{"epsilon",
            [](ExperimentConfig& c, std::string_view v) {
              if (v.empty() || v == "auto") {
                c.epsilon.reset();
              } else {
                c.epsilon = parse_double("epsilon", v);
              }
            },
            [](const ExperimentConfig& c) { return c.epsilon ? format_double(*c.epsilon) : std::string("auto"); }},
      GEOSSL_SIZE_FIELD(proxy_factor),
      Field{"seeds",
            [](ExperimentConfig& c, std::string_view v) { c.seeds = parse_integer_list<std::uint64_t>("seeds", v); },
            [](const ExperimentConfig& c) { return join(c.seeds); }},
      Field{"n_grid",
            [](ExperimentConfig& c, std::string_view v) { c.n_grid = parse_integer_list<std::size_t>("n_grid", v); },
            [](const ExperimentConfig& c) { return join(c.n_grid); }},
      GEOSSL_STRING_FIELD(sigma_rule),
      GEOSSL_DOUBLE_FIELD(sigma_c),
      GEOSSL_SIZE_FIELD(eigen_index),
      GEOSSL_SIZE_FIELD(knn_k),
      GEOSSL_STRING_FIELD(output),
  };
  return table;
}

#undef GEOSSL_SIZE_FIELD
#undef GEOSSL_DOUBLE_FIELD
#undef GEOSSL_STRING_FIELD
#undef GEOSSL_ENUM_FIELD

const Field& find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::pair<std::string_view, std::string_view> split_assignment(std::string_view line) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key = value, got '" + std::string(line) + "'");
  const auto key = trim(line.substr(0, eq));
  if (key.empty()) throw ConfigError("missing key in '" + std::string(line) + "'");
  return {key, trim(line.substr(eq + 1))};
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::circle: return "circle";
    case DatasetKind::sphere: return "sphere";
    case DatasetKind::mnist: return "mnist";
    case DatasetKind::fmnist: return "fmnist";
    case DatasetKind::embeddings: return "embeddings";
  }
  return "?";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  for (auto k : {DatasetKind::circle, DatasetKind::sphere, DatasetKind::mnist, DatasetKind::fmnist,
                 DatasetKind::embeddings}) {
    if (to_string(k) == name) return k;
  }
  throw ParameterError("unknown dataset '" + std::string(name) + "'");
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const auto raw = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++line_no;
    const auto line = trim(raw);
    if (!line.empty() && line[0] != '#' && line[0] != ';') {
      try {
        const auto [key, value] = split_assignment(line);
        if (!seen.insert(std::string(key)).second) throw ConfigError("duplicate key '" + std::string(key) + "'");
        find_field(key).set(base, value);
      } catch (const ConfigError& e) {
        throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const auto [key, value] = split_assignment(assignment);
  find_field(key).set(config, value);
}

std::string to_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(config);
    out += '\n';
  }
  return out;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

void validate(const ExperimentConfig& c) {
  if (c.dataset == DatasetKind::embeddings) {
    require(!c.embeddings_path.empty(), "dataset = embeddings needs embeddings_path");
    require(std::filesystem::exists(c.embeddings_path), "embeddings_path '" + c.embeddings_path + "' does not exist");
  }
  if (c.dataset == DatasetKind::mnist || c.dataset == DatasetKind::fmnist) {
    require(std::filesystem::is_directory(c.data_dir), "data_dir '" + c.data_dir + "' is not a directory");
    require(c.pca_components >= 1, "pca_components must be >= 1");
  }
  require(c.label_rule == "hemisphere" || c.label_rule == "sector", "label_rule must be hemisphere or sector");
  if (c.label_rule == "sector") {
    require(c.dataset == DatasetKind::circle, "sector labels need dataset = circle");
    require(c.classes >= 2, "classes must be >= 2");
  }
  const bool synthetic = c.dataset == DatasetKind::circle || c.dataset == DatasetKind::sphere;
  require(c.n >= 2 || (c.n == 0 && !synthetic), "n must be >= 2 (0 selects every node of a dataset)");
  require(c.train_fraction > 0.0 && c.train_fraction < 1.0, "train_fraction must lie in (0, 1)");
  require(c.sigma > 0.0, "sigma must be positive");
  if (c.graph_mode != graph::ConstructionMode::dense) require(c.k >= 1, "kNN graphs need k >= 1");
  require(c.weight_floor >= 0.0, "weight_floor must be nonnegative");
  require(c.ann_trees >= 1 && c.ann_leaf_size >= 2, "ann_trees >= 1 and ann_leaf_size >= 2 required");
  require(c.taps >= 1, "taps must be >= 1");
  for (auto h : c.hidden) require(h >= 1, "hidden widths must be >= 1");
  require(c.lr > 0.0, "lr must be positive");
  require(c.batch_size >= 1, "batch_size must be >= 1");
  require(c.delta_t >= 1, "delta_t must be >= 1");
  require(c.n0 >= 2, "n0 must be >= 2");
  if (c.epsilon) require(*c.epsilon >= 0.0, "epsilon must be nonnegative");
  require(!c.seeds.empty(), "seeds must list at least one seed");
  require(!c.n_grid.empty(), "n_grid must list at least one size");
  for (auto n : c.n_grid) require(n >= 2, "n_grid entries must be >= 2");
  require(c.sigma_rule == "fixed" || c.sigma_rule == "schedule", "sigma_rule must be fixed or schedule");
  require(c.sigma_c > 0.0, "sigma_c must be positive");
  require(c.knn_k >= 1, "knn_k must be >= 1");
  require(!c.output.empty(), "output must be set");
}

train::GraphSpec graph_spec(const ExperimentConfig& c) {
  train::GraphSpec spec;
  spec.sigma = c.sigma;
  spec.k = c.k;
  spec.mode = c.graph_mode;
  spec.weight_floor = c.weight_floor;
  spec.ann.trees = c.ann_trees;
  spec.ann.leaf_size = c.ann_leaf_size;
  spec.ann.refine_iterations = c.ann_refine_iterations;
  spec.ann.refine_fanout = c.ann_refine_fanout;
  spec.scale = c.laplacian_scale;
  spec.matrix_free_above = c.matrix_free_above;
  return spec;
}

train::ModelSpec model_spec(const ExperimentConfig& c) {
  train::ModelSpec spec;
  spec.hidden = c.hidden;
  spec.taps = c.taps;
  spec.activation = c.activation;
  spec.architecture = c.arch;
  return spec;
}

train::TrainSchedule schedule(const ExperimentConfig& c, std::uint64_t seed, train::ScheduleMode mode) {
  train::TrainSchedule s;
  s.mode = mode;
  const bool growing = mode == train::ScheduleMode::growing;
  s.n0 = growing ? c.n0 : c.n;
  s.delta_n = growing ? c.delta_n : 0;
  s.delta_t = c.delta_t;
  s.total_steps = c.steps;
  s.optimizer.kind = c.optimizer;
  s.optimizer.learning_rate = c.lr;
  s.loss = c.loss;
  s.seed = seed;
  s.growth_style = c.growth_style;
  s.eval_interval = c.eval_interval;
  s.adaptive = growing && c.adaptive;
  s.epsilon = c.epsilon;
  s.proxy_factor = c.proxy_factor;
  s.loss_chunk = c.batch_size;
  return s;
}

manifold::LabelRule label_rule(const ExperimentConfig& c) {
  return c.label_rule == "sector" ? manifold::LabelRule::angular_sector(c.classes) : manifold::LabelRule::hemisphere();
}

train::SigmaRule sigma_rule(const ExperimentConfig& c) {
  return c.sigma_rule == "schedule" ? train::SigmaRule::schedule(c.sigma_c) : train::SigmaRule::fixed(c.sigma);
}

}  // namespace geossl::config
