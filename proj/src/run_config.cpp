#include "protokd/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <variant>

#include "protokd/error.hpp"

namespace protokd {

namespace {

using Value = std::variant<std::int64_t, double, bool, std::string>;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

Value parse_value(std::string_view raw) {
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    return std::string(raw.substr(1, raw.size() - 2));
  }
  if (raw == "true") return true;
  if (raw == "false") return false;
  std::int64_t i = 0;
  auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), i);
  if (ec == std::errc{} && p == raw.data() + raw.size()) return i;
  double d = 0.0;
  auto [q, ec2] = std::from_chars(raw.data(), raw.data() + raw.size(), d);
  if (ec2 == std::errc{} && q == raw.data() + raw.size()) return d;
  throw std::invalid_argument("cannot parse value '" + std::string(raw) + "'");
}

double as_real(const Value& v) {
  if (auto i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (auto d = std::get_if<double>(&v)) return *d;
  throw std::invalid_argument("expected a number");
}

std::uint64_t as_count(const Value& v) {
  auto i = std::get_if<std::int64_t>(&v);
  if (!i || *i < 0) throw std::invalid_argument("expected a non-negative integer");
  return static_cast<std::uint64_t>(*i);
}

bool as_bool(const Value& v) {
  auto b = std::get_if<bool>(&v);
  if (!b) throw std::invalid_argument("expected true or false");
  return *b;
}

std::string as_string(const Value& v) {
  auto s = std::get_if<std::string>(&v);
  if (!s) throw std::invalid_argument("expected a quoted string");
  return *s;
}

using Setter = std::function<void(RunConfig&, const Value&)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"hyper.k", [](RunConfig& c, const Value& v) { c.hyper.k = as_count(v); }},
      {"hyper.lambda", [](RunConfig& c, const Value& v) { c.hyper.lambda = as_real(v); }},
      {"hyper.T", [](RunConfig& c, const Value& v) { c.hyper.refresh_period = as_count(v); }},
      {"hyper.alpha1", [](RunConfig& c, const Value& v) { c.hyper.alpha_global = as_real(v); }},
      {"hyper.alpha2", [](RunConfig& c, const Value& v) { c.hyper.alpha_feat = as_real(v); }},
      {"hyper.alpha3", [](RunConfig& c, const Value& v) { c.hyper.alpha_resp = as_real(v); }},
      {"hyper.temperature", [](RunConfig& c, const Value& v) { c.hyper.temperature = as_real(v); }},

      {"sim.classes", [](RunConfig& c, const Value& v) { c.sim.classes = as_count(v); }},
      {"sim.n_per_class", [](RunConfig& c, const Value& v) { c.sim.n_per_class = as_count(v); }},
      {"sim.dim_t", [](RunConfig& c, const Value& v) { c.sim.dim_t = as_count(v); }},
      {"sim.dim_s", [](RunConfig& c, const Value& v) { c.sim.dim_s = as_count(v); }},
      {"sim.class_separation", [](RunConfig& c, const Value& v) { c.sim.class_separation = as_real(v); }},
      {"sim.teacher_cluster_spread",
       [](RunConfig& c, const Value& v) { c.sim.teacher_cluster_spread = as_real(v); }},
      {"sim.latent_rank", [](RunConfig& c, const Value& v) { c.sim.latent_rank = as_count(v); }},
      {"sim.residual_spread", [](RunConfig& c, const Value& v) { c.sim.residual_spread = as_real(v); }},
      {"sim.map_distortion", [](RunConfig& c, const Value& v) { c.sim.map_distortion = as_real(v); }},
      {"sim.map_matrix_seed", [](RunConfig& c, const Value& v) { c.sim.map_matrix_seed = as_count(v); }},
      {"sim.noise_seed", [](RunConfig& c, const Value& v) { c.sim.noise_seed = as_count(v); }},
      {"sim.noise_sigma", [](RunConfig& c, const Value& v) { c.sim.noise_sigma = as_real(v); }},
      {"sim.ambiguous_fraction",
       [](RunConfig& c, const Value& v) { c.sim.ambiguous_fraction = as_real(v); }},
      {"sim.ambiguous_noise_multiplier",
       [](RunConfig& c, const Value& v) { c.sim.ambiguous_noise_multiplier = as_real(v); }},
      {"sim.learning_rate", [](RunConfig& c, const Value& v) { c.sim.learning_rate = as_real(v); }},
      {"sim.epochs", [](RunConfig& c, const Value& v) { c.sim.epochs = as_count(v); }},
      {"sim.steps_per_epoch", [](RunConfig& c, const Value& v) { c.sim.steps_per_epoch = as_count(v); }},

      {"run.seed", [](RunConfig& c, const Value& v) { c.seed = as_count(v); }},
      {"run.seeds", [](RunConfig& c, const Value& v) { c.seed_count = as_count(v); }},
      {"run.input", [](RunConfig& c, const Value& v) { c.input = as_string(v); }},
      {"run.output", [](RunConfig& c, const Value& v) { c.output = as_string(v); }},
      {"run.group", [](RunConfig& c, const Value& v) { c.group = parse_group_key(as_string(v)); }},
      {"run.method", [](RunConfig& c, const Value& v) { c.method = as_string(v); }},
      {"run.rectify", [](RunConfig& c, const Value& v) { c.rectify = as_bool(v); }},
      {"run.sigma",
       [](RunConfig& c, const Value& v) {
         const auto s = as_string(v);
         if (s == "robust") c.sigma = SigmaMode::Robust;
         else if (s == "unit") c.sigma = SigmaMode::Unit;
         else throw std::invalid_argument("sigma must be \"robust\" or \"unit\"");
       }},
      {"run.projection",
       [](RunConfig& c, const Value& v) {
         const auto s = as_string(v);
         if (s == "greedy") c.projection = ProjectionMode::Greedy;
         else if (s == "joint") c.projection = ProjectionMode::JointLeastSquares;
         else throw std::invalid_argument("projection must be \"greedy\" or \"joint\"");
       }},
      {"run.bins", [](RunConfig& c, const Value& v) { c.histogram_bins = as_count(v); }},
  };
  return table;
}

}  // namespace

GroupKey parse_group_key(std::string_view text) {
  GroupKey key;
  const auto colon = text.find(':');
  auto parse = [&](std::string_view part, std::uint32_t& out) {
    const auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    if (ec != std::errc{} || p != part.data() + part.size() || part.empty()) {
      throw Error(ErrorCode::InvalidConfig, "bad group '" + std::string(text) + "'");
    }
  };
  parse(text.substr(0, colon), key.class_id);
  if (colon != std::string_view::npos) parse(text.substr(colon + 1), key.level_id);
  return key;
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig config;
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    const std::string where = "config line " + std::to_string(line_no) + ": ";

    // strip comments outside quotes
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::InvalidConfig, where + "unterminated section");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "hyper" && section != "sim" && section != "run") {
        throw Error(ErrorCode::InvalidConfig, where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::InvalidConfig, where + "expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto raw = trim(line.substr(eq + 1));
    if (section.empty()) throw Error(ErrorCode::InvalidConfig, where + "key outside a section");
    const std::string full = section + "." + std::string(key);
    const auto it = setters().find(full);
    if (it == setters().end()) throw Error(ErrorCode::InvalidConfig, where + "unknown key '" + full + "'");
    try {
      it->second(config, parse_value(raw));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::InvalidConfig, where + full + ": " + e.what());
    }
    if (nl == text.size()) break;
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["hyper"] = {{"k", c.hyper.k},
                {"lambda", c.hyper.lambda},
                {"T", c.hyper.refresh_period},
                {"alpha1", c.hyper.alpha_global},
                {"alpha2", c.hyper.alpha_feat},
                {"alpha3", c.hyper.alpha_resp},
                {"temperature", c.hyper.temperature}};
  j["sim"] = {{"classes", c.sim.classes},
              {"n_per_class", c.sim.n_per_class},
              {"dim_t", c.sim.dim_t},
              {"dim_s", c.sim.dim_s},
              {"class_separation", c.sim.class_separation},
              {"teacher_cluster_spread", c.sim.teacher_cluster_spread},
              {"latent_rank", c.sim.latent_rank},
              {"residual_spread", c.sim.residual_spread},
              {"map_distortion", c.sim.map_distortion},
              {"map_matrix_seed", c.sim.map_matrix_seed},
              {"noise_seed", c.sim.noise_seed},
              {"noise_sigma", c.sim.noise_sigma},
              {"ambiguous_fraction", c.sim.ambiguous_fraction},
              {"ambiguous_noise_multiplier", c.sim.ambiguous_noise_multiplier},
              {"learning_rate", c.sim.learning_rate},
              {"epochs", c.sim.epochs},
              {"steps_per_epoch", c.sim.steps_per_epoch}};
  nlohmann::ordered_json run;
  run["seed"] = c.seed;
  run["seeds"] = c.seed_count;
  run["input"] = c.input;
  run["output"] = c.output;
  run["group"] = c.group ? nlohmann::ordered_json(std::to_string(c.group->class_id) + ":" +
                                                  std::to_string(c.group->level_id))
                         : nlohmann::ordered_json(nullptr);
  run["method"] = c.method;
  run["rectify"] = c.rectify;
  run["sigma"] = c.sigma == SigmaMode::Robust ? "robust" : "unit";
  run["projection"] = c.projection == ProjectionMode::Greedy ? "greedy" : "joint";
  run["bins"] = c.histogram_bins;
  j["run"] = std::move(run);
  return j;
}

}  // namespace protokd
