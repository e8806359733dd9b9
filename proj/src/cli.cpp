#include "protokd/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "protokd/baselines.hpp"
#include "protokd/csv_io.hpp"
#include "protokd/distill_sim.hpp"
#include "protokd/error.hpp"
#include "protokd/json_io.hpp"
#include "protokd/pfs1.hpp"
#include "protokd/run_config.hpp"

namespace protokd {

namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::string input;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::string group;
  std::optional<std::size_t> k;
  std::optional<double> lambda;
  std::string method;
  bool float32 = false;
};

class Command {
 public:
  Command(std::string name, const Flags& flags, std::ostream& out, std::ostream& err)
      : name_(std::move(name)), flags_(flags), out_(out), err_(err) {
    if (!flags.config.empty()) config_ = load_run_config(flags.config);
    if (!flags.input.empty()) config_.input = flags.input;
    if (!flags.output.empty()) config_.output = flags.output;
    if (flags.seed) {
      config_.seed = *flags.seed;
      const auto fixture = noisy_fixture(*flags.seed);
      config_.sim.map_matrix_seed = fixture.map_matrix_seed;
      config_.sim.noise_seed = fixture.noise_seed;
    }
    if (!flags.group.empty()) config_.group = parse_group_key(flags.group);
    if (flags.k) config_.hyper.k = *flags.k;
    if (flags.lambda) config_.hyper.lambda = *flags.lambda;
    if (!flags.method.empty()) config_.method = flags.method;
    check_hyperparams(config_.hyper);
  }

  const RunConfig& config() const { return config_; }

  Json manifest() const {
    Json m;
    m["tool"] = "protokd";
    m["version"] = std::string(kVersion);
    m["subcommand"] = name_;
    m["config"] = to_json(config_);
    m["seeds"] = {{"seed", config_.seed},
                  {"map_matrix_seed", config_.sim.map_matrix_seed},
                  {"noise_seed", config_.sim.noise_seed}};
    return m;
  }

  PairedFeatureSet load_input() const {
    if (config_.input.empty()) throw Error(ErrorCode::InvalidConfig, "--in is required");
    if (fs::path(config_.input).extension() == ".csv") return import_csv(config_.input);
    return decode_pfs1(read_binary_file(config_.input));
  }

  /// Writes the result JSON (with embedded manifest) and the manifest sidecar.
  void emit(Json body) const {
    Json doc;
    doc["manifest"] = manifest();
    for (auto& [key, value] : body.items()) doc[key] = std::move(value);
    const std::string text = doc.dump(2) + "\n";
    if (config_.output.empty()) {
      out_ << text;
      return;
    }
    write_text(config_.output, text);
    write_text(sidecar(".manifest.json"), manifest().dump(2) + "\n");
  }

  /// Tabular companion output; skipped when results go to stdout.
  void emit_csv(const std::string& text) const {
    if (!config_.output.empty()) write_text(sidecar(".csv"), text);
  }

  void warn(const std::string& message) const { err_ << "warning: " << message << "\n"; }

 private:
  fs::path sidecar(const std::string& suffix) const {
    fs::path p(config_.output);
    return p.parent_path() / (p.stem().string() + suffix);
  }

  static void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    f << text;
  }

  std::string name_;
  Flags flags_;
  RunConfig config_;
  std::ostream& out_;
  std::ostream& err_;
};

RdmOptions rdm_options(const RunConfig& c) { return {c.projection, c.sigma}; }

PrototypeMap select_prototypes(const Command& cmd, const PairedFeatureSet& set) {
  const auto& c = cmd.config();
  PrototypeMap protos;
  if (c.group) {
    require_valid(set);
    protos.emplace(*c.group, generate_prototypes(set, *c.group, c.hyper));
  } else {
    protos = generate_all_groups(set, c.hyper);
  }
  for (const auto& [key, ps] : protos) {
    for (const auto& w : ps.warnings) cmd.warn(w);
  }
  return protos;
}

/// Records restricted to the selected group, if any.
PairedFeatureSet restrict_to_group(const PairedFeatureSet& set, const std::optional<GroupKey>& group) {
  if (!group) return set;
  PairedFeatureSet out{set.dim_t, set.dim_s, {}};
  for (const auto& r : set.records) {
    if (r.group == *group) out.records.push_back(r);
  }
  if (out.records.empty()) throw Error(ErrorCode::EmptyGroup, "no records in " + to_string(*group));
  return out;
}

int cmd_validate(const Command& cmd) {
  const auto set = cmd.load_input();
  const auto report = validate(set);
  Json violations = Json::array();
  for (const auto& v : report.violations) {
    violations.push_back({{"record", v.record ? Json(*v.record) : Json(nullptr)}, {"reason", v.reason}});
  }
  Json groups = Json::array();
  for (const auto& key : group_keys(set)) {
    groups.push_back({{"class_id", key.class_id},
                      {"level_id", key.level_id},
                      {"count", group_members(set, key).size()}});
  }
  cmd.emit({{"valid", report.ok()},
            {"records", set.size()},
            {"dim_t", set.dim_t},
            {"dim_s", set.dim_s},
            {"groups", std::move(groups)},
            {"violations", std::move(violations)}});
  if (!report.ok()) {
    throw Error(ErrorCode::InvalidSet, std::to_string(report.violations.size()) + " violation(s)");
  }
  return kExitOk;
}

/// Baseline basis per group, K capped at the group size.
BasisSelection baseline_select(const PairedFeatureSet& set, const GroupKey& key, BasisMethod method,
                               std::size_t k, std::uint64_t seed) {
  k = std::min(k, group_members(set, key).size());
  switch (method) {
    case BasisMethod::KMeansTeacher: return kmeans_select(set, key, FeatureSpace::Teacher, k, seed);
    case BasisMethod::KMeansStudent: return kmeans_select(set, key, FeatureSpace::Student, k, seed);
    case BasisMethod::Random: return random_select(set, key, k, seed);
    case BasisMethod::Ambiguous: return ambiguous_select(set, key, k);
    case BasisMethod::Prototypes: break;
  }
  throw Error(ErrorCode::InvalidConfig, "not a baseline method");
}

int cmd_select(const Command& cmd) {
  const auto& c = cmd.config();
  const auto set = cmd.load_input();
  const auto method = parse_method(c.method);
  Json groups = Json::array();
  if (method == BasisMethod::Prototypes) {
    for (const auto& [key, ps] : select_prototypes(cmd, set)) groups.push_back(to_json(ps));
  } else {
    require_valid(set);
    const auto keys = c.group ? std::vector<GroupKey>{*c.group} : group_keys(set);
    for (const auto& key : keys) {
      if (group_members(set, key).empty()) throw Error(ErrorCode::EmptyGroup, "no records in " + to_string(key));
      const auto sel = baseline_select(set, key, method, c.hyper.k, c.seed);
      groups.push_back({{"class_id", key.class_id},
                        {"level_id", key.level_id},
                        {"method", std::string(method_name(method))},
                        {"positions", sel.positions},
                        {"instance_ids", sel.instance_ids}});
    }
  }
  cmd.emit({{"groups", std::move(groups)}});
  return kExitOk;
}

int cmd_project(const Command& cmd) {
  const auto& c = cmd.config();
  const auto set = restrict_to_group(cmd.load_input(), c.group);
  const auto protos = select_prototypes(cmd, set);
  const auto projections = project_all(set, protos, c.hyper.lambda, c.projection);
  Json instances = Json::array();
  std::string csv = "instance_id,class_id,level_id,k,lambda_t,lambda_s\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& r = set.records[i];
    instances.push_back({{"instance_id", r.instance_id},
                         {"class_id", r.group.class_id},
                         {"level_id", r.group.level_id},
                         {"lambda_t", projections[i].lambda_t},
                         {"lambda_s", projections[i].lambda_s}});
    for (std::size_t j = 0; j < projections[i].lambda_t.size(); ++j) {
      csv += std::to_string(r.instance_id) + ',' + std::to_string(r.group.class_id) + ',' +
             std::to_string(r.group.level_id) + ',' + std::to_string(j) + ',' +
             format_real(projections[i].lambda_t[j]) + ',' + format_real(projections[i].lambda_s[j]) + '\n';
    }
  }
  cmd.emit({{"instances", std::move(instances)}});
  cmd.emit_csv(csv);
  return kExitOk;
}

int cmd_weights(const Command& cmd) {
  const auto& c = cmd.config();
  const auto set = restrict_to_group(cmd.load_input(), c.group);
  const auto protos = select_prototypes(cmd, set);
  const auto projections = project_all(set, protos, c.hyper.lambda, c.projection);

  std::vector<double> sigma;
  std::vector<bool> flags;
  bool have_flags = true;
  std::string csv = "instance_id,class_id,level_id,discrepancy,sigma\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& r = set.records[i];
    const double s = c.sigma == SigmaMode::Unit ? 1.0 : robust_weight(projections[i]).sigma;
    double sq = 0.0;
    for (std::size_t j = 0; j < projections[i].lambda_t.size(); ++j) {
      const double d = projections[i].lambda_s[j] - projections[i].lambda_t[j];
      sq += d * d;
    }
    sigma.push_back(s);
    have_flags = have_flags && r.ambiguous.has_value();
    flags.push_back(r.ambiguous.value_or(false));
    csv += std::to_string(r.instance_id) + ',' + std::to_string(r.group.class_id) + ',' +
           std::to_string(r.group.level_id) + ',' + format_real(std::sqrt(sq)) + ',' + format_real(s) + '\n';
  }
  const double mean = sigma.empty() ? 0.0 : std::accumulate(sigma.begin(), sigma.end(), 0.0) / sigma.size();
  std::optional<double> auc;
  if (have_flags) auc = sigma_separation_auc(sigma, flags);
  cmd.emit({{"sigma", sigma},
            {"sigma_mean", mean},
            {"sigma_auc", auc ? Json(*auc) : Json(nullptr)}});
  cmd.emit_csv(csv);
  return kExitOk;
}

double gradient_norm(const std::vector<Vector>& grads) {
  double s = 0.0;
  for (const auto& g : grads) {
    for (double v : g) s += v * v;
  }
  return std::sqrt(s);
}

int cmd_losses(const Command& cmd) {
  const auto& c = cmd.config();
  const auto set = restrict_to_group(cmd.load_input(), c.group);
  const auto protos = select_prototypes(cmd, set);
  const auto adapt = AdaptationMap::identity(set.dim_t, set.dim_s, c.rectify);
  const auto loss = total_loss(set, protos, adapt, c.hyper, rdm_options(c));
  cmd.emit({{"global", loss.global},
            {"local_feat", loss.local_feat},
            {"local_resp", loss.local_resp},
            {"total", loss.total},
            {"alpha", {loss.alpha_global, loss.alpha_feat, loss.alpha_resp}},
            {"grad_student_norm", gradient_norm(loss.grad_student)},
            {"grad_adaptation_norm", loss.grad_adaptation.norm()},
            {"grad_student_logits_norm", gradient_norm(loss.grad_student_logits)}});
  return kExitOk;
}

int cmd_compare_bases(const Command& cmd) {
  const auto& c = cmd.config();
  const auto set = restrict_to_group(cmd.load_input(), c.group);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < c.seed_count; ++i) seeds.push_back(c.seed + i);
  const auto table = compare_bases(set, c.hyper, seeds, c.histogram_bins);

  std::string csv = "bin_lo,bin_hi";
  for (const auto& m : table.methods) csv += "," + std::string(method_name(m.method));
  csv += "\n";
  if (!table.methods.empty()) {
    const auto& h = table.methods.front().histogram;
    const double width = (h.hi - h.lo) / static_cast<double>(h.counts.size());
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      csv += format_real(h.lo + width * b) + "," + format_real(h.lo + width * (b + 1));
      for (const auto& m : table.methods) csv += "," + std::to_string(m.histogram.counts[b]);
      csv += "\n";
    }
  }
  cmd.emit({{"comparison", to_json(table)}});
  cmd.emit_csv(csv);
  return kExitOk;
}

int cmd_simulate(const Command& cmd) {
  const auto& c = cmd.config();
  const auto set = c.input.empty() ? synth_generate(c.sim) : cmd.load_input();
  SimOptions options{rdm_options(c), c.rectify};
  const auto trace = run_distillation(set, c.hyper, c.sim, options);
  const auto report = report_metrics(trace, set);
  cmd.emit({{"report", to_json(report)}, {"trace", to_json(trace)}});

  std::string csv = "epoch,refreshed,global,local_feat,local_resp,total,mean_discrepancy\n";
  auto row = [&](const EpochRecord& e) {
    csv += std::to_string(e.epoch) + ',' + (e.refreshed ? "1" : "0") + ',' + format_real(e.global) + ',' +
           format_real(e.local_feat) + ',' + format_real(e.local_resp) + ',' + format_real(e.total) + ',' +
           format_real(e.mean_discrepancy) + '\n';
  };
  for (const auto& e : trace.epochs) row(e);
  row(trace.final_state);
  cmd.emit_csv(csv);
  return kExitOk;
}

int cmd_report(const Command& cmd) {
  const auto& c = cmd.config();
  if (c.input.empty()) throw Error(ErrorCode::InvalidConfig, "--in is required");
  std::ifstream in(c.input);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + c.input);
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("trace is not JSON: ") + e.what());
  }
  const auto trace = trace_from_json(doc.contains("trace") ? doc.at("trace") : doc);
  PairedFeatureSet flags_only = trace.final_set;
  for (std::size_t i = 0; i < flags_only.size() && i < trace.ambiguous.size(); ++i) {
    flags_only.records[i].ambiguous = static_cast<bool>(trace.ambiguous[i]);
  }
  cmd.emit({{"report", to_json(report_metrics(trace, flags_only))}});
  return kExitOk;
}

void write_set(const fs::path& path, const PairedFeatureSet& set, bool float32) {
  if (path.extension() == ".csv") {
    export_csv(path, set);
  } else {
    write_binary_file(path, encode_pfs1(set, {.float64 = !float32}));
  }
}

int cmd_convert(const Command& cmd, const Flags& flags) {
  const auto& c = cmd.config();
  if (c.output.empty()) throw Error(ErrorCode::InvalidConfig, "--out is required");
  write_set(c.output, cmd.load_input(), flags.float32);
  return kExitOk;
}

int cmd_synth(const Command& cmd, const Flags& flags) {
  const auto& c = cmd.config();
  if (c.output.empty()) throw Error(ErrorCode::InvalidConfig, "--out is required");
  write_set(c.output, synth_generate(c.sim), flags.float32);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prototype selection and robust distillation toolkit", "protokd"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  Flags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "run configuration file");
    sub->add_option("--in", flags.input, "input file (.pfs1, .csv, or trace .json for report)");
    sub->add_option("--out", flags.output, "output file; stdout when omitted");
    sub->add_option("--seed", flags.seed, "base seed");
    sub->add_option("--group", flags.group, "restrict to one group, CLASS or CLASS:LEVEL");
    sub->add_option("--k", flags.k, "prototypes per group");
    sub->add_option("--lambda", flags.lambda, "coupling weight");
    sub->add_option("--method", flags.method, "basis method");
  };

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"validate", "check a feature set against the data model"},
      {"select", "generate prototypes per group"},
      {"project", "project instances onto their group's prototypes"},
      {"weights", "per-instance robustness weights"},
      {"losses", "distillation loss breakdown"},
      {"compare-bases", "relation discrepancy of prototypes vs baseline bases"},
      {"simulate", "run the feature-level distillation simulation"},
      {"report", "metrics from a simulation trace"},
      {"convert", "convert between .pfs1 and .csv"},
      {"synth", "write a synthetic paired feature set"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub);
    if (name == "convert" || name == "synth") {
      sub->add_flag("--float32", flags.float32, "write 32-bit reals in PFS1 output");
    }
    subs.push_back(sub);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: Usage: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  std::string name;
  for (auto* sub : subs) {
    if (sub->parsed()) name = sub->get_name();
  }

  try {
    Command cmd(name, flags, out, err);
    parse_method(cmd.config().method);
    if (name == "validate") return cmd_validate(cmd);
    if (name == "select") return cmd_select(cmd);
    if (name == "project") return cmd_project(cmd);
    if (name == "weights") return cmd_weights(cmd);
    if (name == "losses") return cmd_losses(cmd);
    if (name == "compare-bases") return cmd_compare_bases(cmd);
    if (name == "simulate") return cmd_simulate(cmd);
    if (name == "report") return cmd_report(cmd);
    if (name == "convert") return cmd_convert(cmd, flags);
    if (name == "synth") return cmd_synth(cmd, flags);
    err << "error: Usage: unknown subcommand\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidConfig ? kExitUsage : kExitDataError;
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << "\n";
    return kExitDataError;
  }
}

}  // namespace protokd
