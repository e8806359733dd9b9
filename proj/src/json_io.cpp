#include "protokd/json_io.hpp"

#include <string>

#include "protokd/error.hpp"

namespace protokd {

namespace {

Json group_json(const GroupKey& key) { return {{"class_id", key.class_id}, {"level_id", key.level_id}}; }

GroupKey group_from(const Json& j) {
  return {j.at("class_id").get<std::uint32_t>(), j.at("level_id").get<std::uint32_t>()};
}

Json optional_real(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const PairedFeatureSet& set) {
  Json records = Json::array();
  for (const auto& r : set.records) {
    Json jr = {{"instance_id", r.instance_id},
               {"class_id", r.group.class_id},
               {"level_id", r.group.level_id},
               {"f_t", r.f_t},
               {"f_s", r.f_s}};
    if (r.logits_t) jr["logits_t"] = *r.logits_t;
    if (r.logits_s) jr["logits_s"] = *r.logits_s;
    if (r.ambiguous) jr["ambiguous"] = *r.ambiguous;
    records.push_back(std::move(jr));
  }
  return {{"dim_t", set.dim_t}, {"dim_s", set.dim_s}, {"records", std::move(records)}};
}

PairedFeatureSet set_from_json(const Json& j) {
  PairedFeatureSet set;
  set.dim_t = j.at("dim_t").get<std::size_t>();
  set.dim_s = j.at("dim_s").get<std::size_t>();
  for (const auto& jr : j.at("records")) {
    FeatureRecord r;
    r.instance_id = jr.at("instance_id").get<std::uint64_t>();
    r.group = group_from(jr);
    r.f_t = jr.at("f_t").get<Vector>();
    r.f_s = jr.at("f_s").get<Vector>();
    if (jr.contains("logits_t")) r.logits_t = jr.at("logits_t").get<Vector>();
    if (jr.contains("logits_s")) r.logits_s = jr.at("logits_s").get<Vector>();
    if (jr.contains("ambiguous")) r.ambiguous = jr.at("ambiguous").get<bool>();
    set.records.push_back(std::move(r));
  }
  return set;
}

Json to_json(const PrototypeSet& p) {
  Json j = group_json(p.group);
  j["instance_ids"] = p.instance_ids;
  j["positions"] = p.positions;
  j["objectives"] = p.objectives;
  j["lambda"] = p.lambda_used;
  j["capped"] = p.capped;
  return j;
}

Json to_json(const BasisComparison& c) {
  Json methods = Json::array();
  for (const auto& m : c.methods) {
    methods.push_back({{"method", std::string(method_name(m.method))},
                       {"mean", m.mean},
                       {"median", m.median},
                       {"seed_means", m.seed_means},
                       {"histogram",
                        {{"lo", m.histogram.lo}, {"hi", m.histogram.hi}, {"counts", m.histogram.counts}}}});
  }
  return {{"seeds", c.seeds}, {"methods", std::move(methods)}};
}

Json to_json(const EpochRecord& rec) {
  Json protos = Json::array();
  for (const auto& [key, ids] : rec.prototype_ids) {
    Json jp = group_json(key);
    jp["instance_ids"] = ids;
    protos.push_back(std::move(jp));
  }
  return {{"epoch", rec.epoch},
          {"refreshed", rec.refreshed},
          {"global", rec.global},
          {"local_feat", rec.local_feat},
          {"local_resp", rec.local_resp},
          {"total", rec.total},
          {"mean_discrepancy", rec.mean_discrepancy},
          {"sigma_mean_clean", rec.sigma_mean_clean},
          {"sigma_mean_ambiguous", optional_real(rec.sigma_mean_ambiguous)},
          {"prototypes", std::move(protos)}};
}

namespace {

EpochRecord epoch_from(const Json& j) {
  EpochRecord rec;
  rec.epoch = j.at("epoch").get<std::size_t>();
  rec.refreshed = j.at("refreshed").get<bool>();
  rec.global = j.at("global").get<double>();
  rec.local_feat = j.at("local_feat").get<double>();
  rec.local_resp = j.at("local_resp").get<double>();
  rec.total = j.at("total").get<double>();
  rec.mean_discrepancy = j.at("mean_discrepancy").get<double>();
  rec.sigma_mean_clean = j.at("sigma_mean_clean").get<double>();
  if (!j.at("sigma_mean_ambiguous").is_null()) {
    rec.sigma_mean_ambiguous = j.at("sigma_mean_ambiguous").get<double>();
  }
  for (const auto& jp : j.at("prototypes")) {
    rec.prototype_ids[group_from(jp)] = jp.at("instance_ids").get<std::vector<std::uint64_t>>();
  }
  return rec;
}

}  // namespace

Json to_json(const SimTrace& t) {
  Json epochs = Json::array();
  for (const auto& e : t.epochs) epochs.push_back(to_json(e));
  const auto& m = t.final_adaptation.matrix;
  std::vector<double> data;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  std::vector<int> flags(t.ambiguous.begin(), t.ambiguous.end());
  return {{"refresh_count", t.refresh_count},
          {"epochs", std::move(epochs)},
          {"final", to_json(t.final_state)},
          {"final_sigma", t.final_sigma},
          {"ambiguous", flags},
          {"final_adaptation",
           {{"rows", m.rows()}, {"cols", m.cols()}, {"rectify", t.final_adaptation.rectify}, {"data", data}}},
          {"final_set", to_json(t.final_set)}};
}

SimTrace trace_from_json(const Json& j) {
  try {
    SimTrace t;
    t.refresh_count = j.at("refresh_count").get<std::size_t>();
    for (const auto& e : j.at("epochs")) t.epochs.push_back(epoch_from(e));
    t.final_state = epoch_from(j.at("final"));
    t.final_sigma = j.at("final_sigma").get<std::vector<double>>();
    for (int f : j.at("ambiguous").get<std::vector<int>>()) t.ambiguous.push_back(f != 0);
    const auto& ja = j.at("final_adaptation");
    const auto rows = ja.at("rows").get<Eigen::Index>();
    const auto cols = ja.at("cols").get<Eigen::Index>();
    const auto data = ja.at("data").get<std::vector<double>>();
    if (data.size() != static_cast<std::size_t>(rows * cols)) {
      throw Error(ErrorCode::ParseError, "adaptation matrix size mismatch");
    }
    t.final_adaptation.matrix.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) t.final_adaptation.matrix(r, c) = data[r * cols + c];
    }
    t.final_adaptation.rectify = ja.at("rectify").get<bool>();
    t.final_set = set_from_json(j.at("final_set"));
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed trace: ") + e.what());
  }
}

Json to_json(const SimReport& r) {
  return {{"total_curve", r.total_curve},
          {"sigma_auc", optional_real(r.sigma_auc)},
          {"discrepancy_reduction", r.discrepancy_reduction},
          {"loss_reduction", r.loss_reduction},
          {"clean_feature_error", r.clean_feature_error}};
}

}  // namespace protokd
