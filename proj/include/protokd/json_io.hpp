#pragma once

#include "json.hpp"
#include "protokd/baselines.hpp"
#include "protokd/distill_sim.hpp"
#include "protokd/feature_model.hpp"
#include "protokd/pgm.hpp"
#include "protokd/rdm.hpp"

namespace protokd {

using Json = nlohmann::ordered_json;

Json to_json(const PairedFeatureSet& set);
PairedFeatureSet set_from_json(const Json& j);

Json to_json(const PrototypeSet& protos);
Json to_json(const BasisComparison& comparison);
Json to_json(const EpochRecord& rec);
Json to_json(const SimTrace& trace);
Json to_json(const SimReport& report);

/// Inverse of to_json(SimTrace); throws ParseError on malformed input.
SimTrace trace_from_json(const Json& j);

}  // namespace protokd
