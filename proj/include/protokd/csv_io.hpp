#pragma once

// CSV interchange for paired feature sets. Header row:
//   instance_id,class_id,level_id,ft_0..ft_{Dt-1},fs_0..fs_{Ds-1}
// optionally followed by lt_0..lt_{C-1},ls_0..ls_{C-1} and an `ambiguous` column.
// Reals are written in shortest round-trip form.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "protokd/feature_model.hpp"

namespace protokd {

struct CsvSchema {
  std::optional<std::size_t> dim_t;  // reject files whose header disagrees
  std::optional<std::size_t> dim_s;
  bool require_logits = false;
};

/// Throws SchemaMismatch for header problems, ParseError("row R, column C") for
/// bad cells, InvalidSet("row R: ...") when the parsed set fails validation.
PairedFeatureSet parse_csv(std::string_view text, const CsvSchema& schema = {});
PairedFeatureSet import_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

std::string format_csv(const PairedFeatureSet& set);
void export_csv(const std::filesystem::path& path, const PairedFeatureSet& set);

/// Shortest decimal text that parses back to the same double.
std::string format_real(double v);

}  // namespace protokd
