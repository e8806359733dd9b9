#pragma once

// PFS1 container, little-endian, no padding:
//
//   magic "PFS1" | version u16 | flags u16 | N u64 | D_t u32 | D_s u32 | C u32
//   per record: instance_id u64, class_id u32, level_id u32, f_t, f_s,
//               [logits_t, logits_s], [ambiguous u8]
//
// flags: bit 0 = 64-bit floats (else 32-bit), bit 1 = logits, bit 2 = ambiguous flags.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "protokd/feature_model.hpp"

namespace protokd {

inline constexpr std::uint16_t kPfs1Version = 1;
inline constexpr std::size_t kPfs1HeaderSize = 28;

enum Pfs1Flags : std::uint16_t {
  kPfs1Float64 = 1u << 0,
  kPfs1Logits = 1u << 1,
  kPfs1Ambiguous = 1u << 2,
};

struct Pfs1Options {
  bool float64 = true;
};

/// Validates the set first; optional fields must be present on all records or none.
std::vector<std::uint8_t> encode_pfs1(const PairedFeatureSet& set, const Pfs1Options& options = {});

PairedFeatureSet decode_pfs1(std::span<const std::uint8_t> bytes);

/// Expected payload size for a header; throws on overflow.
std::size_t pfs1_expected_size(std::uint16_t flags, std::uint64_t n, std::uint32_t dim_t,
                               std::uint32_t dim_s, std::uint32_t classes);

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace protokd
