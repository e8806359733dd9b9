#include "protokd/pfs1.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "protokd/error.hpp"

namespace protokd {

namespace {

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(u & 0xFFu));
      u = static_cast<U>(u >> 8);
    }
  }

  void put_real(double v, bool wide) {
    if (wide) {
      put(std::bit_cast<std::uint64_t>(v));
    } else {
      put(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }

  void put_reals(const Vector& v, bool wide) {
    for (double x : v) put_real(x, wide);
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T get() {
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u = static_cast<U>(u | (static_cast<U>(in_[pos_ + i]) << (8 * i)));
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  double get_real(bool wide) {
    if (wide) return std::bit_cast<double>(get<std::uint64_t>());
    return static_cast<double>(std::bit_cast<float>(get<std::uint32_t>()));
  }

  Vector get_reals(std::size_t n, bool wide) {
    Vector v(n);
    for (double& x : v) x = get_real(wide);
    return v;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::size_t checked_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) {
    throw Error(ErrorCode::LengthMismatch, "declared payload size overflows");
  }
  return a * b;
}

std::size_t checked_add(std::size_t a, std::size_t b) {
  if (b > std::numeric_limits<std::size_t>::max() - a) {
    throw Error(ErrorCode::LengthMismatch, "declared payload size overflows");
  }
  return a + b;
}

}  // namespace

std::size_t pfs1_expected_size(std::uint16_t flags, std::uint64_t n, std::uint32_t dim_t,
                               std::uint32_t dim_s, std::uint32_t classes) {
  const std::size_t real = (flags & kPfs1Float64) ? 8 : 4;
  std::size_t per_record = 16;
  per_record = checked_add(per_record, checked_mul(real, std::size_t{dim_t} + dim_s));
  if (flags & kPfs1Logits) per_record = checked_add(per_record, checked_mul(real, 2 * std::size_t{classes}));
  if (flags & kPfs1Ambiguous) per_record = checked_add(per_record, 1);
  return checked_add(kPfs1HeaderSize, checked_mul(per_record, static_cast<std::size_t>(n)));
}

std::vector<std::uint8_t> encode_pfs1(const PairedFeatureSet& set, const Pfs1Options& options) {
  require_valid(set);
  const bool logits = set.has_logits();
  const bool ambiguous = set.records.front().ambiguous.has_value();
  for (const auto& r : set.records) {
    if (r.ambiguous.has_value() != ambiguous) {
      throw Error(ErrorCode::SchemaMismatch, "ambiguous flag present on some records only");
    }
  }
  const auto classes = logits ? static_cast<std::uint32_t>(set.records.front().logits_t->size()) : 0u;

  std::uint16_t flags = 0;
  if (options.float64) flags |= kPfs1Float64;
  if (logits) flags |= kPfs1Logits;
  if (ambiguous) flags |= kPfs1Ambiguous;

  std::vector<std::uint8_t> out;
  out.reserve(pfs1_expected_size(flags, set.size(), static_cast<std::uint32_t>(set.dim_t),
                                 static_cast<std::uint32_t>(set.dim_s), classes));
  Writer w(out);
  for (char c : {'P', 'F', 'S', '1'}) w.put(static_cast<std::uint8_t>(c));
  w.put(kPfs1Version);
  w.put(flags);
  w.put(static_cast<std::uint64_t>(set.size()));
  w.put(static_cast<std::uint32_t>(set.dim_t));
  w.put(static_cast<std::uint32_t>(set.dim_s));
  w.put(classes);
  for (const auto& r : set.records) {
    w.put(r.instance_id);
    w.put(r.group.class_id);
    w.put(r.group.level_id);
    w.put_reals(r.f_t, options.float64);
    w.put_reals(r.f_s, options.float64);
    if (logits) {
      w.put_reals(*r.logits_t, options.float64);
      w.put_reals(*r.logits_s, options.float64);
    }
    if (ambiguous) w.put(static_cast<std::uint8_t>(*r.ambiguous ? 1 : 0));
  }
  return out;
}

PairedFeatureSet decode_pfs1(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || bytes[0] != 'P' || bytes[1] != 'F' || bytes[2] != 'S' || bytes[3] != '1') {
    throw Error(ErrorCode::BadMagic, "not a PFS1 container");
  }
  if (bytes.size() < kPfs1HeaderSize) {
    throw Error(ErrorCode::TruncatedPayload, "header is truncated");
  }
  Reader rd(bytes.subspan(4));
  const auto version = rd.get<std::uint16_t>();
  if (version != kPfs1Version) {
    throw Error(ErrorCode::VersionUnsupported, "PFS1 version " + std::to_string(version));
  }
  const auto flags = rd.get<std::uint16_t>();
  if (flags & ~std::uint16_t{kPfs1Float64 | kPfs1Logits | kPfs1Ambiguous}) {
    throw Error(ErrorCode::SchemaMismatch, "reserved flag bits set");
  }
  const auto n = rd.get<std::uint64_t>();
  const auto dim_t = rd.get<std::uint32_t>();
  const auto dim_s = rd.get<std::uint32_t>();
  const auto classes = rd.get<std::uint32_t>();
  if ((flags & kPfs1Logits) && classes == 0) {
    throw Error(ErrorCode::SchemaMismatch, "logits flagged but C = 0");
  }
  const std::size_t expected = pfs1_expected_size(flags, n, dim_t, dim_s, classes);
  if (bytes.size() < expected) {
    throw Error(ErrorCode::TruncatedPayload, "payload has " + std::to_string(bytes.size()) +
                                                 " bytes, header declares " +
                                                 std::to_string(expected));
  }
  if (bytes.size() > expected) {
    throw Error(ErrorCode::LengthMismatch, "payload has " + std::to_string(bytes.size() - expected) +
                                               " trailing bytes");
  }

  const bool wide = flags & kPfs1Float64;
  PairedFeatureSet set;
  set.dim_t = dim_t;
  set.dim_s = dim_s;
  set.records.reserve(static_cast<std::size_t>(n));
  Reader body(bytes.subspan(kPfs1HeaderSize));
  for (std::uint64_t i = 0; i < n; ++i) {
    FeatureRecord r;
    r.instance_id = body.get<std::uint64_t>();
    r.group.class_id = body.get<std::uint32_t>();
    r.group.level_id = body.get<std::uint32_t>();
    r.f_t = body.get_reals(dim_t, wide);
    r.f_s = body.get_reals(dim_s, wide);
    if (flags & kPfs1Logits) {
      r.logits_t = body.get_reals(classes, wide);
      r.logits_s = body.get_reals(classes, wide);
    }
    if (flags & kPfs1Ambiguous) r.ambiguous = body.get<std::uint8_t>() != 0;
    set.records.push_back(std::move(r));
  }
  return set;
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace protokd
