#pragma once

#include "patchsieve/descriptor.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace patchsieve {

// On-disk layout, all integers little-endian:
//   "PSEL" | u32 version | u32 kind | u64 count | u32 dim |
//   count × (u32 byte length, UTF-8 id) | count×dim f32, row-major
inline constexpr char kFeatureMagic[4] = {'P', 'S', 'E', 'L'};
inline constexpr std::uint32_t kFeatureVersion = 1;

class FeatureFormatError : public InputError {
public:
    enum class Reason { bad_magic, bad_version, bad_kind, truncated, trailing_data, duplicate_id, empty };

    FeatureFormatError(Reason reason, const std::string& message) : InputError(message), reason_(reason) {}
    Reason reason() const noexcept { return reason_; }

private:
    Reason reason_;
};

std::string encode_features(const DescriptorSet& set);

/// Parses exactly one feature payload; every byte of `bytes` must be consumed.
DescriptorSet decode_features(std::string_view bytes);

/// Refuses empty sets. The file is replaced atomically.
void write_features(const DescriptorSet& set, const std::string& path);
DescriptorSet read_features(const std::string& path);

}  // namespace patchsieve
