#include "patchsieve/feature_file.hpp"

#include <bit>
#include <cstring>
#include <unordered_set>

namespace patchsieve {

static_assert(std::endian::native == std::endian::little, "feature files assume a little-endian host");
static_assert(sizeof(float) == 4);

namespace {

using Reason = FeatureFormatError::Reason;

template <typename T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string_view take(std::size_t n, const char* what) {
        need(n, what);
        auto view = bytes_.substr(pos_, n);
        pos_ += n;
        return view;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n, const char* what) const {
        if (remaining() < n)
            throw FeatureFormatError(Reason::truncated, std::string("feature payload truncated while reading ") + what);
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_features(const DescriptorSet& set) {
    if (set.empty()) throw FeatureFormatError(Reason::empty, "refusing to write an empty descriptor set");
    set.validate();
    std::string out;
    out.reserve(24 + set.size() * (8 + static_cast<std::size_t>(set.dim()) * 4));
    out.append(kFeatureMagic, 4);
    put<std::uint32_t>(out, kFeatureVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(set.kind));
    put<std::uint64_t>(out, set.size());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim()));
    for (const auto& id : set.ids) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
        out.append(id);
    }
    // RowMajor storage is already the on-disk order.
    out.append(reinterpret_cast<const char*>(set.values.data()),
               static_cast<std::size_t>(set.values.size()) * sizeof(float));
    return out;
}

DescriptorSet decode_features(std::string_view bytes) {
    Reader in(bytes);
    if (bytes.size() < 4 && std::memcmp(bytes.data(), kFeatureMagic, bytes.size()) == 0)
        throw FeatureFormatError(Reason::truncated, "feature file truncated inside the magic");
    if (in.remaining() < 4 || std::memcmp(bytes.data(), kFeatureMagic, 4) != 0)
        throw FeatureFormatError(Reason::bad_magic, "not a feature file (magic 'PSEL' missing)");
    in.take(4, "magic");
    const auto version = in.get<std::uint32_t>("version");
    if (version != kFeatureVersion)
        throw FeatureFormatError(Reason::bad_version, "unsupported feature file version " + std::to_string(version));
    const auto kind_code = in.get<std::uint32_t>("kind");
    const auto kind = kind_from_code(kind_code);
    if (!kind) throw FeatureFormatError(Reason::bad_kind, "unknown descriptor kind code " + std::to_string(kind_code));
    const auto count = in.get<std::uint64_t>("count");
    const auto dim = in.get<std::uint32_t>("dim");

    DescriptorSet set;
    set.kind = *kind;
    // Each id costs at least its 4-byte length prefix.
    if (count > in.remaining() / 4)
        throw FeatureFormatError(Reason::truncated, "declared count " + std::to_string(count) + " exceeds payload");
    set.ids.reserve(count);
    std::unordered_set<std::string_view> seen;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = in.get<std::uint32_t>("id length");
        auto id = in.take(len, "id");
        if (!seen.insert(id).second)
            throw FeatureFormatError(Reason::duplicate_id, "duplicate id '" + std::string(id) + "'");
        set.ids.emplace_back(id);
    }
    const std::size_t floats = static_cast<std::size_t>(count) * dim;
    if (dim != 0 && floats / dim != count)
        throw FeatureFormatError(Reason::truncated, "declared matrix size overflows");
    auto matrix = in.take(floats * sizeof(float), "matrix");
    if (in.remaining() != 0)
        throw FeatureFormatError(Reason::trailing_data,
                                 std::to_string(in.remaining()) + " unexpected bytes after the feature matrix");
    set.values.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
    if (floats) std::memcpy(set.values.data(), matrix.data(), floats * sizeof(float));
    return set;
}

void write_features(const DescriptorSet& set, const std::string& path) {
    write_file_atomic(path, encode_features(set));
}

DescriptorSet read_features(const std::string& path) {
    try {
        return decode_features(read_file(path));
    } catch (const FeatureFormatError& e) {
        throw FeatureFormatError(e.reason(), path + ": " + e.what());
    }
}

}  // namespace patchsieve
