#include "patchsieve/common.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>

namespace patchsieve {

std::string_view to_string(ErrorCategory category) {
    switch (category) {
        case ErrorCategory::usage: return "usage";
        case ErrorCategory::input_format: return "input_format";
        case ErrorCategory::numerical: return "numerical";
    }
    return "unknown";
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
    // FNV-1a over the label, then mixed with the root.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(root) ^ h);
}

std::string make_patch_id(std::string_view scan_id, int grid_x, int grid_y) {
    std::string id(scan_id);
    id += "_x";
    id += std::to_string(grid_x);
    id += "_y";
    id += std::to_string(grid_y);
    return id;
}

PatchRef parse_patch_id(std::string_view id) {
    auto fail = [&] {
        return InputError("patch id '" + std::string(id) + "' does not match <scan_id>_x<gx>_y<gy>");
    };
    const auto y_pos = id.rfind("_y");
    if (y_pos == std::string_view::npos) throw fail();
    const auto x_pos = id.rfind("_x", y_pos);
    if (x_pos == std::string_view::npos || x_pos == 0) throw fail();

    auto parse_int = [&](std::string_view digits) {
        int value = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
        if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size() || value < 0)
            throw fail();
        return value;
    };
    PatchRef ref;
    ref.scan_id = std::string(id.substr(0, x_pos));
    ref.grid_x = parse_int(id.substr(x_pos + 2, y_pos - x_pos - 2));
    ref.grid_y = parse_int(id.substr(y_pos + 2));
    return ref;
}

std::string sha256_bytes(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string sha256_file(const std::string& path) { return sha256_bytes(read_file(path)); }

std::string utc_timestamp() {
    std::time_t t = 0;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
        t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file_atomic(const std::string& path, std::string_view bytes) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot open '" + tmp.string() + "' for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw InputError("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace patchsieve
