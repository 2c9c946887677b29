#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace patchsieve {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RowMatrixXf = RowMatrix<float>;
using RowMatrixXd = RowMatrix<double>;

// Maps onto the CLI exit codes: usage 1, input format 2, numerical 3.
enum class ErrorCategory { usage = 1, input_format = 2, numerical = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& m) : Error(ErrorCategory::usage, m) {}
};
struct InputError : Error {
    explicit InputError(const std::string& m) : Error(ErrorCategory::input_format, m) {}
};
struct NumericalError : Error {
    explicit NumericalError(const std::string& m) : Error(ErrorCategory::numerical, m) {}
};

std::string_view to_string(ErrorCategory category);

/// Expands a root seed into an independent per-stage seed keyed by a stable
/// label (e.g. "som/scan_03"). Pure function of its inputs.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

/// Unbiased integer in [0, bound) drawn from a 64-bit engine. Avoids the
/// implementation-defined std::uniform_int_distribution so draws are identical
/// across standard libraries.
template <typename Engine>
std::uint64_t bounded(Engine& engine, std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t draw = 0;
    do {
        draw = engine();
    } while (draw >= limit);
    return draw % bound;
}

/// Uniform double in [0, 1) using the top 53 bits of one draw.
template <typename Engine>
double unit_uniform(Engine& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

/// Patch identifiers have the form `<scan_id>_x<grid_x>_y<grid_y>`.
std::string make_patch_id(std::string_view scan_id, int grid_x, int grid_y);

struct PatchRef {
    std::string scan_id;
    int grid_x = 0;
    int grid_y = 0;
};

/// Parses a patch id; throws InputError when it does not follow the pattern.
PatchRef parse_patch_id(std::string_view id);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);
std::string sha256_bytes(std::string_view bytes);

/// UTC timestamp in ISO-8601. Honours SOURCE_DATE_EPOCH when set.
std::string utc_timestamp();

/// Writes bytes to `path` through a temporary file and a rename.
void write_file_atomic(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);

}  // namespace patchsieve
