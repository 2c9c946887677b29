#include "patchsieve/lbp.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace patchsieve {

int LbpScale::margin() const { return static_cast<int>(std::ceil(radius)); }

int LbpConfig::dim() const {
    int total = 0;
    for (const auto& s : scales) total += s.bins();
    return total;
}

void LbpConfig::validate() const {
    if (scales.empty()) throw UsageError("lbp.scales must not be empty");
    for (const auto& s : scales) {
        if (s.neighbors < 4 || s.neighbors > 32) throw UsageError("lbp neighbors must lie in [4, 32]");
        if (!(s.radius >= 1.0)) throw UsageError("lbp radius must be >= 1");
    }
}

namespace {

// Interpolated samples within this distance of the center count as equal.
constexpr double kTieTolerance = 1e-9;

double snap(double v) {
    const double r = std::round(v);
    if (std::abs(v - r) < 1e-9) return r == 0.0 ? 0.0 : r;
    return v;
}

struct Sampler {
    explicit Sampler(const LbpScale& s) : scale(s), offsets(lbp_offsets(s)) {
        for (const auto& o : offsets) {
            Tap t;
            t.ix = static_cast<int>(std::floor(o.x()));
            t.iy = static_cast<int>(std::floor(o.y()));
            t.fx = o.x() - t.ix;
            t.fy = o.y() - t.iy;
            taps.push_back(t);
        }
    }

    struct Tap {
        int ix, iy;
        double fx, fy;
    };

    // a + f(b - a) keeps constant neighborhoods exact.
    double sample(const Image& g, int x, int y, const Tap& t) const {
        const int x0 = x + t.ix;
        const int y0 = y + t.iy;
        const double a = g.at(x0, y0);
        const double b = t.fx > 0.0 ? g.at(x0 + 1, y0) : a;
        if (t.fy == 0.0) return a + t.fx * (b - a);
        const double c = g.at(x0, y0 + 1);
        const double d = t.fx > 0.0 ? g.at(x0 + 1, y0 + 1) : c;
        const double top = a + t.fx * (b - a);
        const double bot = c + t.fx * (d - c);
        return top + t.fy * (bot - top);
    }

    int code(const Image& g, int x, int y) const {
        const double center = g.at(x, y);
        const int p = scale.neighbors;
        std::uint32_t bits = 0;
        for (int k = 0; k < p; ++k)
            if (sample(g, x, y, taps[k]) >= center - kTieTolerance) bits |= 1u << k;
        const std::uint32_t mask = p == 32 ? ~0u : ((1u << p) - 1u);
        const std::uint32_t rotated = ((bits >> 1) | (bits << (p - 1))) & mask;
        const int transitions = std::popcount(bits ^ rotated);
        return transitions <= 2 ? std::popcount(bits) : p + 1;
    }

    LbpScale scale;
    std::vector<Eigen::Vector2d> offsets;
    std::vector<Tap> taps;
};

void check_image(const Image& gray) {
    if (gray.channels != 1) throw UsageError("lbp expects a single-channel image");
}

}  // namespace

std::vector<Eigen::Vector2d> lbp_offsets(const LbpScale& scale) {
    const int p = scale.neighbors;
    std::vector<Eigen::Vector2d> out(static_cast<std::size_t>(p));
    auto direct = [&](int k) {
        const double angle = 2.0 * std::numbers::pi * k / p;
        return Eigen::Vector2d(snap(scale.radius * std::cos(angle)), snap(-scale.radius * std::sin(angle)));
    };
    if (p % 4 != 0) {
        for (int k = 0; k < p; ++k) out[k] = direct(k);
        return out;
    }
    const int quarter = p / 4;
    for (int k = 0; k < quarter; ++k) out[k] = direct(k);
    // Each further quarter is the previous one turned by 90°: (dx, dy) -> (dy, -dx).
    for (int k = quarter; k < p; ++k) {
        const auto& prev = out[k - quarter];
        out[k] = Eigen::Vector2d(prev.y(), prev.x() == 0.0 ? 0.0 : -prev.x());
    }
    return out;
}

int lbp_code(const Image& gray, int x, int y, const LbpScale& scale) {
    check_image(gray);
    const int m = scale.margin();
    if (x < m || y < m || x >= gray.width - m || y >= gray.height - m)
        throw UsageError("lbp_code: pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                         ") is closer than " + std::to_string(m) + " pixels to the border");
    return Sampler(scale).code(gray, x, y);
}

Eigen::VectorXd lbp_histogram(const Image& gray, const LbpScale& scale, bool normalize) {
    check_image(gray);
    const int min_side = static_cast<int>(std::floor(2.0 * scale.radius + 1.0)) + 1;
    if (gray.width < min_side || gray.height < min_side)
        throw InputError("image " + std::to_string(gray.width) + "x" + std::to_string(gray.height) +
                         " too small for lbp radius " + std::to_string(scale.radius) +
                         ": minimum side is " + std::to_string(min_side));
    const Sampler sampler(scale);
    const int m = scale.margin();
    Eigen::VectorXd hist = Eigen::VectorXd::Zero(scale.bins());
    for (int y = m; y < gray.height - m; ++y)
        for (int x = m; x < gray.width - m; ++x) hist[sampler.code(gray, x, y)] += 1.0;
    if (normalize) hist /= hist.sum();
    return hist;
}

Eigen::VectorXd lbp_vector(const Image& image, const LbpConfig& cfg) {
    cfg.validate();
    const Image gray = to_grayscale(image);
    Eigen::VectorXd out(cfg.dim());
    Eigen::Index offset = 0;
    for (const auto& s : cfg.scales) {
        out.segment(offset, s.bins()) = lbp_histogram(gray, s, cfg.normalize);
        offset += s.bins();
    }
    return out;
}

Descriptor lbp_descriptor(const Patch& patch, const LbpConfig& cfg) {
    if (cfg.dim() != 36)
        throw UsageError("lbp scales yield " + std::to_string(cfg.dim()) + " bins; lbp36 descriptors need 36");
    return Descriptor{patch.id(), DescriptorKind::lbp36, lbp_vector(patch.pixels, cfg).cast<float>()};
}

}  // namespace patchsieve
