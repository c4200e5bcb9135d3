#include "leafnet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace leafnet {

void AugmentConfig::validate() const {
    if (rotation_range < 0.0 || rotation_range > 180.0)
        throw std::invalid_argument("augment: rotation_range must be in [0,180]");
    if (zoom_range < 0.0 || zoom_range >= 1.0)
        throw std::invalid_argument("augment: zoom_range must be in [0,1)");
    if (shift_range < 0.0 || shift_range >= 1.0)
        throw std::invalid_argument("augment: shift_range must be in [0,1)");
}

size_t reflect_index(long long i, size_t n) {
    if (n == 1) return 0;
    const long long p = 2 * static_cast<long long>(n) - 2;
    long long r = i % p;
    if (r < 0) r += p;
    if (r >= static_cast<long long>(n)) r = p - r;
    return static_cast<size_t>(r);
}

static void check_image(const Tensor& img) {
    if (img.rank() != 3) throw std::invalid_argument("augment: image must be (C,H,W)");
}

Tensor horizontal_flip(const Tensor& img) {
    check_image(img);
    const size_t c = img.extent(0), h = img.extent(1), w = img.extent(2);
    Tensor out(img.shape());
    for (size_t k = 0; k < c; ++k)
        for (size_t i = 0; i < h; ++i)
            for (size_t j = 0; j < w; ++j) out.at3(k, i, j) = img.at3(k, i, w - 1 - j);
    return out;
}

// bilinear sample at continuous (y, x) with reflect fill, clamped to [0,1]
static double sample_reflect(const Tensor& img, size_t c, double y, double x) {
    const size_t h = img.extent(1), w = img.extent(2);
    const double fy = std::floor(y), fx = std::floor(x);
    const long long y0 = static_cast<long long>(fy), x0 = static_cast<long long>(fx);
    const double wy = y - fy, wx = x - fx;
    const size_t ry0 = reflect_index(y0, h), ry1 = reflect_index(y0 + 1, h);
    const size_t rx0 = reflect_index(x0, w), rx1 = reflect_index(x0 + 1, w);
    const double v = (1.0 - wy) * (1.0 - wx) * img.at3(c, ry0, rx0) +
                     (1.0 - wy) * wx * img.at3(c, ry0, rx1) +
                     wy * (1.0 - wx) * img.at3(c, ry1, rx0) +
                     wy * wx * img.at3(c, ry1, rx1);
    return std::clamp(v, 0.0, 1.0);
}

Tensor rotate(const Tensor& img, double angle_deg) {
    check_image(img);
    if (std::abs(angle_deg) > 180.0)
        throw std::invalid_argument("rotate: |angle| must be <= 180");
    double cs, sn;
    if (std::fmod(angle_deg, 90.0) == 0.0) {
        static const int table_c[4] = {1, 0, -1, 0};
        static const int table_s[4] = {0, 1, 0, -1};
        int k = static_cast<int>(angle_deg / 90.0) % 4;
        if (k < 0) k += 4;
        cs = table_c[k];
        sn = table_s[k];
    } else {
        const double rad = angle_deg * M_PI / 180.0;
        cs = std::cos(rad);
        sn = std::sin(rad);
    }
    const size_t c = img.extent(0), h = img.extent(1), w = img.extent(2);
    const double my = (static_cast<double>(h) - 1.0) / 2.0;
    const double mx = (static_cast<double>(w) - 1.0) / 2.0;
    Tensor out(img.shape());
    for (size_t k = 0; k < c; ++k)
        for (size_t i = 0; i < h; ++i)
            for (size_t j = 0; j < w; ++j) {
                const double yp = static_cast<double>(i) - my;
                const double xp = static_cast<double>(j) - mx;
                const double y = cs * yp - sn * xp + my;
                const double x = sn * yp + cs * xp + mx;
                out.at3(k, i, j) = sample_reflect(img, k, y, x);
            }
    return out;
}

Tensor zoom(const Tensor& img, double factor) {
    check_image(img);
    if (factor <= 0.0) throw std::invalid_argument("zoom: factor must be > 0");
    const size_t c = img.extent(0), h = img.extent(1), w = img.extent(2);
    const double my = (static_cast<double>(h) - 1.0) / 2.0;
    const double mx = (static_cast<double>(w) - 1.0) / 2.0;
    Tensor out(img.shape());
    for (size_t k = 0; k < c; ++k)
        for (size_t i = 0; i < h; ++i)
            for (size_t j = 0; j < w; ++j) {
                const double y = my + (static_cast<double>(i) - my) / factor;
                const double x = mx + (static_cast<double>(j) - mx) / factor;
                out.at3(k, i, j) = sample_reflect(img, k, y, x);
            }
    return out;
}

Tensor shift(const Tensor& img, double dx_frac, double dy_frac) {
    check_image(img);
    const size_t c = img.extent(0), h = img.extent(1), w = img.extent(2);
    const double oy = dy_frac * static_cast<double>(h);
    const double ox = dx_frac * static_cast<double>(w);
    Tensor out(img.shape());
    for (size_t k = 0; k < c; ++k)
        for (size_t i = 0; i < h; ++i)
            for (size_t j = 0; j < w; ++j)
                out.at3(k, i, j) =
                    sample_reflect(img, k, static_cast<double>(i) - oy,
                                   static_cast<double>(j) - ox);
    return out;
}

Tensor resize(const Tensor& img, size_t out_h, size_t out_w) {
    check_image(img);
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize: target extents must be >= 1");
    const size_t c = img.extent(0), h = img.extent(1), w = img.extent(2);
    const double sy = out_h > 1 ? double(h - 1) / double(out_h - 1) : 0.0;
    const double sx = out_w > 1 ? double(w - 1) / double(out_w - 1) : 0.0;
    Tensor out({c, out_h, out_w});
    for (size_t k = 0; k < c; ++k)
        for (size_t i = 0; i < out_h; ++i)
            for (size_t j = 0; j < out_w; ++j) {
                const double y = out_h > 1 ? sy * double(i) : double(h - 1) / 2.0;
                const double x = out_w > 1 ? sx * double(j) : double(w - 1) / 2.0;
                out.at3(k, i, j) = sample_reflect(img, k, y, x);
            }
    return out;
}

AugmentDraw draw_augment(const AugmentConfig& cfg, Rng& rng) {
    AugmentDraw d;
    const bool coin = rng.bernoulli(0.5);
    d.flip = cfg.horizontal_flip && coin;
    d.angle = rng.uniform(-cfg.rotation_range, cfg.rotation_range);
    d.zoom_factor = rng.uniform(1.0 - cfg.zoom_range, 1.0 + cfg.zoom_range);
    d.dx = rng.uniform(-cfg.shift_range, cfg.shift_range);
    d.dy = rng.uniform(-cfg.shift_range, cfg.shift_range);
    return d;
}

Tensor augment_sample(const Tensor& img, const AugmentConfig& cfg, uint64_t sample_key) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, 0x617567 /* "aug" */, sample_key));
    AugmentDraw d = draw_augment(cfg, rng);
    Tensor out = img;
    if (d.flip) out = horizontal_flip(out);
    if (d.angle != 0.0) out = rotate(out, d.angle);
    if (d.zoom_factor != 1.0) out = zoom(out, d.zoom_factor);
    if (d.dx != 0.0 || d.dy != 0.0) out = shift(out, d.dx, d.dy);
    return out;
}

}  // namespace leafnet
