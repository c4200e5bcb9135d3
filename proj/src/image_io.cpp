#include "leafnet/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#ifdef LEAFNET_HAVE_PNG
#include <png.h>
#endif

namespace leafnet {

namespace fs = std::filesystem;

static std::string lower_ext(const fs::path& path) {
    std::string e = path.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e;
}

bool image_format_supported(const fs::path& path) {
    const std::string e = lower_ext(path);
    if (e == ".ppm" || e == ".pgm") return true;
#ifdef LEAFNET_HAVE_PNG
    if (e == ".png") return true;
#endif
    return false;
}

// skips whitespace and '#' comment lines in a PNM header
static int pnm_token(std::istream& in) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw std::runtime_error("PNM: truncated header");
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = in.get();
    }
    return v;
}

static Tensor read_pnm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image file: " + path.string());
    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || (magic[1] != '6' && magic[1] != '5'))
        throw std::runtime_error("undecodable image (expected binary PPM/PGM): " + path.string());
    const size_t channels = magic[1] == '6' ? 3 : 1;
    const size_t w = static_cast<size_t>(pnm_token(in));
    const size_t h = static_cast<size_t>(pnm_token(in));
    const int maxval = pnm_token(in);
    if (maxval != 255)
        throw std::runtime_error("PNM: only 8-bit images supported: " + path.string());
    std::vector<unsigned char> raw(w * h * channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw std::runtime_error("undecodable image (truncated data): " + path.string());
    Tensor img({channels, h, w});
    for (size_t i = 0; i < h; ++i)
        for (size_t j = 0; j < w; ++j)
            for (size_t c = 0; c < channels; ++c)
                img.at3(c, i, j) = raw[(i * w + j) * channels + c] / 255.0;
    return img;
}

#ifdef LEAFNET_HAVE_PNG
static Tensor read_png_file(const fs::path& path) {
    FILE* fp = std::fopen(path.string().c_str(), "rb");
    if (!fp) throw std::runtime_error("cannot open image file: " + path.string());
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_stdio(&image, fp)) {
        std::fclose(fp);
        throw std::runtime_error("undecodable PNG: " + path.string());
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> raw(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
        std::fclose(fp);
        throw std::runtime_error("undecodable PNG: " + path.string());
    }
    std::fclose(fp);
    const size_t h = image.height, w = image.width;
    Tensor img({3, h, w});
    for (size_t i = 0; i < h; ++i)
        for (size_t j = 0; j < w; ++j)
            for (size_t c = 0; c < 3; ++c) img.at3(c, i, j) = raw[(i * w + j) * 3 + c] / 255.0;
    return img;
}
#endif

Tensor read_image(const fs::path& path) {
    const std::string e = lower_ext(path);
    if (e == ".ppm" || e == ".pgm") return read_pnm(path);
#ifdef LEAFNET_HAVE_PNG
    if (e == ".png") return read_png_file(path);
#endif
    throw std::runtime_error("unsupported image format in this build: " + path.string());
}

static unsigned char to_byte(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_ppm(const fs::path& path, const Tensor& img) {
    if (img.rank() != 3 || img.extent(0) != 3)
        throw std::invalid_argument("write_ppm: image must be (3,H,W)");
    const size_t h = img.extent(1), w = img.extent(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path.string());
    out << "P6\n" << w << " " << h << "\n255\n";
    for (size_t i = 0; i < h; ++i)
        for (size_t j = 0; j < w; ++j)
            for (size_t c = 0; c < 3; ++c) out.put(static_cast<char>(to_byte(img.at3(c, i, j))));
}

void write_pgm(const fs::path& path, const Tensor& img) {
    const Tensor* g = &img;
    Tensor tmp;
    if (img.rank() == 2) {
        tmp = img.reshaped({1, img.extent(0), img.extent(1)});
        g = &tmp;
    }
    if (g->rank() != 3 || g->extent(0) != 1)
        throw std::invalid_argument("write_pgm: image must be (1,H,W) or (H,W)");
    const size_t h = g->extent(1), w = g->extent(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path.string());
    out << "P5\n" << w << " " << h << "\n255\n";
    for (size_t i = 0; i < h; ++i)
        for (size_t j = 0; j < w; ++j) out.put(static_cast<char>(to_byte(g->at3(0, i, j))));
}

#ifdef LEAFNET_HAVE_PNG
void write_png(const fs::path& path, const Tensor& img) {
    if (img.rank() != 3 || (img.extent(0) != 1 && img.extent(0) != 3))
        throw std::invalid_argument("write_png: image must be (1|3,H,W)");
    const size_t c = img.extent(0), h = img.extent(1), w = img.extent(2);
    std::vector<unsigned char> raw(h * w * c);
    for (size_t i = 0; i < h; ++i)
        for (size_t j = 0; j < w; ++j)
            for (size_t k = 0; k < c; ++k)
                raw[(i * w + j) * c + k] = to_byte(img.at3(k, i, j));
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(w);
    image.height = static_cast<png_uint_32>(h);
    image.format = c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, raw.data(), 0, nullptr))
        throw std::runtime_error("cannot write PNG: " + path.string());
}
#endif

}  // namespace leafnet
