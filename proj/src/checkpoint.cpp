#include "leafnet/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace leafnet {

namespace fs = std::filesystem;

static void put_u16(std::ostream& out, uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

static void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
    nlohmann::json header;
    header["meta"] = nlohmann::json::parse(ckpt.meta_json);
    header["tensors"] = nlohmann::json::array();
    uint64_t offset = 0;
    for (const Tensor& t : ckpt.tensors) {
        header["tensors"].push_back({{"name", t.name()},
                                     {"shape", t.shape()},
                                     {"dtype", "f32"},
                                     {"offset", offset}});
        offset += t.size() * 4;
    }
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
    out.write("LNCK", 4);
    put_u16(out, Checkpoint::kVersion);
    put_u32(out, static_cast<uint32_t>(hs.size()));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const Tensor& t : ckpt.tensors) {
        std::vector<float> buf(t.size());
        for (size_t i = 0; i < t.size(); ++i) buf[i] = static_cast<float>(t[i]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * 4));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "LNCK", 4) != 0)
        throw std::runtime_error("checkpoint: corrupt header (bad magic) in " + path.string());
    unsigned char vb[2];
    in.read(reinterpret_cast<char*>(vb), 2);
    if (!in) throw std::runtime_error("checkpoint: corrupt header (truncated) in " + path.string());
    const uint16_t version = static_cast<uint16_t>(vb[0] | (vb[1] << 8));
    if (version != Checkpoint::kVersion)
        throw std::runtime_error("checkpoint: unknown version " + std::to_string(version) +
                                 " in " + path.string());
    unsigned char lb[4];
    in.read(reinterpret_cast<char*>(lb), 4);
    if (!in) throw std::runtime_error("checkpoint: corrupt header (truncated) in " + path.string());
    uint32_t hlen = 0;
    for (int i = 0; i < 4; ++i) hlen |= static_cast<uint32_t>(lb[i]) << (8 * i);
    std::string hs(hlen, '\0');
    in.read(hs.data(), hlen);
    if (!in) throw std::runtime_error("checkpoint: corrupt header (truncated) in " + path.string());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("checkpoint: corrupt header (bad JSON) in " + path.string());
    }

    Checkpoint ckpt;
    ckpt.meta_json = header.value("meta", nlohmann::json::object()).dump();
    uint64_t expect_offset = 0;
    for (const auto& te : header["tensors"]) {
        const Shape shape = te["shape"].get<Shape>();
        const uint64_t offset = te["offset"].get<uint64_t>();
        if (te.value("dtype", "") != "f32")
            throw std::runtime_error("checkpoint: unsupported dtype in " + path.string());
        if (offset != expect_offset)
            throw std::runtime_error("checkpoint: tensor shape mismatch (offset table) in " +
                                     path.string());
        const size_t count = shape_size(shape);
        std::vector<float> buf(count);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(count * 4));
        if (!in)
            throw std::runtime_error("checkpoint: tensor shape mismatch (truncated data) in " +
                                     path.string());
        Tensor t(shape);
        for (size_t i = 0; i < count; ++i) t[i] = static_cast<double>(buf[i]);
        t.set_name(te["name"].get<std::string>());
        ckpt.tensors.push_back(std::move(t));
        expect_offset += count * 4;
    }
    // trailing bytes mean the header does not describe the data
    in.peek();
    if (!in.eof())
        throw std::runtime_error("checkpoint: tensor shape mismatch (trailing data) in " +
                                 path.string());
    return ckpt;
}

}  // namespace leafnet
