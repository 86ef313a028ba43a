#include "camnet/image_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace camnet {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

void write_chunk(std::vector<uint8_t>& out, const char type[4],
                 const std::vector<uint8_t>& payload) {
    put_u32(out, static_cast<uint32_t>(payload.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32(out, crc);
}

std::vector<uint8_t> zlib_compress(const std::vector<uint8_t>& raw) {
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> out(bound);
    if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                  Z_BEST_COMPRESSION) != Z_OK)
        throw IoError("write_png: zlib compression failed");
    out.resize(bound);
    return out;
}

std::vector<uint8_t> zlib_decompress(const std::vector<uint8_t>& comp, size_t expect) {
    std::vector<uint8_t> out(expect);
    uLongf len = static_cast<uLongf>(expect);
    if (uncompress(out.data(), &len, comp.data(), static_cast<uLong>(comp.size())) != Z_OK ||
        len != expect)
        throw IoError("read_png: zlib decompression failed");
    return out;
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

const uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace

void write_png(const std::string& path, const Tensor& img) {
    require(img.ndim() == 4 && img.n() == 1, "write_png: expected a {1,C,H,W} tensor, got " +
                                                 shape_str(img.shape));
    const int C = img.c(), H = img.h(), W = img.w();
    require(C == 1 || C == 3 || C == 4, "write_png: channels must be 1, 3, or 4");
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(H) * (1 + static_cast<size_t>(W) * C));
    for (int y = 0; y < H; ++y) {
        raw.push_back(0);  // filter type: none
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                float v = std::min(1.0f, std::max(0.0f, img.at4(0, c, y, x)));
                raw.push_back(static_cast<uint8_t>(std::lround(v * 255.0f)));
            }
    }
    std::vector<uint8_t> out(kSignature, kSignature + 8);
    std::vector<uint8_t> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(W));
    put_u32(ihdr, static_cast<uint32_t>(H));
    ihdr.push_back(8);                                       // bit depth
    ihdr.push_back(C == 1 ? 0 : (C == 3 ? 2 : 6));           // color type
    ihdr.push_back(0);                                       // compression
    ihdr.push_back(0);                                       // filter method
    ihdr.push_back(0);                                       // no interlace
    write_chunk(out, "IHDR", ihdr);
    write_chunk(out, "IDAT", zlib_compress(raw));
    write_chunk(out, "IEND", {});
    std::ofstream f(path, std::ios::binary);
    if (!f.good()) throw IoError("write_png: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f.good()) throw IoError("write_png: short write to " + path);
}

Tensor read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f.good()) throw IoError("read_png: cannot open " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 8 || std::memcmp(buf.data(), kSignature, 8) != 0)
        throw IoError("read_png: " + path + " is not a PNG file");

    int W = 0, H = 0, C = 0;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 8 <= buf.size()) {
        uint32_t len = get_u32(buf.data() + pos);
        if (pos + 12 + len > buf.size()) throw IoError("read_png: truncated chunk in " + path);
        std::string type(reinterpret_cast<const char*>(buf.data() + pos + 4), 4);
        const uint8_t* payload = buf.data() + pos + 8;
        if (type == "IHDR") {
            if (len != 13) throw IoError("read_png: malformed IHDR in " + path);
            W = static_cast<int>(get_u32(payload));
            H = static_cast<int>(get_u32(payload + 4));
            int depth = payload[8], color = payload[9], interlace = payload[12];
            if (depth != 8) throw IoError("read_png: only 8-bit images supported");
            if (interlace != 0) throw IoError("read_png: interlaced images not supported");
            if (color == 0) C = 1;
            else if (color == 2) C = 3;
            else if (color == 6) C = 4;
            else throw IoError("read_png: unsupported color type " + std::to_string(color));
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (W <= 0 || H <= 0 || C == 0 || idat.empty())
        throw IoError("read_png: missing image data in " + path);

    const size_t stride = static_cast<size_t>(W) * C;
    std::vector<uint8_t> raw = zlib_decompress(idat, static_cast<size_t>(H) * (stride + 1));
    std::vector<uint8_t> pix(static_cast<size_t>(H) * stride);
    for (int y = 0; y < H; ++y) {
        uint8_t filter = raw[static_cast<size_t>(y) * (stride + 1)];
        const uint8_t* src = raw.data() + static_cast<size_t>(y) * (stride + 1) + 1;
        uint8_t* dst = pix.data() + static_cast<size_t>(y) * stride;
        const uint8_t* up = y > 0 ? dst - stride : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            int a = i >= static_cast<size_t>(C) ? dst[i - C] : 0;
            int b = up ? up[i] : 0;
            int c = (up && i >= static_cast<size_t>(C)) ? up[i - C] : 0;
            int v;
            switch (filter) {
                case 0: v = src[i]; break;
                case 1: v = src[i] + a; break;
                case 2: v = src[i] + b; break;
                case 3: v = src[i] + (a + b) / 2; break;
                case 4: v = src[i] + paeth(a, b, c); break;
                default: throw IoError("read_png: unknown scanline filter in " + path);
            }
            dst[i] = static_cast<uint8_t>(v & 0xff);
        }
    }
    Tensor img({1, C, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c)
                img.at4(0, c, y, x) =
                    static_cast<float>(pix[static_cast<size_t>(y) * stride + x * C + c]) / 255.0f;
    return img;
}

}  // namespace camnet
