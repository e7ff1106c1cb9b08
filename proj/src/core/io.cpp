#include "sfda/core/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sfda/core/errors.hpp"

namespace sfda {

namespace {

int read_pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments, returns the next integer.
    while (true) {
        int ch = in.peek();
        if (ch == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        if (std::isspace(ch)) {
            in.get();
            continue;
        }
        break;
    }
    int value = -1;
    in >> value;
    return value;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for write: " + path.string());
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                float v = img.at(c, y, x);
                v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
                row[static_cast<size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.f));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open: " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P6") throw ConfigError("not a binary PPM: " + path.string());
    int w = read_pnm_token(in);
    int h = read_pnm_token(in);
    int maxv = read_pnm_token(in);
    if (w <= 0 || h <= 0 || maxv != 255)
        throw ConfigError("unsupported PPM header in " + path.string());
    in.get();  // single whitespace after maxval
    Image img(h, w);
    std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!in) throw ConfigError("truncated PPM: " + path.string());
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = row[static_cast<size_t>(x) * 3 + c] / 255.f;
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const SegMap& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for write: " + path.string());
    out << "P5\n" << map.w << " " << map.h << "\n255\n";
    out.write(reinterpret_cast<const char*>(map.labels.data()), map.labels.size());
}

SegMap read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open: " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw ConfigError("not a binary PGM: " + path.string());
    int w = read_pnm_token(in);
    int h = read_pnm_token(in);
    int maxv = read_pnm_token(in);
    if (w <= 0 || h <= 0 || maxv != 255)
        throw ConfigError("unsupported PGM header in " + path.string());
    in.get();
    SegMap map(h, w);
    in.read(reinterpret_cast<char*>(map.labels.data()), map.labels.size());
    if (!in) throw ConfigError("truncated PGM: " + path.string());
    return map;
}

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

void save_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for write: " + path.string());
    out << j.dump(2) << "\n";
}

void reject_unknown_fields(const json& j, const std::vector<std::string>& allowed,
                           const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError(context + ": unknown field '" + it.key() + "'");
    }
}

}  // namespace sfda
