#include "sfada/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

namespace sfada {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct PgmHeader {
    int width = 0;
    int height = 0;
    int maxval = 0;
};

int read_pgm_token(std::istream& in, const fs::path& file) {
    // skip whitespace and '#' comments
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value = -1;
    in >> value;
    if (!in || value < 0) throw DataError("malformed PGM header in " + file.string());
    return value;
}

PgmHeader read_pgm_header(std::istream& in, const fs::path& file) {
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '5') throw DataError("not a P5 PGM file: " + file.string());
    PgmHeader h;
    h.width = read_pgm_token(in, file);
    h.height = read_pgm_token(in, file);
    h.maxval = read_pgm_token(in, file);
    in.get();  // single whitespace before raster
    if (!in) throw DataError("truncated PGM header in " + file.string());
    return h;
}

std::ifstream open_binary(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open file " + file.string());
    return in;
}

}  // namespace

Image load_image_pgm(const fs::path& file) {
    std::ifstream in = open_binary(file);
    const PgmHeader h = read_pgm_header(in, file);
    if (h.maxval != 65535) throw DataError("image PGM must have maxval 65535: " + file.string());
    Image img = make_image(h.height, h.width);
    std::vector<unsigned char> raw(static_cast<size_t>(h.width) * h.height * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw DataError("truncated PGM raster in " + file.string());
    for (size_t i = 0; i < img.size(); ++i) {
        const unsigned v = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
        img.pixels[i] = static_cast<double>(v) / 65535.0;
    }
    return img;
}

void write_image_pgm(const Image& img, const fs::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write file " + file.string());
    out << "P5\n" << img.width << " " << img.height << "\n65535\n";
    std::vector<unsigned char> raw(img.size() * 2);
    for (size_t i = 0; i < img.size(); ++i) {
        const double clamped = std::clamp(img.pixels[i], 0.0, 1.0);
        const unsigned v = static_cast<unsigned>(std::lround(clamped * 65535.0));
        raw[2 * i] = static_cast<unsigned char>(v >> 8);
        raw[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw DataError("failed writing " + file.string());
}

Mask load_mask_pgm(const fs::path& file) {
    std::ifstream in = open_binary(file);
    const PgmHeader h = read_pgm_header(in, file);
    if (h.maxval != 255) throw DataError("mask PGM must have maxval 255: " + file.string());
    Mask mask = make_mask(h.height, h.width);
    std::vector<unsigned char> raw(mask.size());
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw DataError("truncated PGM raster in " + file.string());
    for (size_t i = 0; i < mask.size(); ++i) {
        if (raw[i] == 0)
            mask.labels[i] = 0;
        else if (raw[i] == 255)
            mask.labels[i] = 1;
        else
            throw DataError("mask pixel must be 0 or 255 in " + file.string());
    }
    return mask;
}

void write_mask_pgm(const Mask& mask, const fs::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write file " + file.string());
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<unsigned char> raw(mask.size());
    for (size_t i = 0; i < mask.size(); ++i) raw[i] = mask.labels[i] ? 255 : 0;
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw DataError("failed writing " + file.string());
}

Dataset load_dataset(const fs::path& root) {
    const fs::path manifest_path = root / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw DataError("missing manifest: " + manifest_path.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw DataError("invalid manifest " + manifest_path.string() + ": " + e.what());
    }
    if (!manifest.is_array()) throw DataError("manifest must be a JSON array");

    Dataset ds;
    ds.name = root.filename().string();
    for (const json& entry : manifest) {
        Sample s;
        try {
            s.id = entry.at("id").get<std::string>();
            s.domain = entry.at("domain").get<std::string>();
            s.image = load_image_pgm(root / entry.at("image_file").get<std::string>());
            if (entry.contains("mask_file"))
                s.truth = load_mask_pgm(root / entry.at("mask_file").get<std::string>());
        } catch (const json::exception& e) {
            throw DataError("invalid manifest entry: " + std::string(e.what()));
        }
        ds.samples.push_back(std::move(s));
    }
    validate(ds);
    return ds;
}

void write_dataset(const Dataset& ds, const fs::path& root) {
    validate(ds);
    fs::create_directories(root);
    json manifest = json::array();
    for (const Sample& s : ds.samples) {
        json entry;
        entry["id"] = s.id;
        entry["domain"] = s.domain;
        entry["image_file"] = s.id + ".pgm";
        write_image_pgm(s.image, root / (s.id + ".pgm"));
        if (s.truth) {
            entry["mask_file"] = s.id + "_mask.pgm";
            write_mask_pgm(*s.truth, root / (s.id + "_mask.pgm"));
        }
        manifest.push_back(entry);
    }
    std::ofstream out(root / "manifest.json");
    if (!out) throw DataError("cannot write manifest in " + root.string());
    out << manifest.dump(2) << "\n";
}

}  // namespace sfada
