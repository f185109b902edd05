#include "tomoreg/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "tomoreg/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "raw volume I/O assumes a little-endian host");

namespace tomoreg {

namespace fs = std::filesystem;

namespace {

struct Header {
    int ndims = 0;
    std::vector<int> dim_size;
    std::vector<double> spacing;
    std::vector<double> offset;
    std::string element_type;
    int channels = 1;
    std::string data_file;
};

std::string raw_name_for(const fs::path& mhd) {
    fs::path p = mhd;
    p.replace_extension(".raw");
    return p.filename().string();
}

void write_header(const fs::path& mhd, const Header& h) {
    std::ofstream out(mhd);
    if (!out) throw IoError("cannot write header: " + mhd.string());
    out.precision(17);
    out << "NDims = " << h.ndims << "\n";
    out << "DimSize =";
    for (int d : h.dim_size) out << " " << d;
    out << "\nElementSpacing =";
    for (double s : h.spacing) out << " " << s;
    out << "\nOffset =";
    for (double o : h.offset) out << " " << o;
    out << "\nElementType = " << h.element_type << "\n";
    if (h.channels != 1) out << "ElementNumberOfChannels = " << h.channels << "\n";
    out << "ElementDataFile = " << h.data_file << "\n";
    if (!out) throw IoError("write failed: " + mhd.string());
}

void write_raw(const fs::path& raw, const std::vector<double>& interleaved, bool as_float64) {
    std::ofstream out(raw, std::ios::binary);
    if (!out) throw IoError("cannot write raw data: " + raw.string());
    if (as_float64) {
        out.write(reinterpret_cast<const char*>(interleaved.data()),
                  static_cast<std::streamsize>(interleaved.size() * sizeof(double)));
    } else {
        std::vector<float> buf(interleaved.begin(), interleaved.end());
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!out) throw IoError("write failed: " + raw.string());
}

Header parse_header(const fs::path& mhd) {
    std::ifstream in(mhd);
    if (!in) throw IoError("cannot open header: " + mhd.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r\n");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r\n");
            return s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto require = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw IoError(mhd.string() + ": missing header key " + key);
        return it->second;
    };
    Header h;
    h.ndims = std::stoi(require("NDims"));
    if (h.ndims != 2 && h.ndims != 3) throw IoError(mhd.string() + ": unsupported NDims");
    {
        std::istringstream ss(require("DimSize"));
        int v;
        while (ss >> v) h.dim_size.push_back(v);
    }
    {
        std::istringstream ss(require("ElementSpacing"));
        double v;
        while (ss >> v) h.spacing.push_back(v);
    }
    if (kv.count("Offset")) {
        std::istringstream ss(kv["Offset"]);
        double v;
        while (ss >> v) h.offset.push_back(v);
    }
    h.offset.resize(h.ndims, 0.0);
    h.element_type = require("ElementType");
    if (h.element_type != "float32" && h.element_type != "float64")
        throw IoError(mhd.string() + ": unsupported ElementType " + h.element_type);
    if (kv.count("ElementNumberOfChannels"))
        h.channels = std::stoi(kv["ElementNumberOfChannels"]);
    h.data_file = require("ElementDataFile");
    if (static_cast<int>(h.dim_size.size()) != h.ndims ||
        static_cast<int>(h.spacing.size()) != h.ndims)
        throw IoError(mhd.string() + ": DimSize/ElementSpacing arity mismatch");
    for (int d : h.dim_size)
        if (d < 1) throw IoError(mhd.string() + ": DimSize entries must be >= 1");
    for (double s : h.spacing)
        if (!(s > 0)) throw IoError(mhd.string() + ": ElementSpacing entries must be > 0");
    return h;
}

std::vector<double> read_raw(const fs::path& mhd, const Header& h) {
    const fs::path raw = mhd.parent_path() / h.data_file;
    std::ifstream in(raw, std::ios::binary);
    if (!in) throw IoError("cannot open raw data: " + raw.string());
    std::size_t count = static_cast<std::size_t>(h.channels);
    for (int d : h.dim_size) count *= static_cast<std::size_t>(d);
    std::vector<double> out(count);
    if (h.element_type == "float64") {
        in.read(reinterpret_cast<char*>(out.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
    } else {
        std::vector<float> buf(count);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
        for (std::size_t i = 0; i < count; ++i) out[i] = buf[i];
    }
    if (!in) throw IoError("raw data truncated: " + raw.string());
    return out;
}

}  // namespace

void save_volume(const std::string& mhd_path, const Volume3D& vol, bool as_float64) {
    const fs::path mhd(mhd_path);
    Header h;
    h.ndims = 3;
    h.dim_size = {vol.dims[0], vol.dims[1], vol.dims[2]};
    h.spacing = {vol.spacing.x, vol.spacing.y, vol.spacing.z};
    h.offset = {vol.origin.x, vol.origin.y, vol.origin.z};
    h.element_type = as_float64 ? "float64" : "float32";
    h.data_file = raw_name_for(mhd);
    write_header(mhd, h);
    write_raw(mhd.parent_path() / h.data_file, vol.data, as_float64);
}

Volume3D load_volume(const std::string& mhd_path) {
    const fs::path mhd(mhd_path);
    const Header h = parse_header(mhd);
    if (h.ndims != 3 || h.channels != 1)
        throw IoError(mhd_path + ": expected a scalar 3D volume");
    Volume3D vol({h.dim_size[0], h.dim_size[1], h.dim_size[2]},
                 {h.spacing[0], h.spacing[1], h.spacing[2]},
                 {h.offset[0], h.offset[1], h.offset[2]});
    vol.data = read_raw(mhd, h);
    return vol;
}

void save_image(const std::string& mhd_path, const Image2D& im, bool as_float64) {
    const fs::path mhd(mhd_path);
    Header h;
    h.ndims = 2;
    h.dim_size = {im.nw, im.nh};
    h.spacing = {im.pw, im.ph};
    h.offset = {0.0, 0.0};
    h.element_type = as_float64 ? "float64" : "float32";
    h.data_file = raw_name_for(mhd);
    write_header(mhd, h);
    write_raw(mhd.parent_path() / h.data_file, im.data, as_float64);
}

Image2D load_image(const std::string& mhd_path) {
    const fs::path mhd(mhd_path);
    const Header h = parse_header(mhd);
    if (h.ndims != 2 || h.channels != 1)
        throw IoError(mhd_path + ": expected a scalar 2D image");
    Image2D im(h.dim_size[0], h.dim_size[1], h.spacing[0], h.spacing[1]);
    im.data = read_raw(mhd, h);
    return im;
}

void save_map(const std::string& mhd_path, const VectorField3& map, bool as_float64) {
    const fs::path mhd(mhd_path);
    Header h;
    h.ndims = 3;
    h.dim_size = {map.dims[0], map.dims[1], map.dims[2]};
    h.spacing = {map.spacing.x, map.spacing.y, map.spacing.z};
    h.offset = {map.origin.x, map.origin.y, map.origin.z};
    h.element_type = as_float64 ? "float64" : "float32";
    h.channels = 3;
    h.data_file = raw_name_for(mhd);
    write_header(mhd, h);

    const std::size_t n = map.voxel_count();
    std::vector<double> interleaved(3 * n);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) interleaved[3 * i + c] = map.data[c * n + i];
    write_raw(mhd.parent_path() / h.data_file, interleaved, as_float64);
}

VectorField3 load_map(const std::string& mhd_path) {
    const fs::path mhd(mhd_path);
    const Header h = parse_header(mhd);
    if (h.ndims != 3 || h.channels != 3)
        throw IoError(mhd_path + ": expected a 3-channel map volume");
    VectorField3 map({h.dim_size[0], h.dim_size[1], h.dim_size[2]},
                     {h.spacing[0], h.spacing[1], h.spacing[2]},
                     {h.offset[0], h.offset[1], h.offset[2]});
    const std::vector<double> interleaved = read_raw(mhd, h);
    const std::size_t n = map.voxel_count();
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) map.data[c * n + i] = interleaved[3 * i + c];
    return map;
}

std::string stack_entry_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "proj_%03d.mhd", index);
    return buf;
}

void save_stack(const std::string& dir, const ProjectionStack& stack, bool as_float64) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < stack.size(); ++i)
        save_image((fs::path(dir) / stack_entry_name(static_cast<int>(i))).string(),
                   stack.images[i], as_float64);
}

ProjectionStack load_stack(const std::string& dir) {
    ProjectionStack stack;
    for (int i = 0;; ++i) {
        const fs::path p = fs::path(dir) / stack_entry_name(i);
        if (!fs::exists(p)) break;
        stack.images.push_back(load_image(p.string()));
    }
    if (stack.images.empty()) throw IoError("no proj_*.mhd images found in " + dir);
    return stack;
}

}  // namespace tomoreg
