#include "tomoreg/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tomoreg/errors.hpp"

namespace tomoreg {

Vec3 map_point(const DeformationMap& map, const Vec3& p) {
    const Vec3 q = map.world_to_voxel(p);
    const double qs[3] = {q.x, q.y, q.z};
    int base[3];
    double fr[3];
    for (int a = 0; a < 3; ++a) {
        const int d = map.dims[a];
        if (qs[a] < 0.0 || qs[a] > d - 1)
            throw std::out_of_range("map_point: landmark outside map domain");
        int b = static_cast<int>(std::floor(qs[a]));
        b = std::clamp(b, 0, std::max(d - 2, 0));
        base[a] = b;
        fr[a] = qs[a] - b;
    }
    const double wx[2] = {1.0 - fr[0], fr[0]};
    const double wy[2] = {1.0 - fr[1], fr[1]};
    const double wz[2] = {1.0 - fr[2], fr[2]};
    Vec3 out;
    for (int dk = 0; dk < 2; ++dk) {
        const int k = std::min(base[2] + dk, map.dims[2] - 1);
        for (int dj = 0; dj < 2; ++dj) {
            const int j = std::min(base[1] + dj, map.dims[1] - 1);
            for (int di = 0; di < 2; ++di) {
                const int i = std::min(base[0] + di, map.dims[0] - 1);
                out += map.at(map.index(i, j, k)) * (wx[di] * wy[dj] * wz[dk]);
            }
        }
    }
    return out;
}

namespace {

TreReport tre_impl(const LandmarkSet& moving, const LandmarkSet& fixed,
                   const DeformationMap* map) {
    if (moving.size() != fixed.size())
        throw std::invalid_argument("landmark_tre: landmark sets differ in length");
    TreReport rep;
    rep.per_point.reserve(moving.size());
    for (std::size_t i = 0; i < moving.size(); ++i) {
        const Vec3 mapped = map ? map_point(*map, fixed.points[i]) : fixed.points[i];
        const Vec3 d = mapped - moving.points[i];
        rep.per_point.push_back(d.norm());
        rep.mean += d.norm();
        rep.axis_mean += Vec3(std::abs(d.x), std::abs(d.y), std::abs(d.z));
    }
    if (!moving.empty()) {
        rep.mean /= static_cast<double>(moving.size());
        rep.axis_mean = rep.axis_mean * (1.0 / static_cast<double>(moving.size()));
    }
    return rep;
}

}  // namespace

TreReport landmark_tre(const LandmarkSet& moving, const LandmarkSet& fixed,
                       const DeformationMap& map) {
    return tre_impl(moving, fixed, &map);
}

TreReport landmark_tre(const LandmarkSet& moving, const LandmarkSet& fixed) {
    return tre_impl(moving, fixed, nullptr);
}

LandmarkSet load_landmarks_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open landmark file: " + path);
    LandmarkSet set;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // Trim whitespace and skip blank lines.
        const auto first = line.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r\n");
        std::string body = line.substr(first, last - first + 1);
        if (lineno == 1 && body == "x,y,z") continue;
        std::replace(body.begin(), body.end(), ',', ' ');
        std::istringstream ss(body);
        Vec3 p;
        if (!(ss >> p.x >> p.y >> p.z))
            throw IoError(path + ":" + std::to_string(lineno) + ": malformed landmark line");
        set.points.push_back(p);
    }
    return set;
}

void save_landmarks_csv(const std::string& path, const LandmarkSet& set) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write landmark file: " + path);
    out << "x,y,z\n";
    out.precision(17);
    for (const Vec3& p : set.points) out << p.x << "," << p.y << "," << p.z << "\n";
    if (!out) throw IoError("write failed: " + path);
}

LandmarkSet load_dirlab_landmarks(const std::string& path, const Volume3D& reference) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open landmark file: " + path);
    LandmarkSet set;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ss(line);
        double i, j, k;
        if (!(ss >> i >> j >> k))
            throw IoError(path + ":" + std::to_string(lineno) + ": malformed index triple");
        set.points.push_back(reference.voxel_to_world(Vec3(i - 1.0, j - 1.0, k - 1.0)));
    }
    return set;
}

}  // namespace tomoreg
