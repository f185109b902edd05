// Landmark sets (world mm) and target registration error evaluation.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tomoreg/field.hpp"
#include "tomoreg/vec.hpp"

namespace tomoreg {

struct LandmarkSet {
    std::vector<Vec3> points;
    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

// Trilinear interpolation of the map at a world point; throws
// std::out_of_range when the point is outside the map's grid hull.
Vec3 map_point(const DeformationMap& map, const Vec3& p);

struct TreReport {
    double mean = 0.0;
    Vec3 axis_mean;                 // mean absolute error per axis
    std::vector<double> per_point;  // Euclidean distance per landmark
};

// Mean over i of ||map(fixed_i) - moving_i||; the identity overload skips
// the map (initial distances).
TreReport landmark_tre(const LandmarkSet& moving, const LandmarkSet& fixed,
                       const DeformationMap& map);
TreReport landmark_tre(const LandmarkSet& moving, const LandmarkSet& fixed);

// CSV with a "x,y,z" header, one landmark per line, world mm.
LandmarkSet load_landmarks_csv(const std::string& path);
void save_landmarks_csv(const std::string& path, const LandmarkSet& set);

// Whitespace-separated 1-based voxel index triples, one per line; converted
// to world mm as (index - 1) * spacing + origin of the reference volume.
LandmarkSet load_dirlab_landmarks(const std::string& path, const Volume3D& reference);

}  // namespace tomoreg
