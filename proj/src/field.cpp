#include "tomoreg/field.hpp"

#include <cmath>
#include <stdexcept>

namespace tomoreg {

double VectorField3::max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
}

DeformationMap identity_map(std::array<int, 3> dims, Vec3 spacing, Vec3 origin) {
    DeformationMap map(dims, spacing, origin);
    const std::size_t n = map.voxel_count();
    double* mx = map.channel(0);
    double* my = map.channel(1);
    double* mz = map.channel(2);
    std::size_t idx = 0;
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i, ++idx) {
                mx[idx] = origin.x + i * spacing.x;
                my[idx] = origin.y + j * spacing.y;
                mz[idx] = origin.z + k * spacing.z;
            }
    (void)n;
    return map;
}

void field_axpy(double a, const VectorField3& x, VectorField3& y) {
    if (!x.same_grid(y)) throw std::invalid_argument("field_axpy: grid mismatch");
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] += a * x.data[i];
}

double field_dot(const VectorField3& a, const VectorField3& b) {
    if (!a.same_grid(b)) throw std::invalid_argument("field_dot: grid mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

}  // namespace tomoreg
