// File formats: MetaImage-style header/raw pairs for volumes, projection
// images, and 3-channel deformation maps, plus projection-stack directories
// (proj_000.mhd, proj_001.mhd, ...).
#pragma once

#include <string>

#include "tomoreg/field.hpp"
#include "tomoreg/projector.hpp"
#include "tomoreg/volume.hpp"

namespace tomoreg {

// Header keys: NDims, DimSize, ElementSpacing, Offset, ElementType
// (float32|float64), ElementNumberOfChannels (3 for maps), ElementDataFile.
// Raw payload is little-endian, x-fastest; multi-channel data is
// interleaved per element on disk.
void save_volume(const std::string& mhd_path, const Volume3D& vol, bool as_float64 = true);
Volume3D load_volume(const std::string& mhd_path);

void save_image(const std::string& mhd_path, const Image2D& im, bool as_float64 = true);
Image2D load_image(const std::string& mhd_path);

void save_map(const std::string& mhd_path, const VectorField3& map, bool as_float64 = true);
VectorField3 load_map(const std::string& mhd_path);

void save_stack(const std::string& dir, const ProjectionStack& stack, bool as_float64 = true);
ProjectionStack load_stack(const std::string& dir);

// Name of the i-th projection file within a stack directory.
std::string stack_entry_name(int index);

}  // namespace tomoreg
