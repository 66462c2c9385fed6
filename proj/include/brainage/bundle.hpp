#pragma once

#include <filesystem>
#include <vector>

#include "brainage/recording.hpp"

namespace brainage::io {

// Recording bundle: <dir>/meta.json + <dir>/data.f32le (row-major
// channels x samples, little-endian float32).
Recording read_bundle(const std::filesystem::path& dir);
void write_bundle(const std::filesystem::path& dir, const Recording& rec);
bool is_bundle(const std::filesystem::path& dir);

// Bundles directly below `root` (or root itself if it is a bundle), sorted by path.
std::vector<std::filesystem::path> list_bundles(const std::filesystem::path& root);

Montage read_montage(const std::filesystem::path& path);
void write_montage(const std::filesystem::path& path, const Montage& montage);
RegionMap read_regions(const std::filesystem::path& path);
void write_regions(const std::filesystem::path& path, const RegionMap& map);

}  // namespace brainage::io

namespace brainage {

// Evenly spread electrodes on the upper part of the unit sphere (Fibonacci
// lattice). x points right, y to the nose, z up. Names are E1..En.
Montage make_cap_montage(std::size_t n_channels);

// Twelve scalp regions: left/right x (prefrontal, frontal, central, parietal,
// occipital, temporal). Hemispheres split on x, the most lateral electrodes
// of each hemisphere form the temporal region, the rest are cut into five
// anterior-to-posterior bands of near-equal size.
RegionMap make_sector_regions(const Montage& montage);

// Centroid direction of each region on the unit sphere.
std::vector<Eigen::Vector3d> region_centroids(const Montage& montage, const RegionMap& map);

}  // namespace brainage
