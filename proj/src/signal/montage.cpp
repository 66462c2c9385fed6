#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "brainage/bundle.hpp"
#include "brainage/error.hpp"

namespace brainage {

Montage make_cap_montage(std::size_t n_channels) {
  require(n_channels >= 1, ErrorCode::kParameter, "montage needs at least one channel");
  // Cap from the vertex down to 20 degrees below the equator.
  const double z_min = -std::sin(20.0 * std::numbers::pi / 180.0);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  Montage m;
  for (std::size_t i = 0; i < n_channels; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(n_channels);
    const double z = 1.0 - t * (1.0 - z_min);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    Eigen::Vector3d p(r * std::cos(phi), r * std::sin(phi), z);
    m.positions.push_back(p.normalized());
    m.channel_names.push_back("E" + std::to_string(i + 1));
  }
  return m;
}

RegionMap make_sector_regions(const Montage& montage) {
  const std::size_t n = montage.channel_names.size();
  require(n >= 12, ErrorCode::kParameter, "sector regions need at least 12 channels");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Left half = smallest x.
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return montage.positions[a].x() < montage.positions[b].x(); });
  const std::vector<std::size_t> left(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n / 2));
  const std::vector<std::size_t> right(idx.begin() + static_cast<std::ptrdiff_t>(n / 2), idx.end());

  static const char* kBands[] = {"Prefrontal", "Frontal", "Central", "Parietal", "Occipital"};
  RegionMap map;
  auto split_hemisphere = [&](std::vector<std::size_t> hemi, const std::string& side) {
    const std::size_t nh = hemi.size();
    const std::size_t n_temporal =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(nh * 11.0 / 64.0)), 1, nh - 5);
    // Lateral-most electrodes first.
    std::stable_sort(hemi.begin(), hemi.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(montage.positions[a].x()) > std::abs(montage.positions[b].x());
    });
    std::vector<std::size_t> temporal(hemi.begin(), hemi.begin() + static_cast<std::ptrdiff_t>(n_temporal));
    std::vector<std::size_t> rest(hemi.begin() + static_cast<std::ptrdiff_t>(n_temporal), hemi.end());
    std::stable_sort(rest.begin(), rest.end(),
                     [&](std::size_t a, std::size_t b) { return montage.positions[a].y() > montage.positions[b].y(); });
    std::vector<Region> regions;
    std::size_t start = 0;
    for (std::size_t band = 0; band < 5; ++band) {
      const std::size_t end = (rest.size() * (band + 1)) / 5;
      Region r{side + kBands[band], {}};
      for (std::size_t i = start; i < end; ++i) r.members.push_back(montage.channel_names[rest[i]]);
      regions.push_back(std::move(r));
      start = end;
    }
    Region t{side + "Temporal", {}};
    for (auto i : temporal) t.members.push_back(montage.channel_names[i]);
    regions.push_back(std::move(t));
    return regions;
  };
  for (auto& r : split_hemisphere(left, "L")) map.regions.push_back(std::move(r));
  for (auto& r : split_hemisphere(right, "R")) map.regions.push_back(std::move(r));
  // Members listed in montage order.
  for (auto& r : map.regions) {
    std::sort(r.members.begin(), r.members.end(), [&](const std::string& a, const std::string& b) {
      return montage.index_of(a) < montage.index_of(b);
    });
  }
  map.validate(&montage);
  return map;
}

std::vector<Eigen::Vector3d> region_centroids(const Montage& montage, const RegionMap& map) {
  std::vector<Eigen::Vector3d> out;
  for (const auto& r : map.regions) {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (const auto& m : r.members) c += montage.positions[montage.index_of(m)];
    out.push_back(c.norm() > 0 ? Eigen::Vector3d(c.normalized()) : c);
  }
  return out;
}

}  // namespace brainage
