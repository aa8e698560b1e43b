#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "upright/geom.hpp"

namespace upright {

enum class TerrainFamily { flat, rough, waves, slope, inv_slope, stairs, inv_stairs };

const char* terrain_family_name(TerrainFamily f);
TerrainFamily terrain_family_from_name(const std::string& name);  // throws on unknown
constexpr int kNumTerrainFamilies = 7;

// 1-D elevation profile on a uniform grid. Immutable after generation.
struct Heightfield {
  std::vector<double> samples;  // m
  double grid_spacing = 0.02;   // m
  double origin_x = 0.0;        // x of samples[0]
  TerrainFamily family = TerrainFamily::flat;
  double difficulty = 0.0;      // [0, 14]
  uint64_t seed = 0;

  // Linear interpolation inside the grid, nearest edge outside.
  double height_at(double x) const;
  // Slope of the interpolated profile (piecewise constant).
  double slope_at(double x) const;
  double extent() const { return grid_spacing * double(samples.size() - 1); }

  // x positions of sample-to-sample jumps >= min_jump (step edges, cliffs).
  std::vector<double> discontinuities(double min_jump) const;

  // Line-oriented text format used by the trace-export CLI:
  // header "family difficulty seed spacing origin_x n", one elevation per line.
  void save(std::ostream& os) const;
  static Heightfield load(std::istream& is);
};

// Procedural generation. Deterministic in (family, difficulty, seed); the
// elevation at x = 0 is exactly 0 so the spawn is anchored. difficulty spans
// the fifteen continuous levels [0, 14].
Heightfield generate_terrain(TerrainFamily family, double difficulty, uint64_t seed,
                             double extent = 20.0, double spacing = 0.02);

// Privileged height samples around the base: h(x_i) - base_z at fixed
// offsets, forward-biased window.
struct ScandotPattern {
  double back = 0.8;    // m behind the base
  double forward = 1.2; // m ahead
  int count = 33;
};
std::vector<double> sample_scandots(const Heightfield& hf, double base_x, double base_z,
                                    const ScandotPattern& pattern = {});

struct DepthScan {
  std::vector<double> depths;   // m, within clip
  double fov = 1.5;             // rad
  double clip_min = 0.1, clip_max = 2.0;
  Vec2 camera_pos{0.0, 0.0};
  double camera_heading = 0.0;  // world angle of the central ray
};

// Fan of n_rays over fov about the heading; each depth is the exact distance
// to the piecewise-linear surface, clamped into the clip range. Rays that
// escape return clip_max.
DepthScan raycast_depth(const Heightfield& hf, const Vec2& camera_pos, double camera_heading,
                        int n_rays = 64, double fov = 1.5, double clip_min = 0.1,
                        double clip_max = 2.0);

}  // namespace upright
