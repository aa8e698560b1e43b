#include "upright/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "upright/rng.hpp"

namespace upright {

const char* terrain_family_name(TerrainFamily f) {
  switch (f) {
    case TerrainFamily::flat: return "flat";
    case TerrainFamily::rough: return "rough";
    case TerrainFamily::waves: return "waves";
    case TerrainFamily::slope: return "slope";
    case TerrainFamily::inv_slope: return "inv_slope";
    case TerrainFamily::stairs: return "stairs";
    case TerrainFamily::inv_stairs: return "inv_stairs";
  }
  return "?";
}

TerrainFamily terrain_family_from_name(const std::string& name) {
  for (int i = 0; i < kNumTerrainFamilies; ++i) {
    const auto f = TerrainFamily(i);
    if (name == terrain_family_name(f)) return f;
  }
  throw std::invalid_argument("unknown terrain family: " + name);
}

double Heightfield::height_at(double x) const {
  const double u = (x - origin_x) / grid_spacing;
  const auto n = long(samples.size());
  if (u <= 0.0) return samples.front();
  if (u >= double(n - 1)) return samples.back();
  const long i = long(u);
  const double frac = u - double(i);
  return samples[i] + frac * (samples[i + 1] - samples[i]);
}

double Heightfield::slope_at(double x) const {
  const double u = (x - origin_x) / grid_spacing;
  const auto n = long(samples.size());
  if (u <= 0.0 || u >= double(n - 1)) return 0.0;
  const long i = long(u);
  return (samples[i + 1] - samples[i]) / grid_spacing;
}

std::vector<double> Heightfield::discontinuities(double min_jump) const {
  std::vector<double> xs;
  for (size_t i = 0; i + 1 < samples.size(); ++i)
    if (std::abs(samples[i + 1] - samples[i]) >= min_jump)
      xs.push_back(origin_x + (double(i) + 0.5) * grid_spacing);
  return xs;
}

void Heightfield::save(std::ostream& os) const {
  os.precision(17);
  os << terrain_family_name(family) << ' ' << difficulty << ' ' << seed << ' ' << grid_spacing
     << ' ' << origin_x << ' ' << samples.size() << '\n';
  for (double s : samples) os << s << '\n';
}

Heightfield Heightfield::load(std::istream& is) {
  Heightfield hf;
  std::string fam;
  size_t n = 0;
  if (!(is >> fam >> hf.difficulty >> hf.seed >> hf.grid_spacing >> hf.origin_x >> n))
    throw std::runtime_error("heightfield: bad header");
  hf.family = terrain_family_from_name(fam);
  hf.samples.resize(n);
  for (size_t i = 0; i < n; ++i)
    if (!(is >> hf.samples[i])) throw std::runtime_error("heightfield: truncated samples");
  return hf;
}

namespace {

// deterministic lattice value in [-1, 1]
double lattice_value(uint64_t seed, long i) {
  uint64_t z = seed ^ (uint64_t(i) * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return 2.0 * (double(z >> 11) * 0x1.0p-53) - 1.0;
}

// smooth value noise with wavelength `cell`
double value_noise(uint64_t seed, double x, double cell) {
  const double u = x / cell;
  const double fl = std::floor(u);
  const long i = long(fl);
  const double t = u - fl;
  const double s = t * t * (3.0 - 2.0 * t);
  return lattice_value(seed, i) * (1.0 - s) + lattice_value(seed, i + 1) * s;
}

}  // namespace

Heightfield generate_terrain(TerrainFamily family, double difficulty, uint64_t seed, double extent,
                             double spacing) {
  if (difficulty < 0.0 || difficulty > 14.0)
    throw std::invalid_argument("difficulty must be in [0, 14]");
  if (extent < 10.0) throw std::invalid_argument("terrain extent must be >= 10 m");
  if (spacing <= 0.0) throw std::invalid_argument("grid spacing must be > 0");

  Heightfield hf;
  hf.family = family;
  hf.difficulty = difficulty;
  hf.seed = seed;
  hf.grid_spacing = spacing;
  const long half = long(std::ceil(extent / 2.0 / spacing));
  hf.origin_x = -double(half) * spacing;
  const long n = 2 * half + 1;
  hf.samples.resize(n);

  Rng rng(seed ^ 0x7465727261696eULL, uint64_t(family));
  const double d = difficulty;

  switch (family) {
    case TerrainFamily::flat:
      std::fill(hf.samples.begin(), hf.samples.end(), 0.0);
      return hf;
    case TerrainFamily::rough: {
      const double amp = 0.02 + 0.013 * d;
      const uint64_t s1 = rng.next_u64(), s2 = rng.next_u64();
      for (long i = 0; i < n; ++i) {
        const double x = hf.origin_x + double(i) * spacing;
        hf.samples[i] =
            amp * (0.7 * value_noise(s1, x, 0.45) + 0.3 * value_noise(s2, x, 0.15));
      }
      break;
    }
    case TerrainFamily::waves: {
      const double amp = 0.03 + 0.02 * d;
      const double wavelength = 2.0;
      const double phase = rng.uniform(0.0, 2.0 * M_PI);
      for (long i = 0; i < n; ++i) {
        const double x = hf.origin_x + double(i) * spacing;
        hf.samples[i] = amp * std::sin(2.0 * M_PI * x / wavelength + phase);
      }
      break;
    }
    case TerrainFamily::slope:
    case TerrainFamily::inv_slope: {
      const double grade = 0.05 + 0.02 * d;
      for (long i = 0; i < n; ++i) {
        const double x = hf.origin_x + double(i) * spacing;
        hf.samples[i] = grade * x;
      }
      break;
    }
    case TerrainFamily::stairs:
    case TerrainFamily::inv_stairs: {
      const double rise = 0.05 + 0.012 * d;
      const double run = 0.3;
      const double off = rng.uniform(0.0, run);
      for (long i = 0; i < n; ++i) {
        const double x = hf.origin_x + double(i) * spacing;
        hf.samples[i] = rise * std::floor((x + off) / run);
      }
      break;
    }
  }
  if (family == TerrainFamily::inv_slope || family == TerrainFamily::inv_stairs)
    for (auto& s : hf.samples) s = -s;

  // anchor the spawn: x = 0 lies on the grid (origin is an integer multiple
  // of the spacing) and its elevation is subtracted out exactly
  const double at0 = hf.samples[half];
  for (auto& s : hf.samples) s -= at0;
  return hf;
}

std::vector<double> sample_scandots(const Heightfield& hf, double base_x, double base_z,
                                    const ScandotPattern& pattern) {
  std::vector<double> out(pattern.count);
  const double span = pattern.back + pattern.forward;
  for (int i = 0; i < pattern.count; ++i) {
    const double x = base_x - pattern.back + span * double(i) / double(pattern.count - 1);
    out[i] = hf.height_at(x) - base_z;
  }
  return out;
}

namespace {

// Exact intersection of a unit-direction ray with the piecewise-linear
// surface; returns distance or +inf.
double ray_hit(const Heightfield& hf, const Vec2& origin, const Vec2& dir, double t_max) {
  if (origin.y() <= hf.height_at(origin.x())) return 0.0;  // starts inside the ground

  const auto n = long(hf.samples.size());
  const double inf = std::numeric_limits<double>::infinity();
  if (std::abs(dir.x()) < 1e-12) {
    if (dir.y() >= 0.0) return inf;
    return (origin.y() - hf.height_at(origin.x())) / -dir.y();
  }

  const double m_ray = dir.y() / dir.x();  // dz per dx along the ray
  const int step = dir.x() > 0.0 ? 1 : -1;
  const double left = hf.origin_x;
  const double right = hf.origin_x + double(n - 1) * hf.grid_spacing;

  double x_cursor = origin.x();
  long i = long(std::floor((x_cursor - left) / hf.grid_spacing));
  for (long iter = 0; iter <= n + 2; ++iter) {
    // surface line z = z_ref + m_seg (x - x_ref) valid on this segment, and
    // the x where the segment ends in the travel direction
    double x_ref, z_ref, m_seg, seg_end;
    if (i < 0) {
      x_ref = left;
      z_ref = hf.samples[0];
      m_seg = 0.0;
      seg_end = step > 0 ? left : -inf;
    } else if (i >= n - 1) {
      x_ref = right;
      z_ref = hf.samples[n - 1];
      m_seg = 0.0;
      seg_end = step > 0 ? inf : right;
    } else {
      x_ref = left + double(i) * hf.grid_spacing;
      z_ref = hf.samples[i];
      m_seg = (hf.samples[i + 1] - hf.samples[i]) / hf.grid_spacing;
      seg_end = step > 0 ? x_ref + hf.grid_spacing : x_ref;
    }
    const double lo = std::min(x_cursor, seg_end), hi = std::max(x_cursor, seg_end);
    const double denom = m_ray - m_seg;
    if (std::abs(denom) > 1e-15) {
      const double x_star = (z_ref - m_seg * x_ref - origin.y() + m_ray * origin.x()) / denom;
      if (x_star >= lo - 1e-12 && x_star <= hi + 1e-12) {
        const double t = (x_star - origin.x()) / dir.x();
        if (t >= 0.0) return t;
      }
    }
    if (std::isinf(seg_end)) return inf;  // escaped off the grid
    x_cursor = seg_end;
    i += step;
    if ((x_cursor - origin.x()) / dir.x() > t_max) return inf;
  }
  return inf;
}

}  // namespace

DepthScan raycast_depth(const Heightfield& hf, const Vec2& camera_pos, double camera_heading,
                        int n_rays, double fov, double clip_min, double clip_max) {
  if (n_rays < 1) throw std::invalid_argument("raycast: n_rays must be >= 1");
  if (!(clip_min < clip_max)) throw std::invalid_argument("raycast: clip_min must be < clip_max");
  DepthScan scan;
  scan.depths.resize(n_rays);
  scan.fov = fov;
  scan.clip_min = clip_min;
  scan.clip_max = clip_max;
  scan.camera_pos = camera_pos;
  scan.camera_heading = camera_heading;
  for (int r = 0; r < n_rays; ++r) {
    const double a = n_rays == 1
                         ? camera_heading
                         : camera_heading - fov / 2.0 + fov * double(r) / double(n_rays - 1);
    const Vec2 dir(std::cos(a), std::sin(a));
    const double t = ray_hit(hf, camera_pos, dir, clip_max);
    scan.depths[r] = std::clamp(t, clip_min, clip_max);
  }
  return scan;
}

}  // namespace upright
