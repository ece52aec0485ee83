#include "gf/morphometrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gf {

std::vector<ProfilePoint> anterior_profile(const LabelVolume& labels, int z) {
  if (z < 0 || z >= labels.dims[2]) throw morphometry_error("anterior_profile: slice index out of range");
  std::vector<ProfilePoint> profile(static_cast<std::size_t>(labels.dims[0]));
  bool any = false;
  for (int i = 0; i < labels.dims[0]; ++i) {
    ProfilePoint& pt = profile[static_cast<std::size_t>(i)];
    pt.lateral_mm = labels.origin[0] + i * labels.spacing[0];
    for (int j = labels.dims[1] - 1; j >= 0; --j) {
      if (labels.at(i, j, z) == kFemur) {
        pt.anterior_mm = labels.origin[1] + j * labels.spacing[1];
        pt.present = true;
        any = true;
        break;
      }
    }
  }
  if (!any) {
    throw morphometry_error("anterior_profile: no femur in slice " + std::to_string(z));
  }
  return profile;
}

namespace {

// Longest run of consecutive columns that contain femur.
std::pair<int, int> widest_present_run(const std::vector<ProfilePoint>& profile) {
  int best_b = 0, best_e = 0, b = -1;
  const int n = static_cast<int>(profile.size());
  for (int i = 0; i <= n; ++i) {
    if (i < n && profile[static_cast<std::size_t>(i)].present) {
      if (b < 0) b = i;
    } else if (b >= 0) {
      if (i - b > best_e - best_b) {
        best_b = b;
        best_e = i;
      }
      b = -1;
    }
  }
  return {best_b, best_e};
}

// 3-tap mean filter; ends use the available neighbours.
std::vector<double> smooth3(const std::vector<double>& y) {
  const int n = static_cast<int>(y.size());
  std::vector<double> out(y.size());
  for (int i = 0; i < n; ++i) {
    double acc = y[static_cast<std::size_t>(i)];
    int cnt = 1;
    if (i > 0) { acc += y[static_cast<std::size_t>(i - 1)]; ++cnt; }
    if (i + 1 < n) { acc += y[static_cast<std::size_t>(i + 1)]; ++cnt; }
    out[static_cast<std::size_t>(i)] = acc / cnt;
  }
  return out;
}

struct LineFit {
  double slope = 0.0, intercept = 0.0;
  bool ok = false;
};

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  LineFit f;
  const std::size_t n = xs.size();
  if (n < 2) return f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-12) return f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  f.ok = true;
  return f;
}

SulcusMeasurement invalid(int z, SulcusInvalidReason reason) {
  SulcusMeasurement m;
  m.slice = z;
  m.reason = reason;
  return m;
}

double interior_angle_deg(const std::array<double, 2>& trough, const std::array<double, 2>& pl,
                          const std::array<double, 2>& pm) {
  const double ax = pl[0] - trough[0], ay = pl[1] - trough[1];
  const double bx = pm[0] - trough[0], by = pm[1] - trough[1];
  const double na = std::hypot(ax, ay), nb = std::hypot(bx, by);
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double c = std::clamp((ax * bx + ay * by) / (na * nb), -1.0, 1.0);
  return std::acos(c) * 180.0 / 3.14159265358979323846;
}

double chord_distance(const std::array<double, 2>& trough, const std::array<double, 2>& pl,
                      const std::array<double, 2>& pm) {
  const double dx = pm[0] - pl[0], dy = pm[1] - pl[1];
  const double len = std::hypot(dx, dy);
  if (len == 0.0) return 0.0;
  return std::abs(dx * (pl[1] - trough[1]) - dy * (pl[0] - trough[0])) / len;
}

}  // namespace

SulcusMeasurement measure_sulcus_slice(const LabelVolume& labels, int z, const SulcusOptions& opts) {
  std::vector<ProfilePoint> profile;
  try {
    profile = anterior_profile(labels, z);
  } catch (const morphometry_error&) {
    return invalid(z, SulcusInvalidReason::NoFemur);
  }

  const auto [run_b, run_e] = widest_present_run(profile);
  const int run_n = run_e - run_b;
  if (run_n < 5) return invalid(z, SulcusInvalidReason::NoFemur);

  std::vector<double> xs(static_cast<std::size_t>(run_n)), ys(static_cast<std::size_t>(run_n));
  for (int i = 0; i < run_n; ++i) {
    xs[static_cast<std::size_t>(i)] = profile[static_cast<std::size_t>(run_b + i)].lateral_mm;
    ys[static_cast<std::size_t>(i)] = profile[static_cast<std::size_t>(run_b + i)].anterior_mm;
  }
  const std::vector<double> sm = smooth3(ys);

  // Trough: global minimum of the smoothed profile, interior columns only.
  int trough_i = -1;
  double trough_v = std::numeric_limits<double>::infinity();
  for (int i = 1; i + 1 < run_n; ++i) {
    if (sm[static_cast<std::size_t>(i)] < trough_v) {
      trough_v = sm[static_cast<std::size_t>(i)];
      trough_i = i;
    }
  }
  if (trough_i < 0) return invalid(z, SulcusInvalidReason::NoTrough);

  // Peaks: highest smoothed value on each side; among ties take the column
  // nearest the trough (the groove rim, not the far plateau corner).
  auto pick_peak = [&](int begin, int end, int step) -> int {
    int best = -1;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int i = begin; i != end; i += step) {
      const double v = sm[static_cast<std::size_t>(i)];
      if (v > best_v + 1e-12) {
        best_v = v;
        best = i;
      }
    }
    return best;
  };
  // scan outward from the trough so "nearest on tie" falls out naturally
  const int peak_l = pick_peak(trough_i - 1, -1, -1);
  const int peak_r = pick_peak(trough_i + 1, run_n, +1);
  if (peak_l < 0 || peak_r < 0) return invalid(z, SulcusInvalidReason::TooFewPeaks);

  // Unsmoothed heights at the landmark columns drive the actual measurements.
  // A groove needs depth below both peaks before anything else qualifies.
  const double prom = std::min(ys[static_cast<std::size_t>(peak_l)], ys[static_cast<std::size_t>(peak_r)]) -
                      ys[static_cast<std::size_t>(trough_i)];
  if (prom < opts.min_prominence_mm) return invalid(z, SulcusInvalidReason::NoTrough);

  const double sep = xs[static_cast<std::size_t>(peak_r)] - xs[static_cast<std::size_t>(peak_l)];
  if (sep < opts.min_peak_separation_mm) return invalid(z, SulcusInvalidReason::TooFewPeaks);

  SulcusMeasurement m;
  m.slice = z;
  m.lateral_peak = {xs[static_cast<std::size_t>(peak_l)], ys[static_cast<std::size_t>(peak_l)]};
  m.medial_peak = {xs[static_cast<std::size_t>(peak_r)], ys[static_cast<std::size_t>(peak_r)]};
  m.trough = {xs[static_cast<std::size_t>(trough_i)], ys[static_cast<std::size_t>(trough_i)]};

  bool refined = false;
  if (opts.refine_subvoxel) {
    // Fit a line to each groove wall and take the landmarks from the lines:
    // trough = wall intersection, rims = walls meeting the plateau levels.
    // Wall points are selected by a height band between trough and plateau
    // so neither the flat plateau nor the clipped corner voxels bias the
    // slopes; the band margin absorbs the voxel quantization.
    const double step_y = labels.spacing[1];
    const double trough_h = ys[static_cast<std::size_t>(trough_i)];
    // The voxelized profile is a staircase whose risers cross the true wall
    // line; riser midpoints are unbiased samples of the wall, unlike the
    // floor-quantized tread heights.
    auto wall_fit = [&](int from, int to, double plateau_h) -> LineFit {
      const int lo = std::min(from, to), hi = std::max(from, to);
      std::vector<double> ex, ey;
      for (int i = lo; i < hi; ++i) {
        const double h0 = ys[static_cast<std::size_t>(i)];
        const double h1 = ys[static_cast<std::size_t>(i + 1)];
        if (std::abs(h1 - h0) > 0.5 * step_y) {
          ex.push_back(0.5 * (xs[static_cast<std::size_t>(i)] + xs[static_cast<std::size_t>(i + 1)]));
          ey.push_back(0.5 * (h0 + h1));
        }
      }
      if (ex.size() >= 3) {
        const LineFit f = fit_line(ex, ey);
        if (f.ok) return f;
      }
      // fallback: least squares over tread heights inside a band that
      // excludes the trough and plateau corners
      const double band_lo = trough_h + 0.6 * step_y;
      const double band_hi = plateau_h - 0.6 * step_y;
      std::vector<double> wx, wy;
      for (int i = lo; i <= hi; ++i) {
        const double h = ys[static_cast<std::size_t>(i)];
        if (h > band_lo && h < band_hi) {
          wx.push_back(xs[static_cast<std::size_t>(i)]);
          wy.push_back(h);
        }
      }
      return fit_line(wx, wy);
    };
    const double yl = ys[static_cast<std::size_t>(peak_l)];
    const double yr = ys[static_cast<std::size_t>(peak_r)];
    const LineFit left = wall_fit(peak_l, trough_i, yl);
    const LineFit right = wall_fit(trough_i, peak_r, yr);
    if (left.ok && right.ok && left.slope < -1e-9 && right.slope > 1e-9) {
      const double tx = (right.intercept - left.intercept) / (left.slope - right.slope);
      const double ty = left.slope * tx + left.intercept;
      const double rim_lx = (yl - left.intercept) / left.slope;
      const double rim_rx = (yr - right.intercept) / right.slope;
      const bool sane = tx > m.lateral_peak[0] && tx < m.medial_peak[0] && rim_lx < tx && rim_rx > tx &&
                        ty < std::min(yl, yr);
      if (sane) {
        m.trough = {tx, ty};
        m.lateral_peak = {rim_lx, yl};
        m.medial_peak = {rim_rx, yr};
        // Angle straight from the wall directions; identical to the rays to
        // the rims (all three landmarks sit on the fitted lines) but without
        // the 1/slope error amplification of the rim extrapolation.
        const double al = std::atan2(-left.slope, -1.0);   // toward the lateral rim
        const double ar = std::atan2(right.slope, 1.0);    // toward the medial rim
        m.sulcus_angle_deg = std::abs(al - ar) * 180.0 / 3.14159265358979323846;
        if (m.sulcus_angle_deg > 180.0) m.sulcus_angle_deg = 360.0 - m.sulcus_angle_deg;
        m.groove_depth_mm = chord_distance(m.trough, m.lateral_peak, m.medial_peak);
        refined = true;
      }
    }
  }

  if (!refined) {
    m.sulcus_angle_deg = interior_angle_deg(m.trough, m.lateral_peak, m.medial_peak);
    m.groove_depth_mm = chord_distance(m.trough, m.lateral_peak, m.medial_peak);
  }
  m.valid = true;
  return m;
}

SulcusMeasurement measure_sulcus(const LabelVolume& labels, const SulcusOptions& opts) {
  // z range: around the patella centroid when one exists, otherwise all.
  int z_lo = 0, z_hi = labels.dims[2] - 1;
  {
    double zc = 0.0;
    std::size_t count = 0;
    for (int k = 0; k < labels.dims[2]; ++k) {
      for (int j = 0; j < labels.dims[1]; ++j) {
        for (int i = 0; i < labels.dims[0]; ++i) {
          if (labels.at(i, j, k) == kPatella) {
            zc += k;
            ++count;
          }
        }
      }
    }
    if (count > 0) {
      zc /= static_cast<double>(count);
      const int half = static_cast<int>(std::ceil(opts.slice_halfrange_mm / labels.spacing[2]));
      z_lo = std::max(0, static_cast<int>(std::floor(zc)) - half);
      z_hi = std::min(labels.dims[2] - 1, static_cast<int>(std::ceil(zc)) + half);
    }
  }

  SulcusMeasurement best;
  SulcusMeasurement fallback = invalid((z_lo + z_hi) / 2, SulcusInvalidReason::NoFemur);
  for (int z = z_lo; z <= z_hi; ++z) {
    const SulcusMeasurement m = measure_sulcus_slice(labels, z, opts);
    if (m.valid) {
      if (!best.valid || m.groove_depth_mm > best.groove_depth_mm) best = m;
    } else if (z == (z_lo + z_hi) / 2) {
      fallback = m;
    }
  }
  return best.valid ? best : fallback;
}

const char* sulcus_reason_name(SulcusInvalidReason r) {
  switch (r) {
    case SulcusInvalidReason::None: return "none";
    case SulcusInvalidReason::NoFemur: return "no_femur";
    case SulcusInvalidReason::TooFewPeaks: return "too_few_peaks";
    case SulcusInvalidReason::NoTrough: return "no_trough";
  }
  return "unknown";
}

// --- Wilcoxon ------------------------------------------------------------------

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& before, const std::vector<double>& after) {
  if (before.size() != after.size()) {
    throw morphometry_error("wilcoxon: before/after length mismatch");
  }
  std::vector<double> diffs;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double d = after[i] - before[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw morphometry_error("wilcoxon: all differences are zero");
  const int n = static_cast<int>(diffs.size());
  if (n < 5) throw morphometry_error("wilcoxon: need at least 5 non-zero differences, have " + std::to_string(n));

  // Average ranks of |d|, ties shared.
  std::vector<int> idx(diffs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return std::abs(diffs[static_cast<std::size_t>(a)]) < std::abs(diffs[static_cast<std::size_t>(b)]); });
  std::vector<double> rank(diffs.size());
  std::vector<double> tie_sizes;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    const double v = std::abs(diffs[static_cast<std::size_t>(idx[i])]);
    while (j < idx.size() && std::abs(diffs[static_cast<std::size_t>(idx[j])]) == v) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) rank[static_cast<std::size_t>(idx[k])] = avg;
    if (j - i > 1) tie_sizes.push_back(static_cast<double>(j - i));
    i = j;
  }

  double w_plus = 0.0, total = 0.0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    total += rank[i];
    if (diffs[i] > 0) w_plus += rank[i];
  }
  const double w_minus = total - w_plus;
  const double w_min = std::min(w_plus, w_minus);

  WilcoxonResult result;
  result.n = n;
  result.w_statistic = w_min;
  result.direction = w_plus > w_minus  ? ShiftDirection::AfterGreater
                     : w_plus < w_minus ? ShiftDirection::BeforeGreater
                                        : ShiftDirection::None;

  if (n <= 25) {
    // Exact distribution of W+ over all 2^n sign assignments, with the
    // observed (possibly tied) ranks. Half-units keep everything integral.
    std::vector<long> r2(diffs.size());
    long total2 = 0;
    for (std::size_t i = 0; i < diffs.size(); ++i) {
      r2[i] = std::lround(2.0 * rank[i]);
      total2 += r2[i];
    }
    std::vector<double> count(static_cast<std::size_t>(total2) + 1, 0.0);
    count[0] = 1.0;
    long upper = 0;
    for (std::size_t i = 0; i < r2.size(); ++i) {
      upper += r2[i];
      for (long s = upper; s >= r2[i]; --s) {
        count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r2[i])];
      }
    }
    const long w2 = std::lround(2.0 * w_min);
    double tail_lo = 0.0, tail_hi = 0.0;
    for (long s = 0; s <= total2; ++s) {
      if (s <= w2) tail_lo += count[static_cast<std::size_t>(s)];
      if (s >= total2 - w2) tail_hi += count[static_cast<std::size_t>(s)];
    }
    const double denom = std::pow(2.0, n);
    result.p_value = std::min(1.0, (tail_lo + tail_hi) / denom);
    result.exact = true;
  } else {
    const double mu = n * (n + 1) / 4.0;
    double tie_term = 0.0;
    for (double t : tie_sizes) tie_term += t * t * t - t;
    const double var = n * (n + 1) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    const double num = std::max(0.0, std::abs(w_plus - mu) - 0.5);  // continuity correction
    const double zstat = var > 0 ? num / std::sqrt(var) : 0.0;
    result.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(zstat)));
    result.exact = false;
  }
  return result;
}

}  // namespace gf
