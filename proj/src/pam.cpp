#include "pasdf/pam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "pasdf/parallel.hpp"

namespace pasdf {

// --- FPFH ----------------------------------------------------------------------

PairFeatures pair_features(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2) {
  PairFeatures f;
  Vec3 d = p2 - p1;
  const double dist = d.norm();
  if (dist == 0.0) return f;

  // Source of the Darboux frame is the endpoint whose normal is closer to the connecting line.
  Vec3 ns = n1, nt = n2;
  const double a1 = n1.dot(d) / dist;
  const double a2 = n2.dot(d) / dist;
  if (std::acos(std::clamp(std::abs(a1), 0.0, 1.0)) > std::acos(std::clamp(std::abs(a2), 0.0, 1.0))) {
    ns = n2;
    nt = n1;
    d = -d;
    f.phi = -a2;
  } else {
    f.phi = a1;
  }
  Vec3 v = d.cross(ns);
  const double vn = v.norm();
  if (vn == 0.0) {
    f.phi = 0.0;
    return f;
  }
  v /= vn;
  const Vec3 w = ns.cross(v);
  f.alpha = v.dot(nt);
  f.theta = std::atan2(w.dot(nt), ns.dot(nt));
  f.valid = true;
  return f;
}

namespace {

std::size_t bin_of(double unit) {
  // unit in [0, 1]
  const auto b = static_cast<long>(std::floor(static_cast<double>(kFpfhBins) * unit));
  return static_cast<std::size_t>(std::clamp<long>(b, 0, static_cast<long>(kFpfhBins) - 1));
}

void normalize_subhistograms(FpfhDescriptor& h) {
  for (std::size_t s = 0; s < 3; ++s) {
    double sum = 0.0;
    for (std::size_t b = 0; b < kFpfhBins; ++b) sum += h[s * kFpfhBins + b];
    if (sum > 0.0) {
      const double scale = 100.0 / sum;
      for (std::size_t b = 0; b < kFpfhBins; ++b) h[s * kFpfhBins + b] *= scale;
    }
  }
}

}  // namespace

std::vector<FpfhDescriptor> compute_fpfh(const PointCloud& cloud, double radius) {
  if (!cloud.has_normals()) throw InvalidInput("compute_fpfh: cloud has no normals");
  if (!(radius > 0.0)) throw InvalidParameter("compute_fpfh: radius must be positive");
  const std::size_t n = cloud.size();
  const SpatialIndex index(cloud.points);

  std::vector<std::vector<SpatialIndex::Neighbor>> neighbors(n);
  std::vector<FpfhDescriptor> spfh(n);
  parallel_for(n, [&](std::size_t i) {
    auto nbrs = index.radius_search(cloud.points[i], radius);
    std::erase_if(nbrs, [&](const auto& nb) { return nb.index == i || nb.sq_distance == 0.0; });
    FpfhDescriptor h{};
    for (const auto& nb : nbrs) {
      const auto f = pair_features(cloud.points[i], cloud.normals[i], cloud.points[nb.index], cloud.normals[nb.index]);
      if (!f.valid) continue;
      h[bin_of((f.theta + std::numbers::pi) / (2.0 * std::numbers::pi))] += 1.0;
      h[kFpfhBins + bin_of((f.alpha + 1.0) * 0.5)] += 1.0;
      h[2 * kFpfhBins + bin_of((f.phi + 1.0) * 0.5)] += 1.0;
    }
    normalize_subhistograms(h);
    spfh[i] = h;
    neighbors[i] = std::move(nbrs);
  });

  std::vector<FpfhDescriptor> fpfh(n);
  parallel_for(n, [&](std::size_t i) {
    const auto& nbrs = neighbors[i];
    FpfhDescriptor h{};
    if (!nbrs.empty()) {
      const double inv_k = 1.0 / static_cast<double>(nbrs.size());
      for (const auto& nb : nbrs) {
        const double w = inv_k / std::sqrt(nb.sq_distance);
        for (std::size_t b = 0; b < kFpfhSize; ++b) h[b] += w * spfh[nb.index][b];
      }
      for (std::size_t b = 0; b < kFpfhSize; ++b) h[b] += spfh[i][b];
      normalize_subhistograms(h);
    }
    fpfh[i] = h;
  });
  return fpfh;
}

// --- RANSAC --------------------------------------------------------------------

void RansacParams::validate() const {
  if (sample_size < 3) throw InvalidParameter("ransac: sample_size must be >= 3");
  if (max_iterations == 0) throw InvalidParameter("ransac: max_iterations must be >= 1");
  if (!(distance_threshold > 0.0)) throw InvalidParameter("ransac: distance_threshold must be positive");
  if (!(edge_length_ratio > 0.0 && edge_length_ratio < 1.0)) {
    throw InvalidParameter("ransac: edge_length_ratio must be in (0,1)");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidParameter("ransac: confidence must be in (0,1)");
}

namespace {
double descriptor_sq_distance(const FpfhDescriptor& a, const FpfhDescriptor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kFpfhSize; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<std::size_t> nearest_descriptors(const std::vector<FpfhDescriptor>& from,
                                             const std::vector<FpfhDescriptor>& to) {
  std::vector<std::size_t> out(from.size());
  parallel_for(from.size(), [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < to.size(); ++j) {
      const double d = descriptor_sq_distance(from[i], to[j]);
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    out[i] = arg;
  }, 16);
  return out;
}

struct Hypothesis {
  RigidTransform transform;
  std::size_t inliers = 0;
  double inlier_sq_sum = 0.0;
  std::size_t corr_inliers = 0;
  bool valid = false;
};

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (!b.valid) return a.valid;
  if (!a.valid) return false;
  if (a.inliers != b.inliers) return a.inliers > b.inliers;
  return a.inlier_sq_sum < b.inlier_sq_sum;
}
}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> mutual_matches(const std::vector<FpfhDescriptor>& f_src,
                                                                const std::vector<FpfhDescriptor>& f_tgt) {
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  if (f_src.empty() || f_tgt.empty()) return matches;
  const auto s2t = nearest_descriptors(f_src, f_tgt);
  const auto t2s = nearest_descriptors(f_tgt, f_src);
  for (std::size_t i = 0; i < f_src.size(); ++i) {
    if (t2s[s2t[i]] == i) matches.emplace_back(i, s2t[i]);
  }
  return matches;
}

double inlier_fraction(const PointCloud& src, const SpatialIndex& tgt, const RigidTransform& t, double threshold) {
  if (src.empty()) return 0.0;
  const double t2 = threshold * threshold;
  std::size_t count = 0;
  for (const auto& p : src.points) {
    if (tgt.nearest(t.apply(p)).sq_distance <= t2) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(src.size());
}

RansacResult ransac_align(const PointCloud& src, const PointCloud& tgt, const std::vector<FpfhDescriptor>& f_src,
                          const std::vector<FpfhDescriptor>& f_tgt, const RansacParams& params,
                          std::uint64_t seed) {
  params.validate();
  if (f_src.size() != src.size() || f_tgt.size() != tgt.size()) {
    throw InvalidInput("ransac_align: descriptor count does not match cloud size");
  }
  if (src.size() < params.sample_size || tgt.size() < params.sample_size) {
    throw CoarseAlignmentFailed("ransac_align: clouds smaller than sample size");
  }
  const auto matches = mutual_matches(f_src, f_tgt);
  if (matches.size() < params.sample_size) {
    throw CoarseAlignmentFailed("ransac_align: only " + std::to_string(matches.size()) +
                                " mutual correspondences");
  }

  const SpatialIndex tgt_index(tgt.points);
  const double thr2 = params.distance_threshold * params.distance_threshold;
  const std::size_t s = params.sample_size;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, matches.size() - 1);

  auto evaluate = [&](const std::vector<std::size_t>& sample) {
    Hypothesis h;
    // Edge-length consistency between the two sampled point sets.
    for (std::size_t a = 0; a < s; ++a) {
      for (std::size_t b = a + 1; b < s; ++b) {
        const double ls = (src.points[matches[sample[a]].first] - src.points[matches[sample[b]].first]).norm();
        const double lt = (tgt.points[matches[sample[a]].second] - tgt.points[matches[sample[b]].second]).norm();
        if (ls < params.edge_length_ratio * lt || lt < params.edge_length_ratio * ls) return h;
      }
    }
    std::vector<Vec3> ps, pt;
    ps.reserve(s);
    pt.reserve(s);
    for (auto m : sample) {
      ps.push_back(src.points[matches[m].first]);
      pt.push_back(tgt.points[matches[m].second]);
    }
    h.transform = fit_rigid(ps, pt);
    // Post-fit distance check on the sampled correspondences.
    for (std::size_t a = 0; a < s; ++a) {
      if ((h.transform.apply(ps[a]) - pt[a]).squaredNorm() > thr2) return h;
    }
    for (const auto& [i, j] : matches) {
      if ((h.transform.apply(src.points[i]) - tgt.points[j]).squaredNorm() <= thr2) ++h.corr_inliers;
    }
    for (const auto& p : src.points) {
      const double d = tgt_index.nearest(h.transform.apply(p)).sq_distance;
      if (d <= thr2) {
        ++h.inliers;
        h.inlier_sq_sum += d;
      }
    }
    h.valid = true;
    return h;
  };

  constexpr std::size_t kBlock = 256;
  Hypothesis best;
  std::size_t tried = 0;
  std::size_t needed = params.max_iterations;
  std::vector<std::vector<std::size_t>> samples;
  std::vector<Hypothesis> results;
  while (tried < std::min(needed, params.max_iterations)) {
    const std::size_t block = std::min(kBlock, params.max_iterations - tried);
    samples.assign(block, {});
    for (auto& sample : samples) {
      while (sample.size() < s) {
        const std::size_t m = pick(rng);
        if (std::find(sample.begin(), sample.end(), m) == sample.end()) sample.push_back(m);
      }
    }
    results.assign(block, Hypothesis{});
    parallel_for(block, [&](std::size_t b) { results[b] = evaluate(samples[b]); }, 8);
    for (const auto& h : results) {
      if (better(h, best)) best = h;
    }
    tried += block;
    if (best.valid && best.corr_inliers > 0) {
      const double w = static_cast<double>(best.corr_inliers) / static_cast<double>(matches.size());
      const double ws = std::pow(w, static_cast<double>(s));
      if (ws >= 1.0) {
        needed = tried;
      } else if (ws > 0.0) {
        const double est = std::log(1.0 - params.confidence) / std::log(1.0 - ws);
        if (std::isfinite(est)) needed = static_cast<std::size_t>(std::ceil(std::max(est, 1.0)));
      }
    }
  }

  RansacResult result;
  result.correspondences = matches.size();
  result.hypotheses = tried;
  if (!best.valid) {
    throw CoarseAlignmentFailed("ransac_align: no hypothesis passed the consistency checks");
  }

  // Refit on the point-level inliers of the best hypothesis.
  std::vector<Vec3> ps, pt;
  for (const auto& p : src.points) {
    const Vec3 q = best.transform.apply(p);
    const auto nb = tgt_index.nearest(q);
    if (nb.sq_distance <= thr2) {
      ps.push_back(p);
      pt.push_back(tgt.points[nb.index]);
    }
  }
  result.transform = best.transform;
  result.inliers = best.inliers;
  if (ps.size() >= 3) {
    const RigidTransform refit = fit_rigid(ps, pt);
    std::size_t refit_inliers = 0;
    for (const auto& p : src.points) {
      if (tgt_index.nearest(refit.apply(p)).sq_distance <= thr2) ++refit_inliers;
    }
    if (refit_inliers >= best.inliers) {
      result.transform = refit;
      result.inliers = refit_inliers;
    }
  }
  result.inlier_fraction = static_cast<double>(result.inliers) / static_cast<double>(src.size());
  return result;
}

// --- ICP -------------------------------------------------------------------------

IcpResult icp_refine(const PointCloud& src, const PointCloud& tgt, const RigidTransform& init, std::size_t max_iter,
                     double tol) {
  require_non_empty(src, "icp_refine src");
  require_non_empty(tgt, "icp_refine tgt");
  const SpatialIndex index(tgt.points);
  const std::size_t n = src.size();
  std::vector<Vec3> moved(n), matched(n);
  std::vector<double> d2(n);

  auto correspond = [&](const RigidTransform& t) {
    parallel_for(n, [&](std::size_t i) {
      moved[i] = t.apply(src.points[i]);
      const auto nb = index.nearest(moved[i]);
      matched[i] = tgt.points[nb.index];
      d2[i] = nb.sq_distance;
    });
    double sum = 0.0;
    for (double v : d2) sum += v;
    return sum / static_cast<double>(n);
  };

  IcpResult result;
  result.transform = init;
  result.residuals.push_back(correspond(init));
  for (std::size_t it = 0; it < max_iter; ++it) {
    const RigidTransform delta = fit_rigid(moved, matched);
    const RigidTransform candidate = compose(delta, result.transform);
    const std::vector<Vec3> prev_moved = moved, prev_matched = matched;
    const double residual = correspond(candidate);
    const double previous = result.residuals.back();
    if (residual > previous) {
      // Rounding-level increase at a fixed point: keep the previous state.
      moved = prev_moved;
      matched = prev_matched;
      break;
    }
    result.transform = candidate;
    result.residuals.push_back(residual);
    ++result.iterations;
    if (previous - residual < tol) break;
  }
  return result;
}

// --- Pose-wise alignment loop ------------------------------------------------------

void PamParams::validate() const {
  if (!(tau > 0.0)) throw InvalidParameter("pam: tau must be positive");
  if (!(delta_tau >= 0.0)) throw InvalidParameter("pam: delta_tau must be non-negative");
  if (k_max < 1) throw InvalidParameter("pam: k_max must be >= 1");
  if (!(voxel_size >= 0.0) && !(voxel_size <= 0.0)) throw InvalidParameter("pam: voxel_size is NaN");
  if (voxel_size <= 0.0 && !(auto_voxel_divisor > 0.0)) throw InvalidParameter("pam: auto_voxel_divisor must be positive");
  if (!(fpfh_radius_factor > 0.0)) throw InvalidParameter("pam: fpfh_radius_factor must be positive");
  if (!(ransac_distance_factor > 0.0)) throw InvalidParameter("pam: ransac_distance_factor must be positive");
  if (normal_k < 3) throw InvalidParameter("pam: normal_k must be >= 3");
  if (ransac_max_iterations < 1) throw InvalidParameter("pam: ransac_max_iterations must be >= 1");
  if (!(edge_length_ratio > 0.0 && edge_length_ratio < 1.0)) throw InvalidParameter("pam: edge_length_ratio must be in (0,1)");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidParameter("pam: confidence must be in (0,1)");
  if (!(icp_tol >= 0.0)) throw InvalidParameter("pam: icp_tol must be non-negative");
}

double PamParams::resolve_voxel(const PointCloud& tgt) const {
  if (voxel_size > 0.0) return voxel_size;
  const double diag = bounding_box(tgt.points).diagonal();
  return diag > 0.0 ? diag / auto_voxel_divisor : 1e-3;
}

namespace {

struct Features {
  PointCloud cloud;
  std::vector<FpfhDescriptor> fpfh;
};

// Normals oriented toward the cloud centroid: the rule moves with the cloud, so the
// same surface patch gets the same orientation in every pose.
Features describe(const PointCloud& down, const PamParams& params, double voxel) {
  Features f;
  if (down.size() < 3) {
    f.cloud = down;
    return f;
  }
  const std::size_t k = std::min(params.normal_k, down.size());
  f.cloud = estimate_normals(down, k, centroid(down.points)).cloud;
  f.fpfh = compute_fpfh(f.cloud, params.fpfh_radius_factor * voxel);
  return f;
}

}  // namespace

AlignmentResult pose_align(const PointCloud& src, const PointCloud& tgt, const PamParams& params, std::uint64_t seed) {
  params.validate();
  require_non_empty(src, "pose_align src");
  require_non_empty(tgt, "pose_align tgt");
  const double voxel = params.resolve_voxel(tgt);

  const PointCloud tgt_down = voxel_downsample(tgt, voxel);
  const Features tgt_feat = describe(tgt_down, params, voxel);

  RansacParams rp;
  rp.max_iterations = params.ransac_max_iterations;
  rp.distance_threshold = params.ransac_distance_factor * voxel;
  rp.edge_length_ratio = params.edge_length_ratio;
  rp.confidence = params.confidence;

  auto loss_of = [&](const PointCloud& moved_down, const PointCloud& moved_full) {
    return params.chamfer_on_downsampled ? chamfer_loss(moved_down, tgt_down) : chamfer_loss(moved_full, tgt);
  };

  AlignmentResult result;
  PointCloud current = src;
  PointCloud current_down = voxel_downsample(current, voxel);
  result.initial_chamfer = loss_of(current_down, current);

  RigidTransform cumulative;
  double best_loss = result.initial_chamfer;
  RigidTransform best_transform;
  PointCloud best_cloud = src;
  double tau = params.tau;

  for (std::size_t k = 1; k <= params.k_max; ++k) {
    PamIteration iter;
    const Features src_feat = describe(current_down, params, voxel);
    try {
      if (src_feat.fpfh.empty() || tgt_feat.fpfh.empty()) {
        throw CoarseAlignmentFailed("too few points for descriptors");
      }
      iter.ransac = ransac_align(src_feat.cloud, tgt_feat.cloud, src_feat.fpfh, tgt_feat.fpfh, rp,
                                 derive_seed(seed, k)).transform;
    } catch (const CoarseAlignmentFailed&) {
      iter.ransac = RigidTransform::identity();
      iter.ransac_failed = true;
    }
    const IcpResult icp = icp_refine(current, tgt, iter.ransac, params.icp_max_iter, params.icp_tol);
    iter.icp = compose(icp.transform, iter.ransac.inverse());
    cumulative = compose(icp.transform, cumulative);
    iter.cumulative = cumulative;

    current = apply_transform(cumulative, src);
    current_down = voxel_downsample(current, voxel);
    iter.chamfer = loss_of(current_down, current);
    iter.tau = tau;
    result.history.push_back(iter);
    result.iterations_used = k;

    if (iter.chamfer < best_loss) {
      best_loss = iter.chamfer;
      best_transform = cumulative;
      best_cloud = current;
      result.best_iteration = k;
    }
    if (iter.chamfer < tau) break;
    tau += params.delta_tau;
  }

  result.cumulative = best_transform;
  result.aligned = std::move(best_cloud);
  result.final_chamfer = best_loss;
  result.converged = best_loss < tau;
  return result;
}

}  // namespace pasdf
