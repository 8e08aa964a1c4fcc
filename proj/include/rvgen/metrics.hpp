#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "rvgen/range_codec.hpp"

namespace rvgen {

using FeatureVector = Eigen::VectorXd;

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // symmetric PSD within tolerance
};

// Sample mean and covariance (divisor N-1). Needs >= 2 vectors of equal
// dimension.
GaussianStats gaussian_stats(const std::vector<FeatureVector>& set);

// Frechet distance between Gaussians:
//   |mu_a - mu_b|^2 + tr(cov_a + cov_b - 2 (cov_a cov_b)^{1/2}).
// The matrix square root is computed by symmetric eigendecomposition of
// cov_a^{1/2} cov_b cov_a^{1/2}; eigenvalues in [-1e-8, 0) clamp to zero,
// anything lower is a numerical-domain error. Identical inputs return 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

// Biased V-statistic MMD^2 with the third-order polynomial kernel
//   k(f,g) = (f.g / d + 1)^3,  d = feature dimension.
// Diagonal terms included; reduction order is fixed (row-major, per-row
// serial sums) so results are bit-stable.
double mmd_poly3(const std::vector<FeatureVector>& set_r,
                 const std::vector<FeatureVector>& set_g);

// Jensen-Shannon divergence, base-2 logs, between two distributions that
// each sum to 1 within 1e-6. Zero entries contribute zero. Range [0,1].
double jsd(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

// --- bird's-eye-view occupancy ------------------------------------------------

struct BevConfig {
  double x_min = -50.0, x_max = 50.0;
  double y_min = -50.0, y_max = 50.0;
  int bins = 16;
};

void validate(const BevConfig& b);

// Per-class counts, C x B x B flattened as [c][ix][iy]. Out-of-bounds
// points are dropped; the upper boundary closes into the last bin.
struct BevHistogram {
  int num_classes = 0;
  int bins = 0;
  std::vector<double> counts;  // C*B*B

  double& at(int c, int ix, int iy) {
    return counts[(static_cast<std::size_t>(c) * bins + ix) * bins + iy];
  }
  double at(int c, int ix, int iy) const {
    return counts[(static_cast<std::size_t>(c) * bins + ix) * bins + iy];
  }
  // Sum over classes: the class-agnostic B x B histogram.
  std::vector<double> class_marginal() const;
};

// Labeled clouds only (usage error otherwise).
BevHistogram bev_histogram(const PointCloud& cloud, const BevConfig& config,
                           int num_classes);
// Class-agnostic variant; works on unlabeled clouds too.
std::vector<double> bev_histogram_unlabeled(const PointCloud& cloud,
                                            const BevConfig& config);

// --- feature extractors -------------------------------------------------------

class SceneFeatureExtractor {
 public:
  virtual ~SceneFeatureExtractor() = default;
  virtual FeatureVector extract(const RangeScene& scene) const = 0;
};

class PointFeatureExtractor {
 public:
  virtual ~PointFeatureExtractor() = default;
  virtual FeatureVector extract(const PointCloud& cloud) const = 0;
};

class MapFeatureExtractor {
 public:
  virtual ~MapFeatureExtractor() = default;
  virtual FeatureVector extract(const SemanticMap& map) const = 0;
};

// Range-view descriptor: histogram of masked depth_log values over [-1,1]
// (normalized by total pixel count, so coverage is encoded) + mean/std of
// depth_log and reflectance over masked pixels. dim = bins + 4.
class DefaultSceneExtractor : public SceneFeatureExtractor {
 public:
  explicit DefaultSceneExtractor(int bins = 32) : bins_(bins) {}
  FeatureVector extract(const RangeScene& scene) const override;

 private:
  int bins_;
};

// Cartesian descriptor: mean/std of x,y,z + mean/std of reflectance +
// radial histogram of sqrt(x^2+y^2) over [0, radius_max] normalized by
// point count. dim = 8 + bins.
class DefaultPointExtractor : public PointFeatureExtractor {
 public:
  DefaultPointExtractor(int bins = 16, double radius_max = 50.0)
      : bins_(bins), radius_max_(radius_max) {}
  FeatureVector extract(const PointCloud& cloud) const override;

 private:
  int bins_;
  double radius_max_;
};

// Semantic descriptor: per-class pixel fraction. dim = num_classes.
class DefaultMapExtractor : public MapFeatureExtractor {
 public:
  FeatureVector extract(const SemanticMap& map) const override;
};

struct ExtractorSet {
  std::shared_ptr<SceneFeatureExtractor> scene;
  std::shared_ptr<PointFeatureExtractor> point;
  std::shared_ptr<MapFeatureExtractor> map;

  static ExtractorSet defaults(const BevConfig& bev, int scene_bins = 32,
                               int radial_bins = 16);
};

// Scene-level semantic feature: scene (or point) descriptor first, then the
// map descriptor, concatenated.
FeatureVector semantic_feature(const FeatureVector& content,
                               const FeatureVector& semantics);

// --- full evaluation ----------------------------------------------------------

struct LabeledScene {
  RangeScene scene;
  SemanticMap map;
};

struct EvalConfig {
  BevConfig bev;
};

struct MetricReport {
  int n_real = 0;
  int n_gen = 0;
  double frd = 0, s_frd = 0;
  double mmd_range = 0, s_mmd_range = 0;
  double fpd = 0, s_fpd = 0;
  double mmd_cart = 0, s_mmd_cart = 0;
  double jsd = 0, s_jsd = 0;
  double mmd_bev = 0, s_mmd_bev = 0;
};

// Computes the full report: range-view Frechet/MMD, Cartesian Frechet/MMD
// (clouds reconstructed by bin-center unprojection), BEV JSD and MMD, each
// in plain and semantic variants. Deterministic; needs >= 2 scenes per set.
MetricReport evaluate_sets(const std::vector<LabeledScene>& real,
                           const std::vector<LabeledScene>& gen,
                           const ExtractorSet& extractors,
                           const EvalConfig& config);

}  // namespace rvgen
