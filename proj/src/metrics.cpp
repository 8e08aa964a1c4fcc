#include "rvgen/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "rvgen/errors.hpp"

namespace rvgen {

namespace {

constexpr double kEigenClampFloor = -1e-8;

// Clamp tiny negative eigenvalues (roundoff on PSD matrices) to zero; reject
// anything materially negative.
double clamp_psd_eigenvalue(double lambda, const char* what) {
  if (lambda >= 0.0) return lambda;
  if (lambda >= kEigenClampFloor) return 0.0;
  throw NumericalDomainError(std::string(what) +
                             ": eigenvalue below tolerance: " +
                             std::to_string(lambda));
}

void check_symmetric(const Eigen::MatrixXd& m, const char* what) {
  if ((m - m.transpose()).lpNorm<Eigen::Infinity>() > 1e-9)
    throw UsageError(std::string(what) + ": covariance is not symmetric");
}

// Symmetric PSD square root via eigendecomposition.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd roots = es.eigenvalues();
  for (long i = 0; i < roots.size(); ++i)
    roots[i] = std::sqrt(clamp_psd_eigenvalue(roots[i], what));
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

void check_psd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  for (long i = 0; i < es.eigenvalues().size(); ++i)
    clamp_psd_eigenvalue(es.eigenvalues()[i], what);
}

double poly3_kernel(const FeatureVector& a, const FeatureVector& b, double d) {
  double dot = 0.0;
  for (long k = 0; k < a.size(); ++k) dot += a[k] * b[k];
  double u = dot / d + 1.0;
  return u * u * u;
}

// Row-major, per-row serial pairwise kernel sum (bit-stable order).
double kernel_sum(const std::vector<FeatureVector>& a,
                  const std::vector<FeatureVector>& b, double d) {
  double total = 0.0;
  for (const auto& fa : a) {
    double row = 0.0;
    for (const auto& fb : b) row += poly3_kernel(fa, fb, d);
    total += row;
  }
  return total;
}

void check_same_dims(const std::vector<FeatureVector>& set, long dim,
                     const char* what) {
  for (const auto& f : set)
    if (f.size() != dim)
      throw UsageError(std::string(what) + ": inconsistent feature dimensions");
}

int bin_index(double v, double lo, double hi, int bins) {
  int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
  return std::clamp(b, 0, bins - 1);
}

double population_std(double sum, double sum_sq, double n) {
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  return std::sqrt(std::max(var, 0.0));
}

}  // namespace

GaussianStats gaussian_stats(const std::vector<FeatureVector>& set) {
  if (set.size() < 2)
    throw InsufficientDataError(
        "gaussian_stats: need at least 2 feature vectors, got " +
        std::to_string(set.size()));
  long d = set[0].size();
  check_same_dims(set, d, "gaussian_stats");
  double n = static_cast<double>(set.size());

  GaussianStats out;
  out.mean = Eigen::VectorXd::Zero(d);
  for (const auto& f : set) out.mean += f;
  out.mean /= n;

  out.cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& f : set) {
    Eigen::VectorXd c = f - out.mean;
    out.cov += c * c.transpose();
  }
  out.cov /= (n - 1.0);
  return out;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != a.mean.size() ||
      a.cov.rows() != a.cov.cols() || b.cov.rows() != b.mean.size() ||
      b.cov.rows() != b.cov.cols())
    throw UsageError("frechet_distance: dimension mismatch");
  check_symmetric(a.cov, "frechet_distance");
  check_symmetric(b.cov, "frechet_distance");

  bool identical = (a.mean.array() == b.mean.array()).all() &&
                   (a.cov.array() == b.cov.array()).all();
  if (identical) {
    check_psd(a.cov, "frechet_distance");
    return 0.0;
  }

  Eigen::MatrixXd root_a = psd_sqrt(a.cov, "frechet_distance");
  check_psd(b.cov, "frechet_distance");

  Eigen::MatrixXd inner = root_a * b.cov * root_a;
  inner = ((inner + inner.transpose()) * 0.5).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner,
                                                    Eigen::EigenvaluesOnly);
  double trace_sqrt = 0.0;
  for (long i = 0; i < es.eigenvalues().size(); ++i)
    trace_sqrt +=
        std::sqrt(clamp_psd_eigenvalue(es.eigenvalues()[i], "frechet_distance"));

  double mean_term = (a.mean - b.mean).squaredNorm();
  double trace_term = a.cov.trace() + b.cov.trace() - 2.0 * trace_sqrt;
  double result = mean_term + trace_term;
  if (result < 0.0) {
    if (result < -1e-6)
      throw NumericalDomainError("frechet_distance: negative distance " +
                                 std::to_string(result));
    result = 0.0;
  }
  return result;
}

double mmd_poly3(const std::vector<FeatureVector>& set_r,
                 const std::vector<FeatureVector>& set_g) {
  if (set_r.empty() || set_g.empty())
    throw UsageError("mmd_poly3: both feature sets must be non-empty");
  long d = set_r[0].size();
  check_same_dims(set_r, d, "mmd_poly3");
  check_same_dims(set_g, d, "mmd_poly3");
  if (d == 0) throw UsageError("mmd_poly3: zero-dimensional features");

  double dd = static_cast<double>(d);
  double n = static_cast<double>(set_r.size());
  double m = static_cast<double>(set_g.size());
  double term_rr = kernel_sum(set_r, set_r, dd) / (n * n);
  double term_gg = kernel_sum(set_g, set_g, dd) / (m * m);
  double term_rg = kernel_sum(set_r, set_g, dd) / (n * m);
  // Grouped so identical sets cancel exactly: (t1 + t3) - 2*t2 with
  // t1 == t3 == t2 bitwise.
  return (term_rr + term_gg) - 2.0 * term_rg;
}

double jsd(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw UsageError("jsd: dimension mismatch");
  double sum_p = 0.0, sum_q = 0.0;
  for (long i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0)
      throw UsageError("jsd: negative probability entry");
    sum_p += p[i];
    sum_q += q[i];
  }
  if (std::abs(sum_p - 1.0) > 1e-6 || std::abs(sum_q - 1.0) > 1e-6)
    throw UsageError("jsd: inputs must sum to 1 within 1e-6");

  double acc_p = 0.0, acc_q = 0.0;
  for (long i = 0; i < p.size(); ++i) {
    double m = p[i] + q[i];
    if (p[i] > 0.0) acc_p += p[i] * std::log2(2.0 * p[i] / m);
    if (q[i] > 0.0) acc_q += q[i] * std::log2(2.0 * q[i] / m);
  }
  return 0.5 * acc_p + 0.5 * acc_q;
}

void validate(const BevConfig& b) {
  if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max))
    throw UsageError("bev config: bounds must satisfy min < max");
  if (b.bins < 1) throw UsageError("bev config: bins must be >= 1");
}

std::vector<double> BevHistogram::class_marginal() const {
  std::vector<double> out(static_cast<std::size_t>(bins) * bins, 0.0);
  for (int ix = 0; ix < bins; ++ix)
    for (int iy = 0; iy < bins; ++iy) {
      double s = 0.0;
      for (int c = 0; c < num_classes; ++c) s += at(c, ix, iy);
      out[static_cast<std::size_t>(ix) * bins + iy] = s;
    }
  return out;
}

BevHistogram bev_histogram(const PointCloud& cloud, const BevConfig& config,
                           int num_classes) {
  validate(config);
  if (num_classes < 1) throw UsageError("bev_histogram: num_classes must be >= 1");
  if (!cloud.labeled() || cloud.labels.size() != cloud.points.size())
    throw UsageError("bev_histogram: cloud labels missing or mismatched");
  BevHistogram h;
  h.num_classes = num_classes;
  h.bins = config.bins;
  h.counts.assign(static_cast<std::size_t>(num_classes) * config.bins *
                      config.bins,
                  0.0);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    int label = cloud.labels[i];
    if (label < 0 || label >= num_classes)
      throw UsageError("bev_histogram: label " + std::to_string(label) +
                       " outside [0," + std::to_string(num_classes) + ")");
    const Point& p = cloud.points[i];
    if (p.x < config.x_min || p.x > config.x_max || p.y < config.y_min ||
        p.y > config.y_max)
      continue;
    int ix = bin_index(p.x, config.x_min, config.x_max, config.bins);
    int iy = bin_index(p.y, config.y_min, config.y_max, config.bins);
    h.at(label, ix, iy) += 1.0;
  }
  return h;
}

std::vector<double> bev_histogram_unlabeled(const PointCloud& cloud,
                                            const BevConfig& config) {
  validate(config);
  std::vector<double> out(static_cast<std::size_t>(config.bins) * config.bins,
                          0.0);
  for (const Point& p : cloud.points) {
    if (p.x < config.x_min || p.x > config.x_max || p.y < config.y_min ||
        p.y > config.y_max)
      continue;
    int ix = bin_index(p.x, config.x_min, config.x_max, config.bins);
    int iy = bin_index(p.y, config.y_min, config.y_max, config.bins);
    out[static_cast<std::size_t>(ix) * config.bins + iy] += 1.0;
  }
  return out;
}

FeatureVector DefaultSceneExtractor::extract(const RangeScene& scene) const {
  std::size_t total = scene.mask.size();
  FeatureVector out = Eigen::VectorXd::Zero(bins_ + 4);
  if (total == 0) return out;
  double sum_d = 0.0, sum_d2 = 0.0, sum_r = 0.0, sum_r2 = 0.0;
  double masked = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    if (!scene.mask[i]) continue;
    double d = scene.depth_log[i];
    double r = scene.reflectance[i];
    out[bin_index(d, -1.0, 1.0, bins_)] += 1.0;
    sum_d += d;
    sum_d2 += d * d;
    sum_r += r;
    sum_r2 += r * r;
    masked += 1.0;
  }
  for (int b = 0; b < bins_; ++b) out[b] /= static_cast<double>(total);
  if (masked > 0.0) {
    out[bins_ + 0] = sum_d / masked;
    out[bins_ + 1] = population_std(sum_d, sum_d2, masked);
    out[bins_ + 2] = sum_r / masked;
    out[bins_ + 3] = population_std(sum_r, sum_r2, masked);
  }
  return out;
}

FeatureVector DefaultPointExtractor::extract(const PointCloud& cloud) const {
  FeatureVector out = Eigen::VectorXd::Zero(8 + bins_);
  if (cloud.points.empty()) return out;
  double n = static_cast<double>(cloud.points.size());
  double sx = 0, sx2 = 0, sy = 0, sy2 = 0, sz = 0, sz2 = 0, sr = 0, sr2 = 0;
  for (const Point& p : cloud.points) {
    sx += p.x;
    sx2 += p.x * p.x;
    sy += p.y;
    sy2 += p.y * p.y;
    sz += p.z;
    sz2 += p.z * p.z;
    sr += p.reflectance;
    sr2 += p.reflectance * p.reflectance;
    double radius = std::hypot(p.x, p.y);
    if (radius <= radius_max_)
      out[8 + bin_index(radius, 0.0, radius_max_, bins_)] += 1.0;
  }
  out[0] = sx / n;
  out[1] = sy / n;
  out[2] = sz / n;
  out[3] = population_std(sx, sx2, n);
  out[4] = population_std(sy, sy2, n);
  out[5] = population_std(sz, sz2, n);
  out[6] = sr / n;
  out[7] = population_std(sr, sr2, n);
  for (int b = 0; b < bins_; ++b) out[8 + b] /= n;
  return out;
}

FeatureVector DefaultMapExtractor::extract(const SemanticMap& map) const {
  FeatureVector out = Eigen::VectorXd::Zero(map.num_classes);
  std::size_t total = map.class_ids.size();
  if (total == 0) return out;
  for (int id : map.class_ids) {
    if (id < 0 || id >= map.num_classes)
      throw UsageError("map extractor: class id outside [0, num_classes)");
    out[id] += 1.0;
  }
  out /= static_cast<double>(total);
  return out;
}

ExtractorSet ExtractorSet::defaults(const BevConfig& bev, int scene_bins,
                                    int radial_bins) {
  double radius = std::max(std::max(std::abs(bev.x_min), std::abs(bev.x_max)),
                           std::max(std::abs(bev.y_min), std::abs(bev.y_max)));
  ExtractorSet set;
  set.scene = std::make_shared<DefaultSceneExtractor>(scene_bins);
  set.point = std::make_shared<DefaultPointExtractor>(radial_bins, radius);
  set.map = std::make_shared<DefaultMapExtractor>();
  return set;
}

FeatureVector semantic_feature(const FeatureVector& content,
                               const FeatureVector& semantics) {
  FeatureVector out(content.size() + semantics.size());
  out.head(content.size()) = content;
  out.tail(semantics.size()) = semantics;
  return out;
}

namespace {

// L1-normalize a count vector into a feature; all-zero stays all-zero.
FeatureVector normalized_feature(const std::vector<double>& counts) {
  FeatureVector f(static_cast<long>(counts.size()));
  double total = 0.0;
  for (double v : counts) total += v;
  for (std::size_t i = 0; i < counts.size(); ++i)
    f[static_cast<long>(i)] = total > 0.0 ? counts[i] / total : 0.0;
  return f;
}

Eigen::VectorXd mean_distribution(const std::vector<std::vector<double>>& sets,
                                  const char* what) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(
      sets.empty() ? 0 : static_cast<long>(sets[0].size()));
  for (const auto& counts : sets)
    for (std::size_t i = 0; i < counts.size(); ++i)
      mean[static_cast<long>(i)] += counts[i];
  double total = mean.sum();
  if (total <= 0.0)
    throw UsageError(std::string(what) +
                     ": no points fall inside the BEV bounds");
  return mean / total;
}

}  // namespace

MetricReport evaluate_sets(const std::vector<LabeledScene>& real,
                           const std::vector<LabeledScene>& gen,
                           const ExtractorSet& extractors,
                           const EvalConfig& config) {
  if (!extractors.scene || !extractors.point || !extractors.map)
    throw UsageError("evaluate_sets: extractor set is incomplete");
  if (real.size() < 2 || gen.size() < 2)
    throw InsufficientDataError(
        "evaluate_sets: need at least 2 scenes per set, got " +
        std::to_string(real.size()) + " real / " + std::to_string(gen.size()) +
        " generated");
  validate(config.bev);

  int num_classes = real[0].map.num_classes;
  auto check_set = [&](const std::vector<LabeledScene>& set, const char* name) {
    for (const auto& ls : set) {
      if (ls.map.num_classes != num_classes)
        throw UsageError(std::string("evaluate_sets: ") + name +
                         " set mixes class counts");
      if (ls.map.height != ls.scene.sensor.height_px ||
          ls.map.width != ls.scene.sensor.width_px)
        throw UsageError(std::string("evaluate_sets: ") + name +
                         " scene/map shape mismatch");
    }
  };
  check_set(real, "real");
  check_set(gen, "generated");

  struct SetFeatures {
    std::vector<FeatureVector> scene, scene_sem;
    std::vector<FeatureVector> point, point_sem;
    std::vector<FeatureVector> bev, bev_sem;
    std::vector<std::vector<double>> hist_plain;
    std::vector<std::vector<double>> hist_sem;
  };
  auto featurize = [&](const std::vector<LabeledScene>& set) {
    SetFeatures f;
    for (const auto& ls : set) {
      FeatureVector fs = extractors.scene->extract(ls.scene);
      FeatureVector fm = extractors.map->extract(ls.map);
      f.scene.push_back(fs);
      f.scene_sem.push_back(semantic_feature(fs, fm));

      PointCloud cloud = unproject_scene(ls.scene, ls.map);
      FeatureVector fp = extractors.point->extract(cloud);
      f.point.push_back(fp);
      f.point_sem.push_back(semantic_feature(fp, fm));

      BevHistogram h;
      if (cloud.points.empty()) {
        // Fully-masked scene: zero occupancy rather than a labeling error.
        h.num_classes = num_classes;
        h.bins = config.bev.bins;
        h.counts.assign(static_cast<std::size_t>(num_classes) *
                            config.bev.bins * config.bev.bins,
                        0.0);
      } else {
        h = bev_histogram(cloud, config.bev, num_classes);
      }
      std::vector<double> marginal = h.class_marginal();
      f.bev.push_back(normalized_feature(marginal));
      f.bev_sem.push_back(normalized_feature(h.counts));
      f.hist_plain.push_back(std::move(marginal));
      f.hist_sem.push_back(std::move(h.counts));
    }
    return f;
  };
  SetFeatures fr = featurize(real);
  SetFeatures fg = featurize(gen);

  MetricReport rep;
  rep.n_real = static_cast<int>(real.size());
  rep.n_gen = static_cast<int>(gen.size());
  rep.frd = frechet_distance(gaussian_stats(fr.scene), gaussian_stats(fg.scene));
  rep.s_frd = frechet_distance(gaussian_stats(fr.scene_sem),
                               gaussian_stats(fg.scene_sem));
  rep.mmd_range = mmd_poly3(fr.scene, fg.scene);
  rep.s_mmd_range = mmd_poly3(fr.scene_sem, fg.scene_sem);
  rep.fpd = frechet_distance(gaussian_stats(fr.point), gaussian_stats(fg.point));
  rep.s_fpd = frechet_distance(gaussian_stats(fr.point_sem),
                               gaussian_stats(fg.point_sem));
  rep.mmd_cart = mmd_poly3(fr.point, fg.point);
  rep.s_mmd_cart = mmd_poly3(fr.point_sem, fg.point_sem);
  rep.jsd = jsd(mean_distribution(fr.hist_plain, "evaluate_sets"),
                mean_distribution(fg.hist_plain, "evaluate_sets"));
  rep.s_jsd = jsd(mean_distribution(fr.hist_sem, "evaluate_sets"),
                  mean_distribution(fg.hist_sem, "evaluate_sets"));
  rep.mmd_bev = mmd_poly3(fr.bev, fg.bev);
  rep.s_mmd_bev = mmd_poly3(fr.bev_sem, fg.bev_sem);
  return rep;
}

}  // namespace rvgen
