#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spectttra {

/// Fake is the positive class.
enum class Label : int { real = 0, fake = 1 };

struct ScoredExample {
  double score = 0.0;  // probability of fake
  Label label = Label::real;
  std::map<std::string, std::string> partitions;
};

struct Confusion {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::int64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

/// Prediction is fake iff score >= threshold.
Confusion confusion(std::span<const ScoredExample> examples, double threshold = 0.5);

struct BinaryMetrics {
  double f1 = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  // Set when the corresponding denominator was zero (value reported as 0).
  bool f1_degenerate = false;
  bool sensitivity_degenerate = false;
  bool specificity_degenerate = false;
};

BinaryMetrics f1_sens_spec(const Confusion& c);

/// One operating point of the threshold sweep.
struct OperatingPoint {
  double threshold;
  double far;  // real predicted fake
  double frr;  // fake predicted real
};

/// Operating points for every distinct score plus +inf, in increasing threshold order.
std::vector<OperatingPoint> roc_sweep(std::span<const double> scores, std::span<const int> labels);

/// Equal error rate with linear interpolation between the two operating
/// points that bracket FAR == FRR. Throws when only one class is present.
double eer(std::span<const double> scores, std::span<const int> labels);
double eer(std::span<const ScoredExample> examples);

inline const std::vector<std::string>& known_partition_axes() {
  static const std::vector<std::string> axes{"algorithm", "fake_type", "singer_seen", "split"};
  return axes;
}

struct MetricSummary {
  Confusion counts;
  BinaryMetrics metrics;
  std::optional<double> eer;  // empty for single-class subsets
  std::int64_t support_real = 0;
  std::int64_t support_fake = 0;
  // sensitivity for all-fake subsets, specificity for all-real, f1 otherwise
  std::string headline_name;
  double headline = 0.0;
};

struct PartitionReport {
  std::string axis;
  std::string value;
  MetricSummary summary;
};

struct MetricReport {
  MetricSummary overall;
  std::vector<PartitionReport> partitions;
  double threshold = 0.5;
};

MetricSummary summarize(std::span<const ScoredExample> examples, double threshold = 0.5);

/// Overall metrics plus one sub-report per (axis, value).
MetricReport partitioned_report(std::span<const ScoredExample> examples, std::span<const std::string> axes,
                                double threshold = 0.5);

/// CSV columns: axis,value,n,n_real,n_fake,tp,fp,tn,fn,f1,sensitivity,specificity,eer,headline_metric,headline
std::string report_csv(const MetricReport& report);
std::string report_text(const MetricReport& report);

}  // namespace spectttra
