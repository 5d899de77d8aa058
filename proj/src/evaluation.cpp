#include "spectttra/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace spectttra {

Confusion confusion(std::span<const ScoredExample> examples, double threshold) {
  if (examples.empty()) throw std::invalid_argument("confusion: no examples");
  Confusion c;
  for (const auto& e : examples) {
    const bool predicted_fake = e.score >= threshold;
    if (e.label == Label::fake) {
      (predicted_fake ? c.tp : c.fn) += 1;
    } else {
      (predicted_fake ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

BinaryMetrics f1_sens_spec(const Confusion& c) {
  BinaryMetrics m;
  auto ratio = [](std::int64_t num, std::int64_t den, bool& degenerate) {
    if (den == 0) {
      degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.sensitivity = ratio(c.tp, c.tp + c.fn, m.sensitivity_degenerate);
  m.specificity = ratio(c.tn, c.tn + c.fp, m.specificity_degenerate);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, m.f1_degenerate);
  return m;
}

std::vector<OperatingPoint> roc_sweep(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_sweep: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const auto n_neg = static_cast<double>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("roc_sweep: both classes are required");

  std::vector<OperatingPoint> points;
  double pos_below = 0.0;
  double neg_below = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    points.push_back({threshold, (n_neg - neg_below) / n_neg, pos_below / n_pos});
    while (i < order.size() && scores[order[i]] == threshold) {
      (labels[order[i]] == 1 ? pos_below : neg_below) += 1.0;
      ++i;
    }
  }
  points.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  return points;
}

double eer(std::span<const double> scores, std::span<const int> labels) {
  const auto points = roc_sweep(scores, labels);
  // FAR - FRR falls monotonically from 1 to -1 along the sweep.
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double d = points[k].far - points[k].frr;
    if (d > 0.0) continue;
    if (d == 0.0 || k == 0) return points[k].far;
    const auto& a = points[k - 1];
    const auto& b = points[k];
    const double da = a.far - a.frr;
    const double alpha = da / (da - d);
    return a.far + alpha * (b.far - a.far);
  }
  return points.back().far;
}

double eer(std::span<const ScoredExample> examples) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(examples.size());
  labels.reserve(examples.size());
  for (const auto& e : examples) {
    scores.push_back(e.score);
    labels.push_back(static_cast<int>(e.label));
  }
  return eer(scores, labels);
}

MetricSummary summarize(std::span<const ScoredExample> examples, double threshold) {
  MetricSummary s;
  s.counts = confusion(examples, threshold);
  s.metrics = f1_sens_spec(s.counts);
  s.support_fake = s.counts.tp + s.counts.fn;
  s.support_real = s.counts.tn + s.counts.fp;
  if (s.support_fake > 0 && s.support_real > 0) s.eer = eer(examples);
  if (s.support_real == 0) {
    s.headline_name = "sensitivity";
    s.headline = s.metrics.sensitivity;
  } else if (s.support_fake == 0) {
    s.headline_name = "specificity";
    s.headline = s.metrics.specificity;
  } else {
    s.headline_name = "f1";
    s.headline = s.metrics.f1;
  }
  return s;
}

MetricReport partitioned_report(std::span<const ScoredExample> examples, std::span<const std::string> axes,
                                double threshold) {
  const auto& known = known_partition_axes();
  for (const auto& axis : axes) {
    if (std::find(known.begin(), known.end(), axis) == known.end()) {
      throw std::invalid_argument("partitioned_report: unknown axis '" + axis + "'");
    }
  }
  MetricReport report;
  report.threshold = threshold;
  report.overall = summarize(examples, threshold);
  for (const auto& axis : axes) {
    std::map<std::string, std::vector<ScoredExample>> groups;
    for (const auto& e : examples) {
      const auto it = e.partitions.find(axis);
      if (it == e.partitions.end()) {
        throw std::invalid_argument("partitioned_report: example missing partition '" + axis + "'");
      }
      groups[it->second].push_back(e);
    }
    for (const auto& [value, members] : groups) {
      report.partitions.push_back({axis, value, summarize(members, threshold)});
    }
  }
  return report;
}

namespace {

void csv_row(std::ostringstream& out, const std::string& axis, const std::string& value, const MetricSummary& s) {
  out << axis << ',' << value << ',' << s.counts.total() << ',' << s.support_real << ',' << s.support_fake << ','
      << s.counts.tp << ',' << s.counts.fp << ',' << s.counts.tn << ',' << s.counts.fn << ',' << s.metrics.f1 << ','
      << s.metrics.sensitivity << ',' << s.metrics.specificity << ',';
  if (s.eer) out << *s.eer;
  out << ',' << s.headline_name << ',' << s.headline << '\n';
}

}  // namespace

std::string report_csv(const MetricReport& report) {
  std::ostringstream out;
  out << std::setprecision(6);
  out << "axis,value,n,n_real,n_fake,tp,fp,tn,fn,f1,sensitivity,specificity,eer,headline_metric,headline\n";
  csv_row(out, "overall", "all", report.overall);
  for (const auto& p : report.partitions) csv_row(out, p.axis, p.value, p.summary);
  return out.str();
}

std::string report_text(const MetricReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  const auto& o = report.overall;
  out << "threshold " << report.threshold << "  n=" << o.counts.total() << " (real " << o.support_real << ", fake "
      << o.support_fake << ")\n";
  out << "overall  f1 " << o.metrics.f1 << "  sens " << o.metrics.sensitivity << "  spec " << o.metrics.specificity;
  if (o.eer) out << "  eer " << *o.eer;
  out << '\n';
  std::string current;
  for (const auto& p : report.partitions) {
    if (p.axis != current) {
      current = p.axis;
      out << current << ":\n";
    }
    out << "  " << std::left << std::setw(16) << p.value << std::right << ' ' << std::setw(11)
        << p.summary.headline_name << ' ' << p.summary.headline << "  (n=" << p.summary.counts.total() << ")\n";
  }
  return out.str();
}

}  // namespace spectttra
