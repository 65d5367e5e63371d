#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gwcl {

/// c x c confusion counts; rows index the true class, columns the predicted
/// class, both 1-based codes mapped to 0-based storage.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::int64_t> counts;  // row-major c*c

  std::int64_t at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * classes + pred];
  }
  std::int64_t total() const;
  std::int64_t trace() const;
};

ConfusionMatrix confusion(const std::vector<std::uint16_t>& preds,
                          const std::vector<std::uint16_t>& truths, int classes);

double overall_accuracy(const ConfusionMatrix& cm);
/// Mean per-class recall; throws if any class has no test pixels.
double average_accuracy(const ConfusionMatrix& cm);
std::vector<double> per_class_recall(const ConfusionMatrix& cm);
/// Cohen's coefficient (OA - P_e) / (1 - P_e); throws when P_e == 1.
double kappa(const ConfusionMatrix& cm);

/// One evaluation (or the mean/stddev of several when runs > 1).
struct MetricReport {
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  std::vector<double> class_recall;
  int runs = 1;
  double oa_stddev = 0.0;
  double aa_stddev = 0.0;
  double kappa_stddev = 0.0;

  void save_kv(const std::string& path) const;
  static MetricReport load_kv(const std::string& path);
};

MetricReport evaluate(const ConfusionMatrix& cm);

/// Per-metric mean and sample standard deviation (n - 1 divisor; zero when
/// a single run is aggregated).
MetricReport aggregate(const std::vector<MetricReport>& reports);

}  // namespace gwcl
