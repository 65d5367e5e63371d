#include "gwcl/metrics.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gwcl {

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (int k = 0; k < classes; ++k) t += at(k, k);
  return t;
}

ConfusionMatrix confusion(const std::vector<std::uint16_t>& preds,
                          const std::vector<std::uint16_t>& truths, int classes) {
  if (preds.size() != truths.size()) {
    throw std::invalid_argument("prediction and truth lengths differ");
  }
  if (classes < 1) throw std::invalid_argument("need at least one class");
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(static_cast<std::size_t>(classes) * classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int t = truths[i], p = preds[i];
    if (t < 1 || t > classes || p < 1 || p > classes) {
      throw std::out_of_range("class code outside 1..c at sample " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(t - 1) * classes + (p - 1)];
  }
  return cm;
}

double overall_accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

std::vector<double> per_class_recall(const ConfusionMatrix& cm) {
  std::vector<double> recall(static_cast<std::size_t>(cm.classes));
  for (int k = 0; k < cm.classes; ++k) {
    std::int64_t row = 0;
    for (int j = 0; j < cm.classes; ++j) row += cm.at(k, j);
    if (row == 0) {
      throw std::domain_error("class " + std::to_string(k + 1) +
                              " has no test pixels; average accuracy undefined");
    }
    recall[static_cast<std::size_t>(k)] =
        static_cast<double>(cm.at(k, k)) / static_cast<double>(row);
  }
  return recall;
}

double average_accuracy(const ConfusionMatrix& cm) {
  const std::vector<double> recall = per_class_recall(cm);
  return std::accumulate(recall.begin(), recall.end(), 0.0) /
         static_cast<double>(recall.size());
}

double kappa(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("empty confusion matrix");
  double chance = 0.0;  // P_e = sum_k row_k * col_k / total^2
  for (int k = 0; k < cm.classes; ++k) {
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < cm.classes; ++j) {
      row += cm.at(k, j);
      col += cm.at(j, k);
    }
    chance += static_cast<double>(row) * static_cast<double>(col);
  }
  chance /= static_cast<double>(total) * static_cast<double>(total);
  if (chance >= 1.0) throw std::domain_error("chance agreement is 1; kappa undefined");
  return (overall_accuracy(cm) - chance) / (1.0 - chance);
}

MetricReport evaluate(const ConfusionMatrix& cm) {
  MetricReport r;
  r.oa = overall_accuracy(cm);
  r.class_recall = per_class_recall(cm);
  r.aa = std::accumulate(r.class_recall.begin(), r.class_recall.end(), 0.0) /
         static_cast<double>(r.class_recall.size());
  r.kappa = kappa(cm);
  return r;
}

namespace {

double sample_stddev(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

MetricReport aggregate(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("nothing to aggregate");
  const std::size_t classes = reports.front().class_recall.size();
  std::vector<double> oas, aas, kappas;
  for (const auto& r : reports) {
    if (r.class_recall.size() != classes) {
      throw std::invalid_argument("reports disagree on class count");
    }
    oas.push_back(r.oa);
    aas.push_back(r.aa);
    kappas.push_back(r.kappa);
  }
  MetricReport out;
  out.runs = static_cast<int>(reports.size());
  out.oa = std::accumulate(oas.begin(), oas.end(), 0.0) / oas.size();
  out.aa = std::accumulate(aas.begin(), aas.end(), 0.0) / aas.size();
  out.kappa = std::accumulate(kappas.begin(), kappas.end(), 0.0) / kappas.size();
  out.oa_stddev = sample_stddev(oas, out.oa);
  out.aa_stddev = sample_stddev(aas, out.aa);
  out.kappa_stddev = sample_stddev(kappas, out.kappa);
  out.class_recall.assign(classes, 0.0);
  for (const auto& r : reports) {
    for (std::size_t k = 0; k < classes; ++k) out.class_recall[k] += r.class_recall[k];
  }
  for (auto& v : out.class_recall) v /= static_cast<double>(reports.size());
  return out;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void MetricReport::save_kv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open metrics file for writing: " + path);
  out << "oa=" << fmt(oa) << "\n";
  out << "aa=" << fmt(aa) << "\n";
  out << "kappa=" << fmt(kappa) << "\n";
  out << "runs=" << runs << "\n";
  if (runs > 1) {
    out << "oa_stddev=" << fmt(oa_stddev) << "\n";
    out << "aa_stddev=" << fmt(aa_stddev) << "\n";
    out << "kappa_stddev=" << fmt(kappa_stddev) << "\n";
  }
  for (std::size_t k = 0; k < class_recall.size(); ++k) {
    out << "recall_" << (k + 1) << "=" << fmt(class_recall[k]) << "\n";
  }
}

MetricReport MetricReport::load_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file: " + path);
  MetricReport r;
  std::string line;
  std::vector<std::pair<std::size_t, double>> recalls;
  while (std::getline(in, line)) {
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "oa") r.oa = std::stod(value);
    else if (key == "aa") r.aa = std::stod(value);
    else if (key == "kappa") r.kappa = std::stod(value);
    else if (key == "runs") r.runs = std::stoi(value);
    else if (key == "oa_stddev") r.oa_stddev = std::stod(value);
    else if (key == "aa_stddev") r.aa_stddev = std::stod(value);
    else if (key == "kappa_stddev") r.kappa_stddev = std::stod(value);
    else if (key.rfind("recall_", 0) == 0) {
      recalls.emplace_back(std::stoul(key.substr(7)), std::stod(value));
    }
  }
  r.class_recall.resize(recalls.size());
  for (const auto& [idx, v] : recalls) r.class_recall.at(idx - 1) = v;
  return r;
}

}  // namespace gwcl
