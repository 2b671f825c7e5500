#pragma once

// Confusion matrices and the collapsed signal-vs-background efficiency.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "render.hpp"

namespace evimg {

/// counts(t, p): samples of true class t predicted as p.
class ConfusionMatrix {
public:
  explicit ConfusionMatrix(int n_classes = 0)
      : n_(n_classes), counts_(static_cast<std::size_t>(n_classes) * n_classes, 0) {
    if (n_classes < 0) throw InvalidInput("ConfusionMatrix: negative class count");
  }

  int n_classes() const { return n_; }
  std::uint64_t operator()(int truth, int pred) const { return counts_[idx(truth, pred)]; }
  std::uint64_t& operator()(int truth, int pred) { return counts_[idx(truth, pred)]; }

  std::uint64_t row_sum(int truth) const {
    std::uint64_t s = 0;
    for (int p = 0; p < n_; ++p) s += (*this)(truth, p);
    return s;
  }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts_) s += c;
    return s;
  }
  double accuracy() const {
    const auto t = total();
    if (t == 0) return 0.0;
    std::uint64_t d = 0;
    for (int i = 0; i < n_; ++i) d += (*this)(i, i);
    return static_cast<double>(d) / static_cast<double>(t);
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.n_ != n_) throw InvalidInput("ConfusionMatrix: size mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    return *this;
  }

  bool operator==(const ConfusionMatrix&) const = default;

private:
  std::size_t idx(int t, int p) const {
    if (t < 0 || p < 0 || t >= n_ || p >= n_) throw InvalidInput("ConfusionMatrix: class out of range");
    return static_cast<std::size_t>(t) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(p);
  }

  int n_;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels,
                                 int n_classes) {
  if (predictions.size() != labels.size())
    throw InvalidInput("confusion: predictions and labels differ in length");
  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes || predictions[i] < 0 || predictions[i] >= n_classes)
      throw InvalidInput("confusion: class out of range at sample " + std::to_string(i));
    ++cm(labels[i], predictions[i]);
  }
  return cm;
}

/// Each row divided by its sum; empty rows stay zero.
inline std::vector<std::vector<double>> normalize_rows(const ConfusionMatrix& cm) {
  const int n = cm.n_classes();
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int t = 0; t < n; ++t) {
    const auto s = cm.row_sum(t);
    if (s == 0) continue;
    for (int p = 0; p < n; ++p)
      out[t][p] = static_cast<double>(cm(t, p)) / static_cast<double>(s);
  }
  return out;
}

/// Balanced binary accuracy after collapsing to signal vs everything else:
/// (TPR + TNR) / 2, where TPR is the fraction of signal predicted as signal and
/// TNR the fraction of pooled background predicted as any background class.
/// Equivalent to accuracy under equal signal/background priors.
inline double signal_background_efficiency(const ConfusionMatrix& cm, int signal_class) {
  const int n = cm.n_classes();
  if (n < 2) throw InvalidInput("signal_background_efficiency: need >= 2 classes");
  if (signal_class < 0 || signal_class >= n)
    throw InvalidInput("signal_background_efficiency: signal class out of range");
  const auto sig_total = cm.row_sum(signal_class);
  std::uint64_t bg_total = 0, bg_as_bg = 0;
  for (int t = 0; t < n; ++t) {
    if (t == signal_class) continue;
    bg_total += cm.row_sum(t);
    bg_as_bg += cm.row_sum(t) - cm(t, signal_class);
  }
  if (sig_total == 0) throw InvalidInput("signal_background_efficiency: empty signal row");
  if (bg_total == 0) throw InvalidInput("signal_background_efficiency: empty background rows");
  const double tpr = static_cast<double>(cm(signal_class, signal_class)) / static_cast<double>(sig_total);
  const double tnr = static_cast<double>(bg_as_bg) / static_cast<double>(bg_total);
  return 0.5 * (tpr + tnr);
}

inline constexpr const char* kEfficiencyDefinition =
    "balanced signal-vs-background accuracy (TPR + TNR) / 2, background classes pooled";

inline std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "true\\pred";
  for (int p = 0; p < cm.n_classes(); ++p)
    out << ',' << (p < static_cast<int>(names.size()) ? names[p] : std::to_string(p));
  out << '\n';
  for (int t = 0; t < cm.n_classes(); ++t) {
    out << (t < static_cast<int>(names.size()) ? names[t] : std::to_string(t));
    for (int p = 0; p < cm.n_classes(); ++p) out << ',' << cm(t, p);
    out << '\n';
  }
  return out.str();
}

inline std::string normalized_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
  const auto norm = normalize_rows(cm);
  std::ostringstream out;
  out << "true\\pred";
  for (int p = 0; p < cm.n_classes(); ++p)
    out << ',' << (p < static_cast<int>(names.size()) ? names[p] : std::to_string(p));
  out << '\n';
  char buf[32];
  for (int t = 0; t < cm.n_classes(); ++t) {
    out << (t < static_cast<int>(names.size()) ? names[t] : std::to_string(t));
    for (int p = 0; p < cm.n_classes(); ++p) {
      std::snprintf(buf, sizeof buf, "%.6f", norm[t][p]);
      out << ',' << buf;
    }
    out << '\n';
  }
  return out.str();
}

/// Heat map, white (0) to dark blue (1), one square cell per entry with a grey
/// grid. No text. Normalized: row fractions. Raw: counts over the largest count.
inline ImageTensor confusion_heatmap(const ConfusionMatrix& cm, bool normalized = true,
                                     int cell = 48) {
  if (cell < 2) throw InvalidInput("confusion_heatmap: cell must be >= 2");
  const int n = std::max(1, cm.n_classes());
  const int side = n * cell + 1;
  ImageTensor img(side, side, {160, 160, 160});
  const auto norm = normalize_rows(cm);
  std::uint64_t max_count = 0;
  for (int t = 0; t < cm.n_classes(); ++t)
    for (int p = 0; p < cm.n_classes(); ++p) max_count = std::max(max_count, cm(t, p));
  for (int t = 0; t < cm.n_classes(); ++t) {
    for (int p = 0; p < cm.n_classes(); ++p) {
      const double f = normalized ? norm[t][p]
                       : max_count == 0
                           ? 0.0
                           : static_cast<double>(cm(t, p)) / static_cast<double>(max_count);
      const Rgb c{static_cast<std::uint8_t>(std::lround(255 * (1 - f))),
                  static_cast<std::uint8_t>(std::lround(255 * (1 - 0.8 * f))),
                  static_cast<std::uint8_t>(std::lround(255 - 100 * f))};
      for (int y = t * cell + 1; y < (t + 1) * cell; ++y)
        for (int x = p * cell + 1; x < (p + 1) * cell; ++x) img.set(x, y, c);
    }
  }
  return img;
}

} // namespace evimg
