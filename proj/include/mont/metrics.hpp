#pragma once

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "mont/dataset.hpp"
#include "mont/errors.hpp"
#include "mont/tree.hpp"

namespace mont {

// Fraction of misclassified rows.
inline double error_rate(const NeuralTree& tree, const Dataset& data) {
    if (data.samples() == 0) {
        throw DataError("error rate of an empty dataset");
    }
    // computed from the hit count so it equals 1 - trace/N bit for bit
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.samples(); ++i) {
        if (predict(tree, data.row(i)) == data.labels[i]) {
            ++hits;
        }
    }
    return 1.0 - static_cast<double>(hits) / static_cast<double>(data.samples());
}

// rows = true class, columns = predicted class
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::size_t> counts;

    explicit ConfusionMatrix(std::size_t r = 0) : classes(r), counts(r * r, 0) {}

    std::size_t& at(std::size_t truth, std::size_t predicted) { return counts[truth * classes + predicted]; }
    std::size_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * classes + predicted]; }

    std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }
    std::size_t trace() const {
        std::size_t t = 0;
        for (std::size_t k = 0; k < classes; ++k) {
            t += at(k, k);
        }
        return t;
    }
    std::size_t row_sum(std::size_t truth) const {
        std::size_t s = 0;
        for (std::size_t k = 0; k < classes; ++k) {
            s += at(truth, k);
        }
        return s;
    }
    std::size_t column_sum(std::size_t predicted) const {
        std::size_t s = 0;
        for (std::size_t k = 0; k < classes; ++k) {
            s += at(k, predicted);
        }
        return s;
    }
};

inline ConfusionMatrix confusion_from(std::span<const int> truth, std::span<const int> predicted, std::size_t classes) {
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++cm.at(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]));
    }
    return cm;
}

inline ConfusionMatrix confusion(const NeuralTree& tree, const Dataset& data) {
    ConfusionMatrix cm(tree.classes());
    for (std::size_t i = 0; i < data.samples(); ++i) {
        ++cm.at(static_cast<std::size_t>(data.labels[i]), static_cast<std::size_t>(predict(tree, data.row(i))));
    }
    return cm;
}

struct RocPoint {
    std::size_t cls = 0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocPoints {
    std::vector<RocPoint> points;
    std::vector<std::size_t> absent_classes; // no positives in the data; point omitted
};

// One-vs-rest operating point per class at the argmax decision.
inline RocPoints roc_points(const ConfusionMatrix& cm) {
    RocPoints out;
    const std::size_t n = cm.total();
    for (std::size_t k = 0; k < cm.classes; ++k) {
        const std::size_t tp = cm.at(k, k);
        const std::size_t positives = cm.row_sum(k);
        const std::size_t fp = cm.column_sum(k) - tp;
        const std::size_t negatives = n - positives;
        if (positives == 0) {
            out.absent_classes.push_back(k);
            continue;
        }
        const double tpr = static_cast<double>(tp) / static_cast<double>(positives);
        const double fpr = negatives == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(negatives);
        out.points.push_back({k, fpr, tpr});
    }
    return out;
}

inline RocPoints roc_points(const NeuralTree& tree, const Dataset& data) { return roc_points(confusion(tree, data)); }

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double df = 0.0;
    bool degenerate = false; // both samples constant with different values
};

namespace detail {

struct SampleMoments {
    double n = 0.0;
    double mean = 0.0;
    double variance = 0.0; // n - 1 denominator
};

inline SampleMoments moments(std::span<const double> xs) {
    SampleMoments m;
    m.n = static_cast<double>(xs.size());
    m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / m.n;
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - m.mean) * (x - m.mean);
    }
    m.variance = ss / (m.n - 1.0);
    return m;
}

inline double two_sided_p(double t, double df) {
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

inline TTestResult zero_variance_result(const SampleMoments& ma, const SampleMoments& mb, double df) {
    TTestResult r;
    r.df = df;
    if (ma.mean == mb.mean) {
        return r;
    }
    r.degenerate = true;
    r.t = ma.mean < mb.mean ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
}

inline void require_samples(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) {
        throw DataError("t-test needs at least two values per sample");
    }
}

} // namespace detail

// Two-sided unequal-variance t-test with Welch-Satterthwaite degrees of freedom.
inline TTestResult welch_ttest(std::span<const double> a, std::span<const double> b) {
    detail::require_samples(a, b);
    const auto ma = detail::moments(a);
    const auto mb = detail::moments(b);
    const double va = ma.variance / ma.n;
    const double vb = mb.variance / mb.n;
    if (va + vb == 0.0) {
        return detail::zero_variance_result(ma, mb, ma.n + mb.n - 2.0);
    }
    TTestResult r;
    r.t = (ma.mean - mb.mean) / std::sqrt(va + vb);
    r.df = (va + vb) * (va + vb) / (va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0));
    r.p = detail::two_sided_p(r.t, r.df);
    return r;
}

// Two-sided pooled-variance (Student) t-test.
inline TTestResult student_ttest(std::span<const double> a, std::span<const double> b) {
    detail::require_samples(a, b);
    const auto ma = detail::moments(a);
    const auto mb = detail::moments(b);
    const double df = ma.n + mb.n - 2.0;
    const double pooled = ((ma.n - 1.0) * ma.variance + (mb.n - 1.0) * mb.variance) / df;
    if (pooled == 0.0) {
        return detail::zero_variance_result(ma, mb, df);
    }
    TTestResult r;
    r.df = df;
    r.t = (ma.mean - mb.mean) / std::sqrt(pooled * (1.0 / ma.n + 1.0 / mb.n));
    r.p = detail::two_sided_p(r.t, r.df);
    return r;
}

// Outcome of one seeded training run.
struct RunRecord {
    std::string dataset;
    std::string optimizer;
    std::string activation;
    std::uint64_t seed = 0;
    std::size_t run = 0;
    std::size_t best_tree_id = 0; // index in the final population
    double train_error = 0.0;
    double test_error = 0.0;
    std::size_t tree_size = 0;
    double hv_test = 0.0; // hypervolume of the final test-error front at the plan reference
    double wall_seconds = 0.0;

    static std::string csv_header() {
        return "dataset,optimizer,activation,seed,run,best_tree_id,train_f1,test_f1,tree_size,hv_test,wall_seconds";
    }

    std::string csv_row() const {
        std::ostringstream out;
        out << std::setprecision(17);
        out << dataset << ',' << optimizer << ',' << activation << ',' << seed << ',' << run << ',' << best_tree_id
            << ',' << train_error << ',' << test_error << ',' << tree_size << ',' << hv_test << ','
            << std::setprecision(6) << wall_seconds;
        return out.str();
    }
};

} // namespace mont
