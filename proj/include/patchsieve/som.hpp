#pragma once

#include "patchsieve/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <vector>

namespace patchsieve {

struct SomConfig {
    int map_side = 20;
    int epochs = 50;
    double initial_learning_rate = 0.5;
    double initial_neighborhood_radius = 0.0;  // <= 0 means map_side / 2
    std::uint64_t seed = 0;
    double min_cluster_fraction = 0.01;

    static constexpr double final_learning_rate = 0.01;
    static constexpr double final_neighborhood_radius = 1.0;

    int units() const { return map_side * map_side; }
    double radius0() const {
        return initial_neighborhood_radius > 0 ? initial_neighborhood_radius : map_side / 2.0;
    }
    void validate() const {
        if (map_side < 2) throw UsageError("som.map_side must be >= 2");
        if (epochs < 1) throw UsageError("som.epochs must be >= 1");
        if (!(initial_learning_rate > 0)) throw UsageError("som.initial_learning_rate must be > 0");
        if (!(min_cluster_fraction > 0 && min_cluster_fraction < 1))
            throw UsageError("som.min_cluster_fraction must lie in (0, 1)");
    }
};

/// Index of the row of `weights` closest to `x` (squared Euclidean), lowest
/// index on ties.
template <typename Scalar, typename Derived>
Eigen::Index best_matching_unit(const RowMatrix<Scalar>& weights, const Eigen::MatrixBase<Derived>& x) {
    Eigen::Index best = 0;
    Scalar best_d = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index u = 0; u < weights.rows(); ++u) {
        const Scalar d = (weights.row(u) - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = u;
        }
    }
    return best;
}

/// Online SOM training on a map_side×map_side grid. Weights start as rows
/// drawn (with replacement) from the input; each step moves the BMU and its
/// Gaussian grid neighborhood toward one sample. Learning rate and radius
/// decay exponentially to (0.01, 1.0) over epochs·n steps. Samples are
/// visited in a fresh seeded permutation every epoch.
///
/// `epoch_error`, when given, receives the mean BMU distance after each epoch.
template <typename Derived>
RowMatrix<typename Derived::Scalar> som_train(const Eigen::MatrixBase<Derived>& features, const SomConfig& cfg,
                                              std::vector<double>* epoch_error = nullptr) {
    using Scalar = typename Derived::Scalar;
    cfg.validate();
    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols();
    if (n < 1 || d < 1) throw InputError("som_train: empty feature set");
    if (!features.allFinite()) throw InputError("som_train: features contain non-finite values");

    std::mt19937_64 rng(cfg.seed);
    const int side = cfg.map_side;
    RowMatrix<Scalar> weights(cfg.units(), d);
    for (Eigen::Index u = 0; u < weights.rows(); ++u)
        weights.row(u) = features.row(static_cast<Eigen::Index>(bounded(rng, static_cast<std::uint64_t>(n))));

    const double total_steps = static_cast<double>(cfg.epochs) * static_cast<double>(n);
    const double lr_ratio = SomConfig::final_learning_rate / cfg.initial_learning_rate;
    const double radius_ratio = SomConfig::final_neighborhood_radius / cfg.radius0();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::vector<double> row_gain(static_cast<std::size_t>(side)), col_gain(static_cast<std::size_t>(side));
    Vector<Scalar> x(d);
    double step = 0;
    if (epoch_error) epoch_error->clear();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[bounded(rng, i)]);

        for (const Eigen::Index row : order) {
            const double progress = total_steps > 1 ? step / (total_steps - 1) : 0.0;
            const double lr = cfg.initial_learning_rate * std::pow(lr_ratio, progress);
            const double radius = cfg.radius0() * std::pow(radius_ratio, progress);
            const double inv_two_var = 1.0 / (2.0 * radius * radius);
            step += 1;

            x = features.row(row).transpose();
            const Eigen::Index bmu = best_matching_unit(weights, x.transpose());
            const int br = static_cast<int>(bmu / side);
            const int bc = static_cast<int>(bmu % side);
            // Separable Gaussian: exp(-(dr²+dc²)/2σ²) = g(dr)·g(dc).
            for (int k = 0; k < side; ++k) {
                row_gain[k] = std::exp(-double((k - br) * (k - br)) * inv_two_var);
                col_gain[k] = std::exp(-double((k - bc) * (k - bc)) * inv_two_var);
            }
            for (int r = 0; r < side; ++r) {
                for (int c = 0; c < side; ++c) {
                    const auto rate = static_cast<Scalar>(lr * row_gain[r] * col_gain[c]);
                    auto w = weights.row(r * side + c);
                    w += rate * (x.transpose() - w);
                }
            }
        }

        if (epoch_error) {
            double sum = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto bmu = best_matching_unit(weights, features.row(i));
                sum += std::sqrt(static_cast<double>((weights.row(bmu) - features.row(i)).squaredNorm()));
            }
            epoch_error->push_back(sum / static_cast<double>(n));
        }
    }
    return weights;
}

/// BMU flat index (row * map_side + col) of every feature row.
template <typename Scalar, typename Derived>
std::vector<int> som_assign(const Eigen::MatrixBase<Derived>& features, const RowMatrix<Scalar>& weights) {
    if (features.cols() != weights.cols())
        throw InputError("som_assign: features have " + std::to_string(features.cols()) +
                         " columns, weights " + std::to_string(weights.cols()));
    std::vector<int> labels(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i)
        labels[static_cast<std::size_t>(i)] =
            static_cast<int>(best_matching_unit(weights, features.row(i).template cast<Scalar>()));
    return labels;
}

/// Size-weighted between-cluster sum of squares over the within-cluster sum
/// of squares. Returns +inf when clusters are separated but internally
/// constant, and 0 when there is no between-cluster spread.
template <typename Derived>
double variance_ratio(const Eigen::MatrixBase<Derived>& features, const std::vector<int>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != features.rows())
        throw UsageError("variance_ratio: one label per row required");
    const Eigen::Index d = features.cols();
    std::map<int, std::pair<Eigen::VectorXd, std::size_t>> clusters;
    Eigen::VectorXd global = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        auto [it, fresh] = clusters.try_emplace(labels[static_cast<std::size_t>(i)], Eigen::VectorXd::Zero(d), 0);
        const Eigen::VectorXd x = features.row(i).template cast<double>().transpose();
        it->second.first += x;
        it->second.second += 1;
        global += x;
    }
    if (clusters.empty()) return 0.0;
    global /= static_cast<double>(features.rows());

    double between = 0;
    for (auto& [label, acc] : clusters) {
        acc.first /= static_cast<double>(acc.second);
        between += static_cast<double>(acc.second) * (acc.first - global).squaredNorm();
    }
    double within = 0;
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const auto& centroid = clusters.at(labels[static_cast<std::size_t>(i)]).first;
        within += (features.row(i).template cast<double>().transpose() - centroid).squaredNorm();
    }
    const double total = between + within;
    if (between <= 1e-12 * total || total == 0.0) return 0.0;
    if (within <= 1e-12 * total) return std::numeric_limits<double>::infinity();
    return between / within;
}

struct MergedClusters {
    std::vector<int> labels;          // compacted, 0 = largest cluster
    std::vector<std::size_t> sizes;   // by compacted label, non-increasing
    int cluster_count() const { return static_cast<int>(sizes.size()); }
};

/// Repeatedly dissolves the smallest cluster holding fewer than
/// min_fraction·n members into the cluster with the nearest centroid (ties:
/// larger cluster, then lower label), recomputing centroids after every
/// merge. Stops when every cluster meets the floor or one cluster is left.
/// Labels are compacted to 0..count-1 in order of descending size.
template <typename Derived>
MergedClusters merge_small_clusters(const Eigen::MatrixBase<Derived>& features, const std::vector<int>& raw_labels,
                                    double min_fraction) {
    if (static_cast<Eigen::Index>(raw_labels.size()) != features.rows())
        throw UsageError("merge_small_clusters: one label per row required");
    struct Cluster {
        Eigen::VectorXd sum;
        std::size_t size = 0;
    };
    const Eigen::Index d = features.cols();
    std::map<int, Cluster> clusters;
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        auto& c = clusters[raw_labels[static_cast<std::size_t>(i)]];
        if (c.size == 0) c.sum = Eigen::VectorXd::Zero(d);
        c.sum += features.row(i).template cast<double>().transpose();
        c.size += 1;
    }
    std::map<int, int> owner;  // raw label -> surviving label
    for (const auto& [label, c] : clusters) owner[label] = label;

    const double floor = min_fraction * static_cast<double>(raw_labels.size());
    while (clusters.size() > 1) {
        auto victim = clusters.end();
        for (auto it = clusters.begin(); it != clusters.end(); ++it)
            if (static_cast<double>(it->second.size) < floor &&
                (victim == clusters.end() || it->second.size < victim->second.size))
                victim = it;
        if (victim == clusters.end()) break;

        const Eigen::VectorXd centroid = victim->second.sum / static_cast<double>(victim->second.size);
        auto target = clusters.end();
        double best = std::numeric_limits<double>::infinity();
        for (auto it = clusters.begin(); it != clusters.end(); ++it) {
            if (it == victim) continue;
            const double dist = (it->second.sum / static_cast<double>(it->second.size) - centroid).squaredNorm();
            const bool better = dist < best ||
                                (dist == best && it->second.size > target->second.size);
            if (better) {
                best = dist;
                target = it;
            }
        }
        target->second.sum += victim->second.sum;
        target->second.size += victim->second.size;
        for (auto& [raw, own] : owner)
            if (own == victim->first) own = target->first;
        clusters.erase(victim);
    }

    std::vector<std::pair<int, std::size_t>> order;
    for (const auto& [label, c] : clusters) order.emplace_back(label, c.size);
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::map<int, int> compact;
    MergedClusters out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        compact[order[i].first] = static_cast<int>(i);
        out.sizes.push_back(order[i].second);
    }
    out.labels.reserve(raw_labels.size());
    for (int raw : raw_labels) out.labels.push_back(compact.at(owner.at(raw)));
    return out;
}

}  // namespace patchsieve
