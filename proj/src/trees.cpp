#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "psl/models.hpp"

namespace psl {

double tree_eval(const std::vector<TreeNode>& nodes, const double* row) {
    int at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
        const TreeNode& nd = nodes[static_cast<std::size_t>(at)];
        at = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
}

namespace {

struct Stat {
    double w = 0.0, wy = 0.0, wyy = 0.0;
    Stat& operator+=(const Stat& o) {
        w += o.w;
        wy += o.wy;
        wyy += o.wyy;
        return *this;
    }
    Stat& operator-=(const Stat& o) {
        w -= o.w;
        wy -= o.wy;
        wyy -= o.wyy;
        return *this;
    }
};

struct Split {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

std::vector<int> choose_features(std::size_t p, std::size_t mtry, Rng* rng) {
    std::vector<int> feats(p);
    std::iota(feats.begin(), feats.end(), 0);
    if (mtry == 0 || mtry >= p || rng == nullptr) return feats;
    for (std::size_t i = 0; i < mtry; ++i)
        std::swap(feats[i], feats[i + static_cast<std::size_t>(rng->below(p - i))]);
    feats.resize(mtry);
    std::sort(feats.begin(), feats.end());
    return feats;
}

// Recursive exact-greedy builder for single trees and forests. Impurity is a
// function of the moment stats; ties resolve to the first feature and the
// lowest threshold, so growth is deterministic.
template <typename LeafFn, typename ImpurityFn>
class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, const std::vector<Stat>& stat, const TreeConfig& cfg, Rng* rng,
                LeafFn leaf, ImpurityFn impurity)
        : x_(X), stat_(stat), cfg_(cfg), rng_(rng), leaf_(leaf), impurity_(impurity) {}

    std::vector<TreeNode> build(std::vector<std::size_t> rows) {
        nodes_.assign(1, TreeNode{});
        grow(0, std::move(rows), 0);
        return std::move(nodes_);
    }

private:
    void grow(int id, std::vector<std::size_t> rows, std::size_t depth) {
        Stat total{};
        for (std::size_t r : rows) total += stat_[r];
        if (depth >= cfg_.max_depth || rows.size() < 2 * cfg_.min_leaf) {
            nodes_[static_cast<std::size_t>(id)].value = leaf_(total);
            return;
        }
        Split best = find_split(rows, total);
        if (!best.found) {
            nodes_[static_cast<std::size_t>(id)].value = leaf_(total);
            return;
        }
        std::vector<std::size_t> left, right;
        for (std::size_t r : rows)
            (x_(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right)
                .push_back(r);
        int li = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        int ri = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        nodes_[static_cast<std::size_t>(id)].feature = best.feature;
        nodes_[static_cast<std::size_t>(id)].threshold = best.threshold;
        nodes_[static_cast<std::size_t>(id)].left = li;
        nodes_[static_cast<std::size_t>(id)].right = ri;
        grow(li, std::move(left), depth + 1);
        grow(ri, std::move(right), depth + 1);
    }

    Split find_split(const std::vector<std::size_t>& rows, const Stat& total) {
        Split best;
        double parent = impurity_(total);
        std::vector<std::size_t> order(rows);
        for (int f : choose_features(x_.p, cfg_.mtry, rng_)) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                double xa = x_(a, static_cast<std::size_t>(f));
                double xb = x_(b, static_cast<std::size_t>(f));
                return xa < xb || (xa == xb && a < b);
            });
            Stat left{};
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                left += stat_[order[k]];
                double x0 = x_(order[k], static_cast<std::size_t>(f));
                double x1 = x_(order[k + 1], static_cast<std::size_t>(f));
                if (x0 == x1) continue;
                if (k + 1 < cfg_.min_leaf || order.size() - k - 1 < cfg_.min_leaf) continue;
                Stat right = total;
                right -= left;
                double g = parent - impurity_(left) - impurity_(right);
                if (g > best.gain + 1e-12) {
                    best.found = true;
                    best.feature = f;
                    best.threshold = x0 + (x1 - x0) / 2.0;
                    best.gain = g;
                }
            }
        }
        return best.gain > 1e-12 ? best : Split{};
    }

    const Matrix& x_;
    const std::vector<Stat>& stat_;
    const TreeConfig& cfg_;
    Rng* rng_;
    LeafFn leaf_;
    ImpurityFn impurity_;
    std::vector<TreeNode> nodes_;
};

template <typename LeafFn, typename ImpurityFn>
std::vector<TreeNode> build_tree(const Matrix& X, const std::vector<Stat>& stat,
                                 const std::vector<std::size_t>& rows, const TreeConfig& cfg,
                                 Rng* rng, LeafFn leaf, ImpurityFn impurity) {
    TreeBuilder<LeafFn, ImpurityFn> builder(X, stat, cfg, rng, leaf, impurity);
    return builder.build(rows);
}

}  // namespace

std::vector<TreeNode> grow_regression_tree(const Matrix& X, const std::vector<double>& y,
                                           const std::vector<std::size_t>& rows,
                                           const TreeConfig& cfg, Rng* rng) {
    std::vector<Stat> stat(X.n);
    for (std::size_t i = 0; i < X.n; ++i) stat[i] = {1.0, y[i], y[i] * y[i]};
    auto leaf = [](const Stat& s) { return s.wy / s.w; };
    auto sse = [](const Stat& s) { return std::max(0.0, s.wyy - s.wy * s.wy / s.w); };
    return build_tree(X, stat, rows, cfg, rng, leaf, sse);
}

std::vector<TreeNode> grow_gini_tree(const Matrix& X, const std::vector<double>& y,
                                     const std::vector<double>& w,
                                     const std::vector<std::size_t>& rows, const TreeConfig& cfg,
                                     Rng* rng) {
    std::vector<Stat> stat(X.n);
    for (std::size_t i = 0; i < X.n; ++i) stat[i] = {w[i], w[i] * y[i], 0.0};
    auto leaf = [](const Stat& s) { return s.w > 0.0 ? s.wy / s.w : 0.5; };
    auto gini = [](const Stat& s) {
        if (s.w <= 0.0) return 0.0;
        double p = s.wy / s.w;
        return s.w * p * (1.0 - p);
    };
    return build_tree(X, stat, rows, cfg, rng, leaf, gini);
}

std::vector<std::vector<std::uint32_t>> presort_features(const Matrix& X) {
    std::vector<std::vector<std::uint32_t>> presorted(X.p);
    for (std::size_t f = 0; f < X.p; ++f) {
        auto& ord = presorted[f];
        ord.resize(X.n);
        std::iota(ord.begin(), ord.end(), 0u);
        std::sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
            double xa = X(a, f), xb = X(b, f);
            return xa < xb || (xa == xb && a < b);
        });
    }
    return presorted;
}

// Level-wise exact-greedy growth over externally presorted feature orders, so
// boosting rounds avoid per-node sorting. Leaf value is -G/(H+lambda).
std::vector<TreeNode> grow_grad_tree(const Matrix& X, const std::vector<double>& grad,
                                     const std::vector<double>& hess, std::size_t max_depth,
                                     double reg_lambda, double min_child_weight,
                                     const std::vector<std::vector<std::uint32_t>>& presorted) {
    const std::size_t n = X.n;
    auto score = [&](double g, double h) { return g * g / (h + reg_lambda); };

    std::vector<TreeNode> nodes(1);
    std::vector<int> assignment(n, 0);
    std::vector<int> active{0};
    struct NodeAgg {
        double g = 0.0, h = 0.0;
    };
    std::vector<NodeAgg> agg(1);
    for (std::size_t i = 0; i < n; ++i) {
        agg[0].g += grad[i];
        agg[0].h += hess[i];
    }

    for (std::size_t depth = 0; depth < max_depth && !active.empty(); ++depth) {
        std::vector<Split> best(nodes.size());
        std::vector<double> left_g(nodes.size()), left_h(nodes.size()), last_x(nodes.size());
        std::vector<std::size_t> seen(nodes.size());
        for (std::size_t f = 0; f < X.p; ++f) {
            for (int id : active) {
                left_g[static_cast<std::size_t>(id)] = 0.0;
                left_h[static_cast<std::size_t>(id)] = 0.0;
                seen[static_cast<std::size_t>(id)] = 0;
            }
            for (std::uint32_t idx : presorted[f]) {
                int id = assignment[idx];
                if (id < 0) continue;
                std::size_t uid = static_cast<std::size_t>(id);
                double v = X(idx, f);
                if (seen[uid] > 0 && v != last_x[uid]) {
                    double lg = left_g[uid], lh = left_h[uid];
                    double rg = agg[uid].g - lg, rh = agg[uid].h - lh;
                    if (lh >= min_child_weight && rh >= min_child_weight) {
                        double gain =
                            0.5 * (score(lg, lh) + score(rg, rh) - score(agg[uid].g, agg[uid].h));
                        if (gain > best[uid].gain + 1e-12) {
                            best[uid] = {true, static_cast<int>(f),
                                         last_x[uid] + (v - last_x[uid]) / 2.0, gain};
                        }
                    }
                }
                left_g[uid] += grad[idx];
                left_h[uid] += hess[idx];
                last_x[uid] = v;
                seen[uid]++;
            }
        }

        std::vector<int> next_active;
        std::vector<int> child_of(nodes.size() * 2, -1);
        for (int id : active) {
            std::size_t uid = static_cast<std::size_t>(id);
            if (!best[uid].found || best[uid].gain <= 1e-12) {
                nodes[uid].value = -agg[uid].g / (agg[uid].h + reg_lambda);
                continue;
            }
            nodes[uid].feature = best[uid].feature;
            nodes[uid].threshold = best[uid].threshold;
            nodes[uid].left = static_cast<int>(nodes.size());
            nodes.emplace_back();
            agg.emplace_back();
            nodes[uid].right = static_cast<int>(nodes.size());
            nodes.emplace_back();
            agg.emplace_back();
            next_active.push_back(nodes[uid].left);
            next_active.push_back(nodes[uid].right);
        }
        for (std::size_t i = 0; i < n; ++i) {
            int id = assignment[i];
            if (id < 0) continue;
            std::size_t uid = static_cast<std::size_t>(id);
            if (nodes[uid].feature < 0) {
                assignment[i] = -1;  // settled in a leaf
                continue;
            }
            int child = X(i, static_cast<std::size_t>(nodes[uid].feature)) <= nodes[uid].threshold
                            ? nodes[uid].left
                            : nodes[uid].right;
            assignment[i] = child;
            agg[static_cast<std::size_t>(child)].g += grad[i];
            agg[static_cast<std::size_t>(child)].h += hess[i];
        }
        active = std::move(next_active);
    }
    // anything still active at the depth cap becomes a leaf
    for (int id : active) {
        std::size_t uid = static_cast<std::size_t>(id);
        nodes[uid].value = -agg[uid].g / (agg[uid].h + reg_lambda);
    }
    return nodes;
}

}  // namespace psl
