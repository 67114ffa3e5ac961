#include "xcorr/cumulants.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>

#include "xcorr/errors.hpp"

namespace xcorr {
namespace {

std::vector<Partition> enumerate_partitions(int n) {
    // restricted growth strings: a[i] <= 1 + max(a[0..i-1])
    std::vector<Partition> out;
    std::vector<int> a(n, 0);
    std::function<void(int, int)> rec = [&](int i, int blocks) {
        if (i == n) {
            Partition p;
            p.blocks.resize(blocks);
            for (int k = 0; k < n; ++k) p.blocks[a[k]].push_back(k);
            out.push_back(std::move(p));
            return;
        }
        for (int b = 0; b <= blocks; ++b) {
            a[i] = b;
            rec(i + 1, std::max(blocks, b + 1));
        }
    };
    rec(0, 0);
    return out;
}

void pairings(std::vector<int>& free, std::vector<std::vector<int>>& cur,
              const std::function<void(const std::vector<std::vector<int>>&)>& visit) {
    if (free.empty()) {
        visit(cur);
        return;
    }
    const int first = free.front();
    for (std::size_t j = 1; j < free.size(); ++j) {
        const int second = free[j];
        std::vector<int> rest;
        for (std::size_t k = 1; k < free.size(); ++k)
            if (k != j) rest.push_back(free[k]);
        cur.push_back({first, second});
        pairings(rest, cur, visit);
        cur.pop_back();
    }
}

IndexTuple sub_tuple(const IndexTuple& t, const std::vector<int>& positions) {
    IndexTuple s;
    for (int p : positions) s.push_back(t[p]);
    std::sort(s.begin(), s.end());
    return s;
}

double factorial(int k) {
    double f = 1;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

// Sorted index tuples of size `order` over m variables.
void tuples_of(int m, int order, IndexTuple& cur, std::vector<IndexTuple>& out) {
    if (static_cast<int>(cur.size()) == order) {
        out.push_back(cur);
        return;
    }
    for (int v = cur.empty() ? 0 : cur.back(); v < m; ++v) {
        cur.push_back(v);
        tuples_of(m, order, cur, out);
        cur.pop_back();
    }
}

// k-statistics from central moments of n observations.
double k_statistic(const IndexTuple& t, const std::function<double(const IndexTuple&)>& central,
                   const std::vector<double>& mean, double n) {
    switch (t.size()) {
        case 1:
            return mean[t[0]];
        case 2:
            return n / (n - 1) * central(t);
        case 3:
            return n * n / ((n - 1) * (n - 2)) * central(t);
        default: {
            auto m2 = [&](int a, int b) { return central(sub_tuple(t, {a, b})); };
            const double products = m2(0, 1) * m2(2, 3) + m2(0, 2) * m2(1, 3) + m2(0, 3) * m2(1, 2);
            return n * n * ((n + 1) * central(t) - (n - 1) * products) / ((n - 1) * (n - 2) * (n - 3));
        }
    }
}

}  // namespace

std::vector<Partition> partitions(int n) {
    if (n < 1 || n > 8) throw SizeLimit("partitions: n must be in 1..8");
    static std::mutex mutex;
    static std::map<int, std::vector<Partition>> memo;
    std::lock_guard lock(mutex);
    auto it = memo.find(n);
    if (it == memo.end()) it = memo.emplace(n, enumerate_partitions(n)).first;
    return it->second;
}

double isserlis_moment(const Eigen::MatrixXd& cov) {
    const int n = static_cast<int>(cov.rows());
    if (cov.cols() != n) throw ConfigError("isserlis_moment: matrix must be square");
    if (n == 0) return 1.0;
    if (n % 2) return 0.0;
    double total = 0;
    std::vector<int> free(n);
    for (int i = 0; i < n; ++i) free[i] = i;
    std::vector<std::vector<int>> cur;
    pairings(free, cur, [&](const auto& pairs) {
        double p = 1;
        for (const auto& pr : pairs) p *= cov(pr[0], pr[1]);
        total += p;
    });
    return total;
}

MomentTable moments_to_cumulants(const MomentTable& moments, int order) {
    if (order < 1 || order > 4) throw SizeLimit("moments_to_cumulants: order must be in 1..4");
    MomentTable out;
    for (const auto& [key, value] : moments) {
        const int n = static_cast<int>(key.size());
        if (n == 0 || n > order) continue;
        double cum = 0;
        for (const auto& p : partitions(n)) {
            const int b = static_cast<int>(p.blocks.size());
            double prod = (b % 2 ? 1.0 : -1.0) * factorial(b - 1);
            for (const auto& block : p.blocks) {
                auto it = moments.find(sub_tuple(key, block));
                if (it == moments.end()) throw MissingMoment("moments_to_cumulants: missing a lower-order moment");
                prod *= it->second;
            }
            cum += prod;
        }
        out[key] = cum;
    }
    return out;
}

MomentTable cumulants_to_moments(const MomentTable& cumulants, int order) {
    if (order < 1 || order > 4) throw SizeLimit("cumulants_to_moments: order must be in 1..4");
    MomentTable out;
    for (const auto& [key, value] : cumulants) {
        const int n = static_cast<int>(key.size());
        if (n == 0 || n > order) continue;
        double mom = 0;
        for (const auto& p : partitions(n)) {
            double prod = 1;
            for (const auto& block : p.blocks) {
                auto it = cumulants.find(sub_tuple(key, block));
                if (it == cumulants.end()) throw MissingMoment("cumulants_to_moments: missing a lower-order cumulant");
                prod *= it->second;
            }
            mom += prod;
        }
        out[key] = mom;
    }
    return out;
}

std::vector<CumulantReport> sample_joint_cumulants(const Eigen::MatrixXd& data, int max_order) {
    if (max_order < 1 || max_order > 4) throw SizeLimit("sample_joint_cumulants: order must be in 1..4");
    const Eigen::Index R = data.rows();
    const int m = static_cast<int>(data.cols());
    if (R < 100) throw TooFewReplicates("sample_joint_cumulants: need at least 100 replicates");
    if (m < 1) throw ConfigError("sample_joint_cumulants: no columns");

    // Cumulants of order >= 2 are shift invariant; shifting by the first row keeps the raw
    // sums well scaled and makes constant columns exactly zero.
    const Eigen::RowVectorXd shift = data.row(0);
    const Eigen::MatrixXd y = data.rowwise() - shift;

    std::vector<IndexTuple> targets, raw_keys;
    for (int k = 1; k <= max_order; ++k) {
        IndexTuple cur;
        tuples_of(m, k, cur, targets);
    }
    raw_keys = targets;
    std::map<IndexTuple, std::size_t> slot;
    for (std::size_t i = 0; i < raw_keys.size(); ++i) slot[raw_keys[i]] = i;

    auto row_products = [&](Eigen::Index r) {
        std::vector<double> p(raw_keys.size());
        for (std::size_t i = 0; i < raw_keys.size(); ++i) {
            double v = 1;
            for (int idx : raw_keys[i]) v *= y(r, idx);
            p[i] = v;
        }
        return p;
    };
    std::vector<double> sums(raw_keys.size(), 0.0);
    for (Eigen::Index r = 0; r < R; ++r) {
        const auto p = row_products(r);
        for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += p[i];
    }

    auto estimates = [&](const std::vector<double>& s, double n) {
        std::vector<double> mean(m);
        for (int j = 0; j < m; ++j) mean[j] = s[slot.at({j})] / n;
        auto raw = [&](const IndexTuple& t) { return t.empty() ? 1.0 : s[slot.at(t)] / n; };
        // central moment: sum over subsets A of positions of raw(A) prod_{not A} (-mean)
        auto central = [&](const IndexTuple& t) {
            const int k = static_cast<int>(t.size());
            double c = 0;
            for (int mask = 0; mask < (1 << k); ++mask) {
                IndexTuple in;
                double w = 1;
                for (int b = 0; b < k; ++b) {
                    if (mask & (1 << b)) in.push_back(t[b]);
                    else w *= -mean[t[b]];
                }
                c += w * raw(in);
            }
            return c;
        };
        std::vector<double> k(targets.size());
        for (std::size_t i = 0; i < targets.size(); ++i) k[i] = k_statistic(targets[i], central, mean, n);
        for (std::size_t i = 0; i < targets.size(); ++i)
            if (targets[i].size() == 1) k[i] += shift(targets[i][0]);
        return k;
    };

    const double n = static_cast<double>(R);
    const auto full = estimates(sums, n);
    std::vector<double> pseudo_sum(targets.size(), 0.0), pseudo_sq(targets.size(), 0.0);
    std::vector<std::vector<double>> loo(static_cast<std::size_t>(R));
    for (Eigen::Index r = 0; r < R; ++r) {
        const auto p = row_products(r);
        std::vector<double> s = sums;
        for (std::size_t i = 0; i < s.size(); ++i) s[i] -= p[i];
        loo[r] = estimates(s, n - 1);
        for (std::size_t i = 0; i < targets.size(); ++i) pseudo_sum[i] += loo[r][i];
    }
    std::vector<CumulantReport> out;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double bar = pseudo_sum[i] / n;
        double ss = 0;
        for (Eigen::Index r = 0; r < R; ++r) ss += (loo[r][i] - bar) * (loo[r][i] - bar);
        out.push_back({static_cast<int>(targets[i].size()), targets[i], full[i], std::sqrt((n - 1) / n * ss),
                       static_cast<int>(R)});
    }
    return out;
}

void write_cumulants_csv(std::ostream& os, const std::vector<CumulantReport>& reports) {
    os << "order,indices,estimate,std_error\n";
    const auto old = os.precision(17);
    for (const auto& r : reports) {
        os << r.order << ',';
        for (std::size_t i = 0; i < r.indices.size(); ++i) os << (i ? ";" : "") << r.indices[i];
        os << ',' << r.estimate << ',' << r.std_error << '\n';
    }
    os.precision(old);
}

std::optional<std::vector<int>> row_chain(const Partition& pairing, int m) {
    if (m < 1) return std::nullopt;
    // each row has two cells, so every row meets exactly two pair ends; walk the cycle
    std::vector<int> partner(2 * m, -1);
    for (const auto& b : pairing.blocks) {
        if (b.size() != 2) return std::nullopt;
        partner[b[0]] = b[1];
        partner[b[1]] = b[0];
    }
    if (std::count(partner.begin(), partner.end(), -1)) return std::nullopt;
    std::vector<int> chain{0};
    std::vector<bool> seen(m, false);
    seen[0] = true;
    int cell = 1;  // leave row 0 through its second cell
    while (true) {
        const int next = partner[cell];
        const int row = next / 2;
        if (row == 0) break;
        if (seen[row]) return std::nullopt;
        seen[row] = true;
        chain.push_back(row);
        cell = next ^ 1;  // the other cell of the same row
    }
    if (static_cast<int>(chain.size()) != m) return std::nullopt;
    if (m == 1) return std::nullopt;  // a lone row paired with itself is the row
    return chain;
}

std::vector<Partition> indecomposable_pair_partitions(int m) {
    if (m < 1 || m > 6) throw SizeLimit("indecomposable_pair_partitions: m must be in 1..6");
    std::vector<Partition> out;
    std::vector<int> cells(2 * m);
    for (int i = 0; i < 2 * m; ++i) cells[i] = i;
    std::vector<std::vector<int>> cur;
    pairings(cells, cur, [&](const auto& pairs) {
        Partition p{pairs};
        if (row_chain(p, m)) out.push_back(std::move(p));
    });
    return out;
}

}  // namespace xcorr
