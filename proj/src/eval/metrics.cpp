#include "anodiff/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace anodiff {

double auc(const std::vector<double>& normal_scores,
           const std::vector<double>& anomaly_scores) {
    if (normal_scores.empty() || anomaly_scores.empty())
        throw std::invalid_argument("auc: empty score list");
    std::vector<double> anom = anomaly_scores;
    std::sort(anom.begin(), anom.end());
    double wins = 0.0;
    for (double s : normal_scores) {
        // anomalies strictly greater win, equal ones count half
        const auto lo = std::lower_bound(anom.begin(), anom.end(), s);
        const auto hi = std::upper_bound(lo, anom.end(), s);
        wins += static_cast<double>(anom.end() - hi) + 0.5 * static_cast<double>(hi - lo);
    }
    return wins / (static_cast<double>(normal_scores.size()) *
                   static_cast<double>(anom.size()));
}

double pauc(const std::vector<double>& normal_scores,
            const std::vector<double>& anomaly_scores, double p) {
    if (normal_scores.empty() || anomaly_scores.empty())
        throw std::invalid_argument("pauc: empty score list");
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("pauc: p must be in (0,1]");
    const auto n = static_cast<int64_t>(normal_scores.size());
    const int64_t keep = std::min<int64_t>(
        n, static_cast<int64_t>(std::ceil(p * static_cast<double>(n))));
    std::vector<double> top = normal_scores;
    std::sort(top.begin(), top.end(), std::greater<>());
    top.resize(static_cast<size_t>(keep));
    return auc(top, anomaly_scores);
}

double hmean(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("hmean: empty input");
    double inv = 0.0;
    for (double v : values) {
        if (v <= 0.0) return 0.0;
        inv += 1.0 / v;
    }
    return static_cast<double>(values.size()) / inv;
}

MetricReport evaluate(const std::vector<ScoreRecord>& records, double p,
                      bool mixed_anomalies) {
    struct Cell {
        std::vector<double> sn, sa, tn, ta;
    };
    std::map<std::pair<std::string, std::string>, Cell> cells;
    for (const auto& r : records) {
        if (r.label != "normal" && r.label != "anomaly") continue;
        Cell& c = cells[{r.machine_type, r.section}];
        const bool anom = r.label == "anomaly";
        if (r.domain == "source")
            (anom ? c.sa : c.sn).push_back(r.score);
        else if (r.domain == "target")
            (anom ? c.ta : c.tn).push_back(r.score);
    }

    MetricReport rep;
    std::vector<double> all_metrics;
    for (auto& [key, c] : cells) {
        const std::string name = key.first + "/section_" + key.second;
        std::vector<double> s_anom = mixed_anomalies ? [&] {
            std::vector<double> v = c.sa;
            v.insert(v.end(), c.ta.begin(), c.ta.end());
            return v;
        }() : c.sa;
        std::vector<double> t_anom = mixed_anomalies ? s_anom : c.ta;

        if (c.sn.empty() || s_anom.empty() || c.tn.empty() || t_anom.empty()) {
            rep.warnings.push_back("evaluate: machine " + name +
                                   " missing a normal/anomaly cell, excluded");
            continue;
        }
        std::vector<double> all_n = c.sn, all_a = c.sa;
        all_n.insert(all_n.end(), c.tn.begin(), c.tn.end());
        all_a.insert(all_a.end(), c.ta.begin(), c.ta.end());

        MachineMetrics m;
        m.machine_type = key.first;
        m.section = key.second;
        m.sauc = auc(c.sn, s_anom);
        m.tauc = auc(c.tn, t_anom);
        m.pauc = pauc(all_n, all_a, p);
        m.n_source_normal = static_cast<int>(c.sn.size());
        m.n_source_anomaly = static_cast<int>(c.sa.size());
        m.n_target_normal = static_cast<int>(c.tn.size());
        m.n_target_anomaly = static_cast<int>(c.ta.size());
        rep.per_machine.push_back(m);
        all_metrics.push_back(m.sauc);
        all_metrics.push_back(m.tauc);
        all_metrics.push_back(m.pauc);
    }
    if (!all_metrics.empty()) rep.hmean = hmean(all_metrics);
    return rep;
}

}  // namespace anodiff
