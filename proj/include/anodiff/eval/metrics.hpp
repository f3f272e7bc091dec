#pragma once

#include <string>
#include <vector>

namespace anodiff {

// Mann-Whitney AUC: fraction of (normal, anomaly) pairs where the anomaly
// scores higher, ties counted 0.5.
double auc(const std::vector<double>& normal_scores,
           const std::vector<double>& anomaly_scores);

// Partial AUC at false-positive rate <= p: plain AUC against the top
// ceil(p * N) normal scores, normalized to [0,1]. pauc(p = 1) == auc.
double pauc(const std::vector<double>& normal_scores,
            const std::vector<double>& anomaly_scores, double p);

double hmean(const std::vector<double>& values);

struct ScoreRecord {
    std::string clip_id;
    std::string machine_type;
    std::string section;
    std::string domain;  // "source" | "target"
    std::string label;   // "normal" | "anomaly"
    double score = 0.0;
};

struct MachineMetrics {
    std::string machine_type;
    std::string section;
    double sauc = 0.0, tauc = 0.0, pauc = 0.0;
    int n_source_normal = 0, n_source_anomaly = 0;
    int n_target_normal = 0, n_target_anomaly = 0;
};

struct MetricReport {
    std::vector<MachineMetrics> per_machine;
    double hmean = 0.0;  // over all per-machine sAUC/tAUC/pAUC values
    std::vector<std::string> warnings;
};

// Per machine-section cell: sAUC over source normals vs source anomalies
// (domain-pure; set mixed_anomalies to pool anomalies from both domains, the
// alternative DCASE reading), tAUC analogously, pAUC over both domains.
// Machines with an empty cell are excluded with a warning.
MetricReport evaluate(const std::vector<ScoreRecord>& records, double p,
                      bool mixed_anomalies = false);

}  // namespace anodiff
