#include "anodiff/data/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <stdexcept>

namespace anodiff {

namespace fs = std::filesystem;

namespace {
std::vector<std::string> split_tokens(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}
}  // namespace

bool parse_clip_name(const std::string& filename, ClipMeta& meta, std::string* warning) {
    std::string stem = filename;
    if (auto pos = stem.rfind('.'); pos != std::string::npos) stem = stem.substr(0, pos);
    meta.clip_id = stem;

    const auto tok = split_tokens(stem, '_');
    if (tok.size() < 5 || tok[0] != "section") return false;
    meta.section = tok[1];
    meta.domain = tok[2];
    meta.split = tok[3];
    meta.label = tok[4];

    if (meta.domain != "source" && meta.domain != "target") {
        if (warning) *warning = "unknown domain token '" + meta.domain + "' in " + filename;
        meta.domain = "source";
    }
    if (meta.split != "train" && meta.split != "test") {
        if (warning) *warning = "unknown split token '" + meta.split + "' in " + filename;
        meta.split = "test";
    }
    if (meta.label != "normal" && meta.label != "anomaly") {
        if (warning) *warning = "unknown label token '" + meta.label + "' in " + filename;
        meta.label = "unknown";
    }
    return true;
}

std::vector<ClipMeta> scan_dataset(const std::string& root,
                                   std::vector<std::string>* warnings) {
    if (!fs::is_directory(root))
        throw std::runtime_error("dataset: missing directory " + root);

    std::vector<ClipMeta> clips;
    std::vector<fs::path> machines;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) machines.push_back(e.path());
    std::sort(machines.begin(), machines.end());

    for (const auto& mdir : machines) {
        for (const char* split : {"train", "test"}) {
            const fs::path sdir = mdir / split;
            if (!fs::is_directory(sdir)) continue;
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(sdir))
                if (e.is_regular_file() && e.path().extension() == ".wav")
                    files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                ClipMeta m;
                std::string warn;
                if (!parse_clip_name(f.filename().string(), m, &warn)) {
                    if (warnings)
                        warnings->push_back("dataset: skipping unparseable name " +
                                            f.filename().string());
                    continue;
                }
                if (!warn.empty() && warnings) warnings->push_back("dataset: " + warn);
                m.path = f.string();
                m.machine_type = mdir.filename().string();
                if (m.split != split && warnings)
                    warnings->push_back("dataset: split token of " + m.clip_id +
                                        " disagrees with directory " + split);
                if (m.split == "train" && m.label == "anomaly")
                    throw std::runtime_error(
                        "dataset: train split must not contain anomalies: " + m.path);
                clips.push_back(std::move(m));
            }
        }
    }
    if (clips.empty()) throw std::runtime_error("dataset: no clips under " + root);
    return clips;
}

}  // namespace anodiff
