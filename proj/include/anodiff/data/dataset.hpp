#pragma once

#include <string>
#include <vector>

namespace anodiff {

// Filename grammar (normative for this tool):
//   section_{SS}_{domain}_{split}_{label}_{id}_{attrs...}.wav
// under root/<machine_type>/{train,test}/. Extra attribute tokens after the
// id are tolerated; an unrecognized label token maps to "unknown".
struct ClipMeta {
    std::string path;      // absolute or root-relative as discovered
    std::string clip_id;   // filename stem
    std::string machine_type;
    std::string section;   // "00", "01", ...
    std::string domain;    // "source" | "target"
    std::string split;     // "train" | "test"
    std::string label;     // "normal" | "anomaly" | "unknown"
};

std::vector<ClipMeta> scan_dataset(const std::string& root,
                                   std::vector<std::string>* warnings = nullptr);

// Parses one filename per the grammar above. Returns false when the name
// does not follow the section_... pattern at all.
bool parse_clip_name(const std::string& filename, ClipMeta& meta,
                     std::string* warning = nullptr);

}  // namespace anodiff
