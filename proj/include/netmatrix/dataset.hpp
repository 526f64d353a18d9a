#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "netmatrix/netmatrix.hpp"

namespace netmatrix {

struct DatasetFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kCsvHeader =
    "len1,ttl1,iat1,len2,ttl2,iat2,len3,ttl3,iat3,len4,ttl4,iat4,len5,ttl5,"
    "iat5,label";

/// One CSV row per session: 15 base-10 integers plus a quoted label. A
/// leading '#' comment line records the inter-arrival encoding convention.
void write_csv(const std::filesystem::path& path,
               const std::vector<LabeledExample>& examples);

/// Parse a feature CSV. Lines starting with '#' are ignored; the header
/// line must match kCsvHeader exactly.
std::vector<LabeledExample> read_csv(const std::filesystem::path& path);

/// Concatenated 30-byte rows, plus a sidecar file (path + ".labels") with
/// one label per line.
void write_binary(const std::filesystem::path& path,
                  const std::vector<NetMatrixRow>& rows,
                  const std::vector<std::string>& labels);

std::pair<std::vector<NetMatrixRow>, std::vector<std::string>> read_binary(
    const std::filesystem::path& path);

}  // namespace netmatrix
