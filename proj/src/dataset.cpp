#include "netmatrix/dataset.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace netmatrix {

namespace {

constexpr const char* kConventionComment =
    "# iat: microseconds between consecutive selected packets, saturating at "
    "16777215; iat1 is always 0";

std::string quote_label(const std::string& label) {
    std::string out = "\"";
    for (char c : label) {
        if (c == '"') out += '"';  // RFC 4180 doubling
        out += c;
    }
    out += '"';
    return out;
}

// Accepts both quoted and bare labels.
std::string unquote_label(std::string field) {
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
        field = field.substr(1, field.size() - 2);
        std::string out;
        for (size_t i = 0; i < field.size(); ++i) {
            out += field[i];
            if (field[i] == '"' && i + 1 < field.size() && field[i + 1] == '"') ++i;
        }
        return out;
    }
    return field;
}

uint64_t parse_int_field(const std::string& field, size_t line_no) {
    uint64_t value = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw DatasetFormatError("line " + std::to_string(line_no) +
                                 ": expected base-10 integer, got '" + field + "'");
    }
    return value;
}

}  // namespace

void write_csv(const std::filesystem::path& path,
               const std::vector<LabeledExample>& examples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DatasetFormatError("cannot open for writing: " + path.string());
    out << kConventionComment << "\n" << kCsvHeader << "\n";
    char buf[32];
    for (const auto& ex : examples) {
        for (size_t i = 0; i < kFeatureCount; ++i) {
            std::snprintf(buf, sizeof(buf), "%" PRIu64,
                          static_cast<uint64_t>(ex.features[i]));
            out << buf << ',';
        }
        out << quote_label(ex.label) << "\n";
    }
    if (!out) throw DatasetFormatError("write failed: " + path.string());
}

std::vector<LabeledExample> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetFormatError("cannot open feature CSV: " + path.string());

    std::vector<LabeledExample> examples;
    std::string line;
    size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != kCsvHeader) {
                throw DatasetFormatError("line " + std::to_string(line_no) +
                                         ": header does not match the feature CSV "
                                         "schema");
            }
            header_seen = true;
            continue;
        }

        // 15 integer fields then the label; the label may contain commas only
        // inside quotes, which the integer fields never do, so a plain split
        // on the first 15 commas is enough.
        LabeledExample ex;
        size_t pos = 0;
        for (size_t i = 0; i < kFeatureCount; ++i) {
            const size_t comma = line.find(',', pos);
            if (comma == std::string::npos) {
                throw DatasetFormatError("line " + std::to_string(line_no) +
                                         ": expected 16 fields");
            }
            ex.features[i] = static_cast<double>(
                parse_int_field(line.substr(pos, comma - pos), line_no));
            pos = comma + 1;
        }
        ex.label = unquote_label(line.substr(pos));
        if (ex.label.empty()) {
            throw DatasetFormatError("line " + std::to_string(line_no) +
                                     ": empty label");
        }
        examples.push_back(std::move(ex));
    }
    if (!header_seen) {
        throw DatasetFormatError("feature CSV has no header line: " + path.string());
    }
    return examples;
}

void write_binary(const std::filesystem::path& path,
                  const std::vector<NetMatrixRow>& rows,
                  const std::vector<std::string>& labels) {
    if (rows.size() != labels.size()) {
        throw DatasetFormatError("row/label count mismatch");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DatasetFormatError("cannot open for writing: " + path.string());
    for (const auto& row : rows) {
        const auto bytes = serialize_row(row);
        out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    }
    std::ofstream lab(path.string() + ".labels", std::ios::binary);
    if (!lab) {
        throw DatasetFormatError("cannot open for writing: " + path.string() +
                                 ".labels");
    }
    for (const auto& label : labels) lab << label << "\n";
    if (!out || !lab) throw DatasetFormatError("write failed: " + path.string());
}

std::pair<std::vector<NetMatrixRow>, std::vector<std::string>> read_binary(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetFormatError("cannot open binary rows: " + path.string());
    std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    if (data.size() % kRowBytes != 0) {
        throw DatasetFormatError("binary row file size is not a multiple of 30");
    }
    std::vector<NetMatrixRow> rows;
    rows.reserve(data.size() / kRowBytes);
    for (size_t off = 0; off < data.size(); off += kRowBytes) {
        rows.push_back(deserialize_row(std::span(&data[off], kRowBytes)));
    }

    std::ifstream lab(path.string() + ".labels", std::ios::binary);
    if (!lab) {
        throw DatasetFormatError("missing label sidecar: " + path.string() +
                                 ".labels");
    }
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(lab, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        labels.push_back(line);
    }
    if (labels.size() != rows.size()) {
        throw DatasetFormatError("label sidecar count does not match row count");
    }
    return {std::move(rows), std::move(labels)};
}

}  // namespace netmatrix
