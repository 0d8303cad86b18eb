#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "faceaudit/association.hpp"
#include "faceaudit/csv.hpp"
#include "faceaudit/error.hpp"
#include "faceaudit/structure.hpp"
#include "faceaudit/util.hpp"

namespace faceaudit::report {

/// JSON number, or null for NaN/inf (JSON has no representation for them).
inline nlohmann::json number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

/// Tracks files written during one command so a failed run can remove them.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path root) : root_(std::move(root)) {}
    OutputSet(const OutputSet&) = delete;
    OutputSet& operator=(const OutputSet&) = delete;

    ~OutputSet() {
        if (!committed_) rollback();
    }

    const std::filesystem::path& root() const noexcept { return root_; }

    void write(const std::filesystem::path& relative, const std::string& content) {
        auto path = root_ / relative;
        make_dirs(path.parent_path());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        files_.push_back(path);
        out << content;
        out.close();
        if (!out) throw IoError("write failed for " + path.string());
    }

    template <class Fn>
    void write_with(const std::filesystem::path& relative, Fn&& writer) {
        auto path = root_ / relative;
        make_dirs(path.parent_path());
        files_.push_back(path);
        writer(path);
    }

    void commit() noexcept { committed_ = true; }

    void rollback() noexcept {
        std::error_code ec;
        for (auto it = files_.rbegin(); it != files_.rend(); ++it) std::filesystem::remove(*it, ec);
        for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it) std::filesystem::remove(*it, ec);  // only if empty
        files_.clear();
        dirs_.clear();
    }

    const std::vector<std::filesystem::path>& files() const noexcept { return files_; }

private:
    void make_dirs(const std::filesystem::path& dir) {
        if (dir.empty()) return;
        std::vector<std::filesystem::path> missing;
        for (auto p = dir; !p.empty() && !std::filesystem::exists(p); p = p.parent_path()) {
            missing.push_back(p);
            if (p == p.parent_path()) break;
        }
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
        for (auto it = missing.rbegin(); it != missing.rend(); ++it) dirs_.push_back(*it);
    }

    std::filesystem::path root_;
    std::vector<std::filesystem::path> files_;
    std::vector<std::filesystem::path> dirs_;
    bool committed_ = false;
};

/// File-system-safe directory name for a model id.
inline std::string path_component(const std::string& id) {
    std::string out;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
        out.push_back(ok ? c : '_');
    }
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out;
}

inline std::string similarity_csv(const std::vector<SimilarityRecord>& records) {
    std::string s = csv::join({"model_id", "attribute", "rho", "p_value", "n"});
    for (const auto& r : records) {
        s += csv::join({r.model_id, r.attribute, format_real(r.rho), format_real(r.p_value), std::to_string(r.n)});
    }
    return s;
}

inline std::vector<SimilarityRecord> read_similarity_csv(const std::filesystem::path& path) {
    auto table = csv::read(path, {"model_id", "attribute", "rho", "p_value", "n"});
    std::vector<SimilarityRecord> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        std::string where = path.string() + ":" + std::to_string(table.line_numbers[r]);
        SimilarityRecord rec;
        rec.model_id = row[0];
        rec.attribute = row[1];
        rec.rho = parse_real(row[2], where);
        rec.p_value = row[3] == "nan" ? stats::kNaN : parse_real(row[3], where);
        rec.n = static_cast<std::size_t>(parse_real(row[4], where));
        if (!std::isfinite(rec.rho) || std::fabs(rec.rho) > 1.0) throw ValidationError(where + ": rho must be in [-1, 1]");
        out.push_back(std::move(rec));
    }
    if (out.empty()) throw ValidationError(path.string() + ": no similarity rows");
    return out;
}

/// Square labeled matrix: header `attribute,<labels...>`, then one row per label.
inline std::string matrix_csv(const CorrelationMatrix& m) {
    csv::Row header{"attribute"};
    header.insert(header.end(), m.labels.begin(), m.labels.end());
    std::string s = csv::join(header);
    for (std::size_t i = 0; i < m.size(); ++i) {
        csv::Row row{m.labels[i]};
        for (std::size_t j = 0; j < m.size(); ++j) row.push_back(format_real(m.at(i, j)));
        s += csv::join(row);
    }
    return s;
}

inline CorrelationMatrix read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::vector<csv::Row> rows;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(csv::split_line(line, line_no));
    }
    if (rows.empty() || rows[0].empty() || rows[0][0] != "attribute") throw FormatError(path.string() + ": expected header starting with 'attribute'");
    CorrelationMatrix m;
    m.labels.assign(rows[0].begin() + 1, rows[0].end());
    const std::size_t k = m.labels.size();
    if (rows.size() != k + 1) throw FormatError(path.string() + ": expected " + std::to_string(k) + " matrix rows");
    m.values.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
        const auto& row = rows[i + 1];
        if (row.size() != k + 1 || row[0] != m.labels[i]) throw FormatError(path.string() + ": row " + std::to_string(i + 1) + " does not match header label order");
        for (std::size_t j = 0; j < k; ++j) {
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_real(row[j + 1], path.string());
        }
    }
    m.validate();
    return m;
}

inline std::string frobenius_csv(const std::vector<StructuralSimilarity>& values) {
    std::string s = csv::join({"model_id", "value"});
    for (const auto& v : values) s += csv::join({v.model_id, format_real(v.value)});
    return s;
}

} // namespace faceaudit::report
