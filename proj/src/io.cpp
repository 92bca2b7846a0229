#include "oac3/io.hpp"

#include "oac3/errors.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <string_view>

namespace oac3::io {
namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
std::optional<T> parse_number(std::string_view token)
{
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    T value{};
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) return std::nullopt;
    return value;
}

struct CsvRow {
    std::size_t line;
    std::vector<std::string_view> fields;
};

// Reads every nonblank line; drops the first one when its first token is
// not a number.
class CsvFile {
public:
    explicit CsvFile(const std::filesystem::path& path) : path_(path.string())
    {
        std::ifstream in(path);
        if (!in) throw ParseError(path_, 0, "cannot open file");
        std::string line;
        std::size_t number = 0;
        while (std::getline(in, line)) {
            ++number;
            lines_.push_back(std::move(line));
            numbers_.push_back(number);
        }
        for (std::size_t t = 0; t < lines_.size(); ++t) {
            if (trim(lines_[t]).empty()) continue;
            auto fields = split(lines_[t]);
            if (rows_.empty() && !parse_number<double>(fields.front())) continue;
            rows_.push_back({numbers_[t], std::move(fields)});
        }
    }

    const std::vector<CsvRow>& rows() const { return rows_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::vector<std::string> lines_;
    std::vector<std::size_t> numbers_;
    std::vector<CsvRow> rows_;
};

std::ofstream open_output(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot open " + path.string() + " for writing");
    return out;
}

} // namespace

std::string format_double(double value)
{
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, ptr);
}

ProbMatrix read_prob_matrix(const std::filesystem::path& path)
{
    const CsvFile csv(path);
    if (csv.rows().empty()) throw ParseError(csv.path(), 0, "no data rows");
    const std::size_t k = csv.rows().front().fields.size();
    ProbMatrix values(static_cast<Eigen::Index>(csv.rows().size()), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < csv.rows().size(); ++i) {
        const auto& row = csv.rows()[i];
        if (row.fields.size() != k) {
            throw ParseError(csv.path(), row.line,
                             "expected " + std::to_string(k) + " columns, found "
                                 + std::to_string(row.fields.size()));
        }
        for (std::size_t l = 0; l < k; ++l) {
            const auto v = parse_number<double>(row.fields[l]);
            if (!v) throw ParseError(csv.path(), row.line, "not a number: '" + std::string(row.fields[l]) + "'");
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = *v;
        }
    }
    return values;
}

void write_prob_matrix(const std::filesystem::path& path, const ProbMatrix& values)
{
    auto out = open_output(path);
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index l = 0; l < values.cols(); ++l) {
            if (l) out << ',';
            out << format_double(values(i, l));
        }
        out << '\n';
    }
}

PartitionSet read_partitions(const std::filesystem::path& path)
{
    const CsvFile csv(path);
    if (csv.rows().empty()) throw ParseError(csv.path(), 0, "no data rows");
    const std::size_t r2 = csv.rows().front().fields.size();
    PartitionSet parts;
    parts.n = csv.rows().size();
    parts.columns.assign(r2, std::vector<long>(parts.n));
    for (std::size_t i = 0; i < parts.n; ++i) {
        const auto& row = csv.rows()[i];
        if (row.fields.size() != r2) {
            throw ParseError(csv.path(), row.line,
                             "expected " + std::to_string(r2) + " columns, found "
                                 + std::to_string(row.fields.size()));
        }
        for (std::size_t c = 0; c < r2; ++c) {
            const auto v = parse_number<long>(row.fields[c]);
            if (!v) throw ParseError(csv.path(), row.line, "not an integer: '" + std::string(row.fields[c]) + "'");
            parts.columns[c][i] = *v;
        }
    }
    return parts;
}

void write_partitions(const std::filesystem::path& path, const PartitionSet& parts)
{
    auto out = open_output(path);
    for (std::size_t i = 0; i < parts.n; ++i) {
        for (std::size_t c = 0; c < parts.clusterers(); ++c) {
            if (c) out << ',';
            out << parts.columns[c][i];
        }
        out << '\n';
    }
}

SimilarityMatrix read_similarity(const std::filesystem::path& path, std::size_t n)
{
    const CsvFile csv(path);
    std::vector<SimilarityEntry> entries;
    entries.reserve(csv.rows().size());
    for (const auto& row : csv.rows()) {
        if (row.fields.size() != 3) throw ParseError(csv.path(), row.line, "expected i,j,s");
        const auto i = parse_number<std::size_t>(row.fields[0]);
        const auto j = parse_number<std::size_t>(row.fields[1]);
        const auto s = parse_number<double>(row.fields[2]);
        if (!i || !j || !s) throw ParseError(csv.path(), row.line, "malformed triplet");
        if (*i >= n || *j >= n) {
            throw ParseError(csv.path(), row.line, "index out of range for n=" + std::to_string(n));
        }
        if (!(*s >= 0.0 && *s <= 1.0)) throw ParseError(csv.path(), row.line, "similarity outside [0,1]");
        entries.push_back({*i, *j, *s});
    }
    try {
        return SimilarityMatrix(n, std::move(entries));
    } catch (const Error& e) {
        throw ParseError(csv.path(), 0, e.what());
    }
}

void write_similarity(const std::filesystem::path& path, const SimilarityMatrix& S)
{
    auto out = open_output(path);
    for (const auto& e : S.entries()) out << e.i << ',' << e.j << ',' << format_double(e.s) << '\n';
}

std::vector<std::size_t> read_labels(const std::filesystem::path& path)
{
    const CsvFile csv(path);
    std::vector<std::size_t> labels;
    labels.reserve(csv.rows().size());
    for (const auto& row : csv.rows()) {
        const auto v = parse_number<std::size_t>(row.fields.front());
        if (row.fields.size() != 1 || !v) throw ParseError(csv.path(), row.line, "expected one class index");
        labels.push_back(*v);
    }
    return labels;
}

void write_labels(const std::filesystem::path& path, const std::vector<std::size_t>& labels)
{
    auto out = open_output(path);
    for (auto label : labels) out << label << '\n';
}

void write_labeling(const std::filesystem::path& path, const std::vector<std::size_t>& labels,
                    const ProbMatrix& probabilities)
{
    auto out = open_output(path);
    out << "index,label";
    for (Eigen::Index l = 0; l < probabilities.cols(); ++l) out << ",p" << (l + 1);
    out << '\n';
    for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
        out << i << ',' << labels[static_cast<std::size_t>(i)];
        for (Eigen::Index l = 0; l < probabilities.cols(); ++l) out << ',' << format_double(probabilities(i, l));
        out << '\n';
    }
}

void read_labeling(const std::filesystem::path& path, std::vector<std::size_t>& labels,
                   ProbMatrix& probabilities)
{
    const CsvFile csv(path);
    if (csv.rows().empty()) throw ParseError(csv.path(), 0, "no data rows");
    const std::size_t width = csv.rows().front().fields.size();
    if (width < 3) throw ParseError(csv.path(), csv.rows().front().line, "expected index,label,p1..pk");
    labels.assign(csv.rows().size(), 0);
    probabilities.resize(static_cast<Eigen::Index>(csv.rows().size()), static_cast<Eigen::Index>(width - 2));
    for (std::size_t i = 0; i < csv.rows().size(); ++i) {
        const auto& row = csv.rows()[i];
        if (row.fields.size() != width) throw ParseError(csv.path(), row.line, "ragged row");
        const auto index = parse_number<std::size_t>(row.fields[0]);
        const auto label = parse_number<std::size_t>(row.fields[1]);
        if (!index || *index != i || !label) throw ParseError(csv.path(), row.line, "malformed index or label");
        labels[i] = *label;
        for (std::size_t l = 2; l < width; ++l) {
            const auto v = parse_number<double>(row.fields[l]);
            if (!v) throw ParseError(csv.path(), row.line, "not a number");
            probabilities(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l - 2)) = *v;
        }
    }
}

} // namespace oac3::io
