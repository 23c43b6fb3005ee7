#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tabcl/openml.hpp"

namespace tabcl {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Comma separated fields with ' or " quoting and backslash escapes.
std::vector<std::string> split_fields(const std::string& line, std::size_t row) {
    std::vector<std::string> out;
    std::size_t i = 0;
    const std::size_t n = line.size();
    while (true) {
        while (i < n && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::string field;
        if (i < n && (line[i] == '\'' || line[i] == '"')) {
            const char q = line[i++];
            bool closed = false;
            while (i < n) {
                if (line[i] == '\\' && i + 1 < n) {
                    field += line[i + 1];
                    i += 2;
                } else if (line[i] == q) {
                    ++i;
                    closed = true;
                    break;
                } else {
                    field += line[i++];
                }
            }
            if (!closed) throw ParseError("unterminated quote", row);
            while (i < n && line[i] != ',') {
                if (!std::isspace(static_cast<unsigned char>(line[i]))) throw ParseError("text after quoted field", row);
                ++i;
            }
        } else {
            const std::size_t start = i;
            while (i < n && line[i] != ',') ++i;
            field = trim(line.substr(start, i - start));
        }
        out.push_back(std::move(field));
        if (i >= n) break;
        ++i;  // comma
    }
    return out;
}

// Reads a possibly quoted token from `s` at `pos`, advancing past it.
std::string read_token(const std::string& s, std::size_t& pos) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos >= s.size()) return {};
    std::string tok;
    if (s[pos] == '\'' || s[pos] == '"') {
        const char q = s[pos++];
        while (pos < s.size() && s[pos] != q) {
            if (s[pos] == '\\' && pos + 1 < s.size()) ++pos;
            tok += s[pos++];
        }
        ++pos;
    } else {
        while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) && s[pos] != '{') tok += s[pos++];
    }
    return tok;
}

std::string quote(const std::string& s) {
    const bool plain = !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
    if (plain && s != "?") return s;
    std::string out = "'";
    for (char c : s) {
        if (c == '\'' || c == '\\') out += '\\';
        out += c;
    }
    return out + "'";
}

}  // namespace

ArffData parse_arff(const std::string& text) {
    ArffData out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool in_data = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '%') continue;
        if (in_data) {
            if (t[0] == '{') throw ParseError("sparse ARFF data is not supported", line_no);
            auto fields = split_fields(t, line_no);
            if (fields.size() != out.attributes.size()) {
                throw ParseError("expected " + std::to_string(out.attributes.size()) + " fields, got " +
                                     std::to_string(fields.size()),
                                 line_no);
            }
            out.rows.push_back(std::move(fields));
            continue;
        }
        if (t[0] != '@') throw ParseError("unexpected header line", line_no);
        std::size_t pos = 0;
        const std::string keyword = lower(read_token(t, pos));
        if (keyword == "@relation") {
            out.relation = read_token(t, pos);
        } else if (keyword == "@attribute") {
            ArffAttribute attr;
            attr.name = read_token(t, pos);
            while (pos < t.size() && std::isspace(static_cast<unsigned char>(t[pos]))) ++pos;
            if (pos < t.size() && t[pos] == '{') {
                const auto close = t.rfind('}');
                if (close == std::string::npos || close < pos) throw ParseError("unterminated nominal list", line_no);
                attr.kind = FeatureKind::categorical;
                attr.categories = split_fields(t.substr(pos + 1, close - pos - 1), line_no);
                if (attr.categories.size() == 1 && attr.categories[0].empty()) attr.categories.clear();
            } else {
                const std::string kind = lower(read_token(t, pos));
                if (kind == "numeric" || kind == "real" || kind == "integer") {
                    attr.kind = FeatureKind::numerical;
                } else {
                    throw UnsupportedFeatureError(attr.name, kind);
                }
            }
            out.attributes.push_back(std::move(attr));
        } else if (keyword == "@data") {
            in_data = true;
        } else {
            throw ParseError("unknown ARFF keyword '" + keyword + "'", line_no);
        }
    }
    if (!in_data) throw ParseError("no @DATA section", line_no);
    return out;
}

ParsedRows arff_to_rows(const ArffData& arff, const std::string& target) {
    std::size_t label_col = arff.attributes.size();
    std::vector<FeatureSpec> feats;
    std::vector<std::string> classes;
    for (std::size_t i = 0; i < arff.attributes.size(); ++i) {
        const auto& a = arff.attributes[i];
        if (a.name == target) {
            if (a.kind != FeatureKind::categorical) throw UnsupportedFeatureError(a.name, "numeric target");
            label_col = i;
            classes = a.categories;
        } else {
            feats.push_back({a.name, a.kind, a.categories});
        }
    }
    if (label_col == arff.attributes.size()) throw SchemaError("target attribute '" + target + "' not found");
    return parse_records(arff.rows, Schema(std::move(feats), target, std::move(classes)), label_col);
}

std::string write_canonical(const ParsedRows& rows, const std::string& relation) {
    const auto& schema = rows.schema;
    std::ostringstream os;
    os << "@RELATION " << quote(relation) << "\n\n";
    for (const auto& f : schema.features()) {
        os << "@ATTRIBUTE " << quote(f.name) << ' ';
        if (f.categorical()) {
            os << '{';
            for (std::size_t c = 0; c < f.categories.size(); ++c) os << (c ? "," : "") << quote(f.categories[c]);
            os << '}';
        } else {
            os << "NUMERIC";
        }
        os << '\n';
    }
    os << "@ATTRIBUTE " << quote(schema.label_name()) << " {";
    for (std::size_t c = 0; c < schema.class_count(); ++c) os << (c ? "," : "") << quote(schema.class_names()[c]);
    os << "}\n\n@DATA\n";
    const std::size_t m = schema.n_features();
    char buf[40];
    for (std::size_t r = 0; r < rows.n_rows; ++r) {
        for (std::size_t k = 0; k < m; ++k) {
            const double v = rows.cells[r * m + k];
            if (std::isnan(v)) {
                os << '?';
            } else if (schema.feature(k).categorical()) {
                os << quote(schema.feature(k).categories[static_cast<std::size_t>(v)]);
            } else {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                os << buf;
            }
            os << ',';
        }
        const int y = rows.labels[r];
        os << (y == kNoLabel ? std::string("?") : quote(schema.class_names()[static_cast<std::size_t>(y)])) << '\n';
    }
    return os.str();
}

ParsedRows read_canonical(const std::string& text) {
    const auto arff = parse_arff(text);
    if (arff.attributes.empty()) throw ParseError("canonical form has no attributes", 0);
    return arff_to_rows(arff, arff.attributes.back().name);
}

}  // namespace tabcl
