#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "tabcl/tabular.hpp"

namespace tabcl {

class UnsupportedFeatureError : public std::runtime_error {
public:
    UnsupportedFeatureError(const std::string& attribute, const std::string& kind)
        : std::runtime_error("attribute '" + attribute + "' has unsupported kind '" + kind + "'"),
          attribute_(attribute) {}
    const std::string& attribute() const noexcept { return attribute_; }

private:
    std::string attribute_;
};

class FetchError : public std::runtime_error {
public:
    FetchError(const std::string& what, int status, bool retryable)
        : std::runtime_error(what), status_(status), retryable_(retryable) {}
    int status() const noexcept { return status_; }  // 0 when no HTTP response arrived
    bool retryable() const noexcept { return retryable_; }

private:
    int status_;
    bool retryable_;
};

struct ArffAttribute {
    std::string name;
    FeatureKind kind = FeatureKind::numerical;
    std::vector<std::string> categories;
};

struct ArffData {
    std::string relation;
    std::vector<ArffAttribute> attributes;
    std::vector<std::vector<std::string>> rows;  // raw fields, "?" for missing
};

/// Dense ARFF with numeric and nominal attributes. String, date, relational and
/// sparse data raise UnsupportedFeatureError / ParseError.
ArffData parse_arff(const std::string& text);

/// Parsed rows with `target` as the label column (must be nominal).
ParsedRows arff_to_rows(const ArffData& arff, const std::string& target);

/// Canonical cache form: ARFF with the label attribute last and cells printed
/// at full precision. read_canonical(write_canonical(x)) reproduces x.
std::string write_canonical(const ParsedRows& rows, const std::string& relation);
ParsedRows read_canonical(const std::string& text);

struct HttpResponse {
    int status = 0;
    std::string body;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    /// GET `path` (absolute path on the API host). Throws FetchError when no response arrives.
    virtual HttpResponse get(const std::string& path) = 0;
};

/// Transport over cpp-httplib (TLS when the base URL is https).
std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url = "https://www.openml.org");

struct OpenmlDataset {
    int did = 0;
    std::string name;
    std::string target;
    ParsedRows rows;
    bool from_cache = false;
};

/// Downloads description + data file for a dataset id, keeping raw payloads,
/// the canonical form and a checksum under cache_dir/<did>/.
class OpenmlClient {
public:
    OpenmlClient(std::shared_ptr<HttpTransport> transport, std::filesystem::path cache_dir);

    OpenmlDataset fetch(int did);
    std::size_t requests() const noexcept { return requests_; }

private:
    std::string get(const std::string& path);

    std::shared_ptr<HttpTransport> transport_;
    std::filesystem::path cache_dir_;
    std::size_t requests_ = 0;
};

std::string sha256_hex(const std::string& data);

}  // namespace tabcl
