#include "tabcl/openml.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace tabcl {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file_atomic(const fs::path& p, const std::string& data) {
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << data;
    }
    fs::rename(tmp, p);
}

bool retryable_status(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

class HttplibTransport : public HttpTransport {
public:
    explicit HttplibTransport(std::string base) : base_(std::move(base)) {}

    HttpResponse get(const std::string& path) override {
        httplib::Client cli(base_);
        cli.set_follow_location(true);
        cli.set_connection_timeout(15);
        cli.set_read_timeout(60);
        auto res = cli.Get(path);
        if (!res) {
            throw FetchError("GET " + base_ + path + " failed: " + httplib::to_string(res.error()), 0, true);
        }
        return {res->status, res->body};
    }

private:
    std::string base_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url) {
    return std::make_shared<HttplibTransport>(base_url);
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

OpenmlClient::OpenmlClient(std::shared_ptr<HttpTransport> transport, fs::path cache_dir)
    : transport_(std::move(transport)), cache_dir_(std::move(cache_dir)) {}

std::string OpenmlClient::get(const std::string& path) {
    if (!transport_) throw FetchError("no transport configured and " + path + " is not cached", 0, false);
    ++requests_;
    const auto res = transport_->get(path);
    if (res.status != 200) {
        throw FetchError("GET " + path + " returned HTTP " + std::to_string(res.status), res.status,
                         retryable_status(res.status));
    }
    return res.body;
}

OpenmlDataset OpenmlClient::fetch(int did) {
    const fs::path dir = cache_dir_ / std::to_string(did);
    const fs::path desc_path = dir / "description.json";
    const fs::path data_path = dir / "data.arff";
    const fs::path canon_path = dir / "canonical.arff";
    const fs::path sum_path = dir / "checksum.sha256";

    OpenmlDataset out;
    out.did = did;
    std::string desc_text, data_text;
    if (fs::exists(desc_path) && fs::exists(data_path)) {
        desc_text = read_file(desc_path);
        data_text = read_file(data_path);
        out.from_cache = true;
    } else {
        desc_text = get("/api/v1/json/data/" + std::to_string(did));
    }

    nlohmann::json desc;
    try {
        desc = nlohmann::json::parse(desc_text).at("data_set_description");
    } catch (const std::exception& e) {
        throw FetchError("malformed description for dataset " + std::to_string(did) + ": " + e.what(), 200, false);
    }
    out.name = desc.value("name", "");
    out.target = desc.value("default_target_attribute", "");
    if (out.target.empty()) throw SchemaError("dataset " + std::to_string(did) + " declares no target attribute");

    if (!out.from_cache) {
        const std::string file_id = desc.at("file_id").get<std::string>();
        data_text = get("/data/v1/download/" + file_id);
        fs::create_directories(dir);
        write_file_atomic(data_path, data_text);
        write_file_atomic(desc_path, desc_text);
        fs::remove(canon_path);
        fs::remove(sum_path);
    }

    const std::string digest = sha256_hex(data_text);
    if (fs::exists(canon_path) && fs::exists(sum_path)) {
        std::istringstream sums(read_file(sum_path));
        std::string raw_sum, canon_sum;
        sums >> raw_sum >> canon_sum;
        const std::string canon_text = read_file(canon_path);
        if (raw_sum == digest && canon_sum == sha256_hex(canon_text)) {
            out.rows = read_canonical(canon_text);
            return out;
        }
    }
    out.rows = arff_to_rows(parse_arff(data_text), out.target);
    const std::string canon_text = write_canonical(out.rows, out.name);
    fs::create_directories(dir);
    write_file_atomic(canon_path, canon_text);
    write_file_atomic(sum_path, digest + "  data.arff\n" + sha256_hex(canon_text) + "  canonical.arff\n");
    return out;
}

}  // namespace tabcl
