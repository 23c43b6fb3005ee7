#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "tabcl/runner.hpp"

namespace tabcl {

namespace fs = std::filesystem;

ResultsStore::ResultsStore(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::string ResultsStore::key(const std::string& dataset, const std::string& method, const std::string& subset_mode,
                              std::uint64_t seed, const std::string& manifest_hash) {
    std::string ds;
    for (char c : dataset) ds += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
    return ds + "." + method + "." + subset_mode + ".s" + std::to_string(seed) + "." + manifest_hash;
}

fs::path ResultsStore::path_for(const std::string& key) const { return dir_ / (key + ".json"); }

bool ResultsStore::contains(const std::string& key) const { return fs::exists(path_for(key)); }

bool ResultsStore::put(const RunRecord& r) {
    const auto target = path_for(key(r));
    if (fs::exists(target)) return false;
    const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << record_to_json(r);
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    // link() refuses to replace an existing file, so the first writer wins.
    std::error_code ec;
    fs::create_hard_link(tmp, target, ec);
    fs::remove(tmp);
    if (ec == std::errc::file_exists) return false;
    if (ec) throw std::runtime_error("cannot store record " + target.string() + ": " + ec.message());
    return true;
}

std::optional<RunRecord> ResultsStore::get(const std::string& key) const {
    std::ifstream in(path_for(key));
    if (!in) return std::nullopt;
    std::ostringstream os;
    os << in.rdbuf();
    return record_from_json(os.str());
}

std::vector<RunRecord> ResultsStore::all() const {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir_)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<RunRecord> out;
    for (const auto& f : files) {
        std::ifstream in(f);
        std::ostringstream os;
        os << in.rdbuf();
        out.push_back(record_from_json(os.str()));
    }
    return out;
}

}  // namespace tabcl
