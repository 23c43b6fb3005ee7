#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tabcl/neural.hpp"

namespace tabcl {

namespace nn {
namespace {

constexpr char kMagic[8] = {'T', 'A', 'B', 'C', 'L', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}
    template <typename T>
    void pod(const T& v) {
        os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void u64(std::uint64_t v) { pod(v); }
    void str(const std::string& s) {
        u64(s.size());
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    template <typename M>
    void matrix(const M& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        os_.write(reinterpret_cast<const char*>(m.data()),
                  static_cast<std::streamsize>(sizeof(typename M::Scalar) * static_cast<std::size_t>(m.size())));
    }
    void dense(const Dense<float>& d) {
        matrix(d.weight);
        matrix(d.bias);
    }
    void stack(const Stack<float>& s) {
        u64(static_cast<std::uint64_t>(s.activation));
        u64(s.activate_output ? 1 : 0);
        u64(s.layers.size());
        for (const auto& l : s.layers) dense(l);
    }
    void adam(const AdamState<float>& a) {
        pod(a.config.learning_rate);
        pod(a.config.beta1);
        pod(a.config.beta2);
        pod(a.config.epsilon);
        pod(static_cast<std::int64_t>(a.step));
        u64(a.m.size());
        for (std::size_t i = 0; i < a.m.size(); ++i) {
            dense(a.m[i]);
            dense(a.v[i]);
        }
    }

private:
    std::ostream& os_;
};

class Reader {
public:
    explicit Reader(std::istream& is) : is_(is) {}
    template <typename T>
    T pod() {
        T v;
        is_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!is_) throw std::runtime_error("truncated checkpoint");
        return v;
    }
    std::uint64_t u64() { return pod<std::uint64_t>(); }
    std::string str() {
        const auto n = u64();
        if (n > (1u << 30)) throw std::runtime_error("corrupt checkpoint string length");
        std::string s(n, '\0');
        is_.read(s.data(), static_cast<std::streamsize>(n));
        if (!is_) throw std::runtime_error("truncated checkpoint");
        return s;
    }
    template <typename M>
    M matrix() {
        const auto r = u64();
        const auto c = u64();
        if (r > (1u << 24) || c > (1u << 24)) throw std::runtime_error("corrupt checkpoint matrix shape");
        M m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        is_.read(reinterpret_cast<char*>(m.data()),
                 static_cast<std::streamsize>(sizeof(typename M::Scalar) * static_cast<std::size_t>(m.size())));
        if (!is_) throw std::runtime_error("truncated checkpoint");
        return m;
    }
    Dense<float> dense() {
        Dense<float> d;
        d.weight = matrix<Matrix<float>>();
        d.bias = matrix<RowVector<float>>();
        return d;
    }
    Stack<float> stack() {
        Stack<float> s;
        s.activation = static_cast<Activation>(u64());
        s.activate_output = u64() != 0;
        const auto n = u64();
        for (std::uint64_t i = 0; i < n; ++i) s.layers.push_back(dense());
        return s;
    }
    AdamState<float> adam() {
        AdamState<float> a;
        a.config.learning_rate = pod<double>();
        a.config.beta1 = pod<double>();
        a.config.beta2 = pod<double>();
        a.config.epsilon = pod<double>();
        a.step = static_cast<long>(pod<std::int64_t>());
        const auto n = u64();
        for (std::uint64_t i = 0; i < n; ++i) {
            a.m.push_back(dense());
            a.v.push_back(dense());
        }
        return a;
    }

private:
    std::istream& is_;
};

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write checkpoint " + tmp);
        os.write(kMagic, sizeof(kMagic));
        Writer w(os);
        w.pod(kVersion);
        const auto& s = ck.params.spec;
        w.u64(s.input_width);
        w.u64(s.hidden_width);
        w.u64(s.encoder_layers);
        w.u64(s.projection_width);
        w.u64(s.class_count);
        w.u64(static_cast<std::uint64_t>(s.activation));
        w.stack(ck.params.encoder);
        w.stack(ck.params.pretrain_head);
        w.stack(ck.params.classifier_head);
        w.adam(ck.encoder_opt);
        w.adam(ck.pretrain_opt);
        w.adam(ck.classifier_opt);
        w.str(ck.rng_state);
        w.pod(static_cast<std::int64_t>(ck.epoch));
        if (!os) throw std::runtime_error("failed writing checkpoint " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot move checkpoint into " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[sizeof(kMagic)];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error("not a checkpoint: " + path);
    Reader r(is);
    const auto version = r.pod<std::uint32_t>();
    if (version != kVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    auto& s = ck.params.spec;
    s.input_width = r.u64();
    s.hidden_width = r.u64();
    s.encoder_layers = r.u64();
    s.projection_width = r.u64();
    s.class_count = r.u64();
    s.activation = static_cast<Activation>(r.u64());
    ck.params.encoder = r.stack();
    ck.params.pretrain_head = r.stack();
    ck.params.classifier_head = r.stack();
    ck.encoder_opt = r.adam();
    ck.pretrain_opt = r.adam();
    ck.classifier_opt = r.adam();
    ck.rng_state = r.str();
    ck.epoch = static_cast<long>(r.pod<std::int64_t>());
    return ck;
}

}  // namespace nn
}  // namespace tabcl
