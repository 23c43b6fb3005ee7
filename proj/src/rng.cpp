#include "tabcl/rng.hpp"

#include <cstring>
#include <sstream>
#include <stdexcept>

namespace tabcl {

std::string Rng::state() const {
    std::ostringstream os;
    os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
    std::uint64_t bits;
    std::memcpy(&bits, &spare_, sizeof(bits));
    os << bits;
    return os.str();
}

void Rng::set_state(const std::string& s) {
    std::istringstream is(s);
    int spare_flag = 0;
    std::uint64_t bits = 0;
    is >> engine_ >> spare_flag >> bits;
    if (!is) throw std::runtime_error("malformed rng state");
    has_spare_ = spare_flag != 0;
    std::memcpy(&spare_, &bits, sizeof(bits));
}

}  // namespace tabcl
