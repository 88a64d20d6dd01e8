#include "util.hpp"

#include <fstream>
#include <sstream>

#include "esd/error.hpp"

namespace esd::detail {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("error reading " + path.string());
    return buf.str();
}

std::size_t find_word(std::string_view hay_lower, std::string_view needle_lower,
                      std::size_t from) {
    if (needle_lower.empty()) return std::string_view::npos;
    for (auto pos = hay_lower.find(needle_lower, from); pos != std::string_view::npos;
         pos = hay_lower.find(needle_lower, pos + 1)) {
        const auto end = pos + needle_lower.size();
        const bool left_ok = pos == 0 || !is_alnum(hay_lower[pos - 1]);
        const bool right_ok = end == hay_lower.size() || !is_alnum(hay_lower[end]);
        if (left_ok && right_ok) return pos;
    }
    return std::string_view::npos;
}

}  // namespace esd::detail
