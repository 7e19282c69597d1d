#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "fident/dsl.hpp"

namespace fident::test {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline std::string fixture_path(const std::string& name) {
    return std::string(FIDENT_FIXTURES_DIR) + "/" + name;
}

inline fident::CausalGraph load_fixture(const std::string& name) {
    return fident::parse_graph(read_file(fixture_path(name)));
}

}  // namespace fident::test
