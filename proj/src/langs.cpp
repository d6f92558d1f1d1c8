// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include "llast/data.hpp"
#include "llast/error.hpp"

namespace llast {

LangRegistry LangRegistry::defaults() {
    LangRegistry r;
    r.names_ = {{"fr", "French"},  {"en", "English"}, {"de", "German"}, {"es", "Spanish"},
                {"it", "Italian"}, {"zh", "Chinese"}, {"ja", "Japanese"}};
    return r;
}

LangRegistry LangRegistry::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open language registry: " + path);
    LangRegistry r;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected code\\tname");
        }
        r.names_[line.substr(0, tab)] = line.substr(tab + 1);
    }
    if (r.names_.empty()) throw ParseError(path + ": empty language registry");
    return r;
}

void LangRegistry::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write language registry: " + path);
    for (const auto& [code, name] : names_) out << code << '\t' << name << '\n';
    if (!out) throw IoError("write failed: " + path);
}

const std::string& LangRegistry::name(const std::string& code) const {
    auto it = names_.find(code);
    if (it == names_.end()) throw RegistryError("unknown language code: " + code);
    return it->second;
}

}  // namespace llast
