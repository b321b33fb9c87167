#pragma once
// Structured text configuration: one `key = value` per line, `#` comments.
// CLI flag overrides are applied on top via set().

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdac {

class Config {
  public:
    Config() = default;

    static Config from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open " + path);
        Config c;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string t = trim(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config: line " + std::to_string(lineno) +
                                         " is not key = value: " + t);
            c.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        }
        return c;
    }

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get_str(const std::string& key, const std::string& dflt) const {
        const auto it = kv_.find(key);
        return it == kv_.end() ? dflt : it->second;
    }
    double get_double(const std::string& key, double dflt) const {
        const auto it = kv_.find(key);
        return it == kv_.end() ? dflt : std::stod(it->second);
    }
    long get_int(const std::string& key, long dflt) const {
        const auto it = kv_.find(key);
        return it == kv_.end() ? dflt : std::stol(it->second);
    }
    std::vector<double> get_list(const std::string& key,
                                 const std::vector<double>& dflt) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return dflt;
        std::vector<double> out;
        std::istringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!trim(tok).empty()) out.push_back(std::stod(trim(tok)));
        if (out.empty()) throw std::runtime_error("config: empty list for " + key);
        return out;
    }

    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        const auto b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

    std::map<std::string, std::string> kv_;
};

}  // namespace sdac
