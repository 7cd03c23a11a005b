#pragma once

#include "json.hpp"

#include <string>
#include <vector>

namespace bsdelab {

using Json = nlohmann::ordered_json;

struct Check {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

// One scenario's outcome: named assertions, margins, and artifact paths.
struct Report {
    std::string name;
    std::vector<Check> checks;
    Json margins = Json::object();
    Json data = Json::object();
    std::vector<std::string> artifacts;
    // observational scenarios never fail
    bool exploratory = false;

    Check& check(std::string what, bool ok, double value, double tol, std::string detail = {});
    bool passed() const;
    // appends the other report's checks with a name prefix
    void absorb(const Report& other, const std::string& prefix);
    Json to_json() const;
};

} // namespace bsdelab
