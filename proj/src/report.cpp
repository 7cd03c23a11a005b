#include "bsdelab/report.hpp"

#include <cmath>

namespace bsdelab {

namespace {
Json number(double v)
{
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}
} // namespace

Check& Report::check(std::string what, bool ok, double value, double tol, std::string detail)
{
    checks.push_back({std::move(what), ok, value, tol, std::move(detail)});
    return checks.back();
}

bool Report::passed() const
{
    if (exploratory) return true;
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

void Report::absorb(const Report& other, const std::string& prefix)
{
    for (auto c : other.checks) {
        c.name = prefix + c.name;
        checks.push_back(std::move(c));
    }
    if (!other.margins.empty()) margins[prefix.empty() ? other.name : prefix] = other.margins;
    if (!other.data.empty()) data[prefix.empty() ? other.name : prefix] = other.data;
    artifacts.insert(artifacts.end(), other.artifacts.begin(), other.artifacts.end());
}

Json Report::to_json() const
{
    Json j;
    j["name"] = name;
    j["passed"] = passed();
    if (exploratory) j["tag"] = "exploratory - no theoretical claim";
    Json a = Json::array();
    for (const auto& c : checks) {
        Json e;
        e["name"] = c.name;
        e["passed"] = c.passed;
        e["value"] = number(c.value);
        e["tolerance"] = number(c.tolerance);
        if (!c.detail.empty()) e["detail"] = c.detail;
        a.push_back(std::move(e));
    }
    j["assertions"] = std::move(a);
    j["margins"] = margins;
    if (!data.empty()) j["data"] = data;
    j["artifacts"] = artifacts;
    return j;
}

} // namespace bsdelab
