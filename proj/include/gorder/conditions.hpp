#pragma once

#include "gorder/expr.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gorder {

enum class Status { certified, violated, inconclusive };

std::string_view to_string(Status s) noexcept;

struct Witness {
    Point point;
    /// Second point for pairwise checks (difference quotients, midpoints).
    std::optional<Point> partner;
};

/// Outcome of one sampled hypothesis check. "certified" always means
/// certified on the sampled box, never proved.
struct ConditionReport {
    std::string id;
    Status status = Status::inconclusive;
    std::optional<Witness> witness;
    std::size_t samples = 0;
    /// Largest violation magnitude seen (0 when certified).
    double max_violation = 0.0;
    std::optional<double> fitted_constant;
    std::string note;

    bool certified() const noexcept { return status == Status::certified; }
};

/// Combines reports: certified only if every input is certified; otherwise
/// takes the first violated (or inconclusive) input's witness.
ConditionReport all_of(std::string id, const std::vector<ConditionReport>& parts);

/// Certified if any input is certified.
ConditionReport any_of(std::string id, const std::vector<ConditionReport>& parts);

/// Ordered collection of reports with lookup by id.
class ConditionSet {
public:
    void add(ConditionReport r);
    const ConditionReport* find(std::string_view id) const;
    const ConditionReport& at(std::string_view id) const;
    const std::vector<ConditionReport>& items() const noexcept { return items_; }

private:
    std::vector<ConditionReport> items_;
};

void to_json(nlohmann::json& j, const Point& p);
void to_json(nlohmann::json& j, const ConditionReport& r);

}  // namespace gorder
