#include "gorder/conditions.hpp"

#include "gorder/error.hpp"

#include <algorithm>

namespace gorder {

std::string_view to_string(Status s) noexcept {
    switch (s) {
        case Status::certified: return "certified";
        case Status::violated: return "violated";
        case Status::inconclusive: return "inconclusive";
    }
    return "?";
}

ConditionReport all_of(std::string id, const std::vector<ConditionReport>& parts) {
    ConditionReport out;
    out.id = std::move(id);
    out.status = Status::certified;
    for (const auto& p : parts) {
        out.samples += p.samples;
        out.max_violation = std::max(out.max_violation, p.max_violation);
        if (p.status == Status::violated && out.status != Status::violated) {
            out.status = Status::violated;
            out.witness = p.witness;
            out.note = p.id;
        } else if (p.status == Status::inconclusive && out.status == Status::certified) {
            out.status = Status::inconclusive;
            out.note = p.id;
        }
    }
    return out;
}

ConditionReport any_of(std::string id, const std::vector<ConditionReport>& parts) {
    ConditionReport out;
    out.id = std::move(id);
    out.status = parts.empty() ? Status::certified : Status::violated;
    for (const auto& p : parts) out.samples += p.samples;
    for (const auto& p : parts) {
        if (p.certified()) {
            out.status = Status::certified;
            out.max_violation = 0.0;
            out.witness.reset();
            out.note = p.id;
            return out;
        }
    }
    bool any_inconclusive = false;
    for (const auto& p : parts) {
        if (p.status == Status::inconclusive) any_inconclusive = true;
        if (p.status == Status::violated && !out.witness) {
            out.witness = p.witness;
            out.max_violation = p.max_violation;
            out.note = p.id;
        }
    }
    if (any_inconclusive) out.status = Status::inconclusive;
    return out;
}

void ConditionSet::add(ConditionReport r) {
    auto it = std::find_if(items_.begin(), items_.end(), [&](const auto& x) { return x.id == r.id; });
    if (it != items_.end()) {
        *it = std::move(r);
    } else {
        items_.push_back(std::move(r));
    }
}

const ConditionReport* ConditionSet::find(std::string_view id) const {
    auto it = std::find_if(items_.begin(), items_.end(), [&](const auto& x) { return x.id == id; });
    return it == items_.end() ? nullptr : &*it;
}

const ConditionReport& ConditionSet::at(std::string_view id) const {
    if (const auto* r = find(id)) return *r;
    throw Error("no condition report with id '" + std::string(id) + "'");
}

void to_json(nlohmann::json& j, const Point& p) {
    j = nlohmann::json{{"t", p.t}, {"x", p.x}, {"y", p.y}, {"z", p.z}};
}

void to_json(nlohmann::json& j, const ConditionReport& r) {
    j = nlohmann::json{{"id", r.id}, {"status", std::string(to_string(r.status))}, {"samples", r.samples},
                       {"max_violation", r.max_violation}};
    if (r.witness) {
        nlohmann::json w;
        w["point"] = r.witness->point;
        if (r.witness->partner) w["partner"] = *r.witness->partner;
        j["witness"] = w;
    }
    if (r.fitted_constant) j["fitted_constant"] = *r.fitted_constant;
    if (!r.note.empty()) j["note"] = r.note;
}

}  // namespace gorder
