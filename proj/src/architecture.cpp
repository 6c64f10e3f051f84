#include "firmcascade/architecture.hpp"

#include <algorithm>
#include <set>

#include "firmcascade/errors.hpp"

namespace firmcascade {

std::string to_string(CascadeMode mode) { return mode == CascadeMode::Linear ? "linear" : "tree"; }

CascadeMode cascade_mode_from_string(const std::string& s) {
    if (s == "linear") return CascadeMode::Linear;
    if (s == "tree") return CascadeMode::Tree;
    throw ConfigError("unknown cascade mode '" + s + "'");
}

std::vector<StageCoord> CascadeArchitecture::all_stages() const {
    std::vector<StageCoord> coords;
    for (int d = 0; d < branch_count(); ++d) {
        for (int l = 0; l < static_cast<int>(branches[static_cast<std::size_t>(d)].size()); ++l) {
            coords.push_back({d, l});
        }
    }
    for (int l = 0; l < static_cast<int>(root.size()); ++l) {
        coords.push_back({root_device(), l});
    }
    return coords;
}

int CascadeArchitecture::total_stage_count() const {
    int n = static_cast<int>(root.size());
    for (const auto& b : branches) n += static_cast<int>(b.size());
    return n;
}

void CascadeArchitecture::apply_default_costs() {
    auto fill = [this](StageSpec& spec) {
        if (spec.cost >= 0.0) return;
        if (spec.kind == StageKind::Combiner) {
            spec.cost = static_cast<double>(std::max(1, branch_count()));
        } else {
            spec.cost = static_cast<double>(spec.mac_count());
        }
    };
    for (auto& b : branches)
        for (auto& s : b) fill(s);
    for (auto& s : root) fill(s);
}

namespace {

void validate_stage(const StageSpec& spec, int feature_dim, const std::string& where,
                    std::vector<std::string>& out) {
    if (spec.kind == StageKind::Combiner) {
        if (!spec.feature_mask.empty()) out.push_back(where + ": combiner must not use features");
        if (!spec.hidden_sizes.empty()) out.push_back(where + ": combiner must not have hidden layers");
    } else {
        if (spec.kind == StageKind::LinearLogistic && !spec.hidden_sizes.empty()) {
            out.push_back(where + ": linear-logistic stage must have no hidden layers");
        }
        if (spec.kind == StageKind::Feedforward) {
            if (spec.hidden_sizes.empty() || spec.hidden_sizes.size() > 2) {
                out.push_back(where + ": feedforward stage needs 1 or 2 hidden layers, has " +
                              std::to_string(spec.hidden_sizes.size()));
            }
            for (int h : spec.hidden_sizes) {
                if (h <= 0) out.push_back(where + ": hidden layer size must be positive, got " + std::to_string(h));
            }
        }
        if (spec.feature_mask.empty()) out.push_back(where + ": stage uses no features");
        std::set<int> seen;
        for (int idx : spec.feature_mask) {
            if (idx < 0 || idx >= feature_dim) {
                out.push_back(where + ": feature index " + std::to_string(idx) + " outside feature space of size " +
                              std::to_string(feature_dim));
            }
            if (!seen.insert(idx).second) {
                out.push_back(where + ": duplicate feature index " + std::to_string(idx));
            }
        }
    }
    if (spec.cost < 0.0) out.push_back(where + ": stage cost must be >= 0 (or unset before default fill)");
}

std::string stage_name(int device, int stage, bool is_root) {
    return (is_root ? "root stage " : "branch " + std::to_string(device) + " stage ") + std::to_string(stage);
}

}  // namespace

std::vector<std::string> validate_architecture(const CascadeArchitecture& arch, int feature_dim) {
    std::vector<std::string> out;
    if (arch.root.empty()) out.push_back("root device has no stages");
    if (arch.mode == CascadeMode::Linear) {
        if (!arch.branches.empty()) {
            out.push_back("linear mode requires zero branch devices, found " + std::to_string(arch.branches.size()));
        }
        for (std::size_t l = 0; l < arch.root.size(); ++l) {
            if (arch.root[l].kind == StageKind::Combiner) {
                out.push_back(stage_name(0, static_cast<int>(l), true) + ": combiner stage invalid in linear mode");
            }
        }
    } else {
        if (arch.branches.empty()) out.push_back("tree mode requires at least one branch device");
        if (!arch.root.empty() && arch.root[0].kind != StageKind::Combiner) {
            out.push_back("root stage 0 must be the combiner in tree mode");
        }
        for (std::size_t l = 1; l < arch.root.size(); ++l) {
            if (arch.root[l].kind == StageKind::Combiner) {
                out.push_back(stage_name(0, static_cast<int>(l), true) + ": only root stage 0 may be a combiner");
            }
        }
        for (std::size_t d = 0; d < arch.branches.size(); ++d) {
            if (arch.branches[d].empty()) {
                out.push_back("branch " + std::to_string(d) + " has no stages");
            }
            for (std::size_t l = 0; l < arch.branches[d].size(); ++l) {
                if (arch.branches[d][l].kind == StageKind::Combiner) {
                    out.push_back(stage_name(static_cast<int>(d), static_cast<int>(l), false) +
                                  ": combiner stage invalid inside a branch");
                }
            }
        }
    }
    for (std::size_t d = 0; d < arch.branches.size(); ++d) {
        for (std::size_t l = 0; l < arch.branches[d].size(); ++l) {
            if (arch.branches[d][l].kind == StageKind::Combiner) continue;
            validate_stage(arch.branches[d][l], feature_dim, stage_name(static_cast<int>(d), static_cast<int>(l), false),
                           out);
        }
    }
    for (std::size_t l = 0; l < arch.root.size(); ++l) {
        if (arch.root[l].kind == StageKind::Combiner) {
            if (arch.root[l].cost < 0.0) out.push_back("root combiner cost must be >= 0");
            if (!arch.root[l].feature_mask.empty()) out.push_back("root combiner must not use features");
            continue;
        }
        validate_stage(arch.root[l], feature_dim, stage_name(0, static_cast<int>(l), true), out);
    }
    return out;
}

StageIndex::StageIndex(const CascadeArchitecture& arch) {
    lookup_.resize(static_cast<std::size_t>(arch.branch_count()) + 1);
    for (int d = 0; d < arch.branch_count(); ++d) {
        lookup_[static_cast<std::size_t>(d)].assign(arch.branches[static_cast<std::size_t>(d)].size(), -1);
        for (int l = 0; l < static_cast<int>(arch.branches[static_cast<std::size_t>(d)].size()); ++l) {
            lookup_[static_cast<std::size_t>(d)][static_cast<std::size_t>(l)] = count();
            coords_.push_back({d, l});
        }
    }
    lookup_.back().assign(arch.root.size(), -1);
    for (int l = 0; l < static_cast<int>(arch.root.size()); ++l) {
        if (!arch.root[static_cast<std::size_t>(l)].trainable()) continue;
        lookup_.back()[static_cast<std::size_t>(l)] = count();
        coords_.push_back({arch.root_device(), l});
    }
}

int StageIndex::global_of(StageCoord c) const {
    return lookup_[static_cast<std::size_t>(c.device)][static_cast<std::size_t>(c.stage)];
}

}  // namespace firmcascade
