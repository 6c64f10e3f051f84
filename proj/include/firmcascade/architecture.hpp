#ifndef FIRMCASCADE_ARCHITECTURE_HPP
#define FIRMCASCADE_ARCHITECTURE_HPP

#include <string>
#include <vector>

#include "firmcascade/gating.hpp"
#include "firmcascade/stage_model.hpp"

namespace firmcascade {

enum class CascadeMode { Linear, Tree };

std::string to_string(CascadeMode mode);
CascadeMode cascade_mode_from_string(const std::string& s);

// Identifies one stage: device 0..D-1 are branch devices, device D is the
// root device. Stage indices are 0-based within the device.
struct StageCoord {
    int device = 0;
    int stage = 0;
    auto operator<=>(const StageCoord&) const = default;
};

// Star-topology cascade: D branch devices each running a linear
// sub-cascade, plus a root device. In tree mode the root's first stage is
// the product combiner (cost only, no trainable model); in linear mode
// there are no branches and the root list is the whole cascade.
struct CascadeArchitecture {
    CascadeMode mode = CascadeMode::Linear;
    GatingConfig gating = GatingConfig::defaults();
    std::vector<std::vector<StageSpec>> branches;
    std::vector<StageSpec> root;

    int branch_count() const { return static_cast<int>(branches.size()); }
    int root_device() const { return branch_count(); }

    const StageSpec& spec_at(StageCoord c) const {
        return c.device == root_device() ? root[static_cast<std::size_t>(c.stage)]
                                         : branches[static_cast<std::size_t>(c.device)][static_cast<std::size_t>(c.stage)];
    }

    // All stages in evaluation order: branch stages, then root stages
    // (including the combiner in tree mode).
    std::vector<StageCoord> all_stages() const;

    // Total stage count including the combiner.
    int total_stage_count() const;

    // Replaces negative (unset) costs with the stage's MAC count; the
    // combiner gets one unit per branch product term.
    void apply_default_costs();
};

// Checks every structural invariant against a feature space of the given
// dimensionality. Returns all violations (empty means well-formed).
std::vector<std::string> validate_architecture(const CascadeArchitecture& arch, int feature_dim);

// Enumeration of the trainable stages (branch stages in order, then root
// stages minus the combiner). Global indices address ParameterSet entries.
class StageIndex {
public:
    explicit StageIndex(const CascadeArchitecture& arch);

    int count() const { return static_cast<int>(coords_.size()); }
    StageCoord coord(int global) const { return coords_[static_cast<std::size_t>(global)]; }

    // -1 for the combiner (it has no parameters).
    int global_of(StageCoord c) const;

private:
    std::vector<StageCoord> coords_;
    std::vector<std::vector<int>> lookup_;  // [device][stage] -> global or -1
};

}  // namespace firmcascade

#endif
