// JSON configuration: published schemas, a small schema validator with
// JSON-pointer error paths, and parsers from validated documents to the
// engine option structs.
#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tomoreg/geometry.hpp"
#include "tomoreg/phantom.hpp"
#include "tomoreg/recon.hpp"
#include "tomoreg/registration.hpp"
#include "tomoreg/similarity.hpp"

namespace tomoreg {

using json = nlohmann::json;

json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const json& doc);

// Returns one "pointer: problem" line per violation (empty when valid).
// Supported schema keywords: type (string or list), properties, required,
// additionalProperties (bool), items, enum, minimum, maximum,
// exclusiveMinimum, minItems, maxItems, oneOf.
std::vector<std::string> validate_schema(const json& doc, const json& schema);

// Throws ConfigError listing all violations.
void require_valid(const json& doc, const json& schema, const std::string& what);

// Schemas published by the `schema` subcommand, by config name:
// geometry, phantom, deformation, register, recon, sweep.
const std::map<std::string, json>& published_schemas();

ScanGeometry parse_geometry(const json& doc);
PhantomSpec parse_phantom_spec(const json& doc);
SyntheticDeformation parse_deformation(const json& doc);

struct SimilaritySettings {
    SimilarityKind kind = SimilarityKind::kNgf;
    NgfVariant variant = NgfVariant::kSquaredCosine;
    bool epsilon_auto = true;
    double epsilon = 0.0;  // used when !epsilon_auto
};

// Fills in the adaptive epsilon from the registration target when needed.
SimilarityConfig resolve_similarity(const SimilaritySettings& s, const ProjectionStack& target);
SimilarityConfig resolve_similarity(const SimilaritySettings& s, const Volume3D& target);

struct RegisterPaths {
    std::string volume;
    std::string stack_dir;
    std::string target_volume;  // volumetric 3D/3D target (alternative to stack_dir)
    std::string mask;
    std::string landmarks_moving;
    std::string landmarks_fixed;
    std::string output;
};

struct RegisterConfig {
    json raw;  // parsed document, echoed into run records
    ScanGeometry geometry;
    std::vector<double> kernel_sigmas_mm;  // empty: derive from the volume
    std::vector<double> kernel_weights;
    AffineOptions affine;
    LddmmOptions lddmm;
    SimilaritySettings similarity;
    RegisterPaths paths;
};

RegisterConfig parse_register_config(const json& doc);

// Kernel for a concrete volume: configured values, or the extent-derived
// default when the config omitted them.
MultiGaussianKernel resolve_kernel(const RegisterConfig& cfg, const Volume3D& vol);

struct ReconFileConfig {
    json raw;
    VolumeGrid grid;
    ReconOptions options;  // tv_epsilon/lr <= 0 mean "auto"
};

ReconFileConfig parse_recon_config(const json& doc);

struct SweepAngleSpec {
    bool enabled = false;
    std::vector<double> angles_deg;
    int count = 4;
};

struct SweepCountSpec {
    bool enabled = false;
    std::vector<int> counts;
    double angle_deg = 11.0;
};

struct SweepConfig {
    json raw;
    RegisterConfig base;
    std::string target_volume;  // projected per sweep cell
    SweepAngleSpec angle_sweep;
    SweepCountSpec count_sweep;
};

SweepConfig parse_sweep_config(const json& doc);

}  // namespace tomoreg
