#include "tomoreg/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "tomoreg/errors.hpp"

namespace tomoreg {

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return doc;
}

void save_json_file(const std::string& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path);
}

namespace {

bool type_matches(const json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "number") return v.is_number();
    if (t == "integer") return v.is_number_integer();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    return false;
}

std::string type_name(const json& v) {
    switch (v.type()) {
        case json::value_t::object: return "object";
        case json::value_t::array: return "array";
        case json::value_t::string: return "string";
        case json::value_t::boolean: return "boolean";
        case json::value_t::number_integer:
        case json::value_t::number_unsigned: return "integer";
        case json::value_t::number_float: return "number";
        case json::value_t::null: return "null";
        default: return "unknown";
    }
}

void validate_node(const json& doc, const json& schema, const std::string& path,
                   std::vector<std::string>& errors) {
    const std::string where = path.empty() ? "/" : path;

    if (auto it = schema.find("oneOf"); it != schema.end()) {
        int matches = 0;
        for (const json& alt : *it) {
            std::vector<std::string> sub;
            validate_node(doc, alt, path, sub);
            if (sub.empty()) ++matches;
        }
        if (matches != 1) {
            errors.push_back(where + ": matches " + std::to_string(matches) +
                             " alternatives, expected exactly one");
            return;
        }
    }

    if (auto it = schema.find("type"); it != schema.end()) {
        bool ok = false;
        if (it->is_array()) {
            for (const json& t : *it) ok = ok || type_matches(doc, t.get<std::string>());
        } else {
            ok = type_matches(doc, it->get<std::string>());
        }
        if (!ok) {
            errors.push_back(where + ": expected " + it->dump() + ", got " + type_name(doc));
            return;
        }
    }

    if (auto it = schema.find("enum"); it != schema.end()) {
        bool ok = false;
        for (const json& v : *it) ok = ok || (v == doc);
        if (!ok) {
            errors.push_back(where + ": value " + doc.dump() + " not in " + it->dump());
            return;
        }
    }

    if (doc.is_number()) {
        const double x = doc.get<double>();
        if (auto it = schema.find("minimum"); it != schema.end() && x < it->get<double>())
            errors.push_back(where + ": " + doc.dump() + " below minimum " + it->dump());
        if (auto it = schema.find("exclusiveMinimum"); it != schema.end() && x <= it->get<double>())
            errors.push_back(where + ": " + doc.dump() + " must exceed " + it->dump());
        if (auto it = schema.find("maximum"); it != schema.end() && x > it->get<double>())
            errors.push_back(where + ": " + doc.dump() + " above maximum " + it->dump());
    }

    if (doc.is_array()) {
        if (auto it = schema.find("minItems"); it != schema.end() && doc.size() < it->get<size_t>())
            errors.push_back(where + ": needs at least " + it->dump() + " items");
        if (auto it = schema.find("maxItems"); it != schema.end() && doc.size() > it->get<size_t>())
            errors.push_back(where + ": allows at most " + it->dump() + " items");
        if (auto it = schema.find("items"); it != schema.end()) {
            for (size_t i = 0; i < doc.size(); ++i)
                validate_node(doc[i], *it, path + "/" + std::to_string(i), errors);
        }
    }

    if (doc.is_object()) {
        const json props = schema.value("properties", json::object());
        if (auto it = schema.find("required"); it != schema.end()) {
            for (const json& key : *it) {
                if (!doc.contains(key.get<std::string>()))
                    errors.push_back(where + ": missing required key \"" + key.get<std::string>() + "\"");
            }
        }
        for (auto& [key, value] : doc.items()) {
            auto pit = props.find(key);
            if (pit != props.end()) {
                validate_node(value, *pit, path + "/" + key, errors);
            } else if (schema.value("additionalProperties", true) == false) {
                errors.push_back(where + ": unknown key \"" + key + "\"");
            }
        }
    }
}

json vec3_schema() {
    return json{{"type", "array"},
                {"items", {{"type", "number"}}},
                {"minItems", 3},
                {"maxItems", 3}};
}

json geometry_schema() {
    json receiver = {
        {"type", "object"},
        {"required", {"pixel_spacing_mm", "pixels"}},
        {"additionalProperties", false},
        {"properties",
         {{"width_mm", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"height_mm", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"pixel_spacing_mm", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"pixels",
           {{"type", "array"},
            {"items", {{"type", "integer"}, {"minimum", 1}}},
            {"minItems", 2},
            {"maxItems", 2}}}}}};
    json emitters = {
        {"type", "object"},
        {"required", {"mode"}},
        {"additionalProperties", false},
        {"properties",
         {{"mode", {{"enum", {"arc", "explicit"}}}},
          {"count", {{"type", "integer"}, {"minimum", 1}}},
          {"angle_range_deg", {{"type", "number"}, {"exclusiveMinimum", 0}, {"maximum", 179.0}}},
          {"source_distance_mm", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"positions", {{"type", "array"}, {"items", vec3_schema()}, {"minItems", 1}}}}}};
    json integration = {
        {"type", "object"},
        {"additionalProperties", false},
        {"properties",
         {{"num_planes", {{"type", "integer"}, {"minimum", 1}}},
          {"plane_spacing_mm", {{"type", "number"}, {"exclusiveMinimum", 0}}}}}};
    return json{{"type", "object"},
                {"required", {"receiver", "emitters"}},
                {"additionalProperties", false},
                {"properties",
                 {{"receiver", receiver},
                  {"emitters", emitters},
                  {"integration", integration}}}};
}

json grid_schema() {
    return json{{"type", "object"},
                {"required", {"dims", "spacing_mm"}},
                {"additionalProperties", false},
                {"properties",
                 {{"dims",
                   {{"type", "array"},
                    {"items", {{"type", "integer"}, {"minimum", 2}}},
                    {"minItems", 3},
                    {"maxItems", 3}}},
                  {"spacing_mm",
                   {{"type", "array"},
                    {"items", {{"type", "number"}, {"exclusiveMinimum", 0}}},
                    {"minItems", 3},
                    {"maxItems", 3}}},
                  {"origin_mm", vec3_schema()}}}};
}

json phantom_schema() {
    json primitive = {
        {"type", "object"},
        {"required", {"kind", "center_mm", "intensity"}},
        {"additionalProperties", false},
        {"properties",
         {{"kind", {{"enum", {"ellipsoid", "box", "bead"}}}},
          {"center_mm", vec3_schema()},
          {"radii_mm",
           {{"type", "array"},
            {"items", {{"type", "number"}, {"exclusiveMinimum", 0}}},
            {"minItems", 3},
            {"maxItems", 3}}},
          {"radius_mm", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"intensity", {{"type", "number"}}}}}};
    json background = {
        {"type", "object"},
        {"additionalProperties", false},
        {"properties",
         {{"num_blobs", {{"type", "integer"}, {"minimum", 0}}},
          {"amplitude", {{"type", "number"}, {"minimum", 0}}},
          {"sigma_min_mm", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"sigma_max_mm", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"seed", {{"type", "integer"}, {"minimum", 0}}}}}};
    return json{{"type", "object"},
                {"required", {"grid"}},
                {"additionalProperties", false},
                {"properties",
                 {{"grid", grid_schema()},
                  {"primitives", {{"type", "array"}, {"items", primitive}}},
                  {"background", background}}}};
}

json deformation_schema() {
    json bump = {{"type", "object"},
                 {"required", {"center_mm", "amplitude_mm", "sigma_mm"}},
                 {"additionalProperties", false},
                 {"properties",
                  {{"center_mm", vec3_schema()},
                   {"amplitude_mm", vec3_schema()},
                   {"sigma_mm", {{"type", "number"}, {"exclusiveMinimum", 0}}}}}};
    return json{{"type", "object"},
                {"required", {"type"}},
                {"additionalProperties", false},
                {"properties",
                 {{"type", {{"enum", {"translation", "rigid", "gaussian_bumps"}}}},
                  {"translation_mm", vec3_schema()},
                  {"axis", vec3_schema()},
                  {"angle_deg", {{"type", "number"}}},
                  {"center_mm", vec3_schema()},
                  {"bumps", {{"type", "array"}, {"items", bump}, {"minItems", 1}}},
                  {"flow_steps", {{"type", "integer"}, {"minimum", 1}}}}}};
}

json register_schema() {
    json kernel = {
        {"type", "object"},
        {"additionalProperties", false},
        {"properties",
         {{"sigmas_mm",
           {{"type", "array"},
            {"items", {{"type", "number"}, {"exclusiveMinimum", 0}}},
            {"minItems", 1}}},
          {"weights",
           {{"type", "array"},
            {"items", {{"type", "number"}, {"exclusiveMinimum", 0}}},
            {"minItems", 1}}},
          {"num_timesteps", {{"type", "integer"}, {"minimum", 1}}}}}};
    json similarity = {
        {"type", "object"},
        {"additionalProperties", false},
        {"properties",
         {{"similarity", {{"enum", {"ngf", "ssd", "l1"}}}},
          {"variant", {{"enum", {"squared", "plain"}}}},
          {"ngf_epsilon",
           {{"oneOf",
             {json{{"enum", {"auto"}}},
              json{{"type", "number"}, {"exclusiveMinimum", 0}}}}}}}}};
    json affine = {
        {"type", "object"},
        {"additionalProperties", false},
        {"properties",
         {{"sim_weight", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"mu", {{"type", "number"}, {"minimum", 0}}},
          {"max_iters", {{"type", "integer"}, {"minimum", 0}}},
          {"step_length", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"emitter_subsample", {{"type", "integer"}, {"minimum", 0}}},
          {"convergence_rel", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"convergence_window", {{"type", "integer"}, {"minimum", 1}}},
          {"seed", {{"type", "integer"}, {"minimum", 0}}}}}};
    json lddmm = {
        {"type", "object"},
        {"additionalProperties", false},
        {"properties",
         {{"sim_weight", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"max_iters", {{"type", "integer"}, {"minimum", 0}}},
          {"lbfgs_history", {{"type", "integer"}, {"minimum", 1}}},
          {"convergence_rel", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"convergence_window", {{"type", "integer"}, {"minimum", 1}}}}}};
    json optimizer = {{"type", "object"},
                      {"additionalProperties", false},
                      {"properties", {{"affine", affine}, {"lddmm", lddmm}}}};
    json paths = {
        {"type", "object"},
        {"required", {"volume"}},
        {"additionalProperties", false},
        {"properties",
         {{"volume", {{"type", "string"}}},
          {"stack_dir", {{"type", "string"}}},
          {"target_volume", {{"type", "string"}}},
          {"mask", {{"type", "string"}}},
          {"landmarks_moving", {{"type", "string"}}},
          {"landmarks_fixed", {{"type", "string"}}},
          {"output", {{"type", "string"}}}}}};
    return json{{"type", "object"},
                {"required", {"geometry", "paths"}},
                {"additionalProperties", false},
                {"properties",
                 {{"geometry", geometry_schema()},
                  {"kernel", kernel},
                  {"similarity", similarity},
                  {"optimizer", optimizer},
                  {"paths", paths}}}};
}

json recon_schema() {
    json auto_or_positive = {
        {"oneOf",
         {json{{"enum", {"auto"}}}, json{{"type", "number"}, {"exclusiveMinimum", 0}}}}};
    return json{{"type", "object"},
                {"required", {"grid"}},
                {"additionalProperties", false},
                {"properties",
                 {{"grid", grid_schema()},
                  {"lambda1", {{"type", "number"}, {"minimum", 0}}},
                  {"lambda2", {{"type", "number"}, {"minimum", 0}}},
                  {"tv_epsilon", auto_or_positive},
                  {"lr", auto_or_positive},
                  {"max_iters", {{"type", "integer"}, {"minimum", 1}}},
                  {"smooth_l1", {{"type", "boolean"}}},
                  {"smooth_l1_delta", {{"type", "number"}, {"exclusiveMinimum", 0}}},
                  {"convergence_rel", {{"type", "number"}, {"exclusiveMinimum", 0}}},
                  {"convergence_window", {{"type", "integer"}, {"minimum", 1}}}}}};
}

json sweep_schema() {
    json angle_sweep = {
        {"type", "object"},
        {"required", {"angles_deg"}},
        {"additionalProperties", false},
        {"properties",
         {{"angles_deg",
           {{"type", "array"},
            {"items", {{"type", "number"}, {"exclusiveMinimum", 0}}},
            {"minItems", 1}}},
          {"count", {{"type", "integer"}, {"minimum", 1}}}}}};
    json count_sweep = {
        {"type", "object"},
        {"required", {"counts"}},
        {"additionalProperties", false},
        {"properties",
         {{"counts",
           {{"type", "array"},
            {"items", {{"type", "integer"}, {"minimum", 1}}},
            {"minItems", 1}}},
          {"angle_deg", {{"type", "number"}, {"exclusiveMinimum", 0}}}}}};
    return json{{"type", "object"},
                {"required", {"base", "target_volume"}},
                {"additionalProperties", false},
                {"properties",
                 {{"base", register_schema()},
                  {"target_volume", {{"type", "string"}}},
                  {"angle_sweep", angle_sweep},
                  {"count_sweep", count_sweep}}}};
}

Vec3 to_vec3(const json& a) { return Vec3{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()}; }

}  // namespace

std::vector<std::string> validate_schema(const json& doc, const json& schema) {
    std::vector<std::string> errors;
    validate_node(doc, schema, "", errors);
    return errors;
}

void require_valid(const json& doc, const json& schema, const std::string& what) {
    const std::vector<std::string> errors = validate_schema(doc, schema);
    if (errors.empty()) return;
    std::ostringstream msg;
    msg << what << " config invalid:";
    for (const std::string& e : errors) msg << "\n  " << e;
    throw ConfigError(msg.str());
}

const std::map<std::string, json>& published_schemas() {
    static const std::map<std::string, json> schemas = {
        {"geometry", geometry_schema()}, {"phantom", phantom_schema()},
        {"deformation", deformation_schema()}, {"register", register_schema()},
        {"recon", recon_schema()}, {"sweep", sweep_schema()},
    };
    return schemas;
}

ScanGeometry parse_geometry(const json& doc) {
    require_valid(doc, geometry_schema(), "geometry");
    const json& rec = doc.at("receiver");
    ScanGeometry g;
    g.nw = rec.at("pixels")[0].get<int>();
    g.nh = rec.at("pixels")[1].get<int>();
    g.pixel_spacing = rec.at("pixel_spacing_mm").get<double>();
    if (rec.contains("width_mm")) {
        const double w = rec.at("width_mm").get<double>();
        if (std::abs(w - g.nw * g.pixel_spacing) > 0.5 * g.pixel_spacing)
            throw ConfigError("/receiver/width_mm: inconsistent with pixels[0] * pixel_spacing_mm");
    }
    if (rec.contains("height_mm")) {
        const double h = rec.at("height_mm").get<double>();
        if (std::abs(h - g.nh * g.pixel_spacing) > 0.5 * g.pixel_spacing)
            throw ConfigError("/receiver/height_mm: inconsistent with pixels[1] * pixel_spacing_mm");
    }

    const json& em = doc.at("emitters");
    const std::string mode = em.at("mode").get<std::string>();
    if (mode == "arc") {
        for (const char* key : {"count", "angle_range_deg", "source_distance_mm"}) {
            if (!em.contains(key))
                throw ConfigError(std::string("/emitters: arc mode requires \"") + key + "\"");
        }
        g.emitters = arc_emitters(em.at("count").get<int>(),
                                  em.at("angle_range_deg").get<double>(),
                                  em.at("source_distance_mm").get<double>());
    } else {
        if (!em.contains("positions"))
            throw ConfigError("/emitters: explicit mode requires \"positions\"");
        for (const json& p : em.at("positions")) g.emitters.push_back(to_vec3(p));
    }

    if (doc.contains("integration")) {
        const json& integ = doc.at("integration");
        g.num_planes = integ.value("num_planes", 0);
        g.plane_spacing = integ.value("plane_spacing_mm", 0.0);
    }

    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("geometry: ") + e.what());
    }
    return g;
}

namespace {

VolumeGrid parse_grid(const json& g) {
    VolumeGrid grid;
    for (int i = 0; i < 3; ++i) grid.dims[i] = g.at("dims")[i].get<int>();
    grid.spacing = to_vec3(g.at("spacing_mm"));
    if (g.contains("origin_mm")) {
        grid.origin = to_vec3(g.at("origin_mm"));
    } else {
        // Centered over the receiver in x/y, resting just above it in z.
        grid.origin = Vec3{-0.5 * (grid.dims[0] - 1) * grid.spacing.x,
                           -0.5 * (grid.dims[1] - 1) * grid.spacing.y, grid.spacing.z};
    }
    return grid;
}

}  // namespace

PhantomSpec parse_phantom_spec(const json& doc) {
    require_valid(doc, phantom_schema(), "phantom");
    PhantomSpec spec;
    spec.grid = parse_grid(doc.at("grid"));
    if (doc.contains("primitives")) {
        size_t idx = 0;
        for (const json& p : doc.at("primitives")) {
            const std::string where = "/primitives/" + std::to_string(idx++);
            PhantomPrimitive prim;
            const std::string kind = p.at("kind").get<std::string>();
            prim.center = to_vec3(p.at("center_mm"));
            prim.intensity = p.at("intensity").get<double>();
            if (kind == "ellipsoid" || kind == "box") {
                prim.kind = kind == "ellipsoid" ? PrimitiveKind::kEllipsoid : PrimitiveKind::kBox;
                if (!p.contains("radii_mm"))
                    throw ConfigError(where + ": " + kind + " requires \"radii_mm\"");
                prim.radii = to_vec3(p.at("radii_mm"));
            } else {
                prim.kind = PrimitiveKind::kBead;
                if (!p.contains("radius_mm"))
                    throw ConfigError(where + ": bead requires \"radius_mm\"");
                const double r = p.at("radius_mm").get<double>();
                prim.radii = Vec3{r, r, r};
            }
            spec.primitives.push_back(prim);
        }
    }
    if (doc.contains("background")) {
        const json& b = doc.at("background");
        spec.background.num_blobs = b.value("num_blobs", spec.background.num_blobs);
        spec.background.amplitude = b.value("amplitude", spec.background.amplitude);
        spec.background.sigma_min_mm = b.value("sigma_min_mm", spec.background.sigma_min_mm);
        spec.background.sigma_max_mm = b.value("sigma_max_mm", spec.background.sigma_max_mm);
        spec.background.seed = b.value("seed", spec.background.seed);
        if (spec.background.sigma_max_mm < spec.background.sigma_min_mm)
            throw ConfigError("/background: sigma_max_mm must be >= sigma_min_mm");
    }
    return spec;
}

SyntheticDeformation parse_deformation(const json& doc) {
    require_valid(doc, deformation_schema(), "deformation");
    SyntheticDeformation def;
    const std::string type = doc.at("type").get<std::string>();
    if (type == "translation") {
        if (!doc.contains("translation_mm"))
            throw ConfigError("/: translation requires \"translation_mm\"");
        def.kind = SyntheticDeformation::Kind::kTranslation;
        def.translation = to_vec3(doc.at("translation_mm"));
    } else if (type == "rigid") {
        for (const char* key : {"axis", "angle_deg", "center_mm"}) {
            if (!doc.contains(key))
                throw ConfigError(std::string("/: rigid requires \"") + key + "\"");
        }
        def.kind = SyntheticDeformation::Kind::kRigid;
        def.rotation_axis = to_vec3(doc.at("axis"));
        def.rotation_angle_rad = doc.at("angle_deg").get<double>() * std::numbers::pi / 180.0;
        def.rotation_center = to_vec3(doc.at("center_mm"));
        if (doc.contains("translation_mm")) def.translation = to_vec3(doc.at("translation_mm"));
    } else {
        if (!doc.contains("bumps"))
            throw ConfigError("/: gaussian_bumps requires \"bumps\"");
        def.kind = SyntheticDeformation::Kind::kGaussianBumps;
        for (const json& b : doc.at("bumps")) {
            GaussianBump bump;
            bump.center = to_vec3(b.at("center_mm"));
            bump.amplitude = to_vec3(b.at("amplitude_mm"));
            bump.sigma_mm = b.at("sigma_mm").get<double>();
            def.bumps.push_back(bump);
        }
        def.flow_steps = doc.value("flow_steps", def.flow_steps);
    }
    return def;
}

SimilarityConfig resolve_similarity(const SimilaritySettings& s, const ProjectionStack& target) {
    SimilarityConfig cfg;
    cfg.kind = s.kind;
    cfg.variant = s.variant;
    if (s.kind == SimilarityKind::kNgf)
        cfg.ngf_epsilon = s.epsilon_auto ? ngf_auto_epsilon(robust_max_gradient(target.images))
                                         : s.epsilon;
    return cfg;
}

SimilarityConfig resolve_similarity(const SimilaritySettings& s, const Volume3D& target) {
    SimilarityConfig cfg;
    cfg.kind = s.kind;
    cfg.variant = s.variant;
    if (s.kind == SimilarityKind::kNgf)
        cfg.ngf_epsilon = s.epsilon_auto ? ngf_auto_epsilon(robust_max_gradient(target)) : s.epsilon;
    return cfg;
}

RegisterConfig parse_register_config(const json& doc) {
    require_valid(doc, register_schema(), "register");
    RegisterConfig cfg;
    cfg.raw = doc;
    cfg.geometry = parse_geometry(doc.at("geometry"));

    if (doc.contains("kernel")) {
        const json& k = doc.at("kernel");
        if (k.contains("sigmas_mm") != k.contains("weights"))
            throw ConfigError("/kernel: sigmas_mm and weights must be given together");
        if (k.contains("sigmas_mm")) {
            cfg.kernel_sigmas_mm = k.at("sigmas_mm").get<std::vector<double>>();
            cfg.kernel_weights = k.at("weights").get<std::vector<double>>();
            if (cfg.kernel_sigmas_mm.size() != cfg.kernel_weights.size())
                throw ConfigError("/kernel: sigmas_mm and weights must have equal length");
        }
        cfg.lddmm.num_timesteps = k.value("num_timesteps", cfg.lddmm.num_timesteps);
    }

    if (doc.contains("similarity")) {
        const json& s = doc.at("similarity");
        if (s.contains("similarity"))
            cfg.similarity.kind = similarity_kind_from_string(s.at("similarity").get<std::string>());
        if (s.contains("variant"))
            cfg.similarity.variant = ngf_variant_from_string(s.at("variant").get<std::string>());
        if (s.contains("ngf_epsilon") && s.at("ngf_epsilon").is_number()) {
            cfg.similarity.epsilon_auto = false;
            cfg.similarity.epsilon = s.at("ngf_epsilon").get<double>();
        }
    }

    if (doc.contains("optimizer")) {
        const json& opt = doc.at("optimizer");
        if (opt.contains("affine")) {
            const json& a = opt.at("affine");
            cfg.affine.sim_weight = a.value("sim_weight", cfg.affine.sim_weight);
            cfg.affine.mu = a.value("mu", cfg.affine.mu);
            cfg.affine.max_iters = a.value("max_iters", cfg.affine.max_iters);
            cfg.affine.step_length = a.value("step_length", cfg.affine.step_length);
            cfg.affine.emitter_subsample = a.value("emitter_subsample", cfg.affine.emitter_subsample);
            cfg.affine.convergence_rel = a.value("convergence_rel", cfg.affine.convergence_rel);
            cfg.affine.convergence_window = a.value("convergence_window", cfg.affine.convergence_window);
            cfg.affine.seed = a.value("seed", cfg.affine.seed);
        }
        if (opt.contains("lddmm")) {
            const json& l = opt.at("lddmm");
            cfg.lddmm.sim_weight = l.value("sim_weight", cfg.lddmm.sim_weight);
            cfg.lddmm.max_iters = l.value("max_iters", cfg.lddmm.max_iters);
            cfg.lddmm.lbfgs_history = l.value("lbfgs_history", cfg.lddmm.lbfgs_history);
            cfg.lddmm.convergence_rel = l.value("convergence_rel", cfg.lddmm.convergence_rel);
            cfg.lddmm.convergence_window = l.value("convergence_window", cfg.lddmm.convergence_window);
        }
    }

    const json& p = doc.at("paths");
    cfg.paths.volume = p.at("volume").get<std::string>();
    cfg.paths.stack_dir = p.value("stack_dir", "");
    cfg.paths.target_volume = p.value("target_volume", "");
    cfg.paths.mask = p.value("mask", "");
    cfg.paths.landmarks_moving = p.value("landmarks_moving", "");
    cfg.paths.landmarks_fixed = p.value("landmarks_fixed", "");
    cfg.paths.output = p.value("output", "");
    return cfg;
}

MultiGaussianKernel resolve_kernel(const RegisterConfig& cfg, const Volume3D& vol) {
    if (cfg.kernel_sigmas_mm.empty()) return default_kernel(vol);
    MultiGaussianKernel k;
    k.sigmas_mm = cfg.kernel_sigmas_mm;
    k.weights = cfg.kernel_weights;
    try {
        k.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("/kernel: ") + e.what());
    }
    return k;
}

ReconFileConfig parse_recon_config(const json& doc) {
    require_valid(doc, recon_schema(), "recon");
    ReconFileConfig cfg;
    cfg.raw = doc;
    cfg.grid = parse_grid(doc.at("grid"));
    ReconOptions& o = cfg.options;
    o.lambda1 = doc.value("lambda1", o.lambda1);
    o.lambda2 = doc.value("lambda2", o.lambda2);
    if (doc.contains("tv_epsilon") && doc.at("tv_epsilon").is_number())
        o.tv_epsilon = doc.at("tv_epsilon").get<double>();
    if (doc.contains("lr") && doc.at("lr").is_number()) o.lr = doc.at("lr").get<double>();
    o.max_iters = doc.value("max_iters", o.max_iters);
    o.smooth_l1 = doc.value("smooth_l1", o.smooth_l1);
    o.smooth_l1_delta = doc.value("smooth_l1_delta", o.smooth_l1_delta);
    o.convergence_rel = doc.value("convergence_rel", o.convergence_rel);
    o.convergence_window = doc.value("convergence_window", o.convergence_window);
    return cfg;
}

SweepConfig parse_sweep_config(const json& doc) {
    require_valid(doc, sweep_schema(), "sweep");
    SweepConfig cfg;
    cfg.raw = doc;
    cfg.base = parse_register_config(doc.at("base"));
    if (doc.at("base").at("geometry").at("emitters").at("mode").get<std::string>() != "arc")
        throw ConfigError("/base/geometry/emitters/mode: sweep requires \"arc\"");
    cfg.target_volume = doc.at("target_volume").get<std::string>();
    if (doc.contains("angle_sweep")) {
        const json& a = doc.at("angle_sweep");
        cfg.angle_sweep.enabled = true;
        cfg.angle_sweep.angles_deg = a.at("angles_deg").get<std::vector<double>>();
        cfg.angle_sweep.count = a.value("count", cfg.angle_sweep.count);
    }
    if (doc.contains("count_sweep")) {
        const json& c = doc.at("count_sweep");
        cfg.count_sweep.enabled = true;
        cfg.count_sweep.counts = c.at("counts").get<std::vector<int>>();
        cfg.count_sweep.angle_deg = c.value("angle_deg", cfg.count_sweep.angle_deg);
    }
    if (!cfg.angle_sweep.enabled && !cfg.count_sweep.enabled)
        throw ConfigError("/: sweep needs angle_sweep or count_sweep");
    if (cfg.base.paths.landmarks_moving.empty() || cfg.base.paths.landmarks_fixed.empty())
        throw ConfigError("/base/paths: sweep requires landmarks_moving and landmarks_fixed");
    return cfg;
}

}  // namespace tomoreg
