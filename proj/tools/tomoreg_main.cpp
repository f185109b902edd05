// tomoreg: command-line harness around the projection, registration, and
// reconstruction engines. Exit codes: 1 configuration/usage, 2 file IO,
// 3 numerical failure.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tomoreg/config.hpp"
#include "tomoreg/errors.hpp"
#include "tomoreg/io.hpp"
#include "tomoreg/landmarks.hpp"
#include "tomoreg/phantom.hpp"
#include "tomoreg/recon.hpp"
#include "tomoreg/registration.hpp"
#include "tomoreg/transform.hpp"

namespace {

using namespace tomoreg;

constexpr const char* kVersion = "tomoreg 1.0.0";

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_run_record(const std::string& outdir, const std::string& command,
                      const json& parameters, double wall_seconds) {
    json rec{{"command", command},
             {"version", kVersion},
             {"wall_seconds", wall_seconds},
             {"parameters", parameters}};
    save_json_file(outdir + "/run.json", rec);
}

json tre_to_json(const TreReport& t) {
    return json{{"mean", t.mean},
                {"axis_mean", {t.axis_mean.x, t.axis_mean.y, t.axis_mean.z}},
                {"per_point", t.per_point}};
}

json affine_to_json(const AffineParams& p) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) rows.push_back({p.A(r, 0), p.A(r, 1), p.A(r, 2)});
    return json{{"A", rows}, {"b", {p.b.x, p.b.y, p.b.z}}};
}

void append_history_csv(std::ofstream& out, const std::string& stage,
                        const std::vector<LossRecord>& history) {
    for (const LossRecord& r : history)
        out << stage << ',' << r.iteration << ',' << r.total << ',' << r.sim << ','
            << r.reg << '\n';
}

struct ProjectArgs {
    std::string geometry, volume, out;
};

int cmd_project(const ProjectArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    const json gj = load_json_file(a.geometry);
    const ScanGeometry geom = parse_geometry(gj);
    const Volume3D vol = load_volume(a.volume);
    ensure_dir(a.out);

    const ProjectionStack stack = project_stack(vol, geom);
    save_stack(a.out, stack);

    json files = json::array();
    for (std::size_t i = 0; i < stack.size(); ++i) files.push_back(stack_entry_name(int(i)));
    save_json_file(a.out + "/manifest.json", json{{"count", stack.size()},
                                                  {"files", files},
                                                  {"geometry", gj}});
    write_run_record(a.out, "project",
                     json{{"geometry", gj}, {"volume", a.volume}}, seconds_since(t0));
    std::printf("projected %zu views (%dx%d px) -> %s\n", stack.size(), geom.nw, geom.nh,
                a.out.c_str());
    return 0;
}

struct RegisterArgs {
    std::string config, out, stage = "both";
    std::string landmarks_moving, landmarks_fixed;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int cmd_register(const RegisterArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    const json cj = load_json_file(a.config);
    RegisterConfig cfg = parse_register_config(cj);
    if (a.seed_set) cfg.affine.seed = a.seed;
    if (!a.landmarks_moving.empty()) cfg.paths.landmarks_moving = a.landmarks_moving;
    if (!a.landmarks_fixed.empty()) cfg.paths.landmarks_fixed = a.landmarks_fixed;
    ensure_dir(a.out);

    Volume3D vol = load_volume(cfg.paths.volume);
    if (!cfg.paths.mask.empty()) vol = apply_mask(vol, load_volume(cfg.paths.mask));
    const MultiGaussianKernel kernel = resolve_kernel(cfg, vol);

    const bool volumetric = !cfg.paths.target_volume.empty();
    if (volumetric && a.stage != "lddmm")
        throw ConfigError("register: volumetric target supports --stage lddmm only");
    if (!volumetric && cfg.paths.stack_dir.empty())
        throw ConfigError("/paths: either stack_dir or target_volume is required");

    const bool want_affine = a.stage == "both" || a.stage == "affine";
    const bool want_lddmm = a.stage == "both" || a.stage == "lddmm";

    LandmarkSet lm_moving, lm_fixed;
    const bool have_landmarks =
        !cfg.paths.landmarks_moving.empty() && !cfg.paths.landmarks_fixed.empty();
    if (have_landmarks) {
        lm_moving = load_landmarks_csv(cfg.paths.landmarks_moving);
        lm_fixed = load_landmarks_csv(cfg.paths.landmarks_fixed);
    }

    json summary{{"mode", volumetric ? "3d3d" : "3d2d"}, {"stages", json::array()}};
    json tre_json = json::object();
    if (have_landmarks) {
        const TreReport initial = landmark_tre(lm_moving, lm_fixed);
        tre_json["initial"] = tre_to_json(initial);
        std::printf("[initial] tre=%.4f mm\n", initial.mean);
    }

    std::ofstream hist(a.out + "/history.csv");
    hist << "stage,iteration,total,sim,reg\n";

    auto report_stage = [&](const char* stage, const RegistrationResult& r) {
        json s{{"stage", stage},
               {"iterations", r.iterations},
               {"converged", r.converged},
               {"stop_reason", r.stop_reason}};
        if (!r.history.empty()) {
            s["final_total"] = r.history.back().total;
            s["final_sim"] = r.history.back().sim;
            s["final_reg"] = r.history.back().reg;
        }
        summary["stages"].push_back(s);
        append_history_csv(hist, stage, r.history);
        std::printf("[%s] iterations=%d converged=%s%s%s loss=%g\n", stage, r.iterations,
                    r.converged ? "yes" : "no", r.stop_reason.empty() ? "" : " ",
                    r.stop_reason.c_str(), r.history.empty() ? 0.0 : r.history.back().total);
        if (have_landmarks) {
            const TreReport t = landmark_tre(lm_moving, lm_fixed, r.map);
            tre_json[stage] = tre_to_json(t);
            std::printf("[%s] tre=%.4f mm\n", stage, t.mean);
        }
    };

    RegistrationResult final_result;
    if (volumetric) {
        const Volume3D target = load_volume(cfg.paths.target_volume);
        const SimilarityConfig sim = resolve_similarity(cfg.similarity, target);
        final_result = register_3d3d(vol, target, kernel, sim, cfg.lddmm);
        report_stage("lddmm", final_result);
        save_map(a.out + "/momentum.mhd", final_result.momentum);
    } else {
        const ProjectionStack stack = load_stack(cfg.paths.stack_dir);
        const SimilarityConfig sim = resolve_similarity(cfg.similarity, stack);

        DeformationMap pre_map;
        if (want_affine) {
            const RegistrationResult ar =
                register_affine(vol, stack, cfg.geometry, sim, cfg.affine);
            report_stage("affine", ar);
            save_json_file(a.out + "/affine.json", affine_to_json(ar.affine));
            pre_map = affine_to_map(ar.affine, vol.dims, vol.spacing, vol.origin);
            final_result = ar;
        } else {
            pre_map = identity_map_like(vol);
        }
        if (want_lddmm) {
            const RegistrationResult lr = register_lddmm(vol, stack, cfg.geometry, pre_map,
                                                         kernel, sim, cfg.lddmm);
            report_stage("lddmm", lr);
            save_map(a.out + "/momentum.mhd", lr.momentum);
            final_result = lr;
        }
    }

    save_map(a.out + "/map.mhd", final_result.map);
    save_volume(a.out + "/warped.mhd", final_result.warped);
    if (have_landmarks) summary["tre"] = tre_json;
    save_json_file(a.out + "/summary.json", summary);
    write_run_record(a.out, "register",
                     json{{"config", cj}, {"stage", a.stage}, {"seed", cfg.affine.seed}},
                     seconds_since(t0));
    return 0;
}

struct ReconArgs {
    std::string config, geometry, stack, out;
};

int cmd_reconstruct(const ReconArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    const json cj = load_json_file(a.config);
    const ReconFileConfig cfg = parse_recon_config(cj);
    const json gj = load_json_file(a.geometry);
    const ScanGeometry geom = parse_geometry(gj);
    const ProjectionStack stack = load_stack(a.stack);
    ensure_dir(a.out);

    const ReconResult result = reconstruct(stack, geom, cfg.grid, cfg.options);
    save_volume(a.out + "/recon.mhd", result.volume);

    json history = json::array();
    for (const ReconLossRecord& r : result.history)
        history.push_back(json{{"iteration", r.iteration},
                               {"total", r.total},
                               {"data", r.data},
                               {"positivity", r.positivity},
                               {"tv", r.tv}});
    save_json_file(a.out + "/history.json", history);
    save_json_file(a.out + "/summary.json",
                   json{{"iterations", result.iterations},
                        {"converged", result.converged},
                        {"stop_reason", result.stop_reason},
                        {"final_total", result.history.empty() ? 0.0
                                                               : result.history.back().total}});
    write_run_record(a.out, "reconstruct",
                     json{{"config", cj}, {"geometry", gj}, {"stack", a.stack}},
                     seconds_since(t0));
    std::printf("reconstructed %dx%dx%d volume, iterations=%d loss=%g\n", cfg.grid.dims[0],
                cfg.grid.dims[1], cfg.grid.dims[2], result.iterations,
                result.history.empty() ? 0.0 : result.history.back().total);
    return 0;
}

struct PhantomArgs {
    std::string spec, deform, out;
};

int cmd_make_phantom(const PhantomArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    const json sj = load_json_file(a.spec);
    const PhantomSpec spec = parse_phantom_spec(sj);
    ensure_dir(a.out);

    const Phantom phantom = make_phantom(spec);
    save_volume(a.out + "/volume.mhd", phantom.volume);
    save_landmarks_csv(a.out + "/landmarks.csv", phantom.landmarks);
    std::printf("phantom %dx%dx%d, %zu landmarks -> %s\n", spec.grid.dims[0], spec.grid.dims[1],
                spec.grid.dims[2], phantom.landmarks.size(), a.out.c_str());

    json params{{"spec", sj}};
    if (!a.deform.empty()) {
        const json dj = load_json_file(a.deform);
        const SyntheticDeformation def = parse_deformation(dj);
        try {
            validate_deformation(def, phantom.volume.spacing);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("deformation: ") + e.what());
        }
        const DeformedPhantom moved =
            apply_synthetic_deformation(phantom.volume, phantom.landmarks, def);
        save_volume(a.out + "/deformed.mhd", moved.volume);
        save_landmarks_csv(a.out + "/deformed_landmarks.csv", moved.landmarks);
        save_map(a.out + "/true_map.mhd", moved.map);
        const TreReport dist = landmark_tre(phantom.landmarks, moved.landmarks);
        std::printf("deformed copy written, mean landmark displacement %.4f mm\n", dist.mean);
        params["deformation"] = dj;
    }
    write_run_record(a.out, "make-phantom", params, seconds_since(t0));
    return 0;
}

struct EvalArgs {
    std::string moving, fixed, map, out, format = "csv", reference;
};

int cmd_eval_landmarks(const EvalArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    LandmarkSet moving, fixed;
    if (a.format == "dirlab") {
        if (a.reference.empty())
            throw ConfigError("eval-landmarks: --format dirlab requires --reference");
        const Volume3D ref = load_volume(a.reference);
        moving = load_dirlab_landmarks(a.moving, ref);
        fixed = load_dirlab_landmarks(a.fixed, ref);
    } else {
        moving = load_landmarks_csv(a.moving);
        fixed = load_landmarks_csv(a.fixed);
    }

    TreReport report;
    if (a.map.empty()) {
        report = landmark_tre(moving, fixed);
    } else {
        const DeformationMap map = load_map(a.map);
        report = landmark_tre(moving, fixed, map);
    }
    std::printf("tre mean %.4f mm (|x| %.4f, |y| %.4f, |z| %.4f) over %zu landmarks\n",
                report.mean, report.axis_mean.x, report.axis_mean.y, report.axis_mean.z,
                report.per_point.size());
    if (!a.out.empty()) {
        ensure_dir(a.out);
        save_json_file(a.out + "/tre.json", tre_to_json(report));
        write_run_record(a.out, "eval-landmarks",
                         json{{"moving", a.moving},
                              {"fixed", a.fixed},
                              {"map", a.map},
                              {"format", a.format}},
                         seconds_since(t0));
    }
    return 0;
}

struct SweepArgs {
    std::string config, out;
    int jobs = 1;
};

struct SweepCell {
    double angle_deg = 0.0;
    int count = 0;
};

struct SweepRow {
    double angle_deg = 0.0;
    int count = 0;
    std::string stage;
    TreReport tre;
};

int cmd_sweep(const SweepArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    const json cj = load_json_file(a.config);
    const SweepConfig cfg = parse_sweep_config(cj);
    ensure_dir(a.out);

    Volume3D vol = load_volume(cfg.base.paths.volume);
    if (!cfg.base.paths.mask.empty()) vol = apply_mask(vol, load_volume(cfg.base.paths.mask));
    const Volume3D target = load_volume(cfg.target_volume);
    const LandmarkSet lm_moving = load_landmarks_csv(cfg.base.paths.landmarks_moving);
    const LandmarkSet lm_fixed = load_landmarks_csv(cfg.base.paths.landmarks_fixed);
    const MultiGaussianKernel kernel = resolve_kernel(cfg.base, vol);
    const double source_distance =
        cfg.raw.at("base").at("geometry").at("emitters").at("source_distance_mm").get<double>();

    std::vector<SweepCell> cells;
    if (cfg.angle_sweep.enabled)
        for (double ang : cfg.angle_sweep.angles_deg)
            cells.push_back({ang, cfg.angle_sweep.count});
    if (cfg.count_sweep.enabled)
        for (int c : cfg.count_sweep.counts)
            cells.push_back({cfg.count_sweep.angle_deg, c});

    std::vector<std::vector<SweepRow>> rows(cells.size());
    std::vector<std::string> cell_errors(cells.size());
    std::mutex print_mutex;
    std::atomic<std::size_t> next{0};

    auto run_cell = [&](std::size_t ci) {
        const SweepCell cell = cells[ci];
        ScanGeometry geom = cfg.base.geometry;
        geom.emitters = arc_emitters(cell.count, cell.angle_deg, source_distance);

        const ProjectionStack stack = project_stack(target, geom);
        const SimilarityConfig sim = resolve_similarity(cfg.base.similarity, stack);

        std::vector<SweepRow> out;
        out.push_back({cell.angle_deg, cell.count, "initial", landmark_tre(lm_moving, lm_fixed)});

        const RegistrationResult ar = register_affine(vol, stack, geom, sim, cfg.base.affine);
        out.push_back(
            {cell.angle_deg, cell.count, "affine", landmark_tre(lm_moving, lm_fixed, ar.map)});

        const DeformationMap pre = affine_to_map(ar.affine, vol.dims, vol.spacing, vol.origin);
        const RegistrationResult lr =
            register_lddmm(vol, stack, geom, pre, kernel, sim, cfg.base.lddmm);
        out.push_back(
            {cell.angle_deg, cell.count, "lddmm", landmark_tre(lm_moving, lm_fixed, lr.map)});

        {
            std::lock_guard<std::mutex> lock(print_mutex);
            std::printf("angle=%g deg, views=%d: tre initial=%.4f affine=%.4f lddmm=%.4f mm\n",
                        cell.angle_deg, cell.count, out[0].tre.mean, out[1].tre.mean,
                        out[2].tre.mean);
        }
        rows[ci] = std::move(out);
    };

    // A failing cell is recorded and skipped; the remaining cells still run.
    auto worker = [&] {
        for (;;) {
            const std::size_t ci = next.fetch_add(1);
            if (ci >= cells.size()) return;
            try {
                run_cell(ci);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(print_mutex);
                cell_errors[ci] = e.what();
                std::fprintf(stderr, "cell angle=%g views=%d failed: %s\n",
                             cells[ci].angle_deg, cells[ci].count, e.what());
            }
        }
    };

    const int jobs = std::max(1, std::min<int>(a.jobs, int(cells.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    std::ofstream csv(a.out + "/sweep.csv");
    if (!csv) throw IoError("cannot open " + a.out + "/sweep.csv for writing");
    csv << "angle_deg,num_proj,stage,tre_mean,tre_x,tre_y,tre_z\n";
    for (const std::vector<SweepRow>& cell_rows : rows)
        for (const SweepRow& r : cell_rows)
            csv << r.angle_deg << ',' << r.count << ',' << r.stage << ',' << r.tre.mean << ','
                << r.tre.axis_mean.x << ',' << r.tre.axis_mean.y << ',' << r.tre.axis_mean.z
                << '\n';

    json failures = json::array();
    std::size_t ok = 0;
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        if (cell_errors[ci].empty()) {
            ++ok;
        } else {
            failures.push_back(json{{"angle_deg", cells[ci].angle_deg},
                                    {"num_proj", cells[ci].count},
                                    {"error", cell_errors[ci]}});
        }
    }
    write_run_record(a.out, "sweep",
                     json{{"config", cj}, {"jobs", a.jobs}, {"failures", failures}},
                     seconds_since(t0));
    std::printf("sweep finished: %zu of %zu cells -> %s/sweep.csv\n", ok, cells.size(),
                a.out.c_str());
    if (ok == 0) throw NumericError("sweep: every cell failed");
    return 0;
}

int cmd_schema(const std::string& name) {
    const auto& schemas = published_schemas();
    if (name.empty()) {
        json all = json::object();
        for (const auto& [key, schema] : schemas) all[key] = schema;
        std::printf("%s\n", all.dump(2).c_str());
        return 0;
    }
    const auto it = schemas.find(name);
    if (it == schemas.end()) {
        std::string known;
        for (const auto& [key, schema] : schemas) known += (known.empty() ? "" : ", ") + key;
        throw ConfigError("schema: unknown config \"" + name + "\" (known: " + known + ")");
    }
    std::printf("%s\n", it->second.dump(2).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"projection-space deformable registration and limited-angle reconstruction"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "worker threads for the projector (0 = library default)")
        ->capture_default_str();

    ProjectArgs pa;
    CLI::App* project = app.add_subcommand("project", "render a projection stack from a volume");
    project->add_option("--geometry", pa.geometry, "geometry config (json)")->required();
    project->add_option("--volume", pa.volume, "input volume (.mhd)")->required();
    project->add_option("--out", pa.out, "output directory")->required();

    RegisterArgs ra;
    CLI::App* reg = app.add_subcommand("register", "register a volume to a projection stack");
    reg->add_option("--config", ra.config, "register config (json)")->required();
    reg->add_option("--out", ra.out, "output directory")->required();
    reg->add_option("--stage", ra.stage, "both | affine | lddmm")
        ->check(CLI::IsMember({"both", "affine", "lddmm"}))
        ->capture_default_str();
    reg->add_option("--landmarks-moving", ra.landmarks_moving,
                    "moving landmarks csv (overrides config)");
    reg->add_option("--landmarks-fixed", ra.landmarks_fixed,
                    "fixed landmarks csv (overrides config)");
    CLI::Option* seed_opt = reg->add_option("--seed", ra.seed, "emitter subsampling seed");

    ReconArgs ca;
    CLI::App* recon = app.add_subcommand("reconstruct", "iterative limited-angle reconstruction");
    recon->add_option("--config", ca.config, "recon config (json)")->required();
    recon->add_option("--geometry", ca.geometry, "geometry config (json)")->required();
    recon->add_option("--stack", ca.stack, "projection stack directory")->required();
    recon->add_option("--out", ca.out, "output directory")->required();

    PhantomArgs pha;
    CLI::App* phantom = app.add_subcommand("make-phantom", "generate a synthetic phantom");
    phantom->add_option("--spec", pha.spec, "phantom spec (json)")->required();
    phantom->add_option("--deform", pha.deform, "synthetic deformation (json)");
    phantom->add_option("--out", pha.out, "output directory")->required();

    EvalArgs ea;
    CLI::App* eval = app.add_subcommand("eval-landmarks", "landmark registration error");
    eval->add_option("--moving", ea.moving, "moving landmarks")->required();
    eval->add_option("--fixed", ea.fixed, "fixed landmarks")->required();
    eval->add_option("--map", ea.map, "deformation map (.mhd); omit for initial distances");
    eval->add_option("--format", ea.format, "csv | dirlab")
        ->check(CLI::IsMember({"csv", "dirlab"}))
        ->capture_default_str();
    eval->add_option("--reference", ea.reference, "reference volume for dirlab indices");
    eval->add_option("--out", ea.out, "output directory (optional)");

    SweepArgs sa;
    CLI::App* sweep = app.add_subcommand("sweep", "arc-angle / view-count registration sweeps");
    sweep->add_option("--config", sa.config, "sweep config (json)")->required();
    sweep->add_option("--out", sa.out, "output directory")->required();
    sweep->add_option("--jobs", sa.jobs, "parallel sweep cells")->capture_default_str();

    std::string schema_name;
    CLI::App* schema = app.add_subcommand("schema", "print published config schemas");
    schema->add_option("name", schema_name, "geometry | phantom | deformation | register | recon | sweep");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif
    ra.seed_set = seed_opt->count() > 0;

    try {
        if (*project) return cmd_project(pa);
        if (*reg) return cmd_register(ra);
        if (*recon) return cmd_reconstruct(ca);
        if (*phantom) return cmd_make_phantom(pha);
        if (*eval) return cmd_eval_landmarks(ea);
        if (*sweep) return cmd_sweep(sa);
        if (*schema) return cmd_schema(schema_name);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::out_of_range& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
