#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cla/correction.hpp"
#include "cla/evalkit.hpp"
#include "cla/gym.hpp"
#include "cla/linan.hpp"
#include "cla/model_io.hpp"
#include "cla/probe.hpp"
#include "cla/report.hpp"
#include "cla/scoring.hpp"

namespace claprobe {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Run configuration (one file, mirrored by CLI overrides)
// ---------------------------------------------------------------------------

struct ProbeSection {
    double search_bound = 30.0;
    int grid_divisions = 20;
    std::size_t layer = 1;
    double zero_tol = 1e-9;
    bool parallel = false;

    ProbeConfig to_probe_config() const {
        ProbeConfig pc;
        pc.search_bound = search_bound;
        pc.grid_divisions = grid_divisions;
        pc.zero_tol = zero_tol;
        pc.parallel_axes = parallel;
        return pc;
    }
};

struct CorrectionSection {
    std::size_t stopping_layer = 1;
    std::size_t num_units = 1;
    double maintain_ratio = 0.9;
    bool signed_ranking = false;
};

struct EvalSection {
    std::size_t k = 3;
    double epsilon = 1e-4;
    std::size_t pairs = 1024;
    std::string interpolation = "lerp";
    double rs_cap = 1e6;
    std::string reference;            // CSV of reference vectors; empty = self
    std::size_t reference_count = 256;
};

struct TrackSite {
    std::size_t layer = 1, unit = 0, row = 0, col = 0;
};

struct TrainSection {
    std::string dataset_kind = "gaussian_ring";
    std::size_t modes = 8;
    double sigma = 0.05;
    std::size_t count = 1024;
    std::size_t latent_dim = 2;
    std::vector<std::size_t> gen_hidden = {16, 16};
    std::vector<std::size_t> disc_hidden = {16, 16};
    std::size_t data_dim = 2;
    double gamma = 0.2;
    std::string optimizer = "sgd";
    double learning_rate = 0.05;
    std::size_t batch_size = 32;
    std::size_t steps = 400;
    std::size_t snapshot_interval = 100;
    std::vector<TrackSite> track_sites; // empty = auto-select top-|CLA| neuron
};

struct SweepSection {
    std::vector<double> search_bounds = {30.0};
    std::vector<int> grid_divisions = {20};
    std::vector<std::size_t> layers = {1};
};

struct GeometrySection {
    std::size_t layer = 1;
    double eta = 1e-3;
    std::size_t samples = 16;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::string out;
    std::string model;
    std::string disc_model;
    std::size_t codes = 1000;
    double fraction = 0.1;
    double truncation = 0.0; // 0 = untruncated standard normal
    ProbeSection probe;
    CorrectionSection correction;
    EvalSection eval;
    TrainSection train;
    SweepSection sweep;
    GeometrySection geometry;
    bool emit_records = true;
    bool emit_svg = true;
    bool svg_timestamps = false;

    json to_json() const;
    static RunConfig from_json(const json& j);
    static RunConfig from_file(const std::string& path);

    // Provenance hash over the semantic configuration; the output directory
    // does not change what a run computes.
    std::string config_hash() const {
        json j = to_json();
        j.erase("out");
        return hash_hex(fnv1a64(j.dump()));
    }
};

inline json RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["out"] = out;
    j["model"] = model;
    j["disc_model"] = disc_model;
    j["codes"] = codes;
    j["fraction"] = fraction;
    j["truncation"] = truncation;
    j["probe"] = {{"search_bound", probe.search_bound},
                  {"grid_divisions", probe.grid_divisions},
                  {"layer", probe.layer},
                  {"zero_tol", probe.zero_tol},
                  {"parallel", probe.parallel}};
    j["correction"] = {{"stopping_layer", correction.stopping_layer},
                       {"num_units", correction.num_units},
                       {"maintain_ratio", correction.maintain_ratio},
                       {"signed_ranking", correction.signed_ranking}};
    j["eval"] = {{"k", eval.k},
                 {"epsilon", eval.epsilon},
                 {"pairs", eval.pairs},
                 {"interpolation", eval.interpolation},
                 {"rs_cap", eval.rs_cap},
                 {"reference", eval.reference},
                 {"reference_count", eval.reference_count}};
    json sites = json::array();
    for (const TrackSite& s : train.track_sites)
        sites.push_back({{"layer", s.layer}, {"unit", s.unit}, {"row", s.row}, {"col", s.col}});
    j["train"] = {{"dataset_kind", train.dataset_kind},
                  {"modes", train.modes},
                  {"sigma", train.sigma},
                  {"count", train.count},
                  {"latent_dim", train.latent_dim},
                  {"gen_hidden", train.gen_hidden},
                  {"disc_hidden", train.disc_hidden},
                  {"data_dim", train.data_dim},
                  {"gamma", train.gamma},
                  {"optimizer", train.optimizer},
                  {"learning_rate", train.learning_rate},
                  {"batch_size", train.batch_size},
                  {"steps", train.steps},
                  {"snapshot_interval", train.snapshot_interval},
                  {"track_sites", sites}};
    j["sweep"] = {{"search_bounds", sweep.search_bounds},
                  {"grid_divisions", sweep.grid_divisions},
                  {"layers", sweep.layers}};
    j["geometry"] = {{"layer", geometry.layer},
                     {"eta", geometry.eta},
                     {"samples", geometry.samples}};
    j["emit_records"] = emit_records;
    j["emit_svg"] = emit_svg;
    j["svg_timestamps"] = svg_timestamps;
    return j;
}

inline RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        c.out = j.value("out", c.out);
        c.model = j.value("model", c.model);
        c.disc_model = j.value("disc_model", c.disc_model);
        c.codes = j.value("codes", c.codes);
        c.fraction = j.value("fraction", c.fraction);
        c.truncation = j.value("truncation", c.truncation);
        if (j.contains("probe")) {
            const json& p = j.at("probe");
            c.probe.search_bound = p.value("search_bound", c.probe.search_bound);
            c.probe.grid_divisions = p.value("grid_divisions", c.probe.grid_divisions);
            c.probe.layer = p.value("layer", c.probe.layer);
            c.probe.zero_tol = p.value("zero_tol", c.probe.zero_tol);
            c.probe.parallel = p.value("parallel", c.probe.parallel);
        }
        if (j.contains("correction")) {
            const json& p = j.at("correction");
            c.correction.stopping_layer = p.value("stopping_layer", c.correction.stopping_layer);
            c.correction.num_units = p.value("num_units", c.correction.num_units);
            c.correction.maintain_ratio = p.value("maintain_ratio", c.correction.maintain_ratio);
            c.correction.signed_ranking = p.value("signed_ranking", c.correction.signed_ranking);
        }
        if (j.contains("eval")) {
            const json& p = j.at("eval");
            c.eval.k = p.value("k", c.eval.k);
            c.eval.epsilon = p.value("epsilon", c.eval.epsilon);
            c.eval.pairs = p.value("pairs", c.eval.pairs);
            c.eval.interpolation = p.value("interpolation", c.eval.interpolation);
            c.eval.rs_cap = p.value("rs_cap", c.eval.rs_cap);
            c.eval.reference = p.value("reference", c.eval.reference);
            c.eval.reference_count = p.value("reference_count", c.eval.reference_count);
        }
        if (j.contains("train")) {
            const json& p = j.at("train");
            c.train.dataset_kind = p.value("dataset_kind", c.train.dataset_kind);
            c.train.modes = p.value("modes", c.train.modes);
            c.train.sigma = p.value("sigma", c.train.sigma);
            c.train.count = p.value("count", c.train.count);
            c.train.latent_dim = p.value("latent_dim", c.train.latent_dim);
            c.train.gen_hidden = p.value("gen_hidden", c.train.gen_hidden);
            c.train.disc_hidden = p.value("disc_hidden", c.train.disc_hidden);
            c.train.data_dim = p.value("data_dim", c.train.data_dim);
            c.train.gamma = p.value("gamma", c.train.gamma);
            c.train.optimizer = p.value("optimizer", c.train.optimizer);
            c.train.learning_rate = p.value("learning_rate", c.train.learning_rate);
            c.train.batch_size = p.value("batch_size", c.train.batch_size);
            c.train.steps = p.value("steps", c.train.steps);
            c.train.snapshot_interval = p.value("snapshot_interval", c.train.snapshot_interval);
            if (p.contains("track_sites"))
                for (const json& js : p.at("track_sites"))
                    c.train.track_sites.push_back({js.value("layer", std::size_t{1}),
                                                   js.value("unit", std::size_t{0}),
                                                   js.value("row", std::size_t{0}),
                                                   js.value("col", std::size_t{0})});
        }
        if (j.contains("sweep")) {
            const json& p = j.at("sweep");
            c.sweep.search_bounds = p.value("search_bounds", c.sweep.search_bounds);
            c.sweep.grid_divisions = p.value("grid_divisions", c.sweep.grid_divisions);
            c.sweep.layers = p.value("layers", c.sweep.layers);
        }
        if (j.contains("geometry")) {
            const json& p = j.at("geometry");
            c.geometry.layer = p.value("layer", c.geometry.layer);
            c.geometry.eta = p.value("eta", c.geometry.eta);
            c.geometry.samples = p.value("samples", c.geometry.samples);
        }
        c.emit_records = j.value("emit_records", c.emit_records);
        c.emit_svg = j.value("emit_svg", c.emit_svg);
        c.svg_timestamps = j.value("svg_timestamps", c.svg_timestamps);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!(c.fraction > 0.0) || c.fraction > 0.5)
        throw ConfigError("config: fraction must be in (0, 0.5]");
    if (c.probe.grid_divisions < 2) throw ConfigError("config: grid_divisions must be >= 2");
    if (!(c.probe.search_bound > 0.0)) throw ConfigError("config: search_bound must be > 0");
    return c;
}

inline RunConfig RunConfig::from_file(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return from_json(j);
}

// ---------------------------------------------------------------------------
// Artifact bookkeeping
// ---------------------------------------------------------------------------

struct ArtifactList {
    std::vector<std::pair<std::string, std::string>> entries; // (path, kind)

    void add(const std::string& path, const std::string& kind) {
        entries.emplace_back(path, kind);
    }
};

namespace detail {

inline void write_manifest(const std::string& out_dir, const std::string& command,
                           const std::string& hash, const ArtifactList& artifacts) {
    json j;
    j["command"] = command;
    j["config_hash"] = hash;
    json arr = json::array();
    for (const auto& [path, kind] : artifacts.entries)
        arr.push_back({{"path", path}, {"kind", kind}});
    j["artifacts"] = arr;
    write_text_file(out_dir + "/manifest.json", j.dump(2) + "\n");
}

inline void ensure_out_dir(const std::string& out) {
    if (out.empty()) throw ConfigError("config: output directory not set");
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw ConfigError("config: cannot create output directory '" + out + "'");
}

inline NetworkSpec load_generator(const RunConfig& cfg) {
    if (cfg.model.empty()) throw ConfigError("config: model path not set");
    if (!std::filesystem::exists(cfg.model))
        throw ConfigError("config: model file '" + cfg.model + "' does not exist");
    return load_model_file(cfg.model);
}

inline Tensor draw_latent(Rng& rng, std::size_t dz, double truncation) {
    Tensor z({dz});
    for (double& v : z.data) {
        double x = rng.normal();
        if (truncation > 0.0)
            while (std::abs(x) > truncation) x = rng.normal();
        v = x;
    }
    return z;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Detection core (shared by detect / correct / sweep / eval)
// ---------------------------------------------------------------------------

struct DetectionResult {
    std::vector<Tensor> codes;                 // latent_id -> z
    std::vector<std::vector<ClaRecord>> records;
    std::vector<SampleScore> scores;
    std::vector<GroupSelection> groups;        // high, low, random
    ProbeStats stats;

    const GroupSelection& group(GroupKind k) const {
        for (const auto& g : groups)
            if (g.kind == k) return g;
        throw ConfigError("detection result: missing group");
    }
};

inline DetectionResult detect_core(const NetworkSpec& net, const RunConfig& cfg,
                                   const ProbeConfig& pc, std::size_t layer) {
    if (layer >= net.depth())
        throw ConfigError("detect: probe layer " + std::to_string(layer) + " out of range");
    if (cfg.codes < 2) throw ConfigError("detect: need at least 2 latent codes");
    DetectionResult res;
    Rng rng(cfg.seed);
    res.codes.reserve(cfg.codes);
    for (std::size_t i = 0; i < cfg.codes; ++i)
        res.codes.push_back(detail::draw_latent(rng, net.latent_dim, cfg.truncation));
    res.records.reserve(cfg.codes);
    res.scores.reserve(cfg.codes);
    for (std::size_t i = 0; i < cfg.codes; ++i) {
        res.records.push_back(layer_cla(net, layer, res.codes[i], pc, &res.stats, i));
        res.scores.push_back(sample_score(res.records.back()));
    }
    res.groups = rank_and_select(res.scores, cfg.fraction, cfg.seed);
    return res;
}

namespace detail {

// Reruns must stay byte-identical by default, so wall-clock stamps are only
// injected when explicitly enabled.
inline std::string stamp_svg(std::string svg, bool enabled) {
    if (!enabled) return svg;
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    const auto pos = svg.find('\n');
    if (pos != std::string::npos)
        svg.insert(pos + 1, std::string("<!-- generated_at=") + buf + " -->\n");
    return svg;
}

inline json groups_to_json(const std::vector<GroupSelection>& groups) {
    json arr = json::array();
    for (const GroupSelection& g : groups) {
        json jg;
        jg["kind"] = group_kind_name(g.kind);
        jg["seed"] = g.seed;
        jg["fraction"] = g.fraction;
        jg["members"] = g.members;
        arr.push_back(jg);
    }
    return arr;
}

inline void write_scores_csv(const std::string& path, const std::vector<SampleScore>& scores,
                             const std::string& hash) {
    CsvWriter csv(hash);
    csv.header({"latent_id", "layer", "score"});
    for (const SampleScore& s : scores)
        csv.row({std::to_string(s.latent_id), std::to_string(s.layer), fmt_double(s.score)});
    csv.save(path);
}

inline void write_codes_csv(const std::string& path, const std::vector<Tensor>& codes,
                            const std::string& hash) {
    CsvWriter csv(hash);
    std::vector<std::string> head{"latent_id"};
    const std::size_t dz = codes.empty() ? 0 : codes.front().numel();
    for (std::size_t d = 0; d < dz; ++d) head.push_back("z" + std::to_string(d));
    csv.header(head);
    for (std::size_t i = 0; i < codes.size(); ++i) {
        std::vector<std::string> cells{std::to_string(i)};
        for (double v : codes[i].data) cells.push_back(fmt_double(v));
        csv.row(cells);
    }
    csv.save(path);
}

inline void write_records_csv(const std::string& path,
                              const std::vector<std::vector<ClaRecord>>& records,
                              std::size_t latent_dim, const std::string& hash) {
    CsvWriter csv(hash);
    std::vector<std::string> head{"latent_id", "layer", "unit", "row", "col",
                                  "activation", "cla_mean"};
    for (std::size_t d = 0; d < latent_dim; ++d) head.push_back("cla_axis_" + std::to_string(d));
    csv.header(head);
    for (const auto& per_code : records)
        for (const ClaRecord& r : per_code) {
            std::vector<std::string> cells{
                std::to_string(r.latent_id),   std::to_string(r.site.layer),
                std::to_string(r.site.unit),   std::to_string(r.site.row),
                std::to_string(r.site.col),    fmt_double(r.activation),
                fmt_double(r.mean_curvature)};
            for (double c : r.axis_curvature) cells.push_back(fmt_double(c));
            csv.row(cells);
        }
    csv.save(path);
}

// Showcase profile of the strongest-|CLA| neuron of one latent code.
inline void emit_profile(const std::string& out_dir, const std::string& tag,
                         const NetworkSpec& net, const Tensor& z,
                         const std::vector<ClaRecord>& records, const ProbeConfig& pc,
                         std::uint64_t latent_id, bool emit_svg, bool svg_timestamps,
                         const std::string& hash, ArtifactList& artifacts) {
    const ClaRecord* best = nullptr;
    for (const ClaRecord& r : records)
        if (!best || std::abs(r.mean_curvature) > std::abs(best->mean_curvature)) best = &r;
    if (!best) return;

    json j;
    j["config_hash"] = hash;
    j["latent_id"] = latent_id;
    j["site"] = {{"layer", best->site.layer},
                 {"unit", best->site.unit},
                 {"row", best->site.row},
                 {"col", best->site.col}};
    j["cla_mean"] = best->mean_curvature;
    json axes = json::array();
    std::vector<std::vector<double>> heat_rows;
    for (std::size_t d = 0; d < net.latent_dim; ++d) {
        const auto prof = activation_profile(net, best->site, z, d, pc);
        json pts = json::array();
        std::vector<double> row;
        row.reserve(prof.size());
        for (const ProfilePoint& p : prof) {
            pts.push_back({{"r", p.r}, {"value", p.value}});
            row.push_back(p.value);
        }
        axes.push_back(pts);
        heat_rows.push_back(std::move(row));
    }
    j["axes"] = axes;
    const std::string jpath = "profiles/profile_" + tag + ".json";
    write_text_file(out_dir + "/" + jpath, j.dump(2) + "\n");
    artifacts.add(jpath, "activation_profile");
    if (emit_svg) {
        const std::string spath = "profiles/profile_" + tag + ".svg";
        write_text_file(out_dir + "/" + spath,
                        stamp_svg(svg_profile_heatmap("activation profile, latent " +
                                                          std::to_string(latent_id) + " (" +
                                                          tag + ")",
                                                      heat_rows, hash),
                                  svg_timestamps));
        artifacts.add(spath, "activation_profile_svg");
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline DetectionResult run_detect(const RunConfig& cfg) {
    detail::ensure_out_dir(cfg.out);
    const NetworkSpec net = detail::load_generator(cfg);
    const std::string hash = cfg.config_hash();
    const ProbeConfig pc = cfg.probe.to_probe_config();
    DetectionResult res = detect_core(net, cfg, pc, cfg.probe.layer);

    ArtifactList artifacts;
    detail::write_scores_csv(cfg.out + "/scores.csv", res.scores, hash);
    artifacts.add("scores.csv", "sample_scores");
    detail::write_codes_csv(cfg.out + "/codes.csv", res.codes, hash);
    artifacts.add("codes.csv", "latent_codes");
    if (cfg.emit_records) {
        detail::write_records_csv(cfg.out + "/records.csv", res.records, net.latent_dim, hash);
        artifacts.add("records.csv", "cla_records");
    }
    json groups;
    groups["config_hash"] = hash;
    groups["groups"] = detail::groups_to_json(res.groups);
    write_text_file(cfg.out + "/groups.json", groups.dump(2) + "\n");
    artifacts.add("groups.json", "group_manifest");

    std::filesystem::create_directories(cfg.out + "/profiles");
    const auto& high = res.group(GroupKind::high_cla);
    const auto& low = res.group(GroupKind::low_cla);
    detail::emit_profile(cfg.out, "high", net, res.codes[high.members.front()],
                         res.records[high.members.front()], pc, high.members.front(),
                         cfg.emit_svg, cfg.svg_timestamps, hash, artifacts);
    detail::emit_profile(cfg.out, "low", net, res.codes[low.members.front()],
                         res.records[low.members.front()], pc, low.members.front(),
                         cfg.emit_svg, cfg.svg_timestamps, hash, artifacts);

    double score_sum = 0.0, score_max = 0.0;
    for (const SampleScore& s : res.scores) {
        score_sum += s.score;
        score_max = std::max(score_max, s.score);
    }
    json summary;
    summary["command"] = "detect";
    summary["config_hash"] = hash;
    summary["codes"] = cfg.codes;
    summary["layer"] = cfg.probe.layer;
    summary["group_size"] = high.members.size();
    summary["score_mean"] = score_sum / static_cast<double>(res.scores.size());
    summary["score_max"] = score_max;
    summary["neuron_evals"] = res.stats.neuron_evals;
    summary["forward_passes"] = res.stats.forward_passes;
    write_text_file(cfg.out + "/summary.json", summary.dump(2) + "\n");
    artifacts.add("summary.json", "summary");

    detail::write_manifest(cfg.out, "detect", hash, artifacts);
    return res;
}

struct CorrectionOutcome {
    std::size_t corrected_codes = 0;
    double mean_l2_change = 0.0;
};

inline CorrectionOutcome run_correct(const RunConfig& cfg) {
    detail::ensure_out_dir(cfg.out);
    const NetworkSpec net = detail::load_generator(cfg);
    const std::string hash = cfg.config_hash();
    const ProbeConfig pc = cfg.probe.to_probe_config();
    const DetectionResult det = detect_core(net, cfg, pc, cfg.probe.layer);
    const GroupSelection& high = det.group(GroupKind::high_cla);

    const auto shapes = activation_shapes(net);
    const bool image_shaped =
        shapes.back().size() == 3 && (shapes.back()[0] == 1 || shapes.back()[0] == 3);
    if (image_shaped) std::filesystem::create_directories(cfg.out + "/outputs");

    ArtifactList artifacts;
    CorrectionConfig ccfg;
    ccfg.stopping_layer = cfg.correction.stopping_layer;
    ccfg.num_ablation_units = cfg.correction.num_units;
    ccfg.maintain_ratio = cfg.correction.maintain_ratio;
    ccfg.signed_ranking = cfg.correction.signed_ranking;

    json report;
    report["command"] = "correct";
    report["config_hash"] = hash;
    report["lambda"] = ccfg.maintain_ratio;
    report["lambda_semantics"] = "unit activations scaled by lambda at the stopping layer";
    report["stopping_layer"] = ccfg.stopping_layer;
    report["num_units"] = ccfg.num_ablation_units;
    report["ranking"] = ccfg.signed_ranking ? "signed" : "magnitude";
    json entries = json::array();

    CsvWriter outputs_csv(hash);
    bool outputs_header_written = false;

    CorrectionOutcome outcome;
    for (std::uint64_t id : high.members) {
        const auto units = identify_artifact_units(
            unit_cla(det.records[id], ccfg.stopping_layer), ccfg.num_ablation_units,
            ccfg.signed_ranking);
        const CorrectionResult corr = correct(net, det.codes[id], ccfg, units);
        const double l2 = std::sqrt(squared_l2(corr.original.data, corr.corrected.data));
        outcome.mean_l2_change += l2;
        ++outcome.corrected_codes;

        json e;
        e["latent_id"] = id;
        e["selected_units"] = units;
        e["l2_original_corrected"] = l2;
        if (image_shaped) {
            double lo = corr.original.data[0], hi = corr.original.data[0];
            for (double v : corr.original.data) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            for (double v : corr.corrected.data) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            const std::string before = "outputs/before_" + std::to_string(id) + ".ppm";
            const std::string after = "outputs/after_" + std::to_string(id) + ".ppm";
            write_ppm(cfg.out + "/" + before, corr.original, lo, hi, hash);
            write_ppm(cfg.out + "/" + after, corr.corrected, lo, hi, hash);
            artifacts.add(before, "output_image");
            artifacts.add(after, "output_image");
            e["before"] = before;
            e["after"] = after;
        } else {
            if (!outputs_header_written) {
                std::vector<std::string> head{"latent_id", "which"};
                for (std::size_t d = 0; d < corr.original.numel(); ++d)
                    head.push_back("x" + std::to_string(d));
                outputs_csv.header(head);
                outputs_header_written = true;
            }
            auto emit_row = [&](const char* which, const Tensor& t) {
                std::vector<std::string> cells{std::to_string(id), which};
                for (double v : t.data) cells.push_back(fmt_double(v));
                outputs_csv.row(cells);
            };
            emit_row("original", corr.original);
            emit_row("corrected", corr.corrected);
            e["before"] = "outputs.csv";
            e["after"] = "outputs.csv";
        }
        entries.push_back(e);
    }
    if (outcome.corrected_codes)
        outcome.mean_l2_change /= static_cast<double>(outcome.corrected_codes);
    report["entries"] = entries;
    report["mean_l2_change"] = outcome.mean_l2_change;

    if (!image_shaped && outputs_header_written) {
        outputs_csv.save(cfg.out + "/outputs.csv");
        artifacts.add("outputs.csv", "output_vectors");
    }
    write_text_file(cfg.out + "/correction_report.json", report.dump(2) + "\n");
    artifacts.add("correction_report.json", "correction_report");
    detail::write_manifest(cfg.out, "correct", hash, artifacts);
    return outcome;
}

inline std::vector<TrainSnapshot> run_train(const RunConfig& cfg) {
    detail::ensure_out_dir(cfg.out);
    std::filesystem::create_directories(cfg.out + "/snapshots");
    const std::string hash = cfg.config_hash();

    ToyDatasetSpec dspec;
    if (cfg.train.dataset_kind == "gaussian_ring")
        dspec.kind = ToyDatasetKind::gaussian_ring;
    else if (cfg.train.dataset_kind == "gaussian_grid")
        dspec.kind = ToyDatasetKind::gaussian_grid;
    else if (cfg.train.dataset_kind == "synthetic_shapes_8x8")
        dspec.kind = ToyDatasetKind::synthetic_shapes_8x8;
    else
        throw ConfigError("config: unknown dataset kind '" + cfg.train.dataset_kind + "'");
    dspec.modes = cfg.train.modes;
    dspec.noise_sigma = cfg.train.sigma;
    dspec.count = cfg.train.count;
    dspec.seed = cfg.seed;
    const ToyDataset data = make_toy_dataset(dspec);
    if (data.dim != cfg.train.data_dim)
        throw ConfigError("config: train.data_dim " + std::to_string(cfg.train.data_dim) +
                          " does not match dataset dim " + std::to_string(data.dim));

    ArtifactList artifacts;
    {
        CsvWriter csv(hash);
        std::vector<std::string> head;
        for (std::size_t d = 0; d < data.dim; ++d) head.push_back("x" + std::to_string(d));
        csv.header(head);
        for (const auto& s : data.samples) {
            std::vector<std::string> cells;
            for (double v : s) cells.push_back(fmt_double(v));
            csv.row(cells);
        }
        csv.save(cfg.out + "/dataset.csv");
        artifacts.add("dataset.csv", "toy_dataset");
    }

    TrainConfig tcfg;
    tcfg.latent_dim = cfg.train.latent_dim;
    tcfg.gen_hidden = cfg.train.gen_hidden;
    tcfg.disc_hidden = cfg.train.disc_hidden;
    tcfg.data_dim = cfg.train.data_dim;
    tcfg.gamma = cfg.train.gamma;
    tcfg.optimizer = cfg.train.optimizer == "adam" ? Optimizer::adam : Optimizer::sgd;
    tcfg.learning_rate = cfg.train.learning_rate;
    tcfg.batch_size = cfg.train.batch_size;
    tcfg.steps = cfg.train.steps;
    tcfg.snapshot_interval = cfg.train.snapshot_interval;
    tcfg.seed = cfg.seed;

    std::string log;
    const auto snapshots = train_gan(tcfg, data, [&](std::size_t step, double dl, double gl) {
        json line;
        line["step"] = step;
        line["d_loss"] = dl;
        line["g_loss"] = gl;
        line["config_hash"] = hash;
        log += line.dump() + "\n";
    });
    write_text_file(cfg.out + "/train_log.jsonl", log);
    artifacts.add("train_log.jsonl", "train_log");

    for (const TrainSnapshot& snap : snapshots) {
        const std::string gpath = "snapshots/gen_step" + std::to_string(snap.step) + ".clanet";
        const std::string dpath = "snapshots/disc_step" + std::to_string(snap.step) + ".clanet";
        save_model_file(snap.generator, cfg.out + "/" + gpath);
        save_model_file(snap.discriminator, cfg.out + "/" + dpath);
        json side;
        side["step"] = snap.step;
        side["d_loss"] = snap.d_loss;
        side["g_loss"] = snap.g_loss;
        side["config_hash"] = hash;
        side["generator"] = gpath;
        side["discriminator"] = dpath;
        const std::string spath = "snapshots/step" + std::to_string(snap.step) + ".json";
        write_text_file(cfg.out + "/" + spath, side.dump(2) + "\n");
        artifacts.add(gpath, "generator_snapshot");
        artifacts.add(dpath, "discriminator_snapshot");
        artifacts.add(spath, "snapshot_sidecar");
    }

    // CLA dynamics at a fixed latent code across the snapshots.
    if (snapshots.back().generator.depth() < 2)
        throw ConfigError("train: generator needs a hidden layer to track CLA dynamics");
    const ProbeConfig pc = cfg.probe.to_probe_config();
    const std::size_t probe_layer =
        std::min(cfg.probe.layer, snapshots.back().generator.depth() - 2);
    Rng zrng(cfg.seed ^ 0x636c6170726f6265ull);
    Tensor z_fixed({tcfg.latent_dim});
    for (double& v : z_fixed.data) v = zrng.normal();

    std::vector<NeuronSite> sites;
    for (const TrackSite& t : cfg.train.track_sites)
        sites.push_back({t.layer, t.unit, t.row, t.col});
    if (sites.empty()) {
        const auto recs = layer_cla(snapshots.back().generator, probe_layer, z_fixed, pc);
        const ClaRecord* best = &recs.front();
        for (const ClaRecord& r : recs)
            if (std::abs(r.mean_curvature) > std::abs(best->mean_curvature)) best = &r;
        sites.push_back(best->site);
    }
    const auto series = track_cla_dynamics(snapshots, sites, z_fixed, pc);
    CsvWriter dyn(hash);
    dyn.header({"step", "layer", "unit", "row", "col", "activation", "cla_mean"});
    for (const ClaSeries& s : series)
        for (std::size_t i = 0; i < s.records.size(); ++i)
            dyn.row({std::to_string(s.steps[i]), std::to_string(s.site.layer),
                     std::to_string(s.site.unit), std::to_string(s.site.row),
                     std::to_string(s.site.col), fmt_double(s.records[i].activation),
                     fmt_double(s.records[i].mean_curvature)});
    dyn.save(cfg.out + "/dynamics.csv");
    artifacts.add("dynamics.csv", "cla_dynamics");

    detail::write_manifest(cfg.out, "train", hash, artifacts);
    return snapshots;
}

namespace detail {

inline std::vector<std::vector<double>> load_reference_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    std::vector<std::vector<double>> rows;
    std::size_t pos = 0;
    bool header_skipped = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty() || line[0] == '#') continue;
        if (!header_skipped) {
            header_skipped = true; // first non-comment line is the header
            continue;
        }
        std::vector<double> row;
        std::size_t it = 0;
        while (it <= line.size()) {
            std::size_t comma = line.find(',', it);
            if (comma == std::string::npos) comma = line.size();
            try {
                row.push_back(std::stod(line.substr(it, comma - it)));
            } catch (const std::exception&) {
                throw ConfigError("reference CSV '" + path + "': non-numeric cell '" +
                                  line.substr(it, comma - it) + "'");
            }
            it = comma + 1;
            if (comma == line.size()) break;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError("reference CSV '" + path + "' has no data rows");
    return rows;
}

// Reference feature set: a CSV when configured, otherwise samples generated
// from the model with a seed derived from the run seed.
inline std::vector<std::vector<double>> reference_points(const NetworkSpec& net,
                                                         const RunConfig& cfg) {
    if (!cfg.eval.reference.empty()) {
        if (!std::filesystem::exists(cfg.eval.reference))
            throw ConfigError("config: reference file '" + cfg.eval.reference +
                              "' does not exist");
        return load_reference_csv(cfg.eval.reference);
    }
    Rng rng(cfg.seed ^ 0x7265666572656e63ull);
    std::vector<std::vector<double>> pts;
    pts.reserve(cfg.eval.reference_count);
    for (std::size_t i = 0; i < cfg.eval.reference_count; ++i) {
        const Tensor z = draw_latent(rng, net.latent_dim, 0.0);
        pts.push_back(forward_output(net, z).data);
    }
    return pts;
}

struct GroupMetrics {
    double rs_mean = 0.0, rs_median = 0.0;
    double ppl = 0.0;
    double precision = 0.0, recall = 0.0;
};

inline GroupMetrics group_metrics(const NetworkSpec& net, const RunConfig& cfg,
                                  const FeatureSet& ref, const std::vector<Tensor>& codes,
                                  const std::vector<std::uint64_t>& members,
                                  std::uint64_t ppl_seed) {
    GroupMetrics m;
    std::vector<double> rs_values;
    std::vector<std::vector<double>> group_codes, group_outputs;
    rs_values.reserve(members.size());
    for (std::uint64_t id : members) {
        const Tensor out = forward_output(net, codes[id]);
        rs_values.push_back(realism_score(ref, out.data, cfg.eval.rs_cap).value);
        group_codes.push_back(codes[id].data);
        group_outputs.push_back(out.data);
    }
    double sum = 0.0;
    for (double v : rs_values) sum += v;
    m.rs_mean = sum / static_cast<double>(rs_values.size());
    std::vector<double> sorted = rs_values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    m.rs_median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    PplConfig pcfg;
    pcfg.epsilon = cfg.eval.epsilon;
    pcfg.pairs = cfg.eval.pairs;
    pcfg.interpolation =
        cfg.eval.interpolation == "slerp" ? Interpolation::slerp : Interpolation::lerp;
    m.ppl = ppl_over_codes(net, pcfg, group_codes, ppl_seed);

    if (group_outputs.size() > cfg.eval.k) {
        const FeatureSet fake = make_feature_set(group_outputs, cfg.eval.k);
        const PrecisionRecall pr = precision_recall(ref, fake);
        m.precision = pr.precision;
        m.recall = pr.recall;
    }
    return m;
}

} // namespace detail

struct SweepRow {
    double search_bound = 0.0;
    int grid_divisions = 0;
    std::size_t layer = 0;
    detail::GroupMetrics low, high;
    std::uint64_t neuron_evals = 0;
    double runtime_ms = 0.0;
};

inline std::vector<SweepRow> run_sweep(const RunConfig& cfg) {
    detail::ensure_out_dir(cfg.out);
    const NetworkSpec net = detail::load_generator(cfg);
    const std::string hash = cfg.config_hash();
    if (cfg.sweep.search_bounds.empty() || cfg.sweep.grid_divisions.empty() ||
        cfg.sweep.layers.empty())
        throw ConfigError("sweep: empty hyperparameter grid");

    const auto ref_points = detail::reference_points(net, cfg);
    const FeatureSet ref = make_feature_set(ref_points, cfg.eval.k);

    std::vector<SweepRow> rows;
    for (double R : cfg.sweep.search_bounds)
        for (int n : cfg.sweep.grid_divisions)
            for (std::size_t layer : cfg.sweep.layers) {
                RunConfig cell = cfg;
                cell.probe.search_bound = R;
                cell.probe.grid_divisions = n;
                cell.probe.layer = layer;
                const ProbeConfig pc = cell.probe.to_probe_config();
                const auto t0 = std::chrono::steady_clock::now();
                const DetectionResult det = detect_core(net, cell, pc, layer);
                const auto t1 = std::chrono::steady_clock::now();
                SweepRow row;
                row.search_bound = R;
                row.grid_divisions = n;
                row.layer = layer;
                row.neuron_evals = det.stats.neuron_evals;
                row.runtime_ms =
                    std::chrono::duration<double, std::milli>(t1 - t0).count();
                row.low = detail::group_metrics(net, cfg, ref, det.codes,
                                                det.group(GroupKind::low_cla).members,
                                                cfg.seed ^ 0x70706cull);
                row.high = detail::group_metrics(net, cfg, ref, det.codes,
                                                 det.group(GroupKind::high_cla).members,
                                                 cfg.seed ^ 0x70706cull);
                rows.push_back(row);
            }

    ArtifactList artifacts;
    CsvWriter csv(hash);
    csv.header({"search_bound", "grid_divisions", "layer", "rs_low_mean", "rs_low_median",
                "rs_high_mean", "rs_high_median", "ppl_low", "ppl_high", "neuron_evals"});
    for (const SweepRow& r : rows)
        csv.row({fmt_double(r.search_bound), std::to_string(r.grid_divisions),
                 std::to_string(r.layer), fmt_double(r.low.rs_mean), fmt_double(r.low.rs_median),
                 fmt_double(r.high.rs_mean), fmt_double(r.high.rs_median),
                 fmt_double(r.low.ppl), fmt_double(r.high.ppl), std::to_string(r.neuron_evals)});
    csv.save(cfg.out + "/sweep.csv");
    artifacts.add("sweep.csv", "sweep_metrics");

    // Wall-clock measurements are inherently non-reproducible, so they live
    // in their own file and stay out of the deterministic artifact set.
    CsvWriter timing(hash);
    timing.header({"search_bound", "grid_divisions", "layer", "runtime_ms", "neuron_evals"});
    for (const SweepRow& r : rows)
        timing.row({fmt_double(r.search_bound), std::to_string(r.grid_divisions),
                    std::to_string(r.layer), fmt_double(r.runtime_ms),
                    std::to_string(r.neuron_evals)});
    timing.save(cfg.out + "/sweep_timing.csv");
    artifacts.add("sweep_timing.csv", "sweep_timing");

    if (cfg.emit_svg) {
        auto emit_panel = [&](const std::string& name, const std::string& x_label,
                              auto x_of, auto match_others, double low_of(const SweepRow&),
                              double high_of(const SweepRow&), const std::string& metric) {
            SvgSeries low_s{"low CLA", "blue", {}}, high_s{"high CLA", "red", {}};
            for (const SweepRow& r : rows) {
                if (!match_others(r)) continue;
                low_s.points.emplace_back(x_of(r), low_of(r));
                high_s.points.emplace_back(x_of(r), high_of(r));
            }
            if (low_s.points.size() < 2) return;
            const std::string path = metric + "_vs_" + name + ".svg";
            write_text_file(cfg.out + "/" + path,
                            detail::stamp_svg(svg_line_chart(metric + " vs " + x_label,
                                                             x_label, metric,
                                                             {low_s, high_s}, hash),
                                              cfg.svg_timestamps));
            artifacts.add(path, "sweep_plot");
        };
        const double R0 = cfg.sweep.search_bounds.front();
        const int n0 = cfg.sweep.grid_divisions.front();
        const std::size_t l0 = cfg.sweep.layers.front();
        emit_panel(
            "search_bound", "search bound R", [](const SweepRow& r) { return r.search_bound; },
            [&](const SweepRow& r) { return r.grid_divisions == n0 && r.layer == l0; },
            [](const SweepRow& r) { return r.low.rs_mean; },
            [](const SweepRow& r) { return r.high.rs_mean; }, "rs");
        emit_panel(
            "search_bound", "search bound R", [](const SweepRow& r) { return r.search_bound; },
            [&](const SweepRow& r) { return r.grid_divisions == n0 && r.layer == l0; },
            [](const SweepRow& r) { return r.low.ppl; },
            [](const SweepRow& r) { return r.high.ppl; }, "ppl");
        emit_panel(
            "grid_divisions", "grid divisions n",
            [](const SweepRow& r) { return static_cast<double>(r.grid_divisions); },
            [&](const SweepRow& r) { return r.search_bound == R0 && r.layer == l0; },
            [](const SweepRow& r) { return r.low.rs_mean; },
            [](const SweepRow& r) { return r.high.rs_mean; }, "rs");
        emit_panel(
            "grid_divisions", "grid divisions n",
            [](const SweepRow& r) { return static_cast<double>(r.grid_divisions); },
            [&](const SweepRow& r) { return r.search_bound == R0 && r.layer == l0; },
            [](const SweepRow& r) { return r.low.ppl; },
            [](const SweepRow& r) { return r.high.ppl; }, "ppl");
        emit_panel(
            "layer", "layer", [](const SweepRow& r) { return static_cast<double>(r.layer); },
            [&](const SweepRow& r) { return r.search_bound == R0 && r.grid_divisions == n0; },
            [](const SweepRow& r) { return r.low.rs_mean; },
            [](const SweepRow& r) { return r.high.rs_mean; }, "rs");
        emit_panel(
            "layer", "layer", [](const SweepRow& r) { return static_cast<double>(r.layer); },
            [&](const SweepRow& r) { return r.search_bound == R0 && r.grid_divisions == n0; },
            [](const SweepRow& r) { return r.low.ppl; },
            [](const SweepRow& r) { return r.high.ppl; }, "ppl");
    }

    detail::write_manifest(cfg.out, "sweep", hash, artifacts);
    return rows;
}

struct GeometrySummary {
    std::size_t samples = 0;
    double update_identity_max_rel_err = 0.0;
    double linearization_max_rel_err = 0.0;
    double decomposition_max_rel_err = 0.0;
    CaseHistogram histogram;
};

inline GeometrySummary run_geometry(const RunConfig& cfg) {
    detail::ensure_out_dir(cfg.out);
    const NetworkSpec gen = detail::load_generator(cfg);
    if (cfg.disc_model.empty()) throw ConfigError("config: disc_model path not set");
    if (!std::filesystem::exists(cfg.disc_model))
        throw ConfigError("config: disc_model file '" + cfg.disc_model + "' does not exist");
    const NetworkSpec disc = load_model_file(cfg.disc_model);
    const std::string hash = cfg.config_hash();
    std::filesystem::create_directories(cfg.out + "/contributions");

    GeometrySummary summary;
    summary.samples = cfg.geometry.samples;
    summary.histogram.eta = cfg.geometry.eta;

    ArtifactList artifacts;
    Rng rng(cfg.seed);
    double dist_delta_acc[4] = {0, 0, 0, 0};
    double act_delta_acc[4] = {0, 0, 0, 0};
    for (std::size_t s = 0; s < cfg.geometry.samples; ++s) {
        const Tensor z0 = detail::draw_latent(rng, gen.latent_dim, cfg.truncation);
        const Linearization lin = linearize(gen, disc, z0, cfg.geometry.layer);

        // Linearization exactness at the anchor.
        const auto lin_out = lin.generator_output();
        const Tensor exact = forward_output(gen, z0);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < exact.numel(); ++i) {
            num += (lin_out[i] - exact.data[i]) * (lin_out[i] - exact.data[i]);
            den += exact.data[i] * exact.data[i];
        }
        summary.linearization_max_rel_err = std::max(
            summary.linearization_max_rel_err, std::sqrt(num) / std::max(1e-300, std::sqrt(den)));

        // Decomposition check.
        const auto contribs = contributions(lin, lin.h_split);
        double total = contribution_offset(lin);
        for (const ContributionRecord& r : contribs) total += r.contribution;
        summary.decomposition_max_rel_err =
            std::max(summary.decomposition_max_rel_err,
                     std::abs(total - lin.y_lin) / std::max(1.0, std::abs(lin.y_lin)));

        const auto updates = simulate_layer_updates(gen, disc, z0, cfg.geometry.layer,
                                                    cfg.geometry.eta);
        const ForwardTrace tr = forward_trace(gen, z0, cfg.geometry.layer);
        const Tensor& h_prev = cfg.geometry.layer == 0 ? z0 : tr.post[cfg.geometry.layer - 1];
        const LayerSpec& update_layer = gen.layers[cfg.geometry.layer];
        const std::size_t in_n = update_layer.weights.shape[1];
        CsvWriter csv(hash);
        csv.header({"neuron", "contribution", "case", "delta_activation", "delta_distance"});
        for (std::size_t i = 0; i < updates.size(); ++i) {
            const UpdateSimResult& u = updates[i];
            // update identity: h.(w + delta*h) == h.w + delta*||h||^2
            const double* w = update_layer.weights.data.data() + i * in_n;
            double lhs = 0.0, wh = 0.0;
            for (std::size_t jj = 0; jj < in_n; ++jj) {
                lhs += h_prev.data[jj] * u.w_plus[jj];
                wh += h_prev.data[jj] * w[jj];
            }
            const double rhs = wh + u.delta * u.h_prev_norm_sq;
            summary.update_identity_max_rel_err = std::max(
                summary.update_identity_max_rel_err, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));

            const UpdateCase c = classify_case(u.act_before, u.delta);
            csv.row({std::to_string(i), fmt_double(contribs[i].contribution),
                     update_case_name(c), fmt_double(std::abs(u.act_after) - std::abs(u.act_before)),
                     fmt_double(u.dist_after - u.dist_before)});
            if (c == UpdateCase::degenerate) {
                ++summary.histogram.zero_neurons;
                continue;
            }
            ++summary.histogram.active_neurons;
            const auto idx = static_cast<std::size_t>(c);
            ++summary.histogram.counts[idx];
            dist_delta_acc[idx] += u.dist_after - u.dist_before;
            act_delta_acc[idx] += std::abs(u.act_after) - std::abs(u.act_before);
        }
        const std::string path = "contributions/sample_" + std::to_string(s) + ".csv";
        csv.save(cfg.out + "/" + path);
        artifacts.add(path, "contribution_report");
    }
    for (std::size_t c = 0; c < 4; ++c) {
        if (summary.histogram.counts[c] == 0) continue;
        summary.histogram.mean_distance_delta[c] =
            dist_delta_acc[c] / static_cast<double>(summary.histogram.counts[c]);
        summary.histogram.mean_activation_delta[c] =
            act_delta_acc[c] / static_cast<double>(summary.histogram.counts[c]);
    }

    json hist;
    hist["config_hash"] = hash;
    hist["eta"] = cfg.geometry.eta;
    hist["layer"] = cfg.geometry.layer;
    for (std::size_t c = 0; c < 4; ++c) {
        const auto name = update_case_name(static_cast<UpdateCase>(c));
        hist["cases"][name] = {{"count", summary.histogram.counts[c]},
                               {"mean_distance_delta", summary.histogram.mean_distance_delta[c]},
                               {"mean_activation_delta", summary.histogram.mean_activation_delta[c]}};
    }
    hist["active_neurons"] = summary.histogram.active_neurons;
    hist["zero_neurons"] = summary.histogram.zero_neurons;
    write_text_file(cfg.out + "/histogram.json", hist.dump(2) + "\n");
    artifacts.add("histogram.json", "case_histogram");

    json sj;
    sj["command"] = "geometry";
    sj["config_hash"] = hash;
    sj["samples"] = summary.samples;
    sj["update_identity_max_rel_err"] = summary.update_identity_max_rel_err;
    sj["linearization_max_rel_err"] = summary.linearization_max_rel_err;
    sj["decomposition_max_rel_err"] = summary.decomposition_max_rel_err;
    write_text_file(cfg.out + "/geometry_summary.json", sj.dump(2) + "\n");
    artifacts.add("geometry_summary.json", "identity_checks");

    detail::write_manifest(cfg.out, "geometry", hash, artifacts);
    return summary;
}

inline json run_eval(const RunConfig& cfg) {
    detail::ensure_out_dir(cfg.out);
    const NetworkSpec net = detail::load_generator(cfg);
    const std::string hash = cfg.config_hash();
    const ProbeConfig pc = cfg.probe.to_probe_config();
    const DetectionResult det = detect_core(net, cfg, pc, cfg.probe.layer);

    const auto ref_points = detail::reference_points(net, cfg);
    const FeatureSet ref = make_feature_set(ref_points, cfg.eval.k);

    json reports = json::array();
    auto add_group = [&](const std::string& name, const std::vector<std::uint64_t>& members) {
        const detail::GroupMetrics m = detail::group_metrics(net, cfg, ref, det.codes, members,
                                                             cfg.seed ^ 0x70706cull);
        auto push = [&](const std::string& metric, double value) {
            json r;
            r["metric"] = metric;
            r["surrogate_distance"] = true;
            r["k"] = cfg.eval.k;
            r["epsilon"] = cfg.eval.epsilon;
            r["seed"] = cfg.seed;
            r["group"] = name;
            r["value"] = value;
            reports.push_back(r);
        };
        push("rs_mean", m.rs_mean);
        push("rs_median", m.rs_median);
        push("ppl", m.ppl);
        push("precision", m.precision);
        push("recall", m.recall);
    };
    for (const GroupSelection& g : det.groups) add_group(group_kind_name(g.kind), g.members);

    if (cfg.truncation > 0.0) {
        // Truncated-sampling baseline group of the same size.
        Rng rng(cfg.seed ^ 0x7472756e63ull);
        const std::size_t gsize = det.group(GroupKind::high_cla).members.size();
        std::vector<Tensor> tcodes;
        std::vector<std::uint64_t> ids;
        for (std::size_t i = 0; i < gsize; ++i) {
            tcodes.push_back(detail::draw_latent(rng, net.latent_dim, cfg.truncation));
            ids.push_back(i);
        }
        const detail::GroupMetrics m = detail::group_metrics(net, cfg, ref, tcodes, ids,
                                                             cfg.seed ^ 0x70706cull);
        json r;
        r["metric"] = "rs_mean";
        r["surrogate_distance"] = true;
        r["k"] = cfg.eval.k;
        r["epsilon"] = cfg.eval.epsilon;
        r["seed"] = cfg.seed;
        r["group"] = "truncated";
        r["value"] = m.rs_mean;
        reports.push_back(r);
    }

    json out;
    out["config_hash"] = hash;
    out["reports"] = reports;
    write_text_file(cfg.out + "/metrics.json", out.dump(2) + "\n");
    ArtifactList artifacts;
    artifacts.add("metrics.json", "metric_reports");
    detail::write_manifest(cfg.out, "eval", hash, artifacts);
    return out;
}

} // namespace claprobe
