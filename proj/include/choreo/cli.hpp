#pragma once
#ifndef CHOREO_CLI_HPP
#define CHOREO_CLI_HPP

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "choreo/beat_prior.hpp"
#include "choreo/decoder.hpp"
#include "choreo/diffusion.hpp"
#include "choreo/io.hpp"
#include "choreo/kinematics.hpp"
#include "choreo/metrics.hpp"
#include "choreo/objectives.hpp"
#include "choreo/pipeline.hpp"

namespace choreo {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitValidation = 3, kExitNumeric = 4 };

namespace cli {

class UsageError : public Error {
public:
    using Error::Error;
};

// Fills options that were not given on the command line from a JSON config: a flat object
// keyed by long flag names (positionals by their names), or a run manifest, whose "config"
// member is used so any run can be replayed. Then checks the required options.
inline void apply_config(CLI::App& sub, const std::string& path, const std::vector<std::string>& required)
{
    if (!path.empty()) {
        json j = load_json(path);
        if (j.is_object() && j.contains("config") && j.contains("tool")) j = j["config"];
        if (!j.is_object()) throw ParseError(path + ": config must be a JSON object", "/");
        auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        for (auto it = j.begin(); it != j.end(); ++it) {
            CLI::Option* opt = sub.get_option_no_throw("--" + it.key());
            if (!opt) opt = sub.get_option_no_throw(it.key());
            if (!opt || it.key() == "config") throw UsageError("unknown config key '" + it.key() + "' in " + path);
            if (opt->count() > 0 || it.value().is_null()) continue;
            std::vector<std::string> vals;
            if (it.value().is_array())
                for (const auto& v : it.value()) vals.push_back(text(v));
            else
                vals.push_back(text(it.value()));
            try {
                opt->add_result(vals);
                opt->run_callback();
            } catch (const CLI::Error& e) {
                throw UsageError("config key '" + it.key() + "': " + e.what());
            }
        }
    }
    for (const auto& name : required) {
        const CLI::Option* opt = sub.get_option_no_throw(name);
        if (opt && opt->count() == 0) throw UsageError(name + " is required");
    }
}

// Snapshot of every option on a subcommand, as strings keyed by long name.
inline json option_snapshot(const CLI::App& app)
{
    json j = json::object();
    for (const CLI::Option* opt : app.get_options()) {
        const std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames()[0];
        if (name == "help" || name == "config") continue;
        const auto res = opt->results();
        if (!res.empty())
            j[name] = res.back();
        else if (!opt->get_default_str().empty())
            j[name] = opt->get_default_str();
    }
    return j;
}

inline void write_manifest(const fs::path& out, RunManifest& m)
{
    m.add_output(out);
    write_file(fs::path(out.string() + ".manifest.json"), dump_json(m.to_json()));
}

struct BeatArgs {
    std::string input;
    double alpha = kDefaultBeatAlpha;
    std::string out;
};

inline int cmd_beat(const BeatArgs& a, const CLI::App& sub, std::ostream& out)
{
    BeatMask mask;
    const fs::path in(a.input);
    bool from_features = in.extension() == ".csv";
    json j;
    if (!from_features) {
        j = load_json(in);
        const json& body = j.is_object() && j.contains("frames") ? j["frames"] : j;
        from_features = body.is_array() && !body.empty() && body[0].is_array();
    }
    if (from_features)
        mask = extract_beat_mask(load_music_features(in));
    else
        mask = BeatMask::from_values(values_from_json(j, in.string()));
    const BeatPrior prior = gaussian_beat_prior(mask, a.alpha);
    const std::string text = dump_json(prior_to_json(prior));
    if (a.out.empty()) {
        out << text;
        return kExitOk;
    }
    write_file(a.out, text);
    RunManifest m;
    m.version = kVersion;
    m.command = "beat";
    m.config = option_snapshot(sub);
    m.add_input(in);
    write_manifest(a.out, m);
    return kExitOk;
}

struct GenerateArgs {
    std::string music;
    std::string preset = "finedance";
    std::size_t length = 0;
    double soft_scale = kDefaultSoftScale;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string out;
    std::size_t steps = kDefaultSampleSteps;
    double alpha = kDefaultBeatAlpha;
    std::size_t width = 64;
    std::size_t blocks = 8;
    std::uint64_t model_seed = 1;
    std::string global_model;
    std::string local_model;
};

inline DanceDecoder model_or_random(const std::string& path, const DecoderConfig& cfg, std::uint64_t seed)
{
    if (path.empty()) return DanceDecoder::random(cfg, seed);
    DanceDecoder m = load_model(path);
    return m;
}

inline PipelineConfig generate_config(const GenerateArgs& a, const Preset& preset, std::size_t length)
{
    PipelineConfig cfg;
    cfg.length = length;
    cfg.segment_length = preset.segment_length;
    cfg.window_length = preset.window_length;
    cfg.key_length = preset.key_length;
    cfg.soft_scale = a.soft_scale;
    cfg.sample_steps = a.steps;
    cfg.seed = a.seed;
    cfg.jobs = a.jobs;
    return cfg;
}

// Random models are seeded from --model-seed; files override them.
inline std::pair<DanceDecoder, DanceDecoder> generate_models(const GenerateArgs& a, const Preset& preset)
{
    DecoderConfig gcfg;
    gcfg.width = a.width;
    gcfg.blocks = a.blocks;
    gcfg.groups = std::min<std::size_t>(8, a.width);
    gcfg.motion_dim = preset.motion_dim;
    gcfg.spatial_block_enabled = false;
    DecoderConfig lcfg = gcfg;
    lcfg.spatial_block_enabled = true;
    lcfg.spatial_frames = preset.window_length;
    return {model_or_random(a.global_model, gcfg, hash64(a.model_seed, 0, 0)),
            model_or_random(a.local_model, lcfg, hash64(a.model_seed, 0, 1))};
}

inline int cmd_generate(const GenerateArgs& a, const CLI::App& sub, std::ostream& err)
{
    const Preset preset = preset_by_name(a.preset);
    const MusicFeatures mf = load_music_features(a.music);
    const std::size_t length = a.length == 0 ? mf.length() : a.length;
    if (length > mf.length())
        throw ValidationError("--length " + std::to_string(length) + " exceeds the " + std::to_string(mf.length()) +
                              " frames of music");
    if (mf.fps != kDefaultFps) err << "warning: music fps is " << mf.fps << ", the pipeline assumes 30\n";
    const Matrix music = mf.frames.slice_rows(0, length);
    const BeatMask mask = extract_beat_mask({music, mf.fps});
    const BeatPrior prior = length >= 2 ? gaussian_beat_prior(mask, a.alpha) : BeatPrior{{mask.mask.at(0) ? 1.0 : 0.0}, a.alpha};

    const PipelineConfig cfg = generate_config(a, preset, length);
    const auto [global, local] = generate_models(a, preset);

    DanceResult res = generate_dance(music, prior.values, global, local, preset.skeleton(), cfg);
    res.motion.fps = mf.fps;
    save_motion(a.out, res.motion);

    RunManifest m;
    m.version = kVersion;
    m.command = "generate";
    m.config = option_snapshot(sub);
    m.seed = a.seed;
    m.add_input(a.music);
    if (!a.global_model.empty()) m.add_input(a.global_model);
    if (!a.local_model.empty()) m.add_input(a.local_model);
    write_manifest(a.out, m);
    return kExitOk;
}

struct EvaluateArgs {
    std::string motions;
    std::string reference;
    std::string beats;
    std::string skeleton;
    std::size_t runs = 0;
    double sigma = kDefaultBasSigma;
    double theta = kDefaultBeatThreshold;
    std::string out;
    std::string write_features;
};

struct MotionFile {
    fs::path path;
    MotionSequence motion;
};

inline std::vector<MotionFile> load_motion_dir(const fs::path& dir, std::ostream& err)
{
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename().string().find(".manifest.") == std::string::npos)
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<MotionFile> out;
    for (const auto& f : files) {
        std::vector<std::string> warnings;
        out.push_back({f, load_motion(f, &warnings)});
        for (const auto& w : warnings) err << "warning: " << w << "\n";
    }
    return out;
}

inline std::vector<std::vector<MotionFile>> load_runs(const fs::path& dir, std::size_t limit, std::ostream& err)
{
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory()) subdirs.push_back(e.path());
    std::sort(subdirs.begin(), subdirs.end());
    std::vector<std::vector<MotionFile>> runs;
    if (subdirs.empty()) {
        runs.push_back(load_motion_dir(dir, err));
    } else {
        for (const auto& d : subdirs) runs.push_back(load_motion_dir(d, err));
    }
    if (limit > 0) {
        if (runs.size() < limit)
            throw ValidationError("asked for " + std::to_string(limit) + " runs but found " + std::to_string(runs.size()));
        runs.resize(limit);
    }
    for (std::size_t r = 0; r < runs.size(); ++r)
        if (runs[r].size() < 2) throw ValidationError("run " + std::to_string(r) + " needs at least two motion files");
    return runs;
}

inline json features_to_json(const FeatureMatrix& k, const FeatureMatrix& g)
{
    return {{"schema", kSchemaVersion}, {"kinematic", detail::matrix_to_json(k.rows)}, {"geometric", detail::matrix_to_json(g.rows)}};
}

inline std::pair<FeatureMatrix, FeatureMatrix> load_reference(const fs::path& path, const Skeleton& skel, std::ostream& err)
{
    if (fs::is_directory(path)) {
        std::vector<MotionSequence> ms;
        for (auto& f : load_motion_dir(path, err)) ms.push_back(std::move(f.motion));
        require(ms.size() >= 2, "reference directory needs at least two motion files");
        return {extract_feature_matrix(ms, skel, FeatureKind::kinematic), extract_feature_matrix(ms, skel, FeatureKind::geometric)};
    }
    const json j = load_json(path);
    detail::check_schema(j, path.string());
    if (!j.is_object() || !j.contains("kinematic") || !j.contains("geometric"))
        throw ParseError(path.string() + ": reference feature file needs kinematic and geometric rows", "/");
    FeatureMatrix k{detail::matrix_from_json(j["kinematic"], "/kinematic"), FeatureKind::kinematic};
    FeatureMatrix g{detail::matrix_from_json(j["geometric"], "/geometric"), FeatureKind::geometric};
    return {k, g};
}

inline json mean_std_json(const std::vector<double>& v)
{
    if (v.empty()) return nullptr;
    double mean = 0.0, sd = 0.0;
    detail::mean_std(v, mean, sd);
    return {{"mean", mean}, {"std", sd}, {"runs", v}};
}

inline int cmd_evaluate(const EvaluateArgs& a, const CLI::App& sub, std::ostream& out, std::ostream& err)
{
    const auto runs = load_runs(a.motions, a.runs, err);
    const std::size_t dims = runs.front().front().motion.dims();
    for (const auto& run : runs)
        for (const auto& f : run)
            if (f.motion.dims() != dims) throw ValidationError(f.path.string() + ": motion width differs from the other files");
    const Skeleton skel = a.skeleton.empty() ? skeleton_for_motion_dim(dims) : load_skeleton(a.skeleton);

    std::optional<std::pair<FeatureMatrix, FeatureMatrix>> ref;
    if (!a.reference.empty()) ref = load_reference(a.reference, skel, err);

    std::optional<BeatMask> shared_mask;
    const bool beat_dir = !a.beats.empty() && fs::is_directory(a.beats);
    if (!a.beats.empty() && !beat_dir) shared_mask = BeatMask::from_values(values_from_json(load_json(a.beats), a.beats));

    std::vector<double> fid_k, fid_g, pfc_v, bas_v, div_k, div_g;
    for (const auto& run : runs) {
        std::vector<MotionSequence> ms;
        for (const auto& f : run) ms.push_back(f.motion);
        const auto fk = extract_feature_matrix(ms, skel, FeatureKind::kinematic);
        const auto fg = extract_feature_matrix(ms, skel, FeatureKind::geometric);
        if (ref) {
            fid_k.push_back(frechet_distance(fk, ref->first));
            fid_g.push_back(frechet_distance(fg, ref->second));
        }
        div_k.push_back(diversity(fk.rows));
        div_g.push_back(diversity(fg.rows));
        double p = 0.0;
        for (const auto& m : ms) p += pfc(m, skel);
        pfc_v.push_back(p / static_cast<double>(ms.size()));
        if (!a.beats.empty()) {
            double b = 0.0;
            for (const auto& f : run) {
                const BeatMask mask = beat_dir ? BeatMask::from_values(values_from_json(
                                                     load_json(fs::path(a.beats) / f.path.filename()), f.path.filename().string()))
                                               : *shared_mask;
                if (mask.size() != f.motion.length())
                    throw ValidationError(f.path.string() + ": beat mask has " + std::to_string(mask.size()) + " frames, motion has " +
                                          std::to_string(f.motion.length()));
                b += beat_alignment_score(mask, detect_motion_beats(f.motion, skel, a.theta), a.sigma);
            }
            bas_v.push_back(b / static_cast<double>(run.size()));
        }
    }
    json report = {{"schema", kSchemaVersion},     {"runs", runs.size()},           {"fid_k", mean_std_json(fid_k)},
                   {"fid_g", mean_std_json(fid_g)}, {"pfc", mean_std_json(pfc_v)},   {"bas", mean_std_json(bas_v)},
                   {"div_k", mean_std_json(div_k)}, {"div_g", mean_std_json(div_g)}};

    RunManifest m;
    m.version = kVersion;
    m.command = "evaluate";
    m.config = option_snapshot(sub);
    for (const auto& run : runs)
        for (const auto& f : run) m.add_input(f.path);
    if (!a.reference.empty() && fs::is_regular_file(a.reference)) m.add_input(a.reference);

    if (!a.write_features.empty()) {
        std::vector<MotionSequence> all;
        for (const auto& run : runs)
            for (const auto& f : run) all.push_back(f.motion);
        write_file(a.write_features, dump_json(features_to_json(extract_feature_matrix(all, skel, FeatureKind::kinematic),
                                                                extract_feature_matrix(all, skel, FeatureKind::geometric))));
    }
    const std::string text = dump_json(report);
    if (a.out.empty()) {
        out << text;
        return kExitOk;
    }
    write_file(a.out, text);
    if (!a.write_features.empty()) m.add_output(a.write_features);
    write_manifest(a.out, m);
    return kExitOk;
}

struct TrainArgs {
    std::string data;
    std::string music;
    std::string preset = "finedance";
    std::size_t steps = 500;
    double step_size = SpsaSchedule{}.a;
    double perturbation = SpsaSchedule{}.c;
    std::uint64_t seed = 0;
    std::size_t frames = 16;
    std::size_t t = 200;
    std::string out;
    std::string save_model;
};

inline int cmd_train_toy(const TrainArgs& a, const CLI::App& sub, std::ostream& out, std::ostream& err)
{
    const Preset preset = preset_by_name(a.preset);
    Skeleton skel = preset.skeleton();
    TrainingBatch batch = make_toy_batch(skel, a.frames, a.t);
    if (!a.data.empty()) {
        std::vector<std::string> warnings;
        batch.clean = load_motion(a.data, &warnings);
        for (const auto& w : warnings) err << "warning: " << w << "\n";
        skel = skeleton_for_motion_dim(batch.clean.dims());
        Rng rng(hash64(a.seed, 1, 0));
        batch.noise = normal_matrix(batch.clean.length(), batch.clean.dims(), rng);
        if (a.music.empty()) {
            batch.music = normal_matrix(batch.clean.length(), kMusicDim, rng);
            BeatMask mask;
            for (std::size_t f = 0; f < batch.clean.length(); ++f) {
                mask.mask.push_back(f % 8 == 0 ? 1 : 0);
                batch.music(f, kMusicDim - 1) = mask.mask.back();
            }
            batch.beat_prior = gaussian_beat_prior(mask).values;
        }
    }
    if (!a.music.empty()) {
        const MusicFeatures mf = load_music_features(a.music);
        if (mf.length() < batch.clean.length()) throw ValidationError("music is shorter than the training sequence");
        batch.music = mf.frames.slice_rows(0, batch.clean.length());
        batch.beat_prior = gaussian_beat_prior(extract_beat_mask({batch.music, mf.fps})).values;
    }
    const DecoderConfig cfg = toy_decoder_config(skel.motion_dim(), batch.clean.length());
    DanceDecoder model = DanceDecoder::random(cfg, a.seed);
    SpsaSchedule gains;
    gains.a = a.step_size;
    gains.c = a.perturbation;
    const auto curve = train_toy(model, batch, skel, preset.weights, make_schedule(cfg.diffusion_steps), a.steps, gains, a.seed);

    std::ostringstream csv;
    csv << std::setprecision(17) << "step,total,simple,pos,vel,acc,foot,trans\n";
    for (std::size_t k = 0; k < curve.size(); ++k) {
        const auto& r = curve[k];
        csv << k << ',' << r.total << ',' << r.simple << ',' << r.pos << ',' << r.vel << ',' << r.acc << ',' << r.foot << ','
            << r.trans << '\n';
    }
    err << "loss " << curve.front().total << " -> " << curve.back().total << " (" << curve.back().total / curve.front().total
        << " of initial)\n";
    if (!a.save_model.empty()) save_model(a.save_model, model);
    if (a.out.empty()) {
        out << csv.str();
        return kExitOk;
    }
    write_file(a.out, csv.str());
    RunManifest m;
    m.version = kVersion;
    m.command = "train-toy";
    m.config = option_snapshot(sub);
    m.seed = a.seed;
    if (!a.data.empty()) m.add_input(a.data);
    if (!a.music.empty()) m.add_input(a.music);
    if (!a.save_model.empty()) m.add_output(a.save_model);
    write_manifest(a.out, m);
    return kExitOk;
}

inline int cmd_info(const std::string& path, std::ostream& out)
{
    json j;
    j["version"] = kVersion;
    if (path.empty()) {
        json presets = json::array();
        for (const auto& p : {preset_finedance(), preset_aistpp()}) {
            DecoderConfig lc;
            lc.motion_dim = p.motion_dim;
            lc.spatial_frames = p.window_length;
            DecoderConfig gc = lc;
            gc.spatial_block_enabled = false;
            presets.push_back({{"name", p.name},
                               {"segment_length", p.segment_length},
                               {"window_length", p.window_length},
                               {"key_length", p.key_length},
                               {"motion_dim", p.motion_dim},
                               {"joints", joints_for_motion_dim(p.motion_dim)},
                               {"global_parameters", DanceDecoder(gc).parameter_count()},
                               {"local_parameters", DanceDecoder(lc).parameter_count()},
                               {"loss_weights",
                                {{"pos", p.weights.pos}, {"vel", p.weights.vel}, {"acc", p.weights.acc}, {"foot", p.weights.foot},
                                 {"trans", p.weights.trans}}}});
        }
        j["presets"] = presets;
        j["exit_codes"] = {{"ok", 0}, {"failure", 1}, {"usage", 2}, {"validation", 3}, {"numeric", 4}};
    } else {
        const std::string bytes = read_file(path);
        if (bytes.size() >= 8 && std::memcmp(bytes.data(), kModelMagic, 8) == 0) {
            DanceDecoder m = deserialize_model(bytes, path);
            j["kind"] = "model";
            j["config"] = config_to_json(m.config());
            j["parameters"] = m.parameter_count();
            j["trainable_parameters"] = m.parameter_count(true);
        } else {
            const MotionSequence m = motion_from_json(parse_json(bytes, path), path);
            j["kind"] = "motion";
            j["frames"] = m.length();
            j["dims"] = m.dims();
            j["fps"] = m.fps;
            j["joints"] = joints_for_motion_dim(m.dims());
        }
        j["digest"] = "fnv1a64:" + hex64(fnv1a64(bytes));
    }
    out << dump_json(j);
    return kExitOk;
}

} // namespace cli

// Entry point shared by the executable and the tests. Exit codes: 0 ok, 1 I/O or other
// failure, 2 usage, 3 validation (including malformed files), 4 numeric.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Music-to-dance generation engine", "choreo"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    std::string config_path;
    auto configure = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON file with flag values (or a run manifest); flags override it");
    };

    cli::BeatArgs beat;
    auto* s_beat = app.add_subcommand("beat", "Gaussian beat prior from music features or a beat mask");
    s_beat->add_option("input", beat.input, "features (.csv/.json) or beat mask (.json) [required]");
    s_beat->add_option("--alpha", beat.alpha, "smoothing factor in (0, 1)")->capture_default_str();
    s_beat->add_option("--out", beat.out, "output prior JSON (stdout when omitted)");
    configure(s_beat);

    cli::GenerateArgs gen;
    auto* s_gen = app.add_subcommand("generate", "two-stage dance generation");
    s_gen->add_option("--music", gen.music, "music features (.csv/.json), 35 columns [required]");
    s_gen->add_option("--preset", gen.preset, "finedance or aistpp")->capture_default_str();
    s_gen->add_option("--length", gen.length, "frames to generate (default: all music frames)")->capture_default_str();
    s_gen->add_option("--soft-scale", gen.soft_scale, "soft cue guidance scale s")->capture_default_str();
    s_gen->add_option("--seed", gen.seed, "root sampling seed")->capture_default_str();
    s_gen->add_option("--jobs", gen.jobs, "window decoding workers")->capture_default_str();
    s_gen->add_option("--out", gen.out, "output motion JSON [required]");
    s_gen->add_option("--steps", gen.steps, "DDIM steps")->capture_default_str();
    s_gen->add_option("--alpha", gen.alpha, "beat prior smoothing factor")->capture_default_str();
    s_gen->add_option("--width", gen.width, "latent width of random models")->capture_default_str();
    s_gen->add_option("--blocks", gen.blocks, "decoder blocks of random models")->capture_default_str();
    s_gen->add_option("--model-seed", gen.model_seed, "initialization seed of random models")->capture_default_str();
    s_gen->add_option("--global-model", gen.global_model, "global-stage model file");
    s_gen->add_option("--local-model", gen.local_model, "local-stage model file");
    configure(s_gen);

    cli::EvaluateArgs ev;
    auto* s_ev = app.add_subcommand("evaluate", "FID, PFC, BAS and diversity over generated motions");
    s_ev->add_option("--motions", ev.motions, "directory of motion JSON files, or of run subdirectories [required]");
    s_ev->add_option("--reference", ev.reference, "reference feature file or directory of reference motions");
    s_ev->add_option("--beats", ev.beats, "beat mask file shared by all motions, or directory of per-motion masks");
    s_ev->add_option("--skeleton", ev.skeleton, "skeleton JSON (default: built-in for the motion width)");
    s_ev->add_option("--runs", ev.runs, "number of runs to use (0 = all)")->capture_default_str();
    s_ev->add_option("--sigma", ev.sigma, "BAS kernel width in frames")->capture_default_str();
    s_ev->add_option("--theta", ev.theta, "relative motion-beat threshold")->capture_default_str();
    s_ev->add_option("--out", ev.out, "report JSON (stdout when omitted)");
    s_ev->add_option("--write-features", ev.write_features, "also write the motions' features as a reference file");
    configure(s_ev);

    cli::TrainArgs tr;
    auto* s_tr = app.add_subcommand("train-toy", "overfit a tiny decoder on one sequence with SPSA");
    s_tr->add_option("--data", tr.data, "training motion JSON (default: synthetic sequence)");
    s_tr->add_option("--music", tr.music, "music features for the sequence (default: synthetic)");
    s_tr->add_option("--preset", tr.preset, "loss weights and skeleton: finedance or aistpp")->capture_default_str();
    s_tr->add_option("--steps", tr.steps, "SPSA steps")->capture_default_str();
    s_tr->add_option("--step-size", tr.step_size, "SPSA gain a")->capture_default_str();
    s_tr->add_option("--perturbation", tr.perturbation, "SPSA perturbation c")->capture_default_str();
    s_tr->add_option("--seed", tr.seed, "model and perturbation seed")->capture_default_str();
    s_tr->add_option("--frames", tr.frames, "synthetic sequence length")->capture_default_str();
    s_tr->add_option("--t", tr.t, "diffusion timestep of the training batch")->capture_default_str();
    s_tr->add_option("--out", tr.out, "loss curve CSV (stdout when omitted)");
    s_tr->add_option("--save-model", tr.save_model, "write the trained model");
    configure(s_tr);

    std::string info_path;
    auto* s_info = app.add_subcommand("info", "version, presets, or a summary of a model or motion file");
    s_info->add_option("path", info_path, "model or motion file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (s_beat->parsed()) {
            cli::apply_config(*s_beat, config_path, {"input"});
            return cli::cmd_beat(beat, *s_beat, out);
        }
        if (s_gen->parsed()) {
            cli::apply_config(*s_gen, config_path, {"--music", "--out"});
            return cli::cmd_generate(gen, *s_gen, err);
        }
        if (s_ev->parsed()) {
            cli::apply_config(*s_ev, config_path, {"--motions"});
            return cli::cmd_evaluate(ev, *s_ev, out, err);
        }
        if (s_tr->parsed()) {
            cli::apply_config(*s_tr, config_path, {});
            return cli::cmd_train_toy(tr, *s_tr, out, err);
        }
        if (s_info->parsed()) return cli::cmd_info(info_path, out);
    } catch (const cli::UsageError& e) {
        err << e.what() << "\nRun with --help for more information.\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ValidationError& e) {
        err << "invalid input: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

} // namespace choreo

#endif // CHOREO_CLI_HPP
