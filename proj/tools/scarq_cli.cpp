// scarq command-line front end.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "scarq/dataset.hpp"
#include "scarq/metrics.hpp"
#include "scarq/nifti.hpp"
#include "scarq/phantom.hpp"
#include "scarq/pipeline.hpp"
#include "scarq/qc.hpp"
#include "scarq/report.hpp"
#include "scarq/synthesis.hpp"

namespace fs = std::filesystem;
using namespace scarq;

namespace {

enum Exit { ok = 0, input_error = 1, config_error = 2, partial = 3 };

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create " + dir.string());
}

SliceOrder parse_order(const std::string& s) {
    if (s == "stored") return SliceOrder::stored;
    if (s == "reversed") return SliceOrder::reversed;
    throw ConfigError("slice order must be stored or reversed");
}

// Flags given on the command line override the config file.
struct SegmentFlags {
    std::string config_file;
    std::string variant;
    std::string myo_seg;
    std::string scar_seg;
    std::string regressor;
    std::string pred_dir;
    std::optional<std::uint64_t> seed;
    bool hd95 = false;
};

void add_segment_flags(CLI::App* cmd, SegmentFlags& f) {
    cmd->add_option("--config", f.config_file, "key=value config file");
    cmd->add_option("--variant", f.variant, "pipeline variant a|b|c|d|e");
    cmd->add_option("--myo-seg", f.myo_seg, "myocardium segmenter: em|oracle|import");
    cmd->add_option("--scar-seg", f.scar_seg, "scar segmenter: nsd|fwhm|em|otsu|oracle|import");
    cmd->add_option("--regressor", f.regressor, "box regressor: heuristic|oracle|external:<csv>");
    cmd->add_option("--pred-dir", f.pred_dir, "directory with <id>_<stage>.nii predictions");
    cmd->add_option("--seed", f.seed, "root seed");
    cmd->add_flag("--hd95", f.hd95, "report 95th-percentile Hausdorff distance");
}

PipelineConfig build_config(const SegmentFlags& f) {
    PipelineConfig c;
    if (!f.config_file.empty()) c = load_config(f.config_file);
    std::string overrides;
    if (!f.variant.empty()) overrides += "variant=" + f.variant + "\n";
    if (!f.myo_seg.empty()) overrides += "myo_seg=" + f.myo_seg + "\n";
    if (!f.scar_seg.empty()) overrides += "scar_seg=" + f.scar_seg + "\n";
    if (!f.regressor.empty()) overrides += "regressor=" + f.regressor + "\n";
    if (!f.pred_dir.empty()) overrides += "prediction_dir=" + f.pred_dir + "\n";
    if (f.seed) overrides += "seed=" + std::to_string(*f.seed) + "\n";
    if (f.hd95) overrides += "hd_mode=p95\n";
    c = parse_config(overrides, c);
    c.validate();
    return c;
}

int cmd_ingest(const fs::path& dir, const std::string& out, const std::string& order_name) {
    const SliceOrder order = parse_order(order_name);
    auto entries = discover_dataset(dir);
    int bad = 0;
    for (auto& e : entries) {
        try {
            e.pathological = load_subject(e, order).pathological;
        } catch (const Error& err) {
            std::cerr << e.id << ": " << err.what() << '\n';
            ++bad;
        }
    }
    const std::string manifest = format_dataset_manifest(entries);
    if (out.empty()) std::cout << manifest;
    else write_text(out, manifest);
    std::cerr << entries.size() << " subjects, " << bad << " unreadable\n";
    if (entries.empty()) return input_error;
    return bad ? input_error : ok;
}

int cmd_phantom(const fs::path& out, int count, double fraction, std::uint64_t seed, double noise) {
    PopulationRanges ranges;
    ranges.noise_sigma = noise;
    const auto subjects = generate_population(count, fraction, seed, ranges);
    save_dataset(out, subjects);
    std::ostringstream manifest;
    manifest << "id,pathological\n";
    for (const auto& s : subjects) manifest << s.id << ',' << (s.pathological.value_or(false) ? 1 : 0) << '\n';
    write_text(out / "phantoms.csv", manifest.str());
    std::cerr << subjects.size() << " phantoms written to " << out.string() << '\n';
    return ok;
}

void write_run(const fs::path& out, const DatasetRun& run, std::span<const SubjectRecord> subjects) {
    make_dir(out);
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        save_label_map(out / (subjects[i].id + "_pred.nii"), run.predictions[i]);
    }
    write_text(out / "report.csv", format_report_csv(run.report.rows));
    write_text(out / "report.json", format_report_json(run.report));
    write_text(out / "events.csv", format_events_csv(run.report.events));
    write_text(out / "config.txt", run.report.config_echo);
}

int cmd_segment(const fs::path& data, const fs::path& out, const SegmentFlags& flags, int threads,
                bool gt_myocardium, const std::string& order) {
    const PipelineConfig config = build_config(flags);
    const auto subjects = load_dataset(data, parse_order(order));
    if (subjects.empty()) throw IoError("no subjects found in " + data.string());
    const DatasetRun run = run_dataset(subjects, config, threads, gt_myocardium);
    write_run(out, run, subjects);
    std::cerr << subjects.size() << " subjects segmented with " << config_label(config) << '\n';
    return run.report.partial() ? partial : ok;
}

int cmd_qc(const std::vector<std::string>& files, double min_ratio) {
    std::cout << "file,slice,closed,scar_px,scar_px_filtered\n";
    for (const auto& f : files) {
        const LabelMap labels = load_label_map(f);
        for (int z = 0; z < labels.dims().nz; ++z) {
            const LabelSlice s = labels.slice(z);
            Mask2D wall(s.width, s.height, 0);
            for (std::size_t i = 0; i < s.size(); ++i) wall.data[i] = s.data[i] == label::myocardium || s.data[i] == label::scar;
            const Mask2D scar = class_mask(s, label::scar);
            const bool closed = count_nonzero(wall) > 0 && is_closed_myocardium(wall);
            const std::size_t kept = count_nonzero(scar_ratio_filter(scar, wall, min_ratio));
            std::cout << f << ',' << z << ',' << (closed ? 1 : 0) << ',' << count_nonzero(scar) << ',' << kept << '\n';
        }
    }
    return ok;
}

int cmd_synth(const fs::path& data, const fs::path& out, const std::string& config_file,
              std::optional<std::uint64_t> seed, std::optional<int> augment, bool no_swap) {
    PipelineConfig c;
    if (!config_file.empty()) c = load_config(config_file);
    if (seed) c.synth_seed = *seed;
    if (augment) c.synth_augment = *augment;
    if (no_swap) c.synth_swap = false;
    c.validate();
    const auto subjects = load_dataset(data);
    const auto requests = plan_synthetic_dataset(subjects, c);
    const auto rows = emit_dataset(requests, out, c.synth_seed);
    std::cerr << rows.size() << " synthetic subjects written to " << out.string() << '\n';
    return ok;
}

std::optional<fs::path> find_prediction(const fs::path& dir, const std::string& id) {
    for (const char* suffix : {"_pred.nii", "_pred.nii.gz", "_label.nii", "_label.nii.gz", ".nii", ".nii.gz"}) {
        const auto p = dir / (id + suffix);
        if (fs::is_regular_file(p)) return p;
    }
    return std::nullopt;
}

int cmd_metrics(const fs::path& manual, const fs::path& automatic, const std::string& out, bool hd95,
                const std::string& order) {
    const SliceOrder so = parse_order(order);
    std::vector<MetricRow> rows;
    int missing = 0;
    for (const auto& e : discover_dataset(manual)) {
        if (!e.labels) continue;
        const auto pred = find_prediction(automatic, e.id);
        if (!pred) {
            std::cerr << e.id << ": no prediction in " << automatic.string() << '\n';
            ++missing;
            continue;
        }
        const auto r = evaluate_prediction(e.id, load_label_map(*e.labels, so), load_label_map(*pred, so),
                                           hd95 ? HausdorffMode::percentile95 : HausdorffMode::max);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    QuantReport report;
    report.rows = std::move(rows);
    report.sort();
    const std::string csv = format_report_csv(report.rows);
    if (out.empty()) std::cout << csv;
    else write_text(out, csv);
    if (report.rows.empty()) return input_error;
    return missing ? partial : ok;
}

int cmd_ablate(const fs::path& data, const std::vector<std::string>& configs, const fs::path& out, int threads) {
    std::vector<PipelineConfig> parsed;
    for (const auto& f : configs) parsed.push_back(load_config(f));
    if (parsed.size() < 2) throw ConfigError("ablate needs at least two --config files");
    for (const auto& c : parsed) c.validate();
    const auto subjects = load_dataset(data);
    const AblationResult result = run_ablation(subjects, parsed, threads);
    make_dir(out);
    write_text(out / "ablation.csv", format_ablation_csv(result));
    const std::string summary = format_ablation_summary(result);
    write_text(out / "summary.csv", summary);
    std::cout << summary;
    return ok;
}

int cmd_report(const fs::path& input, const fs::path& out) {
    QuantReport report;
    report.rows = parse_report_csv(read_text(input));
    make_dir(out);
    write_text(out / "report.json", format_report_json(report));
    write_text(out / "report.csv", format_report_csv(report.rows));
    for (const char* cls : {"myocardium", "scar"}) {
        const PairedSeries series = volume_series(report.rows, cls);
        if (series.manual.size() < 2) {
            std::cerr << cls << ": fewer than two subjects with volumes, plots skipped\n";
            continue;
        }
        const std::string name(cls);
        write_text(out / (name + "_scatter.svg"), scatter_svg(series, name + " volume (cm3)"));
        write_text(out / (name + "_bland_altman.svg"), bland_altman_svg(series, name + " volume (cm3)"));
        const AgreementResult ba = bland_altman(series);
        std::cout << name << ": n=" << series.manual.size() << " r=" << pearson_r(series) << " bias=" << ba.bias
                  << " loa=[" << ba.loa_low << ", " << ba.loa_high << "]\n";
    }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cascaded LGE scar quantification toolkit"};
    app.require_subcommand(1);

    std::string order = "stored";
    int threads = 0;

    auto* ingest = app.add_subcommand("ingest", "scan a NIfTI directory and write a dataset manifest");
    std::string ingest_dir, ingest_out;
    ingest->add_option("dir", ingest_dir, "dataset directory")->required();
    ingest->add_option("-o,--out", ingest_out, "manifest CSV (stdout when omitted)");
    ingest->add_option("--slice-order", order, "stored|reversed");

    auto* phantom = app.add_subcommand("phantom", "generate a phantom population");
    std::string phantom_out;
    int phantom_n = 20;
    double phantom_fraction = 0.7;
    double phantom_noise = 0.02;
    std::uint64_t phantom_seed = 0;
    phantom->add_option("-o,--out", phantom_out, "output directory")->required();
    phantom->add_option("-n,--count", phantom_n, "number of subjects");
    phantom->add_option("--pathological-fraction", phantom_fraction, "share of subjects with scar");
    phantom->add_option("--noise", phantom_noise, "Gaussian noise sigma");
    phantom->add_option("--seed", phantom_seed, "root seed");

    auto* segment = app.add_subcommand("segment", "run the pipeline on a dataset");
    std::string seg_data, seg_out;
    bool gt_myo = false;
    SegmentFlags seg_flags;
    segment->add_option("--data", seg_data, "dataset directory")->required();
    segment->add_option("-o,--out", seg_out, "output directory")->required();
    segment->add_option("--threads", threads, "worker threads (0 = all cores)");
    segment->add_option("--slice-order", order, "stored|reversed");
    segment->add_flag("--gt-myocardium", gt_myo, "replace the myocardium stage with ground truth");
    add_segment_flags(segment, seg_flags);

    auto* qc = app.add_subcommand("qc", "closedness and scar-ratio checks on label maps");
    std::vector<std::string> qc_files;
    double qc_ratio = default_min_scar_ratio;
    qc->add_option("labels", qc_files, "label NIfTI files")->required();
    qc->add_option("--min-ratio", qc_ratio, "scar component share of the wall to keep");

    auto* synth = app.add_subcommand("synth", "emit an augmented synthetic dataset");
    std::string synth_data, synth_out, synth_config;
    std::optional<std::uint64_t> synth_seed;
    std::optional<int> synth_augment;
    bool synth_no_swap = false;
    synth->add_option("--data", synth_data, "dataset directory with labels")->required();
    synth->add_option("-o,--out", synth_out, "output directory")->required();
    synth->add_option("--config", synth_config, "config file (synth_* keys)");
    synth->add_option("--seed", synth_seed, "root seed");
    synth->add_option("--augment", synth_augment, "augmented copies per subject");
    synth->add_flag("--no-swap", synth_no_swap, "skip label/style swaps");

    auto* metrics = app.add_subcommand("metrics", "compare predicted label maps with manual labels");
    std::string met_manual, met_auto, met_out;
    bool met_hd95 = false;
    metrics->add_option("--manual", met_manual, "dataset directory with manual labels")->required();
    metrics->add_option("--auto", met_auto, "directory with <id>_pred.nii files")->required();
    metrics->add_option("-o,--out", met_out, "report CSV (stdout when omitted)");
    metrics->add_flag("--hd95", met_hd95, "95th-percentile Hausdorff distance");
    metrics->add_option("--slice-order", order, "stored|reversed");

    auto* ablate = app.add_subcommand("ablate", "run several configs and compare per-slice DSC");
    std::string abl_data, abl_out;
    std::vector<std::string> abl_configs;
    ablate->add_option("--data", abl_data, "dataset directory")->required();
    ablate->add_option("--config", abl_configs, "config files (two or more)")->required();
    ablate->add_option("-o,--out", abl_out, "output directory")->required();
    ablate->add_option("--threads", threads, "worker threads (0 = all cores)");

    auto* report = app.add_subcommand("report", "JSON and SVG plots from a report CSV");
    std::string rep_in, rep_out;
    report->add_option("--input", rep_in, "report.csv")->required();
    report->add_option("-o,--out", rep_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config_error;
    }

    try {
        if (*ingest) return cmd_ingest(ingest_dir, ingest_out, order);
        if (*phantom) return cmd_phantom(phantom_out, phantom_n, phantom_fraction, phantom_seed, phantom_noise);
        if (*segment) return cmd_segment(seg_data, seg_out, seg_flags, threads, gt_myo, order);
        if (*qc) return cmd_qc(qc_files, qc_ratio);
        if (*synth) return cmd_synth(synth_data, synth_out, synth_config, synth_seed, synth_augment, synth_no_swap);
        if (*metrics) return cmd_metrics(met_manual, met_auto, met_out, met_hd95, order);
        if (*ablate) return cmd_ablate(abl_data, abl_configs, abl_out, threads);
        if (*report) return cmd_report(rep_in, rep_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return input_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return input_error;
    }
    return ok;
}
