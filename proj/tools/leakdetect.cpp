// leakdetect: simulate -> extract -> fit -> train -> detect -> localize
//
// Exit codes: 0 success, 2 parse error, 3 precondition violation,
// 4 no coherent source, 1 anything else.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "leakdetect/detect.hpp"
#include "leakdetect/dsp.hpp"
#include "leakdetect/hydraulics.hpp"
#include "leakdetect/io.hpp"
#include "leakdetect/model.hpp"
#include "leakdetect/synth.hpp"

namespace fs = std::filesystem;
using namespace leakdetect;

namespace {

struct BandOption {
    double lo = kDefaultBandLoHz;
    double hi = kDefaultBandHiHz;
};

BandOption parse_band(const std::string& s) {
    const auto parts = split(s, ':');
    if (parts.size() != 2)
        throw std::invalid_argument("--band expects <lo>:<hi> in Hz, got '" + s + "'");
    return {std::stod(parts[0]), std::stod(parts[1])};
}

std::vector<std::string> signal_files_in(const std::string& dir) {
    std::vector<std::string> paths;
    if (!fs::is_directory(dir))
        throw std::invalid_argument("'" + dir + "' is not a directory");
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".sig")
            paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw std::invalid_argument("no signal files in '" + dir + "'");
    return paths;
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override) {
    Scenario sc = parse_scenario(scenario_path);
    if (seed_override) sc.seed = *seed_override;
    validate_scenario(sc);  // fail before touching the filesystem

    const auto records = synthesize(sc);
    fs::create_directories(out_dir);
    for (const auto& rec : records) {
        write_signal_file((fs::path(out_dir) / (rec.station_id + ".sig")).string(), rec);
        write_signal_sidecar((fs::path(out_dir) / (rec.station_id + ".hdr")).string(), rec);
    }
    write_manifest((fs::path(out_dir) / "manifest.txt").string(), sc);
    std::cout << "wrote " << records.size() << " signal files to " << out_dir << "\n";
    return 0;
}

int cmd_extract(const std::string& in_dir, const std::string& out_path,
                const BatchingPolicy& policy, BandOption band,
                const std::optional<std::string>& manifest_path) {
    std::optional<Manifest> manifest;
    if (manifest_path) manifest = read_manifest(*manifest_path);

    std::vector<FeatureBatch> all;
    for (const auto& path : signal_files_in(in_dir)) {
        const auto rec = read_signal_file(path);
        auto batches = batch(rec, policy, band.lo, band.hi);
        if (manifest) label_batches(batches, *manifest);
        all.insert(all.end(), batches.begin(), batches.end());
    }
    write_feature_table(out_path, all);
    std::cout << "wrote " << all.size() << " feature rows to " << out_path << "\n";
    return 0;
}

std::vector<FeatureBatch> load_labeled(const std::vector<std::string>& feature_paths,
                                       const std::vector<std::string>& manifest_paths,
                                       const std::string& station_filter,
                                       std::vector<double>* delta_p_per_row) {
    if (manifest_paths.size() != feature_paths.size())
        throw std::invalid_argument("need one --manifest per --features");
    std::vector<FeatureBatch> rows;
    for (std::size_t i = 0; i < feature_paths.size(); ++i) {
        const auto manifest = read_manifest(manifest_paths[i]);
        for (auto& b : read_feature_table(feature_paths[i])) {
            if (b.label == LeakClass::none) continue;
            if (!station_filter.empty() && b.station_id != station_filter) continue;
            rows.push_back(b);
            if (delta_p_per_row)
                delta_p_per_row->push_back(manifest.leak ? manifest.leak->delta_p_bar : 0.0);
        }
    }
    return rows;
}

int cmd_fit(const std::vector<std::string>& feature_paths,
            const std::vector<std::string>& manifest_paths, const std::string& station_filter,
            const std::string& out_path) {
    std::vector<double> delta_p;
    const auto rows = load_labeled(feature_paths, manifest_paths, station_filter, &delta_p);
    std::vector<SplSample> samples;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!(rows[i].leak_band_energy_kpa2 > 0.0) || !(delta_p[i] > 0.0)) continue;
        samples.push_back({delta_p[i], nominal_area_mm2(rows[i].label),
                           std::sqrt(rows[i].leak_band_energy_kpa2)});
    }
    const SplModel model = fit_spl_model(samples);
    write_model_file(out_path, model);
    std::cout << "n = " << fmt_double(model.n) << "\nk = " << fmt_double(model.k)
              << "\nfit_residual_rms = " << fmt_double(model.fit_residual_rms)
              << "\nsample_count = " << model.sample_count << "\n";
    return 0;
}

int cmd_train(const std::vector<std::string>& feature_paths,
              const std::vector<std::string>& manifest_paths, const std::string& station_filter,
              const std::string& xy, const std::string& out_path) {
    const auto parts = split(xy, ',');
    if (parts.size() != 2)
        throw std::invalid_argument("--xy expects <feature_x>,<feature_y>");
    const auto rows = load_labeled(feature_paths, manifest_paths, station_filter, nullptr);
    const auto domain = train_domain(rows, parts[0], parts[1]);
    write_domain_file(out_path, domain);
    std::cout << "trained domain with " << domain.polygon.size() << " vertices\n";
    return 0;
}

int cmd_detect(const std::string& features_path, const std::string& domain_path,
               const std::string& model_path, const std::optional<std::string>& manifest_path,
               std::optional<double> delta_p_flag, const std::string& out_path) {
    const auto batches = read_feature_table(features_path);
    const auto domain = read_domain_file(domain_path);
    const auto model = read_model_file(model_path);
    std::optional<Manifest> manifest;
    if (manifest_path) manifest = read_manifest(*manifest_path);

    std::vector<ReportEntry> entries;
    for (const auto& b : batches) {
        ReportEntry e;
        e.window_start_s = b.window_start_s;
        e.station_id = b.station_id;
        const auto verdict = detect_leak(b, domain);
        e.leak_detected = verdict.leak;
        e.gating = verdict.gating;
        if (!std::isnan(b.flow_mean_m3_h) && !std::isnan(b.static_pressure_mean_bar) &&
            classify_condition(b) == OperatingCondition::standstill && e.gating != Gating::ok) {
            e.gating = Gating::standstill_masked;
        }
        if (e.leak_detected) {
            double dp = 0.0;
            if (delta_p_flag)
                dp = *delta_p_flag;
            else if (manifest && manifest->leak)
                dp = manifest->leak->delta_p_bar;
            else
                dp = b.static_pressure_mean_bar;  // in-out differential vs ambient
            const auto est = classify_hole(b, dp, model);
            e.estimated_area_mm2 = est.estimated_area_mm2;
            e.leak_class = est.leak_class;
        }
        entries.push_back(std::move(e));
    }

    std::optional<ReportScore> score;
    if (manifest && !batches.empty())
        score = score_report(entries, *manifest, batches.front().window_len_s);
    write_report(out_path, entries, score);
    std::size_t detections = 0;
    for (const auto& e : entries) detections += e.leak_detected ? 1 : 0;
    std::cout << "wrote " << entries.size() << " verdicts (" << detections << " detections) to "
              << out_path << "\n";
    return 0;
}

int cmd_localize(const std::string& path_a, const std::string& path_b,
                 const std::string& config_path, BandOption band, double min_peak) {
    const KvFile kv = parse_kv(config_path);
    const auto layout = parse_layout(kv);
    const auto fluid = parse_fluid(kv);
    const auto rec_a = read_signal_file(path_a);
    const auto rec_b = read_signal_file(path_b);
    const auto loc = localize(rec_a, rec_b, layout, fluid, band.lo, band.hi, min_peak);
    std::cout << "position_m = " << fmt_double(loc.position_m) << "\n"
              << "delay_s = " << fmt_double(loc.delay_s) << "\n"
              << "peak_correlation = " << fmt_double(loc.peak_correlation) << "\n"
              << "station_pair = " << loc.station_a << "," << loc.station_b << "\n"
              << "clamped = " << (loc.clamped ? 1 : 0) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pipeline leak-detection toolkit"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "synthesize station signal files");
    std::string scenario_path, out_dir;
    std::optional<std::uint64_t> seed_override;
    sim->add_option("--scenario", scenario_path, "scenario file")->required();
    sim->add_option("--out", out_dir, "output directory")->required();
    sim->add_option("--seed", seed_override, "override the scenario seed");

    // extract
    auto* ext = app.add_subcommand("extract", "batch signals into feature rows");
    std::string in_dir, table_out, band_str = "500:4000";
    std::optional<std::string> manifest_opt;
    BatchingPolicy policy;
    ext->add_option("--in", in_dir, "directory of .sig files")->required();
    ext->add_option("--out", table_out, "feature table path")->required();
    ext->add_option("--window", policy.window_len_s, "window length (s)");
    ext->add_option("--overlap", policy.overlap_fraction, "overlap fraction [0, 0.9]");
    ext->add_option("--band", band_str, "leak band lo:hi (Hz)");
    ext->add_option("--manifest", manifest_opt, "label rows from this ground-truth manifest");

    // fit
    auto* fit = app.add_subcommand("fit", "fit the SPL power law from labeled features");
    std::vector<std::string> fit_features, fit_manifests;
    std::string fit_station, fit_out;
    fit->add_option("--features", fit_features, "feature table(s)")->required();
    fit->add_option("--manifest", fit_manifests, "manifest per feature table")->required();
    fit->add_option("--station", fit_station, "restrict to one station");
    fit->add_option("--out", fit_out, "model file path")->required();

    // train
    auto* train = app.add_subcommand("train", "train the detection domain polygon");
    std::vector<std::string> train_features, train_manifests;
    std::string train_station, train_out;
    std::string train_xy = "static_pressure_mean_bar,leak_band_energy_kpa2";
    train->add_option("--features", train_features, "feature table(s)")->required();
    train->add_option("--manifest", train_manifests, "manifest per feature table")->required();
    train->add_option("--station", train_station, "restrict to one station");
    train->add_option("--xy", train_xy, "feature pair <x>,<y>");
    train->add_option("--out", train_out, "domain file path")->required();

    // detect
    auto* det = app.add_subcommand("detect", "per-batch leak verdicts and hole classes");
    std::string det_features, det_domain, det_model, det_out;
    std::optional<std::string> det_manifest;
    std::optional<double> det_delta_p;
    det->add_option("--features", det_features, "feature table")->required();
    det->add_option("--domain", det_domain, "domain file")->required();
    det->add_option("--model", det_model, "SPL model file")->required();
    det->add_option("--manifest", det_manifest, "ground truth for scoring and delta-p");
    det->add_option("--delta-p", det_delta_p, "differential pressure (bar) for area inversion");
    det->add_option("--out", det_out, "report path")->required();

    // localize
    auto* loc = app.add_subcommand("localize", "cross-correlation leak localization");
    std::string loc_a, loc_b, loc_config, loc_band = "500:4000";
    double min_peak = kDefaultPeakFloor;
    loc->add_option("--a", loc_a, "signal file, first station")->required();
    loc->add_option("--b", loc_b, "signal file, second station")->required();
    loc->add_option("--config", loc_config, "layout/fluid configuration file")->required();
    loc->add_option("--band", loc_band, "leak band lo:hi (Hz)");
    loc->add_option("--min-peak", min_peak, "coherence floor on peak correlation");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(scenario_path, out_dir, seed_override);
        if (ext->parsed())
            return cmd_extract(in_dir, table_out, policy, parse_band(band_str), manifest_opt);
        if (fit->parsed()) return cmd_fit(fit_features, fit_manifests, fit_station, fit_out);
        if (train->parsed())
            return cmd_train(train_features, train_manifests, train_station, train_xy, train_out);
        if (det->parsed())
            return cmd_detect(det_features, det_domain, det_model, det_manifest, det_delta_p,
                              det_out);
        if (loc->parsed())
            return cmd_localize(loc_a, loc_b, loc_config, parse_band(loc_band), min_peak);
    } catch (const ParseError& e) {
        std::cout << "parse error: " << e.what() << "\n";
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const NoCoherentSource& e) {
        std::cout << "no coherent source: " << e.what() << "\n";
        std::cerr << "no coherent source: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cout << "error: " << e.what() << "\n";
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cout << "error: " << e.what() << "\n";
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
