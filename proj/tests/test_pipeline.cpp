#include <doctest.h>

#include <filesystem>
#include <set>

#include "scarq/dataset.hpp"
#include "scarq/phantom.hpp"
#include "scarq/pipeline.hpp"
#include "scarq/report.hpp"

using namespace scarq;

namespace {

const std::vector<SubjectRecord>& population() {
    static const auto pop = generate_population(4, 0.5, 42);
    return pop;
}

double mean_dsc(const QuantReport& r, const std::string& cls) {
    double sum = 0.0;
    int n = 0;
    for (const auto& row : r.rows) {
        if (row.cls != cls || row.slice == slice_all || row.slice == slice_mean) continue;
        sum += row.dsc;
        ++n;
    }
    return sum / n;
}

PipelineConfig oracle_config(Variant v) {
    PipelineConfig c;
    c.variant = v;
    c.regressor = variant_uses_box(v) ? "oracle" : "";
    c.myo_seg = "oracle";
    c.scar_seg = "oracle";
    return c;
}

}  // namespace

TEST_CASE("variant helpers and validation") {
    CHECK(parse_variant("c") == Variant::c);
    CHECK_THROWS_AS(parse_variant("f"), ConfigError);
    CHECK(variant_uses_box(Variant::a));
    CHECK_FALSE(variant_uses_box(Variant::d));
    CHECK(variant_is_cascaded(Variant::b));
    CHECK_FALSE(variant_is_cascaded(Variant::c));
    PipelineConfig d;
    d.variant = Variant::d;
    CHECK_NOTHROW(d.validate());
    CHECK(d.effective_regressor() == "none");
    d.regressor = "heuristic";
    CHECK_THROWS_AS(d.validate(), ConfigError);
    PipelineConfig imp;
    imp.myo_seg = "import";
    CHECK_THROWS_AS(imp.validate(), ConfigError);
}

TEST_CASE("config text") {
    const auto c = parse_config("# comment\nvariant = c\nscar_seg=fwhm\nrevote=false\nseed=17\n");
    CHECK(c.variant == Variant::c);
    CHECK(c.scar_seg == "fwhm");
    CHECK_FALSE(c.revote);
    CHECK(c.seed == 17);
    const auto back = parse_config(format_config(c));
    CHECK(format_config(back) == format_config(c));
    CHECK_THROWS_AS(parse_config("colour=blue"), ConfigError);
    CHECK_THROWS_AS(parse_config("nsd_n=abc"), ConfigError);
    CHECK(config_label(PipelineConfig{}) == "a:heuristic/em/nsd");
}

TEST_CASE("oracle components give perfect scores in every variant") {
    for (auto v : {Variant::a, Variant::b, Variant::c, Variant::d}) {
        const auto run = run_dataset(population(), oracle_config(v), 1);
        for (const auto& row : run.report.rows) {
            if (row.slice == slice_all || row.slice == slice_mean) continue;
            REQUIRE(row.dsc == 1.0);
        }
        CHECK_FALSE(run.report.partial());
        for (std::size_t i = 0; i < population().size(); ++i) {
            const auto& truth = *population()[i].labels;
            CHECK(wall_mask(run.predictions[i]) == wall_mask(truth));
            CHECK(scar_mask(run.predictions[i]) == scar_mask(truth));
        }
    }
}

TEST_CASE("report rows cover every slice once") {
    const auto run = run_dataset(population(), oracle_config(Variant::a), 1);
    std::size_t slices = 0;
    for (const auto& s : population()) slices += static_cast<std::size_t>(s.image.dims().nz);
    std::set<std::tuple<std::string, std::string, std::string>> keys;
    for (const auto& r : run.report.rows) CHECK(keys.insert({r.subject_id, r.slice, r.cls}).second);
    CHECK(run.report.rows.size() == 2 * (slices + 2 * population().size()));
}

TEST_CASE("gt myocardium with nsd recovers scar") {
    PipelineConfig c;
    const auto run = run_dataset(population(), c, 1, true);
    CHECK(mean_dsc(run.report, "scar") >= 0.95);
    CHECK(mean_dsc(run.report, "myocardium") == 1.0);
    SubjectRecord unlabeled = population()[0];
    unlabeled.labels.reset();
    CHECK_THROWS_AS(replace_with_gt_myocardium(unlabeled, c), InvalidArgument);
    const auto o = oracle_config(Variant::a);
    CHECK(replace_with_gt_myocardium(population()[0], o).prediction == run_subject(population()[0], o).prediction);
}

TEST_CASE("variants a and b agree when the box is the whole frame") {
    SubjectRecord s = population()[0];
    auto data = s.labels->data();
    const auto d = s.labels->dims();
    data[0] = label::cavity;
    data[d.slice_count() - 1] = label::cavity;
    s.labels = LabelMap(d, s.labels->spacing(), data);
    PipelineConfig a;
    a.regressor = "oracle";
    a.gt_margin = 0.0;
    PipelineConfig b = a;
    b.variant = Variant::b;
    b.regressor = "";
    CHECK(run_subject(s, a).prediction == run_subject(s, b).prediction);
}

TEST_CASE("determinism and thread independence") {
    PipelineConfig c;
    const auto one = run_dataset(population(), c, 1);
    const auto two = run_dataset(population(), c, 3);
    CHECK(format_report_csv(one.report.rows) == format_report_csv(two.report.rows));
    CHECK(format_events_csv(one.report.events) == format_events_csv(two.report.events));
    CHECK(one.predictions == two.predictions);
}

TEST_CASE("QC toggles only remove scar") {
    PipelineConfig with;
    PipelineConfig without = with;
    without.ratio_filter = false;
    for (const auto& s : population()) {
        const auto a = scar_mask(run_subject(s, with).prediction);
        const auto b = scar_mask(run_subject(s, without).prediction);
        for (std::size_t i = 0; i < a.data.size(); ++i)
            if (a.data[i]) REQUIRE(b.data[i]);
    }
}

TEST_CASE("per-slice errors mark the report partial") {
    PipelineConfig c;
    c.myo_seg = "import";
    c.prediction_dir = (std::filesystem::temp_directory_path() / "scarq_no_predictions").string();
    const auto out = run_subject(population()[0], c);
    CHECK(out.report.partial());
    bool error_event = false;
    for (const auto& e : out.report.events) error_event |= e.kind == "error";
    CHECK(error_event);
}

TEST_CASE("evaluation rows") {
    const auto& s = population()[1];
    const auto rows = evaluate_prediction(s.id, *s.labels, *s.labels);
    for (const auto& r : rows) {
        CHECK(r.dsc == 1.0);
        if (r.slice == slice_all) CHECK(r.vol_diff_cm3 == 0.0);
    }
    const auto vol_only = describe_prediction(s.id, *s.labels);
    CHECK_FALSE(vol_only.empty());
}

TEST_CASE("ablation") {
    PipelineConfig a;
    std::vector<PipelineConfig> same{a, a};
    const auto r = run_ablation(population(), same, 1);
    std::size_t slices = 0;
    for (const auto& s : population()) slices += static_cast<std::size_t>(s.image.dims().nz);
    CHECK(r.rows.size() == 2 * slices * 2);
    for (const auto& cmp : r.comparisons) CHECK(cmp.p_value == doctest::Approx(1.0));
    std::vector<PipelineConfig> one{a};
    CHECK_THROWS_AS(run_ablation(population(), one, 1), InvalidArgument);
    CHECK(format_mean_sd(0.8612, 0.0523) == "0.861 (0.052)");
}

TEST_CASE("synthetic dataset plan") {
    PipelineConfig c;
    c.variant = Variant::e;
    const auto reqs = plan_synthetic_dataset(population(), c);
    int swaps = 0, aug = 0;
    for (const auto& r : reqs) {
        if (r.use == SynthesisUse::myocardium) ++swaps;
        else ++aug;
        CHECK(r.augmentation.rotation_deg % 60 == 0);
    }
    CHECK(swaps == 4);
    CHECK(aug == 8);
}

TEST_CASE("split") {
    std::vector<std::string> ids;
    for (int i = 0; i < 100; ++i) ids.push_back("s" + std::to_string(i));
    const auto s = split_subjects(ids, 0.2, 3);
    CHECK(s.test.size() == 20);
    CHECK(s.train.size() == 80);
    CHECK(split_subjects(ids, 0.2, 3).test == s.test);
    std::set<std::string> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 100);
}

TEST_CASE("report csv roundtrip and json") {
    const auto run = run_dataset(population(), PipelineConfig{}, 1);
    const auto csv = format_report_csv(run.report.rows);
    CHECK(format_report_csv(parse_report_csv(csv)) == csv);
    const auto json = format_report_json(run.report);
    CHECK(json.find("\"rows\"") != std::string::npos);
    const auto series = volume_series(run.report.rows, "myocardium");
    CHECK(series.manual.size() == population().size());
    CHECK(scatter_svg(series, "myocardium").find("<svg") != std::string::npos);
    CHECK(bland_altman_svg(series, "myocardium").find("<svg") != std::string::npos);
}

TEST_CASE("dataset discovery") {
    const auto dir = std::filesystem::temp_directory_path() / "scarq_test_dataset";
    std::filesystem::remove_all(dir);
    std::vector<SubjectRecord> subjects(population().begin(), population().begin() + 2);
    save_dataset(dir, subjects);
    const auto entries = discover_dataset(dir);
    REQUIRE(entries.size() == 2);
    const auto loaded = load_dataset(dir);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(loaded[i].id == subjects[i].id);
        CHECK(*loaded[i].labels == *subjects[i].labels);
        CHECK(*loaded[i].pathological == *subjects[i].pathological);
    }
    CHECK_THROWS_AS(discover_dataset(dir / "nope"), IoError);
    std::filesystem::remove_all(dir);
}
