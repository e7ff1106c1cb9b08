#include "sfda/cli/stages.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "sfda/augselect/select.hpp"
#include "sfda/cli/report.hpp"
#include "sfda/core/checkpoint.hpp"
#include "sfda/core/io.hpp"

namespace sfda::cli {

namespace fs = std::filesystem;

std::string stage_name(Stage s) {
    switch (s) {
        case Stage::Generate: return "generate";
        case Stage::SelectAgs: return "select-ags";
        case Stage::VendorTrain: return "vendor-train";
        case Stage::CpaeTrain: return "cpae-train";
        case Stage::Adapt: return "adapt";
        case Stage::Evaluate: return "evaluate";
        case Stage::AdaptOnline: return "adapt-online";
        case Stage::Report: return "report";
    }
    throw ConfigError("bad stage enum");
}

Stage stage_from_name(const std::string& name) {
    for (Stage s : {Stage::Generate, Stage::SelectAgs, Stage::VendorTrain, Stage::CpaeTrain,
                    Stage::Adapt, Stage::Evaluate, Stage::AdaptOnline, Stage::Report})
        if (stage_name(s) == name) return s;
    throw ConfigError("unknown stage: " + name);
}

std::vector<Stage> all_stages(const ExperimentConfig& cfg) {
    std::vector<Stage> out = {Stage::Generate, Stage::SelectAgs, Stage::VendorTrain};
    if (cfg.routing == soman::Routing::LOpp) out.push_back(Stage::CpaeTrain);
    out.push_back(Stage::Adapt);
    out.push_back(Stage::Evaluate);
    return out;
}

namespace {

// Exclusive ownership of one output directory for the duration of a run.
class DirLock {
public:
    explicit DirLock(const fs::path& lock_path) : path_(lock_path) {
        std::error_code ec;
        fs::create_directories(path_.parent_path(), ec);
        FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f)
            throw ConfigError("output directory is locked by another run: " + path_.string());
        std::fputs("locked\n", f);
        std::fclose(f);
    }
    ~DirLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    fs::path path_;
};

std::string resolve_style_dir(const std::string& configured) {
    if (!configured.empty()) return configured;
    if (const char* env = std::getenv("SFDA_STYLE_DIR")) return env;
#ifdef SFDA_DEFAULT_STYLE_DIR
    return SFDA_DEFAULT_STYLE_DIR;
#else
    return "assets/style_refs";
#endif
}

struct RunContext {
    ExperimentConfig cfg;
    RunPaths paths;
    std::string hash;
    aug::RefBundle bundle;
    bool bundle_loaded = false;

    const aug::RefBundle* ref_bundle() {
        if (!bundle_loaded) {
            bundle = aug::load_ref_bundle(resolve_style_dir(cfg.style_ref_dir));
            bundle_loaded = true;
        }
        return &bundle;
    }

    aug::AugContext aug_ctx() {
        aug::AugContext ctx;
        ctx.num_classes = cfg.data.spec.num_classes;
        ctx.bundle = ref_bundle();
        return ctx;
    }
};

json load_manifest(const RunPaths& paths, const std::string& hash) {
    if (fs::exists(paths.manifest())) {
        json m = load_json_file(paths.manifest());
        if (m.value("config_hash", "") != hash)
            throw ConfigError(
                "output directory holds a run with a different config hash; refusing to mix");
        return m;
    }
    return json{{"config_hash", hash}, {"stages", json::object()}};
}

void require_artifact(const fs::path& p, const std::string& stage, const std::string& producer) {
    if (!fs::exists(p))
        throw DependencyError("stage '" + stage + "' requires missing artifact '" + p.string() +
                              "' (produced by '" + producer + "')");
}

std::vector<aug::AugmentationGroup> selected_ags(const RunContext& ctx,
                                                 const augsel::SelectionReport& report) {
    std::vector<int> ids = report.top_selected(ctx.cfg.candidates.k_cap);
    std::vector<aug::AugmentationGroup> out;
    for (int id : ids)
        for (const auto& ag : ctx.cfg.candidates.ags)
            if (ag.id == id) out.push_back(ag);
    return out;
}

synth::DomainSpec target_spec_of(const ExperimentConfig& cfg) {
    return synth::make_shifted_domain(cfg.data.spec, cfg.data.target_gamma,
                                      cfg.data.target_injected, cfg.data.target_shift_seed);
}

// ---- stage bodies ----------------------------------------------------------

void stage_generate(RunContext& ctx) {
    const auto& d = ctx.cfg.data;
    const uint64_t seed = ctx.cfg.seed;
    synth::Dataset src_train =
        synth::generate_dataset_struct(d.spec, d.source_train, static_cast<int64_t>(mix64(seed, 1)));
    synth::Dataset src_val =
        synth::generate_dataset_struct(d.spec, d.source_val, static_cast<int64_t>(mix64(seed, 2)));
    const synth::DomainSpec tspec = target_spec_of(ctx.cfg);
    synth::Dataset tgt_train =
        synth::generate_dataset_struct(tspec, d.target_train, static_cast<int64_t>(mix64(seed, 3)));
    synth::Dataset tgt_test =
        synth::generate_dataset_struct(tspec, d.target_test, static_cast<int64_t>(mix64(seed, 4)));
    synth::save_dataset(ctx.paths.data("source_train"), src_train);
    synth::save_dataset(ctx.paths.data("source_val"), src_val);
    synth::save_dataset(ctx.paths.data("target_train"), tgt_train);
    synth::save_dataset(ctx.paths.data("target_test"), tgt_test);
    if (ctx.cfg.online) {
        const auto& oc = *ctx.cfg.online;
        synth::DomainSpec spec2 = synth::make_shifted_domain(ctx.cfg.data.spec, oc.gamma,
                                                             oc.injected, oc.shift_seed);
        synth::save_dataset(ctx.paths.data("target2_train"),
                            synth::generate_dataset_struct(spec2, oc.target_train,
                                                           static_cast<int64_t>(mix64(seed, 5))));
        synth::save_dataset(ctx.paths.data("target2_test"),
                            synth::generate_dataset_struct(spec2, oc.target_test,
                                                           static_cast<int64_t>(mix64(seed, 6))));
    }
}

void stage_select_ags(RunContext& ctx) {
    require_artifact(ctx.paths.data("source_train") / "manifest.json", "select-ags", "generate");
    require_artifact(ctx.paths.data("source_val") / "manifest.json", "select-ags", "generate");
    synth::Dataset src_train = synth::load_dataset(ctx.paths.data("source_train"));
    synth::Dataset src_val = synth::load_dataset(ctx.paths.data("source_val"));

    soman::ArchConfig arch;
    arch.num_classes = ctx.cfg.data.spec.num_classes;
    soman::TrainConfig tc = ctx.cfg.training.baseline;
    tc.seed = mix64(ctx.cfg.seed, 0xba5e);
    soman::SomanModel baseline = augsel::train_baseline(src_train, arch, tc);

    augsel::SelectionReport report =
        augsel::select_augmentations(baseline, ctx.cfg.candidates.ags, src_val, ctx.aug_ctx(),
                                     ctx.cfg.candidates.tau, mix64(ctx.cfg.seed, 0x5e7));
    fs::create_directories(ctx.paths.root / "reports");
    fs::create_directories(ctx.paths.root / "checkpoints");
    save_json_file(ctx.paths.report("selection.json"), report.to_json());
    std::ofstream table(ctx.paths.report("selection.txt"));
    table << report.to_table();
    soman::save_model(ctx.paths.checkpoint("baseline"), baseline, ctx.hash);
}

void stage_vendor_train(RunContext& ctx) {
    require_artifact(ctx.paths.checkpoint("baseline"), "vendor-train", "select-ags");
    require_artifact(ctx.paths.report("selection.json"), "vendor-train", "select-ags");
    synth::Dataset src_train = synth::load_dataset(ctx.paths.data("source_train"));
    synth::Dataset src_val = synth::load_dataset(ctx.paths.data("source_val"));
    soman::SomanModel baseline = soman::load_model(ctx.paths.checkpoint("baseline"), ctx.hash);
    augsel::SelectionReport report =
        augsel::SelectionReport::from_json(load_json_file(ctx.paths.report("selection.json")));
    std::vector<aug::AugmentationGroup> pool = selected_ags(ctx, report);
    if (pool.empty())
        throw ConfigError("vendor-train: no augmentation groups were selected; raise data "
                          "shift or lower tau");

    std::vector<int> ag_ids;
    for (const auto& ag : pool) ag_ids.push_back(ag.id);
    const bool multi_head = ctx.cfg.routing != soman::Routing::ERM;
    soman::SomanModel model = soman::make_from_baseline(
        baseline, ctx.cfg.routing, multi_head ? ag_ids : std::vector<int>{});

    soman::TrainConfig tc = ctx.cfg.training.vendor;
    tc.seed = mix64(ctx.cfg.seed, 0x7e4d);

    // Periodic per-head validation mIoU on a fixed subset, for the curves.
    synth::Dataset val_sub;
    val_sub.spec = src_val.spec;
    val_sub.labeled = true;
    for (int i = 0; i < std::min(16, src_val.size()); ++i)
        val_sub.samples.push_back(src_val.samples[i]);
    std::vector<json> curve;
    auto progress = [&](long step, const soman::StepRecord& rec) {
        json row{{"step", step}, {"lr", rec.lr}, {"drawn_ag_id", rec.drawn_ag_id}};
        json losses = json::object();
        for (const auto& [head, loss] : rec.head_losses)
            losses[model.net.head_name(head)] = loss;
        row["losses"] = losses;
        json mious = json::object();
        for (int h = 0; h < model.net.num_heads(); ++h)
            mious[model.net.head_name(h)] =
                eval::evaluate_model(model, h, val_sub).miou;
        row["val_miou"] = mious;
        curve.push_back(std::move(row));
    };
    soman::vendor_train(model, src_train, ctx.aug_ctx(), pool, tc, progress);
    model.lineage.push_back("vendor:" + soman::routing_to_string(ctx.cfg.routing) +
                            " k=" + std::to_string(model.k()));

    soman::save_model(ctx.paths.checkpoint("vendor"), model, ctx.hash);
    save_json_file(ctx.paths.report("vendor_curves.json"), json(curve));
}

void stage_cpae_train(RunContext& ctx) {
    require_artifact(ctx.paths.checkpoint("vendor"), "cpae-train", "vendor-train");
    soman::SomanModel vendor = soman::load_model(ctx.paths.checkpoint("vendor"), ctx.hash);
    if (vendor.routing != soman::Routing::LOpp)
        throw ConfigError("cpae-train requires an LO++ vendor model");
    synth::Dataset src_train = synth::load_dataset(ctx.paths.data("source_train"));
    augsel::SelectionReport report =
        augsel::SelectionReport::from_json(load_json_file(ctx.paths.report("selection.json")));
    std::vector<aug::AugmentationGroup> pool = selected_ags(ctx, report);

    const auto& arch = vendor.net.arch();
    cpae::CpaeModel q(arch.num_classes, arch.feature_channels(), arch.downsample(),
                      mix64(ctx.cfg.seed, 0xcae));
    cpae::CpaeTrainConfig cc = ctx.cfg.training.cpae;
    cc.seed = mix64(ctx.cfg.seed, 0xcae7);
    cpae::CpaeTrainStats stats = cpae::cpae_train(q, vendor, pool, ctx.aug_ctx(), src_train, cc);
    cpae::save_cpae(ctx.paths.checkpoint("cpae"), q, ctx.hash);
    save_json_file(ctx.paths.report("cpae_curve.json"), json{{"losses", stats.losses}});
}

void stage_adapt(RunContext& ctx, const std::string& target_dir, const std::string& in_ckpt,
                 const std::string& out_ckpt, const std::string& report_name,
                 const std::string& lineage_tag) {
    require_artifact(ctx.paths.checkpoint(in_ckpt), "adapt", "vendor-train");
    require_artifact(ctx.paths.data(target_dir) / "manifest.json", "adapt", "generate");
    soman::SomanModel model = soman::load_model(ctx.paths.checkpoint(in_ckpt), ctx.hash);
    synth::Dataset target = synth::load_dataset(ctx.paths.data(target_dir));

    adapt::AdaptConfig ac;
    ac.rounds = ctx.cfg.adaptation.rounds;
    ac.retain_fraction = ctx.cfg.adaptation.retain_fraction;
    ac.use_cpae = ctx.cfg.adaptation.use_cpae;
    ac.train.steps = ctx.cfg.adaptation.steps_per_round;
    ac.train.batch_size = ctx.cfg.adaptation.batch_size;
    ac.train.lr = ctx.cfg.adaptation.lr;
    ac.train.momentum = ctx.cfg.adaptation.momentum;
    ac.train.weight_decay = ctx.cfg.adaptation.weight_decay;
    ac.train.poly_power = ctx.cfg.adaptation.poly_power;
    ac.train.lambda_ent = ctx.cfg.adaptation.lambda_ent;
    ac.train.seed = mix64(ctx.cfg.seed, 0xada);

    cpae::CpaeModel q;
    cpae::CpaeModel* qp = nullptr;
    if (ac.use_cpae) {
        require_artifact(ctx.paths.checkpoint("cpae"), "adapt", "cpae-train");
        q = cpae::load_cpae(ctx.paths.checkpoint("cpae"), ctx.hash);
        qp = &q;
    }
    adapt::AdaptReport report = adapt::adapt(model, qp, target, ac, lineage_tag);

    // Persist the final round's pseudo-labels alongside their provenance.
    adapt::PseudoLabelDataset last = adapt::extract_pseudo_labels(
        model, report.optimal_head, qp, target, ac.retain_fraction, ac.rounds + 1);
    adapt::save_pseudo_labels(ctx.paths.data("pseudo_labels_" + lineage_tag), target, last);

    soman::save_model(ctx.paths.checkpoint(out_ckpt), model, ctx.hash);
    save_json_file(ctx.paths.report(report_name), report.to_json());
}

json evaluate_rows(RunContext& ctx, const synth::Dataset& data, soman::SomanModel* baseline,
                   soman::SomanModel* vendor, soman::SomanModel* adapted,
                   cpae::CpaeModel* q_for_inference, bool include_loo_heads = true) {
    const auto& groups = ctx.cfg.eval.class_groups;
    const auto& scales = ctx.cfg.eval.scales;
    json out = json::object();
    if (baseline)
        out["baseline"] = eval::evaluate_model(*baseline, soman::kHeadGlobal, data, groups,
                                               scales).to_json();
    if (vendor) {
        out["vendor_global"] = eval::evaluate_model(*vendor, soman::kHeadGlobal, data, groups,
                                                    scales).to_json();
        if (include_loo_heads)
            for (int h = 1; h <= vendor->k(); ++h)
                out["vendor_loo" + std::to_string(h)] =
                    eval::evaluate_model(*vendor, h, data, groups, scales).to_json();
    }
    if (adapted) {
        // The adapted model infers through the head it was adapted with.
        int head = soman::kHeadGlobal;
        for (const auto& line : adapted->lineage) {
            auto pos = line.find("head=");
            if (pos != std::string::npos) head = std::stoi(line.substr(pos + 5));
        }
        out["adapted"] =
            eval::evaluate_model(*adapted, head, data, groups, scales).to_json();
        if (q_for_inference) {
            // Single refinement pass on top of the adapted prediction.
            eval::ConfusionMatrix cm(adapted->num_classes());
            for (const auto& s : data.samples) {
                ProbMap p = eval::multiscale_infer(*adapted, head, s.image, scales);
                soman::FeatureMap f = soman::forward_features(*adapted, s.image);
                ProbMap refined = cpae::refine(*q_for_inference, p, f);
                cm.add(refined.argmax(), s.labels);
            }
            eval::MetricsReport rep = eval::aggregate(cm);
            rep.group_mious = eval::group_miou(rep, groups);
            out["adapted_refined_inference"] = rep.to_json();
        }
    }
    return out;
}

void stage_evaluate(RunContext& ctx) {
    require_artifact(ctx.paths.data("target_test") / "manifest.json", "evaluate", "generate");
    synth::Dataset tgt_test = synth::load_dataset(ctx.paths.data("target_test"));
    synth::Dataset src_val = synth::load_dataset(ctx.paths.data("source_val"));

    soman::SomanModel baseline, vendor, adapted;
    soman::SomanModel *bp = nullptr, *vp = nullptr, *ap = nullptr;
    if (fs::exists(ctx.paths.checkpoint("baseline"))) {
        baseline = soman::load_model(ctx.paths.checkpoint("baseline"), ctx.hash);
        bp = &baseline;
    }
    if (fs::exists(ctx.paths.checkpoint("vendor"))) {
        vendor = soman::load_model(ctx.paths.checkpoint("vendor"), ctx.hash);
        vp = &vendor;
    }
    if (fs::exists(ctx.paths.checkpoint("adapted"))) {
        adapted = soman::load_model(ctx.paths.checkpoint("adapted"), ctx.hash);
        ap = &adapted;
    }
    if (!bp && !vp && !ap)
        throw DependencyError("evaluate: no checkpoints found; run the training stages first");

    cpae::CpaeModel q;
    cpae::CpaeModel* qp = nullptr;
    if (ctx.cfg.adaptation.infer_with_cpae && fs::exists(ctx.paths.checkpoint("cpae"))) {
        q = cpae::load_cpae(ctx.paths.checkpoint("cpae"), ctx.hash);
        qp = &q;
    }

    json metrics{{"config_hash", ctx.hash},
                 {"target_test", evaluate_rows(ctx, tgt_test, bp, vp, ap, qp)},
                 {"source_val",
                  evaluate_rows(ctx, src_val, bp, vp, nullptr, nullptr, false)}};
    save_json_file(ctx.paths.report("metrics.json"), metrics);

    // CSV mirror with identical number rendering.
    std::ofstream csv(ctx.paths.report("metrics.csv"));
    csv << "split,model,key,value\n";
    for (const auto& [split, rows] : metrics.items()) {
        if (!rows.is_object()) continue;
        for (const auto& [name, rep] : rows.items()) {
            if (!rep.is_object()) continue;
            for (const auto& [key, value] : rep.items()) {
                if (value.is_object()) {
                    for (const auto& [k2, v2] : value.items())
                        csv << split << "," << name << "," << key << "_" << k2 << ","
                            << v2.dump() << "\n";
                } else if (value.is_array()) {
                    for (size_t i = 0; i < value.size(); ++i)
                        csv << split << "," << name << "," << key << "_" << i << ","
                            << value[i].dump() << "\n";
                } else {
                    csv << split << "," << name << "," << key << "," << value.dump() << "\n";
                }
            }
        }
    }
}

void stage_adapt_online(RunContext& ctx) {
    if (!ctx.cfg.online)
        throw ConfigError("adapt-online: config has no 'online' section");
    require_artifact(ctx.paths.checkpoint("adapted"), "adapt-online", "adapt");
    stage_adapt(ctx, "target2_train", "adapted", "adapted_online", "adapt_online.json",
                "target2");
    // Online metrics for the chained model.
    synth::Dataset tgt2 = synth::load_dataset(ctx.paths.data("target2_test"));
    soman::SomanModel chained = soman::load_model(ctx.paths.checkpoint("adapted_online"), ctx.hash);
    soman::SomanModel vendor = soman::load_model(ctx.paths.checkpoint("vendor"), ctx.hash);
    json metrics{{"target2_test", evaluate_rows(ctx, tgt2, nullptr, &vendor, &chained, nullptr)}};
    save_json_file(ctx.paths.report("metrics_online.json"), metrics);
}

std::vector<std::string> stage_outputs(const RunContext& ctx, Stage s) {
    switch (s) {
        case Stage::Generate: {
            std::vector<std::string> out = {"data/source_train/manifest.json",
                                            "data/source_val/manifest.json",
                                            "data/target_train/manifest.json",
                                            "data/target_test/manifest.json"};
            if (ctx.cfg.online) {
                out.push_back("data/target2_train/manifest.json");
                out.push_back("data/target2_test/manifest.json");
            }
            return out;
        }
        case Stage::SelectAgs:
            return {"checkpoints/baseline.ckpt", "reports/selection.json"};
        case Stage::VendorTrain:
            return {"checkpoints/vendor.ckpt", "reports/vendor_curves.json"};
        case Stage::CpaeTrain:
            return {"checkpoints/cpae.ckpt"};
        case Stage::Adapt:
            return {"checkpoints/adapted.ckpt", "reports/adapt.json"};
        case Stage::Evaluate:
            return {"reports/metrics.json", "reports/metrics.csv"};
        case Stage::AdaptOnline:
            return {"checkpoints/adapted_online.ckpt", "reports/metrics_online.json"};
        case Stage::Report:
            return {"reports/plots"};
    }
    return {};
}

}  // namespace

void verify_manifest(const fs::path& run_dir) {
    RunPaths paths{run_dir};
    json manifest = load_json_file(paths.manifest());
    const std::string hash = manifest.at("config_hash").get<std::string>();
    for (const auto& [name, entry] : manifest.at("stages").items()) {
        for (const auto& out : entry.at("outputs")) {
            const fs::path p = run_dir / out.get<std::string>();
            if (!fs::exists(p))
                throw DependencyError("manifest references missing artifact: " + p.string());
            if (p.extension() == ".ckpt") {
                Checkpoint ckpt = load_checkpoint(p);
                if (ckpt.meta.value("config_hash", "") != hash)
                    throw ConfigError("checkpoint hash mismatch for " + p.string());
            }
        }
    }
}

int run(const ExperimentConfig& cfg, const std::vector<Stage>& stages, bool resume) {
    cfg.validate();
    if (cfg.threads > 0) nn::set_num_threads(cfg.threads);
    RunPaths paths{fs::path(cfg.output_dir)};
    fs::create_directories(paths.root);
    DirLock lock(paths.lock());

    RunContext ctx{cfg, paths, cfg.config_hash(), {}, false};
    json manifest = load_manifest(paths, ctx.hash);
    save_json_file(paths.config(), cfg.to_json());

    for (Stage s : stages) {
        const std::string name = stage_name(s);
        if (resume && manifest.at("stages").contains(name)) {
            bool outputs_ok = true;
            for (const auto& out : stage_outputs(ctx, s))
                outputs_ok = outputs_ok && fs::exists(paths.root / out);
            if (outputs_ok) {
                std::cout << "[skip] " << name << " (already complete)\n";
                continue;
            }
        }
        const auto t0 = std::chrono::steady_clock::now();
        std::cout << "[run ] " << name << "\n";
        switch (s) {
            case Stage::Generate: stage_generate(ctx); break;
            case Stage::SelectAgs: stage_select_ags(ctx); break;
            case Stage::VendorTrain: stage_vendor_train(ctx); break;
            case Stage::CpaeTrain: stage_cpae_train(ctx); break;
            case Stage::Adapt:
                stage_adapt(ctx, "target_train", "vendor", "adapted", "adapt.json", "target");
                break;
            case Stage::Evaluate: stage_evaluate(ctx); break;
            case Stage::AdaptOnline: stage_adapt_online(ctx); break;
            case Stage::Report: write_reports(paths.root); break;
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        manifest["stages"][name] = {{"completed", true},
                                    {"wall_time_s", secs},
                                    {"outputs", stage_outputs(ctx, s)}};
        save_json_file(paths.manifest(), manifest);
        std::cout << "[done] " << name << " (" << static_cast<long>(secs) << "s)\n";
    }
    return 0;
}

}  // namespace sfda::cli
