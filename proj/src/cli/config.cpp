#include "sfda/cli/config.hpp"

#include "sfda/core/hash.hpp"
#include "sfda/core/io.hpp"

namespace sfda::cli {

namespace {

soman::TrainConfig train_config_from(const json& j, const soman::TrainConfig& defaults,
                                     const std::string& ctx) {
    reject_unknown_fields(j, {"iters", "batch_size", "lr", "momentum", "weight_decay",
                              "poly_power", "log_every"},
                          ctx);
    soman::TrainConfig c = defaults;
    c.iters = j.value("iters", c.iters);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.poly_power = j.value("poly_power", c.poly_power);
    c.log_every = j.value("log_every", c.log_every);
    return c;
}

json train_config_json(const soman::TrainConfig& c) {
    return {{"iters", c.iters},       {"batch_size", c.batch_size},
            {"lr", c.lr},             {"momentum", c.momentum},
            {"weight_decay", c.weight_decay}, {"poly_power", c.poly_power},
            {"log_every", c.log_every}};
}

}  // namespace

void ExperimentConfig::validate() const {
    data.spec.validate();
    if (data.source_train < 1 || data.source_val < 1 || data.target_train < 1 ||
        data.target_test < 1)
        throw ConfigError("data: dataset sizes must be positive");
    if (!data.target_injected.empty() &&
        data.target_injected.size() != static_cast<size_t>(synth::DomainSpec::kNumParams))
        throw ConfigError("data.target_injected: must be empty or have 8 entries");
    if (candidates.ags.empty()) throw ConfigError("candidates.ags: must be non-empty");
    if (candidates.k_cap < 1) throw ConfigError("candidates.k_cap: must be >= 1");
    if (adaptation.rounds < 1) throw ConfigError("adaptation.rounds: must be >= 1");
    if (adaptation.retain_fraction <= 0.0 || adaptation.retain_fraction > 1.0)
        throw ConfigError("adaptation.retain_fraction: must lie in (0, 1]");
    if (adaptation.use_cpae && routing != soman::Routing::LOpp)
        throw ConfigError("adaptation.use_cpae requires LO++ routing");
    if (eval.scales.empty()) throw ConfigError("eval.scales: must be non-empty");
    if (training.baseline.iters < 0 || training.vendor.iters <= 0 || training.cpae.iters <= 0)
        throw ConfigError("training: iteration counts must be positive");
}

json ExperimentConfig::to_json() const {
    json jc{{"seed", seed},
            {"output_dir", output_dir},
            {"routing", soman::routing_to_string(routing)},
            {"style_ref_dir", style_ref_dir},
            {"threads", threads}};
    jc["data"] = {{"spec", data.spec.to_json()},
                  {"source_train", data.source_train},
                  {"source_val", data.source_val},
                  {"target_train", data.target_train},
                  {"target_test", data.target_test},
                  {"target_gamma", data.target_gamma},
                  {"target_injected", data.target_injected},
                  {"target_shift_seed", data.target_shift_seed}};
    json ags = json::array();
    for (const auto& ag : candidates.ags) ags.push_back(ag.to_json());
    jc["candidates"] = {{"ags", ags}, {"tau", candidates.tau}, {"k_cap", candidates.k_cap}};
    jc["training"] = {{"baseline", train_config_json(training.baseline)},
                      {"vendor", train_config_json(training.vendor)},
                      {"cpae",
                       {{"iters", training.cpae.iters},
                        {"batch_size", training.cpae.batch_size},
                        {"lr", training.cpae.lr},
                        {"momentum", training.cpae.momentum},
                        {"weight_decay", training.cpae.weight_decay},
                        {"poly_power", training.cpae.poly_power}}}};
    jc["adaptation"] = {{"rounds", adaptation.rounds},
                        {"retain_fraction", adaptation.retain_fraction},
                        {"lambda_ent", adaptation.lambda_ent},
                        {"use_cpae", adaptation.use_cpae},
                        {"infer_with_cpae", adaptation.infer_with_cpae},
                        {"steps_per_round", adaptation.steps_per_round},
                        {"batch_size", adaptation.batch_size},
                        {"lr", adaptation.lr},
                        {"momentum", adaptation.momentum},
                        {"weight_decay", adaptation.weight_decay},
                        {"poly_power", adaptation.poly_power}};
    jc["eval"] = {{"scales", eval.scales}, {"class_groups", eval.class_groups}};
    if (online) {
        jc["online"] = {{"gamma", online->gamma},
                        {"injected", online->injected},
                        {"shift_seed", online->shift_seed},
                        {"target_train", online->target_train},
                        {"target_test", online->target_test}};
    }
    return jc;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    reject_unknown_fields(j, {"seed", "output_dir", "data", "candidates", "routing",
                              "style_ref_dir", "training", "adaptation", "eval", "online",
                              "threads"},
                          "config");
    ExperimentConfig c;
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    if (j.contains("routing")) c.routing = soman::routing_from_string(j.at("routing"));
    c.style_ref_dir = j.value("style_ref_dir", c.style_ref_dir);
    c.threads = j.value("threads", c.threads);

    if (j.contains("data")) {
        const json& d = j.at("data");
        reject_unknown_fields(d, {"spec", "source_train", "source_val", "target_train",
                                  "target_test", "target_gamma", "target_injected",
                                  "target_shift_seed"},
                              "config.data");
        if (d.contains("spec")) c.data.spec = synth::DomainSpec::from_json(d.at("spec"));
        c.data.source_train = d.value("source_train", c.data.source_train);
        c.data.source_val = d.value("source_val", c.data.source_val);
        c.data.target_train = d.value("target_train", c.data.target_train);
        c.data.target_test = d.value("target_test", c.data.target_test);
        c.data.target_gamma = d.value("target_gamma", c.data.target_gamma);
        if (d.contains("target_injected"))
            c.data.target_injected = d.at("target_injected").get<std::vector<double>>();
        c.data.target_shift_seed = d.value("target_shift_seed", c.data.target_shift_seed);
    }
    if (j.contains("candidates")) {
        const json& d = j.at("candidates");
        reject_unknown_fields(d, {"ags", "tau", "k_cap"}, "config.candidates");
        if (d.contains("ags")) {
            c.candidates.ags.clear();
            for (const auto& a : d.at("ags"))
                c.candidates.ags.push_back(aug::AugmentationGroup::from_json(a));
        }
        c.candidates.tau = d.value("tau", c.candidates.tau);
        c.candidates.k_cap = d.value("k_cap", c.candidates.k_cap);
    }
    if (j.contains("training")) {
        const json& t = j.at("training");
        reject_unknown_fields(t, {"baseline", "vendor", "cpae"}, "config.training");
        if (t.contains("baseline"))
            c.training.baseline =
                train_config_from(t.at("baseline"), c.training.baseline, "config.training.baseline");
        if (t.contains("vendor"))
            c.training.vendor =
                train_config_from(t.at("vendor"), c.training.vendor, "config.training.vendor");
        if (t.contains("cpae")) {
            const json& q = t.at("cpae");
            reject_unknown_fields(q, {"iters", "batch_size", "lr", "momentum", "weight_decay",
                                      "poly_power"},
                                  "config.training.cpae");
            c.training.cpae.iters = q.value("iters", c.training.cpae.iters);
            c.training.cpae.batch_size = q.value("batch_size", c.training.cpae.batch_size);
            c.training.cpae.lr = q.value("lr", c.training.cpae.lr);
            c.training.cpae.momentum = q.value("momentum", c.training.cpae.momentum);
            c.training.cpae.weight_decay = q.value("weight_decay", c.training.cpae.weight_decay);
            c.training.cpae.poly_power = q.value("poly_power", c.training.cpae.poly_power);
        }
    }
    if (j.contains("adaptation")) {
        const json& a = j.at("adaptation");
        reject_unknown_fields(a, {"rounds", "retain_fraction", "lambda_ent", "use_cpae",
                                  "infer_with_cpae", "steps_per_round", "batch_size", "lr",
                                  "momentum", "weight_decay", "poly_power"},
                              "config.adaptation");
        c.adaptation.rounds = a.value("rounds", c.adaptation.rounds);
        c.adaptation.retain_fraction = a.value("retain_fraction", c.adaptation.retain_fraction);
        c.adaptation.lambda_ent = a.value("lambda_ent", c.adaptation.lambda_ent);
        c.adaptation.use_cpae = a.value("use_cpae", c.adaptation.use_cpae);
        c.adaptation.infer_with_cpae = a.value("infer_with_cpae", c.adaptation.infer_with_cpae);
        c.adaptation.steps_per_round = a.value("steps_per_round", c.adaptation.steps_per_round);
        c.adaptation.batch_size = a.value("batch_size", c.adaptation.batch_size);
        c.adaptation.lr = a.value("lr", c.adaptation.lr);
        c.adaptation.momentum = a.value("momentum", c.adaptation.momentum);
        c.adaptation.weight_decay = a.value("weight_decay", c.adaptation.weight_decay);
        c.adaptation.poly_power = a.value("poly_power", c.adaptation.poly_power);
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        reject_unknown_fields(e, {"scales", "class_groups"}, "config.eval");
        if (e.contains("scales")) c.eval.scales = e.at("scales").get<std::vector<double>>();
        if (e.contains("class_groups"))
            c.eval.class_groups = e.at("class_groups").get<eval::ClassGroups>();
    }
    if (j.contains("online") && !j.at("online").is_null()) {
        const json& o = j.at("online");
        reject_unknown_fields(o, {"gamma", "injected", "shift_seed", "target_train",
                                  "target_test"},
                              "config.online");
        OnlineConfig oc;
        oc.gamma = o.value("gamma", oc.gamma);
        if (o.contains("injected")) oc.injected = o.at("injected").get<std::vector<double>>();
        oc.shift_seed = o.value("shift_seed", oc.shift_seed);
        oc.target_train = o.value("target_train", oc.target_train);
        oc.target_test = o.value("target_test", oc.target_test);
        c.online = oc;
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    return from_json(load_json_file(path));
}

std::string ExperimentConfig::config_hash() const {
    // The hash fingerprints everything that affects the numbers; where the
    // run lives and how many worker threads it used are not part of that.
    json j = to_json();
    j.erase("output_dir");
    j.erase("threads");
    return sha256_hex(j.dump());
}

}  // namespace sfda::cli
