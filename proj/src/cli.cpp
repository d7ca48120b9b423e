#include "biceph/cli.hpp"

#include <filesystem>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "biceph/checkpoint.hpp"
#include "biceph/complexity.hpp"
#include "biceph/exports.hpp"
#include "biceph/jsonio.hpp"

namespace biceph::cli {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

Cohort filter_task_classes(const Cohort& cohort, const LabelMap& labels) {
    Cohort out;
    out.plane = cohort.plane;
    out.m = cohort.m;
    out.input_dim = cohort.input_dim;
    for (const Subject& s : cohort.subjects)
        if (labels.index_of(s.class_label) >= 0) out.subjects.push_back(s);
    if (out.subjects.empty())
        throw ValidationError("cohort contains no subjects of the task's classes");
    return out;
}

Cohort resolve_cohort(const ExperimentConfig& config, const std::string& override_path) {
    if (!override_path.empty()) return load_cohort(override_path);
    if (!config.cohort_path.empty()) return load_cohort(config.cohort_path);
    if (config.synthetic) return generate_synthetic(*config.synthetic);
    throw ValidationError("config names neither a cohort file nor a synthetic spec");
}

// Resolves model widths that depend on the data, then splits exactly the way
// training does so checkpoints and later evaluations agree.
struct PreparedExperiment {
    ExperimentConfig config;
    LabelMap labels;
    SplitResult splits;
};

PreparedExperiment prepare(ExperimentConfig config, const std::string& cohort_override) {
    PreparedExperiment prep;
    prep.labels = label_map_for_task(config.task);
    Cohort cohort = filter_task_classes(resolve_cohort(config, cohort_override), prep.labels);
    config.model.input_dim = cohort.input_dim;
    config.model.num_classes = prep.labels.num_classes();
    config.model.validate();
    prep.splits = split_cohort(cohort, config.split.train_frac, config.split.test_frac,
                               config.split.val_frac_of_train, config.seed);
    prep.config = std::move(config);
    return prep;
}

const Cohort& pick_split(const SplitResult& splits, const std::string& name) {
    if (name == "train") return splits.train;
    if (name == "val") return splits.val;
    if (name == "test") return splits.test;
    throw ValidationError("unknown split: " + name);
}

int cmd_generate(const SyntheticSpec& spec, const std::string& out_dir) {
    const Cohort cohort = generate_synthetic(spec);
    ensure_dir(out_dir);
    const std::string path = out_dir + "/cohort.json";
    save_cohort(cohort, path);
    std::cout << "wrote " << path << " (" << cohort.subjects.size() << " subjects, m="
              << cohort.m << ", input_dim=" << cohort.input_dim << ")\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, std::uint64_t* seed_override,
              const std::string& out_override) {
    ExperimentConfig config = load_experiment_config(config_path);
    if (seed_override) config.seed = *seed_override;
    if (!out_override.empty()) config.out_dir = out_override;

    PreparedExperiment prep = prepare(std::move(config), "");
    ensure_dir(prep.config.out_dir);

    BicephModel model(prep.config.model);
    model.init_params(prep.config.seed);

    FitOptions options;
    options.learning_rate = prep.config.learning_rate;
    options.lr_factor = prep.config.lr_factor;
    options.patience = prep.config.patience;
    options.epochs = prep.config.epochs;
    options.sampler = prep.config.sampler;
    options.seed = prep.config.seed;

    const std::string best_path = prep.config.out_dir + "/checkpoint_best.json";
    const auto on_epoch = [&](const EpochStats& row, bool is_best, const FitState& state) {
        if (is_best) save_checkpoint(make_checkpoint(prep.config, model, row.epoch, state),
                                     best_path);
    };

    TrainingLog log = fit(model, prep.splits.train, prep.splits.val, prep.labels, options,
                          nullptr, on_epoch);

    write_text_file(prep.config.out_dir + "/metrics.csv", metrics_csv(log.epochs));
    save_checkpoint(make_checkpoint(prep.config, model, prep.config.epochs, log.final_state),
                    prep.config.out_dir + "/checkpoint_final.json");
    std::cout << "trained " << prep.config.epochs << " epochs; best val CE "
              << log.best_val_ce << " at epoch " << log.best_epoch << "; outputs in "
              << prep.config.out_dir << "\n";
    return kExitOk;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& split,
                 const std::string& cohort_override, const std::string& out_path) {
    const Checkpoint cp = load_checkpoint(checkpoint_path);
    PreparedExperiment prep = prepare(cp.config, cohort_override);
    BicephModel model = restore_model(cp);

    const Cohort& part = pick_split(prep.splits, split);
    if (part.subjects.empty()) throw ValidationError("evaluate: split is empty");

    const auto preds = predict_slices(model, part, prep.labels);
    const EvaluationReport report = build_evaluation_report(split, preds, prep.labels);
    const std::string json = evaluation_report_json(report, prep.labels);
    if (out_path.empty())
        std::cout << json;
    else
        write_text_file(out_path, json);
    return kExitOk;
}

Matrix embeddings_of(const std::vector<SlicePrediction>& preds) {
    if (preds.empty()) throw ValidationError("no predictions");
    Matrix m(preds.size(), preds[0].embedding.size());
    for (std::size_t i = 0; i < preds.size(); ++i)
        std::copy(preds[i].embedding.begin(), preds[i].embedding.end(), m.row_ptr(i));
    return m;
}

int cmd_interpret(const std::string& checkpoint_path, const std::string& split,
                  const std::string& reference_split, std::vector<std::int64_t> subject_ids,
                  std::vector<std::size_t> k_set, const std::string& cohort_override,
                  const std::string& out_path) {
    const Checkpoint cp = load_checkpoint(checkpoint_path);
    PreparedExperiment prep = prepare(cp.config, cohort_override);
    BicephModel model = restore_model(cp);

    const auto ref_preds =
        predict_slices(model, pick_split(prep.splits, reference_split), prep.labels);
    const Matrix ref = embeddings_of(ref_preds);
    std::vector<int> ref_labels;
    ref_labels.reserve(ref_preds.size());
    for (const auto& p : ref_preds) ref_labels.push_back(p.true_class);

    const Cohort& part = pick_split(prep.splits, split);
    std::set<std::int64_t> wanted(subject_ids.begin(), subject_ids.end());

    std::vector<NeighborhoodReport> reports;
    for (const Subject& subj : part.subjects) {
        if (!wanted.empty() && !wanted.count(subj.id)) continue;
        Cohort single;
        single.plane = part.plane;
        single.m = part.m;
        single.input_dim = part.input_dim;
        single.subjects.push_back(subj);
        const auto preds = predict_slices(model, single, prep.labels);
        reports.push_back(neighborhood_report(subj.id, preds[0].true_class,
                                              embeddings_of(preds), ref, ref_labels, k_set,
                                              prep.labels.num_classes()));
    }
    if (reports.empty()) throw ValidationError("interpret: no matching subjects");

    std::cout << neighborhood_reports_text(reports, prep.labels);
    if (!out_path.empty())
        write_text_file(out_path, neighborhood_reports_json(reports, prep.labels));
    return kExitOk;
}

int cmd_export_embeddings(const std::string& checkpoint_path, const std::string& split,
                          std::size_t pca_dims, const std::string& cohort_override,
                          const std::string& out_dir) {
    const Checkpoint cp = load_checkpoint(checkpoint_path);
    PreparedExperiment prep = prepare(cp.config, cohort_override);
    BicephModel model = restore_model(cp);

    const Cohort& part = pick_split(prep.splits, split);
    if (part.subjects.empty()) throw ValidationError("export: split is empty");
    const auto preds = predict_slices(model, part, prep.labels);

    ensure_dir(out_dir);
    write_text_file(out_dir + "/embeddings.csv", embeddings_csv(preds, prep.labels));
    std::cout << "wrote " << out_dir << "/embeddings.csv (" << preds.size() << " rows)\n";

    if (pca_dims > 0) {
        const PcaResult pca = pca_project(embeddings_of(preds), pca_dims);
        write_text_file(out_dir + "/pca.csv", pca_csv(preds, pca.coords, prep.labels));
        nlohmann::json j;
        j["explained_variance"] = pca.explained_variance;
        j["degenerate"] = pca.degenerate;
        write_text_file(out_dir + "/pca_variance.json", j.dump(2) + "\n");
        std::cout << "wrote " << out_dir << "/pca.csv and pca_variance.json\n";
    }
    return kExitOk;
}

int cmd_analyze(const std::string& config_path, const std::string& out_dir) {
    ExperimentConfig config = load_experiment_config(config_path);
    PreparedExperiment prep = prepare(std::move(config), "");

    // The envelope is measured from a real checkpoint of this exact model.
    BicephModel model(prep.config.model);
    const Checkpoint cp = make_checkpoint(prep.config, model, 0, FitState{});
    const CostReport report = cost_report(prep.config.model, checkpoint_envelope_bytes(cp));

    std::cout << cost_report_text(report);
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        write_text_file(out_dir + "/cost_report.json", cost_report_json(report));
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Biceph-Net: dual-headed metric-learning classifier for hierarchical "
                 "slice/subject cohorts"};
    app.require_subcommand(1);

    // generate
    SyntheticSpec spec;
    std::string gen_out = ".";
    auto* generate = app.add_subcommand("generate", "Generate a synthetic cohort file");
    generate->add_option("--out", gen_out, "Output directory");
    generate->add_option("--seed", spec.seed, "Generation seed");
    generate->add_option("--subjects-per-class", spec.subjects_per_class);
    generate->add_option("--m", spec.m, "Slices per subject");
    generate->add_option("--input-dim", spec.input_dim);
    generate->add_option("--num-classes", spec.num_classes, "2 (CN/AD) or 3 (CN/MCI/AD)");
    generate->add_option("--separation", spec.class_separation);
    generate->add_option("--spread", spec.subject_spread);
    generate->add_option("--noise", spec.slice_noise);
    generate->add_option("--entanglement", spec.entanglement);

    // train
    std::string train_config;
    std::uint64_t seed_override = 0;
    bool has_seed_override = false;
    std::string out_override;
    auto* train = app.add_subcommand("train", "Train from an experiment config");
    train->add_option("--config", train_config, "Experiment config JSON")->required();
    train->add_option("--seed", seed_override)->each([&](const std::string&) {
        has_seed_override = true;
    });
    train->add_option("--out", out_override, "Override the config's output directory");

    // evaluate
    std::string eval_checkpoint, eval_split = "test", eval_cohort, eval_out;
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on a split");
    evaluate->add_option("--checkpoint", eval_checkpoint)->required();
    evaluate->add_option("--split", eval_split, "train|val|test");
    evaluate->add_option("--cohort", eval_cohort, "Override the cohort file");
    evaluate->add_option("--out", eval_out, "Write the JSON report here (default stdout)");

    // interpret
    std::string int_checkpoint, int_split = "test", int_ref_split = "train", int_cohort,
                int_out;
    std::vector<std::int64_t> int_subjects;
    std::vector<std::size_t> int_k = {10, 20, 30, 40, 50};
    auto* interpret =
        app.add_subcommand("interpret", "Neighborhood analysis of subjects' embeddings");
    interpret->add_option("--checkpoint", int_checkpoint)->required();
    interpret->add_option("--split", int_split, "Split the subjects come from");
    interpret->add_option("--reference-split", int_ref_split, "Reference embedding split");
    interpret->add_option("--subjects", int_subjects, "Subject ids (default: all in split)");
    interpret->add_option("--k", int_k, "Neighborhood sizes");
    interpret->add_option("--cohort", int_cohort, "Override the cohort file");
    interpret->add_option("--out", int_out, "Write the JSON report here");

    // export-embeddings
    std::string exp_checkpoint, exp_split = "test", exp_cohort, exp_out = ".";
    std::size_t exp_pca = 0;
    auto* exportcmd =
        app.add_subcommand("export-embeddings", "Export embeddings (and PCA) as CSV");
    exportcmd->add_option("--checkpoint", exp_checkpoint)->required();
    exportcmd->add_option("--split", exp_split, "train|val|test");
    exportcmd->add_option("--pca", exp_pca, "Also write a PCA projection of this width");
    exportcmd->add_option("--cohort", exp_cohort, "Override the cohort file");
    exportcmd->add_option("--out", exp_out, "Output directory");

    // analyze
    std::string ana_config, ana_out;
    auto* analyze = app.add_subcommand("analyze", "Parameter/FLOP/size accounting");
    analyze->add_option("--config", ana_config, "Experiment config JSON")->required();
    analyze->add_option("--out", ana_out, "Also write cost_report.json here");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (generate->parsed()) return cmd_generate(spec, gen_out);
        if (train->parsed())
            return cmd_train(train_config, has_seed_override ? &seed_override : nullptr,
                             out_override);
        if (evaluate->parsed())
            return cmd_evaluate(eval_checkpoint, eval_split, eval_cohort, eval_out);
        if (interpret->parsed())
            return cmd_interpret(int_checkpoint, int_split, int_ref_split, int_subjects,
                                 int_k, int_cohort, int_out);
        if (exportcmd->parsed())
            return cmd_export_embeddings(exp_checkpoint, exp_split, exp_pca, exp_cohort,
                                         exp_out);
        if (analyze->parsed()) return cmd_analyze(ana_config, ana_out);
    } catch (const TrainingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace biceph::cli
