#include "biceph/checkpoint.hpp"

#include <cmath>
#include <ctime>
#include <limits>

#include "biceph/jsonio.hpp"
#include "json.hpp"

namespace biceph {

const char* task_name(Task t) {
    switch (t) {
        case Task::CNvsAD: return "cn_vs_ad";
        case Task::MCIvsAD: return "mci_vs_ad";
        case Task::CNvsMCIvsAD: return "cn_vs_mci_vs_ad";
    }
    return "?";
}

Task task_from_name(const std::string& name) {
    if (name == "cn_vs_ad") return Task::CNvsAD;
    if (name == "mci_vs_ad") return Task::MCIvsAD;
    if (name == "cn_vs_mci_vs_ad") return Task::CNvsMCIvsAD;
    throw ValidationError("unknown task: " + name);
}

LabelMap label_map_for_task(Task t) {
    switch (t) {
        case Task::CNvsAD: return LabelMap{{ClassLabel::CN, ClassLabel::AD}};
        case Task::MCIvsAD: return LabelMap{{ClassLabel::MCI, ClassLabel::AD}};
        case Task::CNvsMCIvsAD:
            return LabelMap{{ClassLabel::CN, ClassLabel::MCI, ClassLabel::AD}};
    }
    throw ValidationError("unknown task");
}

namespace {

nlohmann::json synthetic_to_json(const SyntheticSpec& s) {
    return {{"subjects_per_class", s.subjects_per_class},
            {"m", s.m},
            {"input_dim", s.input_dim},
            {"num_classes", s.num_classes},
            {"class_separation", s.class_separation},
            {"subject_spread", s.subject_spread},
            {"slice_noise", s.slice_noise},
            {"entanglement", s.entanglement},
            {"seed", s.seed}};
}

SyntheticSpec synthetic_from_json(const nlohmann::json& j) {
    SyntheticSpec s;
    if (j.contains("subjects_per_class")) s.subjects_per_class = j["subjects_per_class"];
    if (j.contains("m")) s.m = j["m"];
    if (j.contains("input_dim")) s.input_dim = j["input_dim"];
    if (j.contains("num_classes")) s.num_classes = j["num_classes"];
    if (j.contains("class_separation")) s.class_separation = j["class_separation"];
    if (j.contains("subject_spread")) s.subject_spread = j["subject_spread"];
    if (j.contains("slice_noise")) s.slice_noise = j["slice_noise"];
    if (j.contains("entanglement")) s.entanglement = j["entanglement"];
    if (j.contains("seed")) s.seed = j["seed"];
    return s;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    if (!c.cohort_path.empty()) j["cohort"] = c.cohort_path;
    if (c.synthetic) j["synthetic"] = synthetic_to_json(*c.synthetic);
    j["task"] = task_name(c.task);
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["split"] = {{"train_frac", c.split.train_frac},
                  {"test_frac", c.split.test_frac},
                  {"val_frac_of_train", c.split.val_frac_of_train}};
    j["sampler"] = {{"subjects_per_batch", c.sampler.subjects_per_batch},
                    {"slices_per_subject", c.sampler.slices_per_subject}};
    j["model"] = {{"input_dim", c.model.input_dim},
                  {"backbone_hidden", c.model.backbone_hidden},
                  {"flat_dim", c.model.flat_dim},
                  {"embed_dim", c.model.embed_dim},
                  {"num_classes", c.model.num_classes},
                  {"concat_hidden", c.model.concat_hidden},
                  {"margin", c.model.margin},
                  {"triplet_weight", c.model.triplet_weight}};
    j["train"] = {{"learning_rate", c.learning_rate},
                  {"lr_factor", c.lr_factor},
                  {"patience", c.patience},
                  {"epochs", c.epochs}};
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    if (j.contains("cohort")) c.cohort_path = j["cohort"];
    if (j.contains("synthetic")) c.synthetic = synthetic_from_json(j["synthetic"]);
    if (j.contains("task")) c.task = task_from_name(j["task"]);
    if (j.contains("seed")) c.seed = j["seed"];
    if (j.contains("out_dir")) c.out_dir = j["out_dir"];
    if (j.contains("split")) {
        const auto& s = j["split"];
        if (s.contains("train_frac")) c.split.train_frac = s["train_frac"];
        if (s.contains("test_frac")) c.split.test_frac = s["test_frac"];
        if (s.contains("val_frac_of_train")) c.split.val_frac_of_train = s["val_frac_of_train"];
    }
    if (j.contains("sampler")) {
        const auto& s = j["sampler"];
        if (s.contains("subjects_per_batch")) c.sampler.subjects_per_batch = s["subjects_per_batch"];
        if (s.contains("slices_per_subject")) c.sampler.slices_per_subject = s["slices_per_subject"];
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        if (m.contains("input_dim")) c.model.input_dim = m["input_dim"];
        if (m.contains("backbone_hidden"))
            c.model.backbone_hidden = m["backbone_hidden"].get<std::vector<std::size_t>>();
        if (m.contains("flat_dim")) c.model.flat_dim = m["flat_dim"];
        if (m.contains("embed_dim")) c.model.embed_dim = m["embed_dim"];
        if (m.contains("num_classes")) c.model.num_classes = m["num_classes"];
        if (m.contains("concat_hidden"))
            c.model.concat_hidden = m["concat_hidden"].get<std::vector<std::size_t>>();
        if (m.contains("margin")) c.model.margin = m["margin"];
        if (m.contains("triplet_weight")) c.model.triplet_weight = m["triplet_weight"];
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        if (t.contains("learning_rate")) c.learning_rate = t["learning_rate"];
        if (t.contains("lr_factor")) c.lr_factor = t["lr_factor"];
        if (t.contains("patience")) c.patience = t["patience"];
        if (t.contains("epochs")) c.epochs = t["epochs"];
    }
    return c;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
    return parse_experiment_config(read_text_file(path));
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    try {
        return config_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("experiment config: " + std::string(e.what()));
    }
}

std::string experiment_config_json(const ExperimentConfig& config) {
    return config_to_json(config).dump(2) + "\n";
}

Checkpoint make_checkpoint(const ExperimentConfig& config, BicephModel& model, int epoch,
                           const FitState& state) {
    Checkpoint cp;
    cp.created_unix = static_cast<std::int64_t>(std::time(nullptr));
    cp.config = config;
    cp.epoch = epoch;
    cp.state = state;
    const std::vector<std::string> names = model.parameter_names();
    const std::vector<Matrix*> params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i)
        cp.parameters.emplace_back(names[i], *params[i]);
    return cp;
}

namespace {

std::string checkpoint_json_impl(const Checkpoint& cp, bool include_values) {
    std::string out;
    out += "{\"format_version\":" + std::to_string(cp.format_version);
    out += ",\"created_unix\":" + std::to_string(cp.created_unix);
    out += ",\"config\":" + config_to_json(cp.config).dump();
    out += ",\"epoch\":" + std::to_string(cp.epoch);
    out += ",\"state\":{";
    out += "\"next_epoch\":" + std::to_string(cp.state.next_epoch);
    out += ",\"learning_rate\":" + format_double_17(cp.state.learning_rate);
    out += ",\"best_val_ce\":";
    out += std::isfinite(cp.state.best_val_ce) ? format_double_17(cp.state.best_val_ce)
                                               : std::string("null");
    out += ",\"bad_epochs\":" + std::to_string(cp.state.bad_epochs);
    out += ",\"sampler_rng\":[";
    for (std::size_t i = 0; i < 4; ++i) {
        if (i) out += ',';
        out += std::to_string(cp.state.sampler_rng_state[i]);
    }
    out += "]}";
    out += ",\"parameters\":[";
    for (std::size_t i = 0; i < cp.parameters.size(); ++i) {
        const auto& [name, mat] = cp.parameters[i];
        if (i) out += ',';
        out += "{\"name\":\"" + name + "\"";
        out += ",\"rows\":" + std::to_string(mat.rows());
        out += ",\"cols\":" + std::to_string(mat.cols());
        out += ",\"values\":";
        if (include_values)
            append_double_array(out, mat.values());
        else
            out += "[]";
        out += "}";
    }
    out += "]}\n";
    return out;
}

}  // namespace

std::string checkpoint_json(const Checkpoint& cp) { return checkpoint_json_impl(cp, true); }

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
    write_text_file(path, checkpoint_json(cp));
}

std::uint64_t checkpoint_envelope_bytes(const Checkpoint& cp) {
    return checkpoint_json_impl(cp, false).size();
}

Checkpoint load_checkpoint(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("checkpoint parse error: " + std::string(e.what()));
    }
    Checkpoint cp;
    try {
        cp.format_version = j.at("format_version").get<int>();
        if (cp.format_version != 1)
            throw ValidationError("checkpoint: unsupported format version");
        cp.created_unix = j.at("created_unix").get<std::int64_t>();
        cp.config = config_from_json(j.at("config"));
        cp.epoch = j.at("epoch").get<int>();
        const auto& st = j.at("state");
        cp.state.next_epoch = st.at("next_epoch").get<int>();
        cp.state.learning_rate = st.at("learning_rate").get<double>();
        cp.state.best_val_ce = st.at("best_val_ce").is_null()
                                   ? std::numeric_limits<double>::infinity()
                                   : st.at("best_val_ce").get<double>();
        cp.state.bad_epochs = st.at("bad_epochs").get<int>();
        const auto& rng = st.at("sampler_rng");
        for (std::size_t i = 0; i < 4; ++i)
            cp.state.sampler_rng_state[i] = rng.at(i).get<std::uint64_t>();
        for (const auto& jp : j.at("parameters")) {
            Matrix m(jp.at("rows").get<std::size_t>(), jp.at("cols").get<std::size_t>());
            const auto values = jp.at("values").get<std::vector<double>>();
            if (values.size() != m.size())
                throw ValidationError("checkpoint: parameter value count mismatch");
            std::copy(values.begin(), values.end(), m.data());
            cp.parameters.emplace_back(jp.at("name").get<std::string>(), std::move(m));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("checkpoint schema error: " + std::string(e.what()));
    }
    return cp;
}

BicephModel restore_model(const Checkpoint& cp) {
    BicephModel model(cp.config.model);
    const std::vector<std::string> names = model.parameter_names();
    const std::vector<Matrix*> params = model.parameters();
    if (names.size() != cp.parameters.size())
        throw ValidationError("checkpoint: parameter count does not match the config");
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& [name, mat] = cp.parameters[i];
        if (name != names[i])
            throw ValidationError("checkpoint: unexpected parameter " + name);
        if (!mat.same_shape(*params[i]))
            throw ValidationError("checkpoint: shape mismatch for " + name);
        *params[i] = mat;
    }
    return model;
}

}  // namespace biceph
