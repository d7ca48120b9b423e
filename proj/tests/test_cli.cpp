#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "biceph/checkpoint.hpp"
#include "biceph/cli.hpp"
#include "biceph/eval.hpp"
#include "biceph/jsonio.hpp"
#include "json.hpp"

using namespace biceph;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("biceph_cli_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = "") const {
        return sub.empty() ? path.string() : (path / sub).string();
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

void write_config(const std::string& path, const std::string& out_dir, int epochs = 3,
                  const std::string& task = "cn_vs_ad", double triplet_weight = 1.0,
                  int subjects_per_class = 8) {
    nlohmann::json j;
    j["synthetic"] = {{"subjects_per_class", subjects_per_class}, {"m", 6},
                      {"input_dim", 12},
                      {"num_classes", task == "cn_vs_mci_vs_ad" ? 3 : 2},
                      {"seed", 5}};
    j["task"] = task;
    j["seed"] = 5;
    j["out_dir"] = out_dir;
    j["split"] = {{"train_frac", 0.8}, {"test_frac", 0.2}, {"val_frac_of_train", 0.25}};
    j["sampler"] = {{"subjects_per_batch", 4}, {"slices_per_subject", 3}};
    j["model"] = {{"flat_dim", 10},
                  {"embed_dim", 6},
                  {"backbone_hidden", {12}},
                  {"concat_hidden", {8, 4}},
                  {"triplet_weight", triplet_weight}};
    j["train"] = {{"learning_rate", 0.01}, {"epochs", epochs}};
    write_text_file(path, j.dump(2));
}

std::size_t line_count(const std::string& path) {
    std::ifstream in(path);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

}  // namespace

TEST_CASE("generate: default spec writes 60 subjects with m=16") {
    TempDir dir;
    CHECK(cli::run({"generate", "--out", dir.str()}) == 0);
    const Cohort cohort = load_cohort(dir.str("cohort.json"));
    CHECK(cohort.subjects.size() == 60);
    CHECK(cohort.m == 16);
    CHECK(cohort.input_dim == 64);
}

TEST_CASE("generate: the same seed produces byte-identical files") {
    TempDir a, b;
    CHECK(cli::run({"generate", "--out", a.str(), "--seed", "9", "--subjects-per-class",
                    "4", "--m", "4", "--input-dim", "8"}) == 0);
    CHECK(cli::run({"generate", "--out", b.str(), "--seed", "9", "--subjects-per-class",
                    "4", "--m", "4", "--input-dim", "8"}) == 0);
    CHECK(read_text_file(a.str("cohort.json")) == read_text_file(b.str("cohort.json")));
}

TEST_CASE("generate: invalid entanglement exits 2 without writing") {
    TempDir dir;
    CHECK(cli::run({"generate", "--out", dir.str("sub"), "--entanglement", "1.2"}) == 2);
    CHECK(!fs::exists(dir.str("sub/cohort.json")));
}

TEST_CASE("cli usage errors exit 2") {
    CHECK(cli::run({"train"}) == 2);                    // missing --config
    CHECK(cli::run({"no-such-command"}) == 2);
    CHECK(cli::run({"train", "--config", "/nonexistent/config.json"}) == 4);
}

TEST_CASE("train: metrics has epochs+1 rows and reruns are byte-identical") {
    TempDir dir;
    write_config(dir.str("config.json"), dir.str("run1"), 3);
    REQUIRE(cli::run({"train", "--config", dir.str("config.json")}) == 0);

    // Header + epoch-0 eval + 3 epochs.
    CHECK(line_count(dir.str("run1/metrics.csv")) == 5);
    CHECK(fs::exists(dir.str("run1/checkpoint_final.json")));
    CHECK(fs::exists(dir.str("run1/checkpoint_best.json")));

    REQUIRE(cli::run({"train", "--config", dir.str("config.json"), "--out",
                      dir.str("run2")}) == 0);
    CHECK(read_text_file(dir.str("run1/metrics.csv")) ==
          read_text_file(dir.str("run2/metrics.csv")));
}

TEST_CASE("train: multiclass task records a 3-wide softmax prior in the checkpoint") {
    TempDir dir;
    write_config(dir.str("config.json"), dir.str("run"), 2, "cn_vs_mci_vs_ad");
    REQUIRE(cli::run({"train", "--config", dir.str("config.json")}) == 0);
    const Checkpoint cp = load_checkpoint(dir.str("run/checkpoint_final.json"));
    CHECK(cp.config.model.num_classes == 3);
    bool found = false;
    for (const auto& [name, mat] : cp.parameters)
        if (name == "prior.dense") {
            found = true;
            CHECK(mat.rows() == 3);
        }
    CHECK(found);
}

TEST_CASE("evaluate: report fields, subject counts, and split handling") {
    TempDir dir;
    write_config(dir.str("config.json"), dir.str("run"), 3);
    REQUIRE(cli::run({"train", "--config", dir.str("config.json")}) == 0);

    REQUIRE(cli::run({"evaluate", "--checkpoint", dir.str("run/checkpoint_final.json"),
                      "--split", "test", "--out", dir.str("report.json")}) == 0);
    const auto report = nlohmann::json::parse(read_text_file(dir.str("report.json")));
    // 8 subjects/class, test_frac 0.2 -> 2 per class.
    CHECK(report["subjects"].get<int>() == 4);
    CHECK(report["slices"].get<int>() == 24);
    CHECK(report["slice_accuracy"].is_number());
    CHECK(report["subject_accuracy"].is_number());
    CHECK(report["confusion"].size() == 2);

    CHECK(cli::run({"evaluate", "--checkpoint", dir.str("run/checkpoint_final.json"),
                    "--split", "nope"}) == 2);
    CHECK(cli::run({"evaluate", "--checkpoint", dir.str("missing.json")}) == 4);
}

TEST_CASE("interpret: default K set, counts sum to m") {
    TempDir dir;
    // 12 subjects/class leaves a 14-subject train split: 84 reference rows,
    // enough for the default K=50 neighborhood.
    write_config(dir.str("config.json"), dir.str("run"), 3, "cn_vs_ad", 1.0, 12);
    REQUIRE(cli::run({"train", "--config", dir.str("config.json")}) == 0);
    REQUIRE(cli::run({"interpret", "--checkpoint", dir.str("run/checkpoint_final.json"),
                      "--out", dir.str("interpret.json")}) == 0);

    const auto reports = nlohmann::json::parse(read_text_file(dir.str("interpret.json")));
    REQUIRE(reports.is_array());
    REQUIRE(!reports.empty());
    for (const auto& r : reports) {
        REQUIRE(r["neighborhoods"].size() == 5);  // K defaults 10..50
        std::vector<int> ks;
        for (const auto& entry : r["neighborhoods"]) {
            ks.push_back(entry["k"].get<int>());
            int sum = 0;
            for (const auto& [cls, count] : entry["counts"].items())
                sum += count.get<int>();
            CHECK(sum == 6);  // m
        }
        CHECK(ks == std::vector<int>{10, 20, 30, 40, 50});
    }
}

TEST_CASE("export-embeddings: row/column contract and PCA round trip") {
    TempDir dir;
    write_config(dir.str("config.json"), dir.str("run"), 2);
    REQUIRE(cli::run({"train", "--config", dir.str("config.json")}) == 0);
    REQUIRE(cli::run({"export-embeddings", "--checkpoint",
                      dir.str("run/checkpoint_final.json"), "--split", "test", "--pca",
                      "2", "--out", dir.str("exports")}) == 0);

    // 4 test subjects x 6 slices, header + 24 rows.
    CHECK(line_count(dir.str("exports/embeddings.csv")) == 25);
    {
        std::ifstream in(dir.str("exports/embeddings.csv"));
        std::string header;
        std::getline(in, header);
        std::size_t commas = std::count(header.begin(), header.end(), ',');
        CHECK(commas == 2 + 6);  // id,slice,class + e_0..e_5
    }

    // Re-read the embeddings CSV and re-run PCA in process; coordinates must
    // match the exported pca.csv.
    std::ifstream in(dir.str("exports/embeddings.csv"));
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::size_t pos = 0;
        int field = 0;
        while (pos <= line.size()) {
            const std::size_t next = line.find(',', pos);
            const std::string cell = line.substr(pos, next - pos);
            if (field >= 3) row.push_back(std::strtod(cell.c_str(), nullptr));
            if (next == std::string::npos) break;
            pos = next + 1;
            ++field;
        }
        rows.push_back(row);
    }
    const PcaResult pca = pca_project(Matrix::from_rows(rows), 2);

    std::ifstream pin(dir.str("exports/pca.csv"));
    std::getline(pin, line);
    std::size_t r = 0;
    while (std::getline(pin, line)) {
        const std::size_t last = line.rfind(',');
        const std::size_t prev = line.rfind(',', last - 1);
        const double pc0 = std::strtod(line.substr(prev + 1, last - prev - 1).c_str(), nullptr);
        const double pc1 = std::strtod(line.substr(last + 1).c_str(), nullptr);
        CHECK(pc0 == doctest::Approx(pca.coords(r, 0)).epsilon(1e-9));
        CHECK(pc1 == doctest::Approx(pca.coords(r, 1)).epsilon(1e-9));
        ++r;
    }
    CHECK(r == 24);
    CHECK(fs::exists(dir.str("exports/pca_variance.json")));
}

TEST_CASE("analyze: cost report JSON mirrors the complexity module") {
    TempDir dir;
    write_config(dir.str("config.json"), dir.str("run"), 1);
    REQUIRE(cli::run({"analyze", "--config", dir.str("config.json"), "--out",
                      dir.str("ana")}) == 0);
    const auto j = nlohmann::json::parse(read_text_file(dir.str("ana/cost_report.json")));
    // backbone 12->12, 12->10; triplet 10->6; prior 10->1; concat 7->8->4->1.
    const std::uint64_t expected = (12 * 13 + 10 * 13) + 6 * 11 + 1 * 11 +
                                   (8 * 8 + 4 * 9 + 1 * 5);
    CHECK(j["total_params"].get<std::uint64_t>() == expected);
    CHECK(j["flops_forward"].get<std::uint64_t>() > 0);
    CHECK(j["size_bytes"].get<std::uint64_t>() > 8 * expected);
    CHECK(j["flop_convention"].get<std::string>().find("2 FLOPs") != std::string::npos);
}
