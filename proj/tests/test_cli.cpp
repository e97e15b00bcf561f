#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "helpers.hpp"
#include "qaspr/cli.hpp"
#include "qaspr/synthetic.hpp"

using namespace qaspr;

namespace {

nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct SmallData {
    test::TempDir dir{"cli"};
    std::string train, ind;
    SmallData() {
        SyntheticConfig sc;
        sc.entities_per_half = 25;
        sc.rule_pairs = 40;
        sc.background_edges = 20;
        sc.valid_queries = 5;
        sc.test_queries = 6;
        make_rule_kg(sc).write(dir.path / "train", dir.path / "ind");
        train = (dir.path / "train").string();
        ind = (dir.path / "ind").string();
    }
    std::vector<std::string> common(const std::string& out) const {
        return {"--train-dir", train, "--ind-dir", ind, "--out", (dir.path / out).string(), "--max-epochs", "2"};
    }
};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_CASE("usage errors exit nonzero") {
    CHECK(run_cli({}) != 0);
    CHECK(run_cli({"frobnicate"}) != 0);
    CHECK(run_cli({"eval"}) != 0);  // --checkpoint is required
    CHECK(run_cli({"train", "--eval-mask", "maybe"}) != 0);
    CHECK(run_cli({"train"}) == 2);  // no data directories: config error
}

TEST_CASE("mine-rules writes a CSV") {
    SmallData data;
    REQUIRE(run_cli(cat({"mine-rules"}, data.common("mine"))) == 0);
    auto csv = slurp(data.dir.path / "mine" / "confidence.csv");
    CHECK(csv.rfind("body,head,confidence,support\n", 0) == 0);
    CHECK(csv.find("r1,rq,") != std::string::npos);
}

TEST_CASE("train then eval") {
    SmallData data;
    REQUIRE(run_cli(cat({"train"}, data.common("run"))) == 0);
    const auto run = data.dir.path / "run";
    CHECK(std::filesystem::exists(run / "best.ckpt"));
    CHECK(std::filesystem::exists(run / "valid_metrics.json"));
    CHECK(slurp(run / "curve.jsonl").find("\"epoch\":2") != std::string::npos);

    REQUIRE(run_cli({"eval", "--checkpoint", (run / "best.ckpt").string(), "--ranks"}) == 0);
    // Outputs go to the out directory recorded in the checkpoint's config.
    auto m = read_json(run / "metrics.json");
    for (const char* key : {"dataset", "version", "mrr", "hits1", "hits10", "n_queries", "seed", "config", "timestamp"})
        CHECK(m.contains(key));
    CHECK(m["n_queries"] == 12);
    CHECK(std::filesystem::exists(run / "ranks.csv"));

    CHECK(run_cli({"eval", "--checkpoint", (data.dir.path / "nope.ckpt").string()}) == 1);
}

TEST_CASE("ablate writes one report per variant") {
    SmallData data;
    REQUIRE(run_cli(cat({"ablate", "--pe-grid", "0.2,0.8"}, data.common("abl"))) == 0);
    auto j = read_json(data.dir.path / "abl" / "ablation.json");
    REQUIRE(j["variants"].size() == 5);
    CHECK(j["variants"][1]["variant"] == "no-mask");
    CHECK(j["variants"][4]["p_e"] == 0.8);
    CHECK(run_cli(cat({"ablate", "--pe-grid", "0.2,x"}, data.common("abl2"))) == 2);
}

TEST_CASE("inspect-mask and grad-check") {
    SmallData data;
    CHECK(run_cli({"inspect-mask", "--train-dir", data.train, "--ind-dir", data.ind, "--head", "t0", "--relation", "rq"}) ==
          0);
    CHECK(run_cli({"inspect-mask", "--train-dir", data.train, "--ind-dir", data.ind, "--head", "zz", "--relation",
                   "rq"}) == 1);
    CHECK(run_cli({"grad-check"}) == 0);
}
