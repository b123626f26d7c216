#include "dfq/harness.hpp"
#include "temp_dir.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <map>
#include <sstream>
#include <sys/wait.h>

using namespace dfq;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path &p) {
    const Bytes b = read_file(p);
    return std::string(b.begin(), b.end());
}

std::vector<std::string> lines(const std::string &text, const std::string &sep = "\r\n") {
    std::vector<std::string> out;
    std::size_t at = 0;
    while (at < text.size()) {
        const std::size_t end = text.find(sep, at);
        out.push_back(text.substr(at, end - at));
        if (end == std::string::npos)
            break;
        at = end + sep.size();
    }
    return out;
}

std::vector<std::string> split(const std::string &row) {
    std::vector<std::string> out;
    std::stringstream ss(row);
    for (std::string f; std::getline(ss, f, ',');)
        out.push_back(f);
    if (!row.empty() && row.back() == ',')
        out.push_back("");
    return out;
}

HarnessOptions quiet(unsigned jobs = 4) {
    HarnessOptions o;
    o.jobs = jobs;
    return o;
}

fs::path make_synth(const TempDir &dir, std::size_t layers, std::size_t size, const std::string &kind = "mixed") {
    SynthOptions s;
    s.layers = layers;
    s.size = size;
    s.kind = kind;
    REQUIRE(cmd_synth(dir.path(), s, quiet()) == kExitOk);
    return dir / "manifest.json";
}

int run_cli(const std::string &args) {
    const std::string cmd = std::string(DFQ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("bit ranges") {
    CHECK(parse_bit_range("4..8") == std::vector<int>{4, 5, 6, 7, 8});
    CHECK(parse_bit_range("4-6") == std::vector<int>{4, 5, 6});
    CHECK(parse_bit_range("16") == std::vector<int>{16});
    for (const char *bad : {"0..3", "17", "1..17"}) {
        try {
            parse_bit_range(bad);
            FAIL(bad);
        } catch (const Error &e) {
            CHECK(e.code() == ErrorCode::InvalidBitWidth);
        }
    }
    CHECK_THROWS_AS(parse_bit_range("8..4"), Error);
    CHECK_THROWS_AS(parse_bit_range("four"), Error);
    CHECK_THROWS_AS(parse_bit_range(""), Error);
    CHECK(parse_method("apot") == Method::APoT);
    CHECK_THROWS_AS(parse_method("kmeans"), Error);
}

TEST_CASE("names and CSV quoting") {
    CHECK(sanitize_name("layer1/conv.weight") == "layer1_conv.weight");
    CHECK(sanitize_name("..") == "_..");
    ComparisonRow r;
    r.layer = "a,\"b\"";
    r.bits = 4;
    r.analytic_mse = 1.0 / 3.0;
    const std::string csv = comparison_csv({r});
    CHECK(lines(csv)[1] == "\"a,\"\"b\"\"\",4,optimal,,,,0.333333333,");
}

TEST_CASE("parallel_for visits every index once") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                        if (i == 7)
                            throw Error(ErrorCode::InvalidArgument, "boom");
                    }),
                    Error);
}

TEST_CASE("tables: counting, content and determinism") {
    TempDir dir("tables");
    REQUIRE(cmd_tables(parse_bit_range("4..8"), dir / "t1.json", quiet()) == kExitOk);
    REQUIRE(cmd_tables(parse_bit_range("4..8"), dir / "t2.json", quiet(1)) == kExitOk);
    const std::string text = slurp(dir / "t1.json");
    CHECK(text == slurp(dir / "t2.json"));
    const auto entries = parse_table(text);
    REQUIRE(entries.size() == 10);
    for (const auto &e : entries) {
        CHECK(e.levels.size() == (std::size_t{1} << e.bits));
        CHECK(e.interior_boundaries.size() == e.levels.size() - 1);
        CHECK(e.converged);
        CHECK(e.tol == 1e-9);
    }
    CHECK(entries[0].model_kind == DistributionKind::Gaussian);
    CHECK(entries[9].model_kind == DistributionKind::Laplace);
    CHECK(entries[9].bits == 8);
    try {
        cmd_tables({17}, dir / "t3.json", quiet());
        FAIL("17 bits accepted");
    } catch (const Error &e) {
        CHECK(exit_code_for(e) == kExitInvalidArgument);
    }
}

TEST_CASE("tables flag unconverged cells") {
    TempDir dir("tables_cap");
    HarnessOptions o = quiet();
    o.max_iter = 5;
    std::ostringstream log;
    o.log = &log;
    CHECK(cmd_tables({4}, dir / "t.json", o) == kExitLayerFailures);
    CHECK(log.str().find("did not converge") != std::string::npos);
    const auto entries = parse_table(slurp(dir / "t.json"));
    REQUIRE(entries.size() == 2);
    CHECK_FALSE(entries[0].converged);
    CHECK(entries[0].iterations == 5);
}

TEST_CASE("fit selects Laplace on Laplace data") {
    TempDir dir("fit");
    const auto manifest = make_synth(dir, 4, 16384, "laplace");
    REQUIRE(cmd_fit(manifest, dir / "fit.json", quiet()) == kExitOk);
    const json report = json::parse(slurp(dir / "fit.json"));
    REQUIRE(report["layers"].size() == 4);
    for (const auto &l : report["layers"]) {
        CHECK(l["selected"] == "laplace");
        CHECK(l["ks_laplace"].get<double>() < l["ks_gaussian"].get<double>());
    }
}

TEST_CASE("fit isolates degenerate layers") {
    TempDir dir("fit_degenerate");
    const auto manifest_path = make_synth(dir, 2, 4096);
    Manifest m = read_manifest(manifest_path);
    Tensor flat;
    flat.name = "constant";
    flat.shape = {16};
    flat.values.assign(16, 0.5f);
    const Bytes bytes = serialize_qtns(flat);
    write_file_atomic(dir / "constant.qtns", bytes);
    m.tensors.insert(m.tensors.begin() + 1, {"constant", {16}, "constant.qtns", sha256_hex(bytes)});
    write_file_atomic(manifest_path, serialize_manifest(m));

    REQUIRE(cmd_fit(manifest_path, dir / "fit.json", quiet()) == kExitOk);
    const json report = json::parse(slurp(dir / "fit.json"));
    REQUIRE(report["layers"].size() == 3);
    CHECK(report["layers"][0].contains("selected"));
    CHECK(report["layers"][1]["error"]["code"] == "DegenerateData");
    CHECK(report["layers"][2].contains("selected"));
}

TEST_CASE("empty manifest") {
    TempDir dir("empty");
    write_file_atomic(dir / "manifest.json", std::string(R"({"model_name":"none","tensors":[]})"));
    CHECK(cmd_fit(dir / "manifest.json", dir / "fit.json", quiet()) == kExitOk);
    CHECK(json::parse(slurp(dir / "fit.json"))["layers"].empty());
    CHECK(cmd_compare(dir / "manifest.json", {4}, dir / "cmp.csv", quiet()) == kExitOk);
    CHECK(lines(slurp(dir / "cmp.csv")).size() == 1);
}

TEST_CASE("quantize: empirical MSE near analytic at 8 bits") {
    TempDir dir("quantize");
    const auto manifest = make_synth(dir, 3, 1 << 18);
    REQUIRE(cmd_quantize(manifest, 8, Method::Optimal, dir / "q8", quiet()) == kExitOk);
    const json report = json::parse(slurp(dir / "q8" / "report.json"));
    REQUIRE(report["rows"].size() == 3);
    for (const auto &row : report["rows"]) {
        const double analytic = row["analytic_mse"];
        const double empirical = row["empirical_mse"];
        CHECK(std::fabs(empirical - analytic) <= 0.05 * analytic);
        CHECK(std::min(row["ks_gaussian"].get<double>(), row["ks_laplace"].get<double>()) < 0.05);
    }
    // The written files decode to the reported error.
    const Manifest m = read_manifest(manifest);
    const Tensor original = load_manifest_tensor(m, m.tensors[1]).tensor;
    const QuantizedTensor q = parse_qdfq(read_file(dir / "q8" / "layer1.weight.qdfq"));
    CHECK(q.bits == 8);
    CHECK(empirical_mse(original, decode(q)) == doctest::Approx(report["rows"][1]["empirical_mse"].get<double>()));
    CHECK(lines(slurp(dir / "q8" / "report.csv")).size() == 4);
}

TEST_CASE("quantize: more bits, lower error") {
    TempDir dir("quantize_rate");
    const auto manifest = make_synth(dir, 3, 1 << 15);
    REQUIRE(cmd_quantize(manifest, 4, Method::Optimal, dir / "q4", quiet()) == kExitOk);
    REQUIRE(cmd_quantize(manifest, 8, Method::Optimal, dir / "q8", quiet()) == kExitOk);
    const json r4 = json::parse(slurp(dir / "q4" / "report.json"));
    const json r8 = json::parse(slurp(dir / "q8" / "report.json"));
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(r8["rows"][i]["empirical_mse"].get<double>() < r4["rows"][i]["empirical_mse"].get<double>());
}

TEST_CASE("quantize: odd-width APoT warns and still runs") {
    TempDir dir("quantize_apot");
    const auto manifest = make_synth(dir, 2, 4096);
    std::ostringstream log;
    HarnessOptions o = quiet();
    o.log = &log;
    CHECK(cmd_quantize(manifest, 3, Method::APoT, dir / "q", o) == kExitOk);
    CHECK(log.str().find("2+1") != std::string::npos);
    CHECK(parse_qdfq(read_file(dir / "q" / "layer0.weight.qdfq")).codebook.size() == 8);
    CHECK_THROWS_AS(cmd_quantize(manifest, 1, Method::APoT, dir / "q1", o), Error);
}

TEST_CASE("quantize: a broken layer does not disturb the others") {
    TempDir dir("quantize_isolation");
    const auto manifest_path = make_synth(dir, 3, 4096);
    Manifest m = read_manifest(manifest_path);
    m.tensors[1].sha256 = std::string(64, '0');
    write_file_atomic(manifest_path, serialize_manifest(m));
    CHECK(cmd_quantize(manifest_path, 4, Method::Uniform, dir / "q", quiet()) == kExitOk);
    CHECK(fs::exists(dir / "q" / "layer0.weight.qdfq"));
    CHECK_FALSE(fs::exists(dir / "q" / "layer1.weight.qdfq"));
    CHECK(fs::exists(dir / "q" / "layer2.weight.qdfq"));
    const json report = json::parse(slurp(dir / "q" / "report.json"));
    CHECK(report["rows"][1]["error"].get<std::string>().find("sha256") != std::string::npos);

    for (auto &t : m.tensors)
        t.sha256 = std::string(64, '0');
    write_file_atomic(manifest_path, serialize_manifest(m));
    CHECK(cmd_quantize(manifest_path, 4, Method::Uniform, dir / "q_all", quiet()) == kExitLayerFailures);
}

TEST_CASE("compare: shape, dominance and determinism") {
    TempDir dir("compare");
    const auto manifest = make_synth(dir, 3, 1 << 14, "gaussian");
    const auto bits = parse_bit_range("4..6");
    REQUIRE(cmd_compare(manifest, bits, dir / "a.csv", quiet(4)) == kExitOk);
    REQUIRE(cmd_compare(manifest, bits, dir / "b.csv", quiet(1)) == kExitOk);
    const std::string csv = slurp(dir / "a.csv");
    CHECK(csv == slurp(dir / "b.csv"));
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));

    const auto rows = lines(csv);
    REQUIRE(rows.size() == 3 * 3 * 3 + 1);
    CHECK(rows[0] == "layer,bits,method,fitted_kind,ks_gaussian,ks_laplace,analytic_mse,empirical_mse");
    CHECK(csv.size() >= 2);
    CHECK(csv.substr(csv.size() - 2) == "\r\n");
    std::map<std::pair<std::string, std::string>, std::map<std::string, double>> cells;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto f = split(rows[i]);
        REQUIRE(f.size() == 8);
        CHECK(f[3] == "gaussian");
        cells[{f[0], f[1]}][f[2]] = std::stod(f[6]);
    }
    CHECK(cells.size() == 9);
    for (const auto &[key, methods] : cells) {
        CHECK(methods.at("optimal") <= methods.at("uniform"));
        CHECK(methods.at("optimal") <= methods.at("apot"));
    }
    const json twin = json::parse(slurp(dir / "a.json"));
    CHECK(twin["rows"].size() == 27);
}

TEST_CASE("compare with a 1-bit column reports the APoT cells as failed") {
    TempDir dir("compare_one");
    const auto manifest = make_synth(dir, 1, 4096);
    REQUIRE(cmd_compare(manifest, {1, 2}, dir / "c.csv", quiet()) == kExitOk);
    const auto rows = lines(slurp(dir / "c.csv"));
    REQUIRE(rows.size() == 7);
    const auto apot1 = split(rows[3]);
    CHECK(apot1[2] == "apot");
    CHECK(apot1[6].empty());
    CHECK(json::parse(slurp(dir / "c.json"))["rows"][2].contains("error"));
}

TEST_CASE("command line exit codes") {
    TempDir dir("cli");
    CHECK(run_cli("synth --out " + (dir / "m").string() + " --layers 2 --size 2048 --seed 7") == 0);
    const std::string manifest = (dir / "m" / "manifest.json").string();
    CHECK(run_cli("fit --manifest " + manifest + " --out " + (dir / "fit.json").string()) == 0);
    CHECK(run_cli("quantize --manifest " + manifest + " --bits 4 --method uniform --out " + (dir / "q").string()) == 0);
    CHECK(run_cli("compare --manifest " + manifest + " --bits 4..5 --jobs 2 --out " + (dir / "c.csv").string()) == 0);
    CHECK(run_cli("tables --bits 17 --out " + (dir / "t.json").string()) == 2);
    CHECK(run_cli("quantize --manifest " + manifest + " --bits 4 --method kmeans --out " + (dir / "q").string()) == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("fit --manifest " + (dir / "absent.json").string() + " --out " + (dir / "f.json").string()) == 3);
    CHECK(run_cli("fit --manifest " + manifest + " --out " + (dir / "no" / "such" / "f.json").string()) == 3);
    CHECK(run_cli("--help") == 0);
}

TEST_CASE("synthetic fixtures are reproducible") {
    TempDir a("synth_a"), b("synth_b");
    make_synth(a, 3, 1000);
    make_synth(b, 3, 1000);
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
    const Manifest m = read_manifest(a / "manifest.json");
    CHECK(m.tensors[0].shape == std::vector<std::size_t>{1000});
    CHECK(synth_layer_model(DistributionKind::Laplace, 1).scale() == doctest::Approx(0.03));
}

}
