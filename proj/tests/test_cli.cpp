#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "geowarp/apps.hpp"
#include "geowarp/cli.hpp"
#include "geowarp/io.hpp"
#include "geowarp/synthesizer.hpp"
#include "support.hpp"

using namespace geowarp;
using geowarp::testing::smooth_image;
using geowarp::testing::TempDir;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    const auto b = io::read_file(p);
    return {b.begin(), b.end()};
}

// A small synthetic dataset shared by the tests below.
struct Fixture {
    TempDir dir{"cli"};
    std::filesystem::path src = dir.path() / "src";
    std::filesystem::path ds = dir.path() / "ds";
    DatasetManifest manifest;

    Fixture() {
        std::filesystem::create_directories(src);
        io::write_png(src / "a.png", smooth_image(420, 400));
        const Run r = invoke({"synth", "--src", src.string(), "--out", ds.string(), "--count", "1", "--seed", "0"});
        REQUIRE(r.code == 0);
        manifest = manifest_from_json(slurp(ds / "manifest.json"));
    }

    const ManifestRecord& record(DistortionType t) const {
        for (const auto& r : manifest.records)
            if (r.type == t) return r;
        FAIL("missing record");
        return manifest.records.front();
    }
    std::string path(const std::string& rel) const { return (ds / rel).string(); }
};

}  // namespace

TEST_CASE("epe of a flow with itself prints 0") {
    TempDir dir("cli_epe");
    const auto f = (dir.path() / "f.flo").string();
    io::write_flow(f, testing::random_flow(20, 10, 3));
    const Run r = invoke({"epe", "--a", f, "--b", f});
    CHECK(r.code == 0);
    CHECK(r.out == "0\n");
}

TEST_CASE("epe prints the library value to full precision") {
    TempDir dir("cli_epe2");
    const FlowField a = testing::random_flow(20, 10, 3);
    const FlowField b = testing::random_flow(20, 10, 4);
    io::write_flow(dir.path() / "a.flo", a);
    io::write_flow(dir.path() / "b.flo", b);
    const Run r = invoke({"epe", "--a", (dir.path() / "a.flo").string(), "--b", (dir.path() / "b.flo").string()});
    CHECK(std::stod(r.out) == epe(a, b));
}

TEST_CASE("fit recovers a 10 degree rotation") {
    TempDir dir("cli_fit");
    const auto f = (dir.path() / "rot10.flo").string();
    io::write_flow(f, flow_field(DistortionParams::rotation(10.0), 128, 128));
    const Run r = invoke({"fit", "--flow", f, "--type", "rotation"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["type"] == "rotation");
    CHECK(std::abs(j["rho"][0].get<double>() - 10.0) <= 0.3);
    const FitResult lib = hough_fit(io::read_flow(f), DistortionType::Rotation, ParamRange::defaults());
    CHECK(j["rho"][0].get<double>() == lib.params.rho[0]);
    CHECK(j["votes"].get<std::uint64_t>() == lib.votes);

    const Run a = invoke({"fit", "--flow", f, "--auto"});
    REQUIRE(a.code == 0);
    CHECK(json::parse(a.out)["type"] == "rotation");
}

TEST_CASE("fit --refined writes the regenerated flow") {
    TempDir dir("cli_refined");
    const auto f = (dir.path() / "s.flo").string();
    const auto g = (dir.path() / "r.flo").string();
    io::write_flow(f, flow_field(DistortionParams::shear(0.3), 64, 64));
    REQUIRE(invoke({"fit", "--flow", f, "--type", "shear", "--refined", g}).code == 0);
    const FitResult lib = hough_fit(io::read_flow(f), DistortionType::Shear, ParamRange::defaults());
    CHECK(epe(io::read_flow(g), refine_flow(lib, 64, 64)) == 0.0);
}

TEST_CASE("correct on synthesized pairs") {
    Fixture fx;
    REQUIRE(fx.manifest.records.size() == 6);
    for (const ManifestRecord& rec : fx.manifest.records) {
        CAPTURE(type_name(rec.type));
        const auto out_png = (fx.dir.path() / "c.png").string();
        const auto report = (fx.dir.path() / "r.json").string();
        const Run r = invoke({"correct", "--image", fx.path(rec.image), "--flow", fx.path(rec.flow), "--out", out_png,
                           "--report", report, "--max-iter", "5"});
        REQUIRE(r.code == 0);
        const json j = json::parse(slurp(report));

        // Same result as the library call.
        ResampleOptions o;
        o.max_iterations = 5;
        const ResampleResult lib = resample(io::read_png(fx.path(rec.image)), io::read_flow(fx.path(rec.flow)), o);
        CHECK(j["fraction_converged"].get<double>() == lib.report.fraction_converged);
        TempDir tmp("cli_lib");
        io::write_png(tmp.path() / "lib.png", lib.image);
        CHECK(io::read_file(out_png) == io::read_file(tmp.path() / "lib.png"));

        // Residuals below 1/5 px after five iterations: histogram bins below edge 0.2.
        const auto hist = j["residual_histogram"].get<std::vector<std::uint64_t>>();
        std::uint64_t below = 0, total = 0;
        for (std::size_t k = 0; k < hist.size(); ++k) {
            total += hist[k];
            if (k < 4) below += hist[k];
        }
        CHECK(j["residual_edges"][3].get<double>() == 0.2);
        CHECK(double(below) / double(total) >= 0.95);
    }
}

TEST_CASE("correct with --refine and a sidecar") {
    Fixture fx;
    const ManifestRecord& rec = fx.record(DistortionType::Barrel);
    io::PredictionSidecar side;
    side.type = DistortionType::Barrel;
    side.scores = {0.9, 0.02, 0.02, 0.02, 0.02, 0.02};
    side.flow = std::filesystem::absolute(fx.path(rec.flow)).string();
    const auto side_path = (fx.dir.path() / "pred.json").string();
    io::write_text_atomic(side_path, io::sidecar_to_json(side));

    const Run r = invoke({"correct", "--image", fx.path(rec.image), "--sidecar", side_path, "--out",
                       (fx.dir.path() / "c.png").string()});
    REQUIRE(r.code == 0);
    const json report = json::parse(r.err);
    CHECK(report["fit"]["type"] == "barrel");
    // The stored flow is a centred crop, so its own normalization is smaller than the canvas's.
    const double ratio = (rec.crop.width / 2.0) / (rec.canvas_width / 2.0);
    CHECK(std::abs(report["fit"]["rho"][0].get<double>() - rec.params.rho[0] * ratio * ratio) <= 0.35 / 200.0);

    const Run f = invoke({"fit", "--sidecar", side_path});
    REQUIRE(f.code == 0);
    CHECK(json::parse(f.out)["rho"] == report["fit"]["rho"]);
}

TEST_CASE("transfer and exaggerate match the library") {
    Fixture fx;
    const ManifestRecord& rec = fx.record(DistortionType::Perspective);
    const auto target = (fx.src / "a.png").string();
    const auto out = (fx.dir.path() / "t.png").string();
    REQUIRE(invoke({"transfer", "--ref-flow", fx.path(rec.flow), "--target", target, "--out", out}).code == 0);
    TempDir tmp("cli_tr");
    io::write_png(tmp.path() / "t.png", transfer(io::read_flow(fx.path(rec.flow)), io::read_png(target)));
    CHECK(io::read_file(out) == io::read_file(tmp.path() / "t.png"));

    REQUIRE(invoke({"exaggerate", "--image", fx.path(rec.image), "--flow", fx.path(rec.flow), "--gain", "-0.5", "--out",
                 out})
                .code == 0);
    io::write_png(tmp.path() / "e.png",
                  exaggerate(io::read_png(fx.path(rec.image)), io::read_flow(fx.path(rec.flow)), -0.5));
    CHECK(io::read_file(out) == io::read_file(tmp.path() / "e.png"));
}

TEST_CASE("identify ranks the flow's own type first") {
    TempDir dir("cli_id");
    const auto f = (dir.path() / "w.flo").string();
    io::write_flow(f, flow_field(DistortionParams::wave(4.0, 37.0), 128, 128));
    const Run r = invoke({"identify", "--flow", f});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    REQUIRE(j.is_array());
    CHECK(j[0]["type"] == "wave");
}

TEST_CASE("resample-bench emits one row per level, method and iteration") {
    TempDir dir("cli_bench");
    const auto f = (dir.path() / "b.flo").string();
    io::write_flow(f, flow_field(DistortionParams::barrel(-0.2), 64, 64));
    const Run r = invoke({"resample-bench", "--flow", f, "--levels", "0.5,1", "--max-iter", "3"});
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "level,method,iteration,mean_residual,fraction_below_0.2px,fraction_converged");
    int rows = 0;
    for (std::string line; std::getline(lines, line);) ++rows;
    CHECK(rows == 2 * 2 * 3);
}

TEST_CASE("exit codes") {
    TempDir dir("cli_codes");
    CHECK(invoke({}).code == cli::kUsage);
    CHECK(invoke({"frobnicate"}).code == cli::kUsage);
    CHECK(invoke({"epe", "--a", "x.flo"}).code == cli::kUsage);
    CHECK(invoke({"fit", "--flow", "x.flo", "--type", "twirl"}).code == cli::kUsage);
    CHECK(invoke({"epe", "--a", (dir.path() / "none.flo").string(), "--b", "x"}).code == cli::kIo);

    std::ofstream(dir.path() / "bad.flo", std::ios::binary) << std::string("\xEF\xBE\xAD\xDE\x01\0\0\0\x01\0\0\0\0\0\0\0\0\0\0\0", 20);
    const Run bad = invoke({"fit", "--flow", (dir.path() / "bad.flo").string(), "--type", "shear"});
    CHECK(bad.code == cli::kIo);
    CHECK(bad.err.find("magic") != std::string::npos);

    const auto zero = (dir.path() / "tiny.flo").string();
    io::write_flow(zero, FlowField(6, 6));
    CHECK(invoke({"fit", "--flow", zero, "--type", "rotation"}).code == cli::kAlgorithm);
    CHECK(invoke({"identify", "--flow", zero}).code == cli::kAlgorithm);

    const auto a = (dir.path() / "a.flo").string();
    const auto b = (dir.path() / "b.flo").string();
    io::write_flow(a, FlowField(6, 6));
    io::write_flow(b, FlowField(6, 7));
    CHECK(invoke({"epe", "--a", a, "--b", b}).code == cli::kUsage);
}

TEST_CASE("the installed binary follows the same exit codes") {
    const std::string bin = GEOWARP_CLI_PATH;
    CHECK(std::system((bin + " --help > /dev/null").c_str()) == 0);
    const int status = std::system((bin + " epe --a /nonexistent.flo --b /nonexistent.flo 2> /dev/null").c_str());
    CHECK(WEXITSTATUS(status) == 3);
}
