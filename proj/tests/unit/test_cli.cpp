#include "css/cli.hpp"
#include "css/sdprelax.hpp"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run css_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = css::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

fs::path temp_file(const std::string& name, const std::string& content) {
    fs::path p = fs::temp_directory_path() / ("css_test_" + std::to_string(::getpid()) + "_" + name);
    std::ofstream(p) << content;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

const std::string toy = test_support::model_path("toy.json");

} // namespace

TEST_CASE("line arguments") {
    CHECK(css::cli::parse_line_spec("theta2=0.1*theta1") == 0.1);
    CHECK(css::cli::parse_line_spec(" theta2 = 2.5e-1 * theta1 ") == 0.25);
    CHECK(css::cli::parse_line_spec("theta2=theta1") == 1.0);
    CHECK_FALSE(css::cli::parse_line_spec("theta1=0.1*theta2").has_value());
    CHECK_FALSE(css::cli::parse_line_spec("theta2=0.1*theta1+1").has_value());
}

TEST_CASE("check") {
    Run ok = css_run({"check", toy});
    CHECK(ok.code == 0);
    auto j = nlohmann::json::parse(ok.out);
    CHECK(j["metabolites"] == 6);
    CHECK(j["rank_A"] == 4);

    fs::path bad = temp_file("bad.json", R"({"metabolites": [{"id": "A", "z": "minus one"}], "reactions": [],
                                            "environment": {"RT": 1, "Cref": 1, "Cs": 1, "Bcap": 0}})");
    Run r = css_run({"check", bad.string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("metabolites[0].z") != std::string::npos);
    CHECK(css_run({"check", "/nonexistent/model.json"}).code == 1);
    fs::remove(bad);
}

TEST_CASE("usage errors") {
    CHECK(css_run({}).code == 1);
    CHECK(css_run({"frobnicate"}).code == 1);
    CHECK(css_run({"sweep", toy, "--intervals", "0"}).code == 1);
    CHECK(css_run({"sweep", toy, "--line", "theta3=theta1"}).code == 1);
    CHECK(css_run({"sweep", toy, "--line", "theta2=0.1*theta1", "--eps-feas", "-1"}).code == 1);
    CHECK(css_run({"sample", toy, "--theta1", "1"}).code == 1);
    CHECK(css_run({"sample", toy, "--theta1", "1", "--theta2", "0.1", "--method", "walk"}).code == 1);
    CHECK(css_run({"check", toy, "--reverse", "R9"}).code == 1);
}

TEST_CASE("toy sweep along the line") {
    Run r = css_run({"sweep", toy, "--line", "theta2=0.1*theta1", "--intervals", "80"});
    REQUIRE(r.code == 0);
    auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 82);
    CHECK(rows[0] == std::vector<std::string>{"theta1", "theta2", "f_lin", "f_star", "lower_bound", "status",
                                              "certificate_level"});
    int first = -1, last = -1, count = 0;
    for (int k = 1; k <= 81; ++k) {
        if (rows[k][5] != "feasible") continue;
        if (first < 0) first = k - 1;
        last = k - 1;
        ++count;
    }
    // one contiguous band at the low end of the linear range
    CHECK(first == 0);
    CHECK(count == last - first + 1);
    CHECK(std::stod(rows[last + 1][0]) > 1.009);
    CHECK(std::stod(rows[last + 2][0]) < 1.02);
}

TEST_CASE("certificate levels only at infeasible points") {
    Run r = css_run({"sweep", toy, "--line", "theta2=0.1*theta1", "--theta1", "0.99:1.1", "--intervals", "11",
                     "--certify", "--max-level", "2"});
    REQUIRE(r.code == 0);
    auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 13);
    int certified = 0;
    for (size_t k = 1; k < rows.size(); ++k) {
        REQUIRE(rows[k].size() == 7);
        if (rows[k][6].empty()) continue;
        ++certified;
        CHECK((rows[k][5] == "infeasible" || rows[k][5] == "lin_infeasible"));
    }
    CHECK(certified > 0);
}

TEST_CASE("sampling is reproducible byte for byte") {
    fs::path a = fs::temp_directory_path() / ("css_test_" + std::to_string(::getpid()) + "_a.json");
    fs::path b = fs::temp_directory_path() / ("css_test_" + std::to_string(::getpid()) + "_b.json");
    std::vector<std::string> args{"sample", toy, "--reverse", "all", "--theta1", "1.002", "--theta2", "0.1002",
                                  "--n-traj", "1000", "--method", "projection", "--seed", "7", "--out"};
    auto aa = args, bb = args;
    aa.push_back(a.string());
    bb.push_back(b.string());
    REQUIRE(css_run(aa).code == 0);
    REQUIRE(css_run(bb).code == 0);
    std::string ja = slurp(a), jb = slurp(b);
    CHECK(!ja.empty());
    CHECK(ja == jb);
    auto j = nlohmann::json::parse(ja);
    CHECK(j.contains("metabolites"));
    fs::remove(a);
    fs::remove(b);
}

TEST_CASE("numeric failures name the parameter point") {
    Run r = css_run({"sample", toy, "--theta1", "1.07", "--theta2", "0.107", "--n-traj", "3"});
    CHECK(r.code == 2);
    CHECK(r.err.find("theta1=1.07") != std::string::npos);
}

TEST_CASE("sdpa export parses back") {
    Run r = css_run({"export-sdpa", toy, "--theta1", "1.05", "--theta2", "0.105", "--level", "1"});
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    css::SdpaData d = css::parse_sdpa(in);
    CHECK(d.m > 0);
    CHECK(d.block_sizes.size() >= 2);
}

TEST_CASE("bounds and certify commands") {
    Run b = css_run({"bounds", toy, "--theta1", "1.0", "--theta2", "0.1", "--targets", "A,R1"});
    REQUIRE(b.code == 0);
    auto j = nlohmann::json::parse(b.out);
    CHECK(j["metabolites"].size() == 1);
    CHECK(j["reactions"].size() == 1);
    CHECK(j["metabolites"][0]["y_lower"].get<double>() <= j["metabolites"][0]["y_upper"].get<double>());
    Run c = css_run({"certify", toy, "--theta1", "1.05", "--theta2", "0.105"});
    REQUIRE(c.code == 0);
    CHECK(nlohmann::json::parse(c.out)["status"] == "certified_infeasible");
}

TEST_CASE("installed binary exit codes") {
    fs::path bad = temp_file("bad2.json", "{\"metabolites\": [");
    std::string cmd = std::string(CSS_CLI_PATH) + " check " + bad.string() + " >/dev/null 2>&1";
    int st = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(st));
    CHECK(WEXITSTATUS(st) == 1);
    st = std::system((std::string(CSS_CLI_PATH) + " check " + toy + " >/dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(st) == 0);
    st = std::system((std::string(CSS_CLI_PATH) + " sample " + toy +
                      " --theta1 1.07 --theta2 0.107 --n-traj 2 >/dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(st) == 2);
    fs::remove(bad);
}
