#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "fident/cli.hpp"
#include "support.hpp"

using namespace fident;
using fident::test::fixture_path;

namespace {

struct CliResult {
    int exit_code;
    std::string out;
    std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = cli::run(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("cli Dsep matches the fig2 facts") {
    CliResult r = run_cli({"Dsep", "-g", fixture_path("fig2a.cg"), "--x", "G", "--y", "I", "--z",
                           "A", "--functional", "C,D"});
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.out == "D-separated: true\n");

    CliResult r2 =
        run_cli({"dsep", "-g", fixture_path("fig2a.cg"), "--x", "G", "--y", "I", "--z", "A"});
    REQUIRE(r2.exit_code == 0);
    REQUIRE(r2.out == "d-separated: false\n");
}

TEST_CASE("cli identify on fig3a with functional B") {
    CliResult r = run_cli({"identify", "-g", fixture_path("fig3a.cg"), "--treat", "X", "--outcome",
                           "Y", "--functional", "B", "--constraints", "strict"});
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.out.find("status: F-identifiable") != std::string::npos);
    REQUIRE(r.out.find("formula: sum_{a} P(a) P(y|a,x)") != std::string::npos);
}

TEST_CASE("cli identify not-identifiable and inconclusive exit codes") {
    CliResult hedge = run_cli({"identify", "-g", fixture_path("fig3a.cg"), "--treat", "X",
                               "--outcome", "Y", "--constraints", "strict"});
    REQUIRE(hedge.exit_code == 0);
    REQUIRE(hedge.out.find("status: not identifiable") != std::string::npos);
    REQUIRE(hedge.out.find("hedge roots:") != std::string::npos);

    CliResult inc = run_cli({"identify", "-g", fixture_path("fig3a.cg"), "--treat", "X",
                             "--outcome", "Y", "--functional", "B", "--constraints",
                             "P(X)>0;P(A)>0"});
    REQUIRE(inc.exit_code == 2);
    REQUIRE(inc.out.find("status: inconclusive") != std::string::npos);
}

TEST_CASE("cli project emits the projected DSL") {
    CliResult r = run_cli({"project", "-g", fixture_path("fig1a.cg")});
    REQUIRE(r.exit_code == 0);
    REQUIRE(parse_graph(r.out) == fident::test::load_fixture("fig1c.cg"));
}

TEST_CASE("cli felim and fproject") {
    CliResult r = run_cli({"felim", "-g", fixture_path("fig2a.cg"), "--eliminate", "C,D"});
    REQUIRE(r.exit_code == 0);
    REQUIRE(parse_graph(r.out) == fident::test::load_fixture("fig2c.cg"));

    CliResult r2 = run_cli({"fproject", "-g", fixture_path("fig4a.cg")});
    REQUIRE(r2.exit_code == 0);
    REQUIRE(parse_graph(r2.out) == fident::test::load_fixture("fig4c.cg"));
}

TEST_CASE("cli usage and input errors exit 1 with distinct messages") {
    CliResult bad_cmd = run_cli({"frobnicate"});
    REQUIRE(bad_cmd.exit_code == 1);
    REQUIRE(bad_cmd.err.find("usage error") != std::string::npos);

    CliResult bad_file = run_cli({"project", "-g", "/nonexistent.cg"});
    REQUIRE(bad_file.exit_code == 1);
    REQUIRE(bad_file.err.find("query error") != std::string::npos);

    CliResult bad_var = run_cli({"identify", "-g", fixture_path("fig3a.cg"), "--treat", "Q",
                                 "--outcome", "Y"});
    REQUIRE(bad_var.exit_code == 1);

    // declaring a root functional is a conflict
    CliResult bad_root = run_cli({"identify", "-g", fixture_path("fig3a.cg"), "--treat", "X",
                                  "--outcome", "Y", "--functional", "A"});
    REQUIRE(bad_root.exit_code == 1);
    REQUIRE(bad_root.err.find("root") != std::string::npos);
}

TEST_CASE("cli json output is stable and versioned") {
    std::vector<std::string> args{"identify", "-g",          fixture_path("fig3a.cg"),
                                  "--treat",  "X",           "--outcome",
                                  "Y",        "--functional", "B",
                                  "--json"};
    CliResult a = run_cli(args);
    CliResult b = run_cli(args);
    REQUIRE(a.exit_code == 0);
    REQUIRE(a.out == b.out);  // byte-identical
    auto j = nlohmann::json::parse(a.out);
    REQUIRE(j.at("schema") == "fident/v1");
    REQUIRE(j.at("status") == "F-identifiable");
    REQUIRE(j.contains("formula_ast"));
}

TEST_CASE("cli oracle falsify exit codes distinguish found from none-found") {
    CliResult found = run_cli({"oracle", "falsify", "-g", fixture_path("fig3a.cg"), "--treat", "X",
                               "--outcome", "Y", "--constraints", "none", "--restarts", "50"});
    REQUIRE(found.exit_code == 0);
    REQUIRE(found.out.find("counterexample found") != std::string::npos);

    CliResult none = run_cli({"oracle", "falsify", "-g", fixture_path("backdoor.cg"), "--treat",
                              "X", "--outcome", "Y", "--constraints", "none", "--restarts", "2"});
    REQUIRE(none.exit_code == 2);
    REQUIRE(none.out.find("NOT a proof") != std::string::npos);
}

TEST_CASE("cli oracle validate and soundness") {
    CliResult v = run_cli({"oracle", "validate", "-g", fixture_path("fig3a.cg"), "--treat", "X",
                           "--outcome", "Y", "--functional", "B", "--constraints", "strict",
                           "--seeds", "20", "--json"});
    REQUIRE(v.exit_code == 0);
    auto j = nlohmann::json::parse(v.out);
    REQUIRE(j.at("max_abs_error").get<double>() <= 1e-9);
    REQUIRE(j.at("seeds_checked").get<int>() > 0);

    CliResult s = run_cli({"oracle", "soundness", "--graphs", "20", "--seed", "9", "--json"});
    REQUIRE(s.exit_code == 0);
    auto js = nlohmann::json::parse(s.out);
    REQUIRE(js.at("violations").get<int>() == 0);
}

TEST_CASE("cli identify trace and report flags") {
    CliResult r = run_cli({"identify", "-g", fixture_path("fig4a.cg"), "--treat", "X", "--outcome",
                           "Y", "--functional", "F", "--constraints", "P(A,B,C,X,Y)>0", "--trace",
                           "--report"});
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.out.find("status: not F-identifiable") != std::string::npos);
    REQUIRE(r.out.find("trace: reduce_hidden D E") != std::string::npos);
    REQUIRE(r.out.find("trace: reduce_observed F") != std::string::npos);
    REQUIRE(r.out.find("report: F eliminated") != std::string::npos);
    REQUIRE(r.out.find("observation not needed: F") != std::string::npos);
}

TEST_CASE("cli identify json matches the frozen golden file") {
    CliResult r = run_cli({"identify", "-g", fixture_path("fig3a.cg"), "--treat", "X", "--outcome",
                           "Y", "--functional", "B", "--constraints", "strict", "--json"});
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.out == fident::test::read_file(fixture_path("golden/identify_fig3a_funcB.json")));
}
