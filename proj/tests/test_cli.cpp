#include "oac3/cli.hpp"
#include "oac3/io.hpp"

#include "support/temp_dir.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

using namespace oac3;
using testing_support::read_text;
using testing_support::TempDir;
using testing_support::write_text;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args)
{
    args.insert(args.begin(), "oac3");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::size_t line_count(const std::string& text)
{
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::size_t column_count(const std::string& text)
{
    const std::string first = text.substr(0, text.find('\n'));
    return static_cast<std::size_t>(std::count(first.begin(), first.end(), ',')) + 1;
}

const char* kPi = "0.9,0.1\n0.8,0.2\n0.3,0.7\n0.45,0.55\n";
const char* kPartitions = "0,1\n0,1\n1,0\n1,0\n";

} // namespace

TEST_CASE("run prints a summary and writes labels")
{
    TempDir dir;
    write_text(dir / "pi.csv", kPi);
    write_text(dir / "parts.csv", kPartitions);
    write_text(dir / "truth.csv", "0\n0\n1\n1\n");
    const Outcome r = invoke({"run", "--pi", (dir / "pi.csv").string(), "--partitions", (dir / "parts.csv").string(),
                              "--truth", (dir / "truth.csv").string(), "--divergence", "kl", "--alpha", "0.5",
                              "--lambda", "1", "--labels-out", (dir / "labels.csv").string(), "--trace-out",
                              (dir / "trace.csv").string()});
    CHECK(r.code == cli::kSuccess);
    CHECK(r.out.starts_with("converged=true iters="));
    CHECK(r.out.find(" J=") != std::string::npos);
    CHECK(r.out.find("accuracy=1\n") != std::string::npos);

    std::vector<std::size_t> labels;
    ProbMatrix probabilities;
    io::read_labeling(dir / "labels.csv", labels, probabilities);
    CHECK(labels == std::vector<std::size_t>{0, 0, 1, 1});
    CHECK(probabilities.rows() == 4);
    CHECK(probabilities.cols() == 2);

    const std::size_t iters = std::stoul(r.out.substr(r.out.find("iters=") + 6));
    CHECK(line_count(read_text(dir / "trace.csv")) == iters + 2);
}

TEST_CASE("alpha = 0 keeps the classifier labels")
{
    TempDir dir;
    write_text(dir / "pi.csv", kPi);
    write_text(dir / "parts.csv", "0\n1\n0\n1\n");
    const Outcome r = invoke({"run", "--pi", (dir / "pi.csv").string(), "--partitions", (dir / "parts.csv").string(),
                              "--alpha", "0", "--labels-out", (dir / "labels.csv").string()});
    CHECK(r.code == cli::kSuccess);
    std::vector<std::size_t> labels;
    ProbMatrix probabilities;
    io::read_labeling(dir / "labels.csv", labels, probabilities);
    CHECK(labels == std::vector<std::size_t>{0, 0, 1, 1});
}

TEST_CASE("sparsify 0 matches no sparsification")
{
    TempDir dir;
    write_text(dir / "pi.csv", kPi);
    write_text(dir / "parts.csv", kPartitions);
    const std::vector<std::string> base{"run", "--pi", (dir / "pi.csv").string(), "--partitions",
                                        (dir / "parts.csv").string(), "--alpha", "0.3", "--lambda", "0.5"};
    auto with = base;
    with.insert(with.end(), {"--sparsify", "0", "--labels-out", (dir / "a.csv").string()});
    auto without = base;
    without.insert(without.end(), {"--labels-out", (dir / "b.csv").string()});
    CHECK(invoke(with).out == invoke(without).out);
    CHECK(read_text(dir / "a.csv") == read_text(dir / "b.csv"));
}

TEST_CASE("results do not depend on --threads")
{
    TempDir dir;
    write_text(dir / "pi.csv", kPi);
    write_text(dir / "parts.csv", kPartitions);
    const std::vector<std::string> base{"run", "--pi", (dir / "pi.csv").string(), "--partitions",
                                        (dir / "parts.csv").string(), "--alpha", "0.3"};
    auto one = base;
    one.insert(one.end(), {"--threads", "1", "--labels-out", (dir / "a.csv").string()});
    auto four = base;
    four.insert(four.end(), {"--threads", "4", "--labels-out", (dir / "b.csv").string()});
    CHECK(invoke(one).out == invoke(four).out);
    CHECK(read_text(dir / "a.csv") == read_text(dir / "b.csv"));
}

TEST_CASE("input errors exit with 2")
{
    TempDir dir;
    write_text(dir / "pi.csv", "0.9,0.1\n0.8,oops\n");
    write_text(dir / "parts.csv", "0\n1\n");
    const Outcome bad = invoke({"run", "--pi", (dir / "pi.csv").string(), "--partitions", (dir / "parts.csv").string()});
    CHECK(bad.code == cli::kInputError);
    CHECK(bad.err.find("pi.csv:2:") != std::string::npos);

    write_text(dir / "good.csv", "0.9,0.1\n0.8,0.2\n");
    write_text(dir / "sim.csv", "0,1,0.5\n");
    const Outcome both = invoke({"run", "--pi", (dir / "good.csv").string(), "--partitions",
                                 (dir / "parts.csv").string(), "--similarity", (dir / "sim.csv").string()});
    CHECK(both.code == cli::kInputError);

    CHECK(invoke({"run", "--pi", (dir / "good.csv").string()}).code == cli::kInputError);
    CHECK(invoke({"run", "--pi", (dir / "missing.csv").string(), "--similarity", (dir / "sim.csv").string()}).code
          == cli::kInputError);
    CHECK(invoke({"run", "--pi", (dir / "good.csv").string(), "--similarity", (dir / "sim.csv").string(),
                  "--divergence", "nope"})
              .code
          == cli::kInputError);
    CHECK(invoke({"run", "--pi", (dir / "good.csv").string(), "--similarity", (dir / "sim.csv").string(), "--alpha",
                  "-1"})
              .code
          == cli::kInputError);
}

TEST_CASE("non-convergence exits with 3")
{
    TempDir dir;
    write_text(dir / "pi.csv", kPi);
    write_text(dir / "parts.csv", kPartitions);
    const Outcome r = invoke({"run", "--pi", (dir / "pi.csv").string(), "--partitions", (dir / "parts.csv").string(),
                              "--alpha", "1", "--lambda", "1", "--max-iters", "1"});
    CHECK(r.code == cli::kNotConverged);
    CHECK(r.out.starts_with("converged=false iters=1"));
}

TEST_CASE("generate half moon")
{
    TempDir dir;
    const Outcome r = invoke({"generate", "half-moon", "--seed", "3", "--out", dir.path.string()});
    CHECK(r.code == cli::kSuccess);
    CHECK(r.out.find("train=16 target=784 clusterers=5") != std::string::npos);
    const std::string pi = read_text(dir / "pi.csv");
    const std::string parts = read_text(dir / "partitions.csv");
    CHECK(line_count(pi) == 784);
    CHECK(column_count(pi) == 2);
    CHECK(line_count(parts) == 784);
    CHECK(column_count(parts) == 5);
    CHECK(line_count(read_text(dir / "truth.csv")) == 784);

    TempDir again;
    invoke({"generate", "half-moon", "--seed", "3", "--out", again.path.string()});
    CHECK(read_text(again / "pi.csv") == pi);
    CHECK(read_text(again / "partitions.csv") == parts);
    CHECK(read_text(again / "truth.csv") == read_text(dir / "truth.csv"));
}

TEST_CASE("generate circles and solve the result")
{
    TempDir dir;
    const Outcome g = invoke({"generate", "circles", "--n", "1600", "--seed", "1", "--out", dir.path.string()});
    CHECK(g.code == cli::kSuccess);
    const std::string parts = read_text(dir / "partitions.csv");
    CHECK(line_count(parts) == 1568);
    CHECK(column_count(parts) == 5);

    const Outcome r = invoke({"run", "--pi", (dir / "pi.csv").string(), "--partitions",
                              (dir / "partitions.csv").string(), "--truth", (dir / "truth.csv").string(),
                              "--sparsify", "0.5"});
    CHECK(r.code == cli::kSuccess);
    CHECK(r.out.find("accuracy=") != std::string::npos);
}

TEST_CASE("generate rejects bad options")
{
    TempDir dir;
    CHECK(invoke({"generate", "spirals", "--out", dir.path.string()}).code == cli::kInputError);
    CHECK(invoke({"generate", "half-moon", "--n", "801", "--out", dir.path.string()}).code == cli::kInputError);
}

TEST_CASE("diagnose reports")
{
    const Outcome kl = invoke({"diagnose", "--divergence", "kl", "--alpha", "0.5", "--lambda", "0.5", "--seed", "2"});
    CHECK(kl.code == cli::kSuccess);
    CHECK(kl.out.find("hessian: pd=true") != std::string::npos);
    CHECK(kl.out.find("rate: qlinear=true") != std::string::npos);
    CHECK(kl.out.find("descent: non_increasing=true") != std::string::npos);
    CHECK(kl.out.find("delta_j: non_increasing=true") != std::string::npos);

    const Outcome eu = invoke({"diagnose", "--divergence", "euclidean", "--alpha", "0.5", "--lambda", "0.5"});
    CHECK(eu.code == cli::kSuccess);
    CHECK(eu.out.find("hessian: skipped=unsupported") != std::string::npos);
    CHECK(eu.out.find("rate: qlinear=") != std::string::npos);

    CHECK(invoke({"diagnose", "--divergence", "euclidean", "--checks", "hessian"}).code == cli::kUnsupported);

    const Outcome only_rate = invoke({"diagnose", "--divergence", "gen-i", "--checks", "rate", "--lambda-hat"});
    CHECK(only_rate.code == cli::kSuccess);
    CHECK(only_rate.out.find("hessian:") == std::string::npos);
    CHECK(only_rate.out.find("rate:") != std::string::npos);
    CHECK(only_rate.out.find("lambda_hat:") != std::string::npos);
}

TEST_CASE("diagnose writes a trace and a report")
{
    TempDir dir;
    const Outcome d = invoke({"diagnose", "--divergence", "gen-i", "--alpha", "0.5", "--lambda", "0.5", "--trace-out",
                              (dir / "trace.csv").string(), "--report-out", (dir / "report.txt").string()});
    CHECK(d.code == cli::kSuccess);
    const std::string trace = read_text(dir / "trace.csv");
    CHECK(trace.starts_with("iteration,J,delta_J,ratio\n"));
    const std::size_t iters = std::stoul(d.out.substr(d.out.find("iters=") + 6));
    CHECK(line_count(trace) == iters + 2);
    CHECK(read_text(dir / "report.txt") == d.out);
}

TEST_CASE("diagnose reads files")
{
    TempDir dir;
    write_text(dir / "pi.csv", kPi);
    write_text(dir / "sim.csv", "0,1,1\n2,3,0.8\n1,2,0.1\n");
    const Outcome d = invoke({"diagnose", "--pi", (dir / "pi.csv").string(), "--similarity",
                              (dir / "sim.csv").string(), "--divergence", "gen-i", "--alpha", "0.2"});
    CHECK(d.code == cli::kSuccess);
    CHECK(d.out.find("problem: n=4 k=2") != std::string::npos);
}
