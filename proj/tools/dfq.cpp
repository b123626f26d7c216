// dfq: design, fit and apply distribution-aware weight quantizers.
#include "dfq/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

struct Flags {
    std::string bits = "4..8";
    std::string method = "optimal";
    std::string manifest;
    std::string out;
    unsigned jobs = 1;
    std::uint64_t seed = 42;
    double tol = 1e-9;
    std::size_t max_iter = 1'000'000;
    std::size_t layers = 3;
    std::size_t size = 65536;
    std::string kind = "mixed";
};

void add_solver_flags(CLI::App *cmd, Flags &f) {
    cmd->add_option("--tol", f.tol, "Stop when no level moves more than this")->check(CLI::PositiveNumber);
    cmd->add_option("--max-iter", f.max_iter, "Iteration cap for the optimal quantizer")->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Distribution-aware weight quantization"};
    app.require_subcommand(1);
    Flags f;

    auto *tables = app.add_subcommand("tables", "Precompute optimal quantizers for the standard models");
    tables->add_option("--bits", f.bits, "Bit width or range, e.g. 4..8")->capture_default_str();
    tables->add_option("--out", f.out, "Output JSON file")->required();
    tables->add_option("--jobs", f.jobs, "Worker threads")->capture_default_str();
    add_solver_flags(tables, f);

    auto *fit = app.add_subcommand("fit", "Fit Gaussian and Laplace models to every tensor");
    fit->add_option("--manifest", f.manifest, "Tensor manifest")->required();
    fit->add_option("--out", f.out, "Output JSON file")->required();
    fit->add_option("--jobs", f.jobs, "Worker threads")->capture_default_str();

    auto *quantize = app.add_subcommand("quantize", "Quantize every tensor of a manifest");
    quantize->add_option("--manifest", f.manifest, "Tensor manifest")->required();
    quantize->add_option("--bits", f.bits, "Bit width")->required();
    quantize->add_option("--method", f.method, "optimal, uniform or apot")->capture_default_str();
    quantize->add_option("--out", f.out, "Output directory")->required();
    quantize->add_option("--jobs", f.jobs, "Worker threads")->capture_default_str();
    add_solver_flags(quantize, f);

    auto *compare = app.add_subcommand("compare", "Per-layer MSE of every method and bit width");
    compare->add_option("--manifest", f.manifest, "Tensor manifest")->required();
    compare->add_option("--bits", f.bits, "Bit width or range")->capture_default_str();
    compare->add_option("--out", f.out, "Output CSV file; a .json twin is written beside it")->required();
    compare->add_option("--jobs", f.jobs, "Worker threads")->capture_default_str();
    add_solver_flags(compare, f);

    auto *synth = app.add_subcommand("synth", "Write a synthetic manifest of Gaussian/Laplace tensors");
    synth->add_option("--out", f.out, "Output directory")->required();
    synth->add_option("--layers", f.layers, "Number of tensors")->capture_default_str();
    synth->add_option("--size", f.size, "Elements per tensor")->capture_default_str();
    synth->add_option("--kind", f.kind, "mixed, gaussian or laplace")->capture_default_str();
    synth->add_option("--seed", f.seed, "Random seed")->capture_default_str();
    synth->add_option("--jobs", f.jobs, "Worker threads")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : dfq::kExitInvalidArgument;
    }

    dfq::HarnessOptions options;
    options.tol = f.tol;
    options.max_iter = f.max_iter;
    options.jobs = f.jobs;
    options.log = &std::cerr;

    try {
        if (*tables)
            return dfq::cmd_tables(dfq::parse_bit_range(f.bits), f.out, options);
        if (*fit)
            return dfq::cmd_fit(f.manifest, f.out, options);
        if (*quantize) {
            const auto bits = dfq::parse_bit_range(f.bits);
            if (bits.size() != 1)
                throw dfq::Error(dfq::ErrorCode::InvalidArgument, "quantize takes a single bit width");
            return dfq::cmd_quantize(f.manifest, bits.front(), dfq::parse_method(f.method), f.out, options);
        }
        if (*compare)
            return dfq::cmd_compare(f.manifest, dfq::parse_bit_range(f.bits), f.out, options);
        if (*synth) {
            dfq::SynthOptions s;
            s.layers = f.layers;
            s.size = f.size;
            s.kind = f.kind;
            s.seed = f.seed;
            return dfq::cmd_synth(f.out, s, options);
        }
    } catch (const dfq::Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return dfq::exit_code_for(e);
    } catch (const std::filesystem::filesystem_error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return dfq::kExitIo;
    }
    return dfq::kExitInvalidArgument;
}
