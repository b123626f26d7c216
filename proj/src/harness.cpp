#include "dfq/harness.hpp"

#include "dfq/sampling.hpp"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <future>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

namespace dfq {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr Method kAllMethods[] = {Method::Optimal, Method::Uniform, Method::APoT};

void warn(const HarnessOptions &options, const std::string &message) {
    if (options.log)
        *options.log << "warning: " << message << '\n';
}

std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\r\n") == std::string_view::npos)
        return std::string(text);
    std::string out = "\"";
    for (char c : text) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + '"';
}

std::string csv_number(const std::optional<double> &v) { return v ? format_significant(*v, 9) : std::string(); }

ojson json_number(const std::optional<double> &v) { return v ? ojson(*v) : ojson(nullptr); }

// Standard quantizers are shared by every layer; the first caller builds a
// cell and later callers wait for it.
class QuantizerCache {
public:
    explicit QuantizerCache(const HarnessOptions &options) : options_(options) {}

    StandardQuantizer get(Method method, DistributionKind kind, int bits) {
        const Key key{method, kind, bits};
        std::promise<StandardQuantizer> promise;
        std::shared_future<StandardQuantizer> future;
        bool owner = false;
        {
            std::lock_guard lock(mutex_);
            auto it = cells_.find(key);
            if (it == cells_.end()) {
                future = promise.get_future().share();
                cells_.emplace(key, future);
                owner = true;
            } else {
                future = it->second;
            }
        }
        if (owner) {
            try {
                promise.set_value(build_standard_quantizer(method, kind, bits, options_));
            } catch (...) {
                promise.set_exception(std::current_exception());
            }
        }
        return future.get();
    }

private:
    using Key = std::tuple<Method, DistributionKind, int>;
    const HarnessOptions &options_;
    std::mutex mutex_;
    std::map<Key, std::shared_future<StandardQuantizer>> cells_;
};

LayerFit fit_layer(const Manifest &manifest, const ManifestEntry &entry, Tensor *keep) {
    LayerFit out;
    out.name = entry.name;
    try {
        LoadedTensor loaded = load_manifest_tensor(manifest, entry);
        const std::vector<double> samples(loaded.tensor.values.begin(), loaded.tensor.values.end());
        out.count = samples.size();
        out.fit = select_distribution(samples);
        if (keep)
            *keep = std::move(loaded.tensor);
    } catch (const Error &e) {
        out.error = e.what();
        out.error_code = e.code();
    }
    return out;
}

// Fills the analytic and empirical MSE of one cell; returns the codes too.
std::optional<QuantizedTensor> evaluate_cell(ComparisonRow &row, const Tensor &tensor, const FitReport &fit,
                                             Method method, int bits, QuantizerCache &cache) {
    try {
        const StandardQuantizer q = cache.get(method, fit.selected, bits);
        const DistributionModel &model = fit.selected_model();
        const QuantizerSpec spec = place_quantizer(q, model);
        QuantizedTensor codes = encode(tensor, spec);
        row.analytic_mse = distortion(spec, model).original_total();
        row.empirical_mse = empirical_mse(tensor, decode(codes));
        return codes;
    } catch (const Error &e) {
        row.error = e.what();
        return std::nullopt;
    }
}

ComparisonRow row_for(const LayerFit &layer, int bits, Method method) {
    ComparisonRow row;
    row.layer = layer.name;
    row.bits = bits;
    row.method = method;
    if (layer.fit) {
        row.fitted_kind = layer.fit->selected;
        row.ks_gaussian = layer.fit->ks_gaussian;
        row.ks_laplace = layer.fit->ks_laplace;
    } else {
        row.error = layer.error;
    }
    return row;
}

int layer_exit_code(std::size_t layers, std::size_t failed) {
    return layers > 0 && failed == layers ? kExitLayerFailures : kExitOk;
}

void warn_apot_split(Method method, int bits, const HarnessOptions &options) {
    if (method != Method::APoT || bits < 2 || bits > 8 || bits % 2 == 0)
        return;
    const ApotTerms terms = apot_terms(bits);
    warn(options, "apot with " + std::to_string(bits) + " bits splits unevenly as " +
                      std::to_string(terms.first_bits) + "+" + std::to_string(terms.second_bits) + " bits");
}

ojson model_json(const DistributionModel &m) {
    return ojson{{"location", m.location()}, {"scale", m.scale()}};
}

} // namespace

std::string_view to_string(Method method) noexcept {
    switch (method) {
    case Method::Optimal:
        return "optimal";
    case Method::Uniform:
        return "uniform";
    case Method::APoT:
        return "apot";
    }
    return "?";
}

Method parse_method(std::string_view text) {
    for (Method m : kAllMethods)
        if (text == to_string(m))
            return m;
    throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(text) + "'");
}

int exit_code_for(const Error &error) noexcept {
    return error.code() == ErrorCode::IoError ? kExitIo : kExitInvalidArgument;
}

std::vector<int> parse_bit_range(std::string_view text) {
    const auto number = [&](std::string_view s) {
        int v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
            throw Error(ErrorCode::InvalidArgument, "bad bit range '" + std::string(text) + "'");
        return v;
    };
    int lo = 0, hi = 0;
    if (auto dots = text.find(".."); dots != std::string_view::npos) {
        lo = number(text.substr(0, dots));
        hi = number(text.substr(dots + 2));
    } else if (auto dash = text.find('-'); dash != std::string_view::npos && dash > 0) {
        lo = number(text.substr(0, dash));
        hi = number(text.substr(dash + 1));
    } else {
        lo = hi = number(text);
    }
    require_bit_width(lo);
    require_bit_width(hi);
    if (lo > hi)
        throw Error(ErrorCode::InvalidArgument, "bit range '" + std::string(text) + "' is empty");
    std::vector<int> bits;
    for (int m = lo; m <= hi; ++m)
        bits.push_back(m);
    return bits;
}

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)> &body) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, jobs), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < count;) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                }
            }
        });
    for (auto &t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

StandardQuantizer build_standard_quantizer(Method method, DistributionKind kind, int bits,
                                           const HarnessOptions &options) {
    StandardQuantizer q;
    q.method = method;
    q.kind = kind;
    q.bits = bits;
    const DistributionModel standard = DistributionModel::standard(kind);
    switch (method) {
    case Method::Optimal: {
        OptimizeOptions opt;
        opt.tol = options.tol;
        opt.max_iter = options.max_iter;
        opt.record_distortion = false;
        OptimizeResult result;
        try {
            result = optimize(standard, bits, opt);
        } catch (const NoConvergenceError &e) {
            // Running out of iterations still leaves a usable quantizer.
            if (e.partial().trace.iteration_count < options.max_iter)
                throw;
            result = e.partial();
        }
        q.spec = std::move(result.spec);
        q.converged = result.trace.converged;
        q.iterations = result.trace.iteration_count;
        break;
    }
    case Method::Uniform: {
        const BaselineSpec b = uniform_spec(standard, bits);
        q.spec = b.to_quantizer_spec();
        q.clip = b.clip;
        break;
    }
    case Method::APoT: {
        const BaselineSpec b = apot_spec(standard, bits);
        q.spec = b.to_quantizer_spec();
        q.clip = b.clip;
        q.uneven_split = b.uneven_split;
        break;
    }
    }
    return q;
}

QuantizerSpec place_quantizer(const StandardQuantizer &q, const DistributionModel &model) {
    QuantizerSpec spec = q.spec;
    spec.location_offset = model.location();
    spec.scale_factor = model.scale();
    return spec;
}

std::string comparison_csv(const std::vector<ComparisonRow> &rows) {
    std::string out = "layer,bits,method,fitted_kind,ks_gaussian,ks_laplace,analytic_mse,empirical_mse\r\n";
    for (const auto &r : rows) {
        const bool fitted = r.fitted_kind.has_value();
        out += csv_field(r.layer) + ',' + std::to_string(r.bits) + ',' + std::string(to_string(r.method)) + ',';
        out += fitted ? std::string(to_string(*r.fitted_kind)) : std::string();
        out += ',' + (fitted ? format_significant(r.ks_gaussian, 9) : std::string());
        out += ',' + (fitted ? format_significant(r.ks_laplace, 9) : std::string());
        out += ',' + csv_number(r.analytic_mse) + ',' + csv_number(r.empirical_mse) + "\r\n";
    }
    return out;
}

std::string comparison_json(const std::vector<ComparisonRow> &rows) {
    ojson list = ojson::array();
    for (const auto &r : rows) {
        ojson row = {{"layer", r.layer}, {"bits", r.bits}, {"method", to_string(r.method)}};
        if (r.fitted_kind) {
            row["fitted_kind"] = to_string(*r.fitted_kind);
            row["ks_gaussian"] = r.ks_gaussian;
            row["ks_laplace"] = r.ks_laplace;
        } else {
            row["fitted_kind"] = nullptr;
            row["ks_gaussian"] = nullptr;
            row["ks_laplace"] = nullptr;
        }
        row["analytic_mse"] = json_number(r.analytic_mse);
        row["empirical_mse"] = json_number(r.empirical_mse);
        if (!r.error.empty())
            row["error"] = r.error;
        list.push_back(std::move(row));
    }
    return ojson{{"rows", list}}.dump(2) + "\n";
}

int cmd_tables(const std::vector<int> &bits, const fs::path &out, const HarnessOptions &options) {
    for (int m : bits)
        require_bit_width(m);
    const DistributionKind kinds[] = {DistributionKind::Gaussian, DistributionKind::Laplace};
    std::vector<TableEntry> entries(2 * bits.size());
    parallel_for(entries.size(), options.jobs, [&](std::size_t i) {
        const DistributionKind kind = kinds[i / bits.size()];
        const int m = bits[i % bits.size()];
        const StandardQuantizer q = build_standard_quantizer(Method::Optimal, kind, m, options);
        TableEntry &e = entries[i];
        e.model_kind = kind;
        e.bits = m;
        e.levels = q.spec.levels;
        e.interior_boundaries = q.spec.interior_boundaries();
        e.tol = options.tol;
        e.iterations = q.iterations;
        e.distortion = distortion(q.spec, DistributionModel::standard(kind)).total;
        e.converged = q.converged;
    });
    bool all_converged = true;
    for (const auto &e : entries)
        if (!e.converged) {
            all_converged = false;
            warn(options, std::string(to_string(e.model_kind)) + " " + std::to_string(e.bits) +
                              "-bit quantizer did not converge within max_iter");
        }
    write_file_atomic(out, serialize_table(entries));
    return all_converged ? kExitOk : kExitLayerFailures;
}

int cmd_fit(const fs::path &manifest_path, const fs::path &out, const HarnessOptions &options) {
    const Manifest manifest = read_manifest(manifest_path);
    std::vector<LayerFit> layers(manifest.tensors.size());
    parallel_for(layers.size(), options.jobs,
                 [&](std::size_t i) { layers[i] = fit_layer(manifest, manifest.tensors[i], nullptr); });

    std::size_t failed = 0;
    ojson list = ojson::array();
    for (const auto &l : layers) {
        ojson entry = {{"name", l.name}};
        if (l.fit) {
            entry["count"] = l.count;
            entry["gaussian"] = model_json(l.fit->gaussian);
            entry["laplace"] = model_json(l.fit->laplace);
            entry["ks_gaussian"] = l.fit->ks_gaussian;
            entry["ks_laplace"] = l.fit->ks_laplace;
            entry["selected"] = to_string(l.fit->selected);
        } else {
            ++failed;
            entry["error"] = {{"code", to_string(l.error_code)}, {"message", l.error}};
            warn(options, "layer '" + l.name + "': " + l.error);
        }
        list.push_back(std::move(entry));
    }
    write_file_atomic(out, ojson{{"model_name", manifest.model_name}, {"layers", list}}.dump(2) + "\n");
    return layer_exit_code(layers.size(), failed);
}

int cmd_quantize(const fs::path &manifest_path, int bits, Method method, const fs::path &out_dir,
                 const HarnessOptions &options) {
    require_bit_width(bits);
    if (method == Method::APoT)
        require_bit_width(bits, 2, 8);
    warn_apot_split(method, bits, options);
    const Manifest manifest = read_manifest(manifest_path);
    fs::create_directories(out_dir);

    // Distinct tensor names can sanitize to the same stem.
    std::vector<std::string> stems;
    std::map<std::string, int> used;
    for (const auto &e : manifest.tensors) {
        std::string stem = sanitize_name(e.name);
        if (int n = used[stem]++; n > 0)
            stem += "." + std::to_string(n);
        stems.push_back(stem);
    }

    QuantizerCache cache(options);
    std::vector<ComparisonRow> rows(manifest.tensors.size());
    std::vector<char> ok(rows.size(), 0);
    parallel_for(rows.size(), options.jobs, [&](std::size_t i) {
        Tensor tensor;
        const LayerFit layer = fit_layer(manifest, manifest.tensors[i], &tensor);
        rows[i] = row_for(layer, bits, method);
        if (!layer.fit)
            return;
        auto codes = evaluate_cell(rows[i], tensor, *layer.fit, method, bits, cache);
        if (!codes)
            return;
        try {
            write_file_atomic(out_dir / (stems[i] + ".qdfq"), serialize_qdfq(*codes));
            ok[i] = 1;
        } catch (const Error &e) {
            rows[i].error = e.what();
        }
    });

    std::size_t failed = 0;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (!ok[i]) {
            ++failed;
            warn(options, "layer '" + rows[i].layer + "': " + rows[i].error);
        }
    write_file_atomic(out_dir / "report.csv", comparison_csv(rows));
    write_file_atomic(out_dir / "report.json", comparison_json(rows));
    return layer_exit_code(rows.size(), failed);
}

int cmd_compare(const fs::path &manifest_path, const std::vector<int> &bits, const fs::path &out_csv,
                const HarnessOptions &options) {
    for (int m : bits) {
        require_bit_width(m);
        warn_apot_split(Method::APoT, m, options);
    }
    const Manifest manifest = read_manifest(manifest_path);
    const std::size_t per_layer = bits.size() * std::size(kAllMethods);

    QuantizerCache cache(options);
    std::vector<ComparisonRow> rows(manifest.tensors.size() * per_layer);
    std::vector<char> layer_ok(manifest.tensors.size(), 0);
    parallel_for(manifest.tensors.size(), options.jobs, [&](std::size_t i) {
        Tensor tensor;
        const LayerFit layer = fit_layer(manifest, manifest.tensors[i], &tensor);
        std::size_t r = i * per_layer;
        for (int m : bits)
            for (Method method : kAllMethods) {
                ComparisonRow &row = rows[r++];
                row = row_for(layer, m, method);
                if (layer.fit && evaluate_cell(row, tensor, *layer.fit, method, m, cache))
                    layer_ok[i] = 1;
            }
    });

    std::size_t failed = 0;
    for (std::size_t i = 0; i < layer_ok.size(); ++i)
        failed += layer_ok[i] ? 0 : 1;
    for (const auto &row : rows)
        if (!row.error.empty())
            warn(options, "layer '" + row.layer + "' " + std::to_string(row.bits) + "-bit " +
                              std::string(to_string(row.method)) + ": " + row.error);
    if (out_csv.has_parent_path())
        fs::create_directories(out_csv.parent_path());
    write_file_atomic(out_csv, comparison_csv(rows));
    fs::path twin = out_csv;
    twin.replace_extension(".json");
    write_file_atomic(twin, comparison_json(rows));
    return layer_exit_code(manifest.tensors.size(), failed);
}

DistributionModel synth_layer_model(DistributionKind kind, std::size_t index) {
    const double location = 0.01 * (static_cast<double>(index % 3) - 1.0);
    const double scale = 0.02 * (1.0 + 0.5 * static_cast<double>(index % 4));
    return DistributionModel(kind, location, scale);
}

int cmd_synth(const fs::path &out_dir, const SynthOptions &synth, const HarnessOptions &options) {
    if (synth.kind != "mixed" && synth.kind != "gaussian" && synth.kind != "laplace")
        throw Error(ErrorCode::InvalidArgument, "synthetic kind must be mixed, gaussian or laplace");
    fs::create_directories(out_dir);
    Manifest manifest;
    manifest.model_name = synth.model_name;
    manifest.base_dir = out_dir;
    manifest.tensors.resize(synth.layers);
    parallel_for(synth.layers, options.jobs, [&](std::size_t i) {
        DistributionKind kind;
        if (synth.kind == "mixed")
            kind = i % 2 == 0 ? DistributionKind::Gaussian : DistributionKind::Laplace;
        else
            kind = parse_distribution_kind(synth.kind);
        const std::vector<double> draws = draw_samples(synth_layer_model(kind, i), synth.size, derive_seed(synth.seed, i));
        Tensor t;
        t.name = "layer" + std::to_string(i) + ".weight";
        if (synth.size % 64 == 0 && synth.size > 0)
            t.shape = {synth.size / 64, 64};
        else
            t.shape = {synth.size};
        t.values.assign(draws.begin(), draws.end());
        const Bytes bytes = serialize_qtns(t);
        ManifestEntry &e = manifest.tensors[i];
        e.name = t.name;
        e.shape = t.shape;
        e.file = sanitize_name(t.name) + ".qtns";
        e.sha256 = sha256_hex(bytes);
        write_file_atomic(out_dir / e.file, bytes);
    });
    write_file_atomic(out_dir / "manifest.json", serialize_manifest(manifest));
    return kExitOk;
}

std::string sanitize_name(std::string_view name) {
    std::string out;
    for (char c : name) {
        const bool keep = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' ||
                          c == '_' || c == '-';
        out += keep ? c : '_';
    }
    if (out.empty() || out == "." || out == "..")
        out = "_" + out;
    return out;
}

} // namespace dfq
