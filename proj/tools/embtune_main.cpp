#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "embtune/evalharness.hpp"
#include "embtune/synthbench.hpp"
#include "embtune/tuner.hpp"

namespace fs = std::filesystem;
using namespace embtune;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    write_file(path, j.dump(2) + "\n");
}

Hyper hyper_from_sets(const std::vector<std::string>& sets, std::uint64_t seed) {
    Hyper h;
    h.seed = seed;
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("--set expects key=value, got: " + kv);
        }
        h.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return h;
}

nlohmann::ordered_json run_config(const std::string& command, const std::string& traces,
                                  const std::string& method, const Hyper& hyper,
                                  std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["command"] = command;
    if (!traces.empty()) j["traces"] = traces;
    if (!method.empty()) j["method"] = method;
    j["seed"] = seed;
    j["hyper"] = hyper.to_json();
    return j;
}

std::string encodings_csv(const TrainedModel& m, const TraceSet& raw) {
    const TraceSet scaled = apply_scaler(m.scaler, raw);
    const Tensor z = m.embedder->encode_batch(metrics_matrix(scaled));
    std::ostringstream os;
    os << "workload_id";
    for (std::size_t c = 0; c < z.cols(); ++c) os << ",z_" << c;
    os << "\n";
    for (std::size_t r = 0; r < z.rows(); ++r) {
        os << scaled.observations[r].workload_id;
        for (std::size_t c = 0; c < z.cols(); ++c) os << "," << format_double(z.at(r, c));
        os << "\n";
    }
    return os.str();
}

int cmd_generate(const std::string& spec_path, const std::string& out_dir,
                 std::uint64_t seed, bool seed_given) {
    SynthSpec spec;
    if (!spec_path.empty()) {
        spec = synth_spec_from_json(nlohmann::ordered_json::parse(read_file(spec_path)));
    }
    if (seed_given) spec.seed = seed;
    spec.validate();
    auto [traces, gt] = generate(spec);
    const fs::path out(out_dir);
    write_file(out / "traces.csv", write_trace_csv(traces));
    write_json(out / "ground_truth.json", ground_truth_to_json(gt));
    write_json(out / "spec.json", synth_spec_to_json(spec));
    std::cout << "generated " << traces.n() << " observations over "
              << traces.workload_ids().size() << " workloads -> " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& traces_path, const std::string& method,
              const std::vector<std::string>& sets, std::uint64_t seed,
              const std::string& out_dir) {
    const Hyper hyper = hyper_from_sets(sets, seed);
    const TraceSet traces = parse_trace_csv(read_file(traces_path));
    traces.validate();
    const EmbedKind kind = embed_kind_from_name(method);
    const TrainedModel m = train_method(traces, kind, hyper);

    const fs::path out(out_dir);
    write_json(out / "model.json", m.to_json());
    write_json(out / "run_config.json", run_config("train", traces_path, method, hyper, seed));
    std::ostringstream log;
    const std::vector<double>& losses =
        m.arch.has_value() ? m.arch->epoch_losses
        : (m.kind == EmbedKind::Identity || m.kind == EmbedKind::Pca ||
           m.kind == EmbedKind::Kpca)
            ? m.regressor.epoch_losses
            : dynamic_cast<const NnModel&>(*m.embedder).epoch_losses;
    for (std::size_t e = 0; e < losses.size(); ++e) {
        log << "epoch " << e << " loss " << format_double(losses[e]) << "\n";
    }
    write_file(out / "training_log.txt", log.str());
    std::cout << "trained " << method << " on " << traces.n() << " observations -> "
              << out_dir << "\n";
    return 0;
}

int cmd_evaluate(const std::string& traces_path, const std::string& method,
                 const std::string& scheme, std::size_t obs, std::size_t runs,
                 double test_fraction, const std::vector<std::string>& sets,
                 std::uint64_t seed, const std::string& out_dir) {
    const TraceSet traces = parse_trace_csv(read_file(traces_path));
    traces.validate();
    const EmbedKind kind = embed_kind_from_name(method);
    if (runs == 0) throw std::invalid_argument("--runs must be > 0");

    std::vector<EvalReport> reports;
    const fs::path out(out_dir);
    for (std::size_t run = 0; run < runs; ++run) {
        const std::uint64_t run_seed = seed + run;
        Hyper hyper = hyper_from_sets(sets, run_seed);
        auto [train, test] = split_workloads(traces, test_fraction, run_seed);
        const TrainedModel m = train_method(train, kind, hyper);
        EvalReport r;
        r.method = method;
        r.seed = run_seed;
        if (scheme == "all") {
            r = evaluate_all_schemes(m, test, run_seed);
            r.method = method;
        } else {
            r.rows.push_back(
                evaluate_scheme(m, test, {pool_kind_from_name(scheme), obs}, run_seed));
        }
        reports.push_back(r);
        if (run == 0 && !m.arch.has_value()) {
            write_file(out / "encodings.csv", encodings_csv(m, test));
        }
    }
    const EvalReport avg = average_reports(reports);
    nlohmann::ordered_json rj;
    rj["schema_version"] = 1;
    rj["runs"] = nlohmann::ordered_json::array();
    for (const auto& r : reports) rj["runs"].push_back(r.to_json());
    rj["average"] = avg.to_json();
    write_json(out / "report.json", rj);
    write_file(out / "report.txt", avg.to_table());
    write_json(out / "run_config.json",
               run_config("evaluate", traces_path, method, hyper_from_sets(sets, seed), seed));
    std::cout << avg.to_table();
    return 0;
}

int cmd_recommend(const std::string& model_path, const std::string& traces_path,
                  std::string workload, const std::string& knobspace_path,
                  std::size_t grid_cap, std::size_t top_m, const std::string& out_dir) {
    const TrainedModel m =
        TrainedModel::from_json(nlohmann::ordered_json::parse(read_file(model_path)));
    const KnobSpace space =
        KnobSpace::from_json(nlohmann::ordered_json::parse(read_file(knobspace_path)));
    if (space.knobs.size() != m.scaler.knobs.size()) {
        throw std::invalid_argument("knob space does not match the model's knob count");
    }
    for (std::size_t q = 0; q < space.knobs.size(); ++q) {
        if (space.knobs[q].name != m.scaler.knobs[q].name) {
            throw std::invalid_argument("knob name mismatch at position " +
                                        std::to_string(q) + ": " + space.knobs[q].name);
        }
    }

    const TraceSet traces = parse_trace_csv(read_file(traces_path));
    traces.validate();
    if (workload.empty()) {
        const auto ids = traces.workload_ids();
        if (ids.size() != 1) {
            throw std::invalid_argument("--workload is required when the trace file has " +
                                        std::to_string(ids.size()) + " workloads");
        }
        workload = ids[0];
    }
    TraceSet obs;
    obs.knob_names = traces.knob_names;
    obs.metric_names = traces.metric_names;
    for (std::size_t i : traces.indices_of(workload)) {
        obs.observations.push_back(traces.observations[i]);
    }
    if (obs.n() == 0) throw std::invalid_argument("no observations for workload " + workload);
    const TraceSet scaled_obs = apply_scaler(m.scaler, obs);

    auto scale_config = [&](const std::vector<double>& cfg) {
        std::vector<double> v(cfg.size());
        for (std::size_t q = 0; q < cfg.size(); ++q) v[q] = m.scaler.scale_knob(q, cfg[q]);
        return v;
    };

    std::function<double(const std::vector<double>&)> predict;
    if (m.arch.has_value()) {
        auto local = std::make_shared<EmbeddingArchModel>(*m.arch);
        local->incremental_embed(workload, scaled_obs, m.hyper.seed + 101);
        const std::vector<double> z = local->embedding_of(workload);
        predict = [&, local, z](const std::vector<double>& cfg) {
            return m.scaler.unscale_latency(local->predict_scaled_row(z, scale_config(cfg)));
        };
    } else {
        std::vector<double> z;
        if (m.regressor.finetuned) {
            z.assign(m.regressor.zdim, 0.0);
            for (const auto& o : scaled_obs.observations) {
                const auto zi = m.regressor.encode(o.metrics);
                for (std::size_t c = 0; c < z.size(); ++c) z[c] += zi[c];
            }
            for (double& v : z) v /= static_cast<double>(scaled_obs.n());
        } else {
            z = workload_encoding(*m.embedder, scaled_obs);
        }
        predict = [&, z](const std::vector<double>& cfg) {
            return m.scaler.unscale_latency(m.regressor.predict_scaled(z, scale_config(cfg)));
        };
    }

    const Recommendation rec = recommend(predict, space, top_m, grid_cap);

    // Improvement against the workload's best already-observed latency.
    double initial = obs.observations[0].latency;
    for (const auto& o : obs.observations) initial = std::min(initial, o.latency);
    nlohmann::ordered_json j = rec.to_json(space);
    j["workload_id"] = workload;
    j["initial_latency"] = initial;
    j["predicted_improvement"] = improvement(initial, rec.best_latency());
    write_json(fs::path(out_dir) / "recommendation.json", j);
    std::cout << "workload " << workload << ": predicted best latency "
              << format_double(rec.best_latency()) << " (observed best "
              << format_double(initial) << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"workload embedding trainer, evaluator and config recommender"};
    app.require_subcommand(1);

    std::string traces_path, method = "siamese", out_dir = "out", spec_path;
    std::string scheme = "all", model_path, workload, knobspace_path;
    std::size_t obs = 1, runs = 1, grid_cap = 1000000, top_m = 5;
    double test_fraction = 0.3;
    std::uint64_t seed = 1;
    std::vector<std::string> sets;

    auto* gen = app.add_subcommand("generate", "generate a synthetic trace set");
    gen->add_option("--spec", spec_path, "generator spec json");
    gen->add_option("--out", out_dir, "output directory");
    auto* gen_seed = gen->add_option("--seed", seed, "generator seed");

    auto* tr = app.add_subcommand("train", "train an embedding method on a trace set");
    tr->add_option("--traces", traces_path, "trace csv")->required();
    tr->add_option("--method", method,
                   "identity|pca|kpca|embedding|custom_ae|contractive_ae|beta_vae|siamese|"
                   "hybrid1|hybrid2");
    tr->add_option("--set", sets, "hyperparameter override key=value");
    tr->add_option("--seed", seed, "training seed");
    tr->add_option("--out", out_dir, "output directory");

    auto* ev = app.add_subcommand("evaluate", "train/test split evaluation under admission schemes");
    ev->add_option("--traces", traces_path, "trace csv")->required();
    ev->add_option("--method", method, "embedding method");
    ev->add_option("--scheme", scheme, "shared|arbitrary|all")
        ->check(CLI::IsMember({"shared", "arbitrary", "all"}));
    ev->add_option("--obs", obs, "admission observations (1 or 5)")
        ->check(CLI::IsMember({1, 5}));
    ev->add_option("--runs", runs, "number of seeded repetitions");
    ev->add_option("--test-fraction", test_fraction, "workload fraction held out");
    ev->add_option("--set", sets, "hyperparameter override key=value");
    ev->add_option("--seed", seed, "base seed");
    ev->add_option("--out", out_dir, "output directory");

    auto* rec = app.add_subcommand("recommend", "grid-search a knob space for a workload");
    rec->add_option("--model", model_path, "model.json from train")->required();
    rec->add_option("--traces", traces_path, "observations of the target workload")->required();
    rec->add_option("--workload", workload, "workload id (optional if the file has one)");
    rec->add_option("--knobspace", knobspace_path, "knob space json")->required();
    rec->add_option("--grid-cap", grid_cap, "maximum grid size");
    rec->add_option("--top", top_m, "recommendations to emit");
    rec->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(spec_path, out_dir, seed, gen_seed->count() > 0);
        if (tr->parsed()) return cmd_train(traces_path, method, sets, seed, out_dir);
        if (ev->parsed()) {
            return cmd_evaluate(traces_path, method, scheme, obs, runs, test_fraction, sets,
                                seed, out_dir);
        }
        if (rec->parsed()) {
            return cmd_recommend(model_path, traces_path, workload, knobspace_path, grid_cap,
                                 top_m, out_dir);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
