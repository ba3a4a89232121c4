// uwno: command-line front end for data generation, training, evaluation,
// transform self-checks, the spectral-bias demo, and CSV/SVG plotting.
//
// Exit codes: 0 success, 2 usage error, 3 I/O failure, 4 numeric abort,
// 5 shape mismatch, 6 property-suite failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "uwno/bias_demo.hpp"
#include "uwno/config.hpp"
#include "uwno/csv.hpp"
#include "uwno/data.hpp"
#include "uwno/model.hpp"
#include "uwno/svg.hpp"
#include "uwno/training.hpp"
#include "uwno/wavelet.hpp"

namespace fs = std::filesystem;
using namespace uwno;

namespace {

std::uint64_t env_seed_fallback() {
    if (const char* e = std::getenv("UWNO_SEED")) return std::strtoull(e, nullptr, 10);
    return 0;
}

template <typename F>
int run_guarded(F&& f) {
    try {
        return f();
    } catch (const ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const PropertyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 6;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path + "'");
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& problem, std::int64_t n, std::size_t resolution,
                 std::uint64_t seed, const std::string& out, double t_final, double nu,
                 int advection_case, std::int64_t n_train, double sharpness) {
    DatasetBundle b;
    if (problem == "poisson") {
        b = gen_poisson(n, resolution, seed, n_train);
    } else if (problem == "advection") {
        b = gen_advection(n, resolution, t_final, seed, advection_case, sharpness, n_train);
    } else if (problem == "burgers") {
        b = gen_burgers(n, resolution, nu, seed, n_train);
    } else {
        throw ValueError("unknown problem '" + problem + "' (poisson, advection or burgers)");
    }
    b.save(out);
    std::cout << "problem=" << problem << " n=" << n << " n_train=" << b.n_train
              << " resolution=" << resolution << " seed=" << seed << " out=" << out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_train(const std::string& config_path, bool seed_set, std::uint64_t seed_flag,
              int epochs_override) {
    RunConfig rc = parse_run_config(read_file(config_path));
    if (seed_set) {
        rc.train.seed = seed_flag;
        rc.seed_given = true;
    } else if (!rc.seed_given) {
        rc.train.seed = env_seed_fallback();
    }
    if (epochs_override >= 0) rc.train.epochs = epochs_override;

    DatasetBundle data =
        rc.generate ? run_generator(*rc.generate) : DatasetBundle::load(rc.data_path);
    if (rc.n_train_override > 0) data.n_train = rc.n_train_override;
    data.validate();
    if (!rc.problem.empty() && rc.problem != data.problem)
        throw ValueError("config problem '" + rc.problem + "' does not match dataset '" +
                         data.problem + "'");

    rc.model.spatial_dims = data.spatial_dims();
    rc.model.resolution.clear();
    for (int d = 0; d < data.spatial_dims(); ++d) rc.model.resolution.push_back(data.grid.dim(d));
    if ((std::size_t)rc.model.in_channels != data.inputs.dim(data.inputs.ndim() - 1))
        throw ShapeError("config in_channels " + std::to_string(rc.model.in_channels) +
                         " does not match dataset inputs " + shape_str(data.inputs.shape()));
    if ((std::size_t)rc.model.out_channels != data.outputs.dim(data.outputs.ndim() - 1))
        throw ShapeError("config out_channels " + std::to_string(rc.model.out_channels) +
                         " does not match dataset outputs " + shape_str(data.outputs.shape()));

    fs::create_directories(rc.output_dir);
    rc.train.checkpoint_path = (fs::path(rc.output_dir) / "checkpoint.uwno").string();

    UwnoModel model(rc.model, rc.train.seed);
    std::cout << "training " << data.problem << ": " << data.n_train << "/" << data.n_test()
              << " samples, " << model.count_parameters() << " parameters, seed "
              << rc.train.seed << "\n";

    const auto t0 = std::chrono::steady_clock::now();
    TrainResult res = train(model, data, rc.train, [](const EpochRecord& r) {
        std::printf("epoch %4d  train %.6f  test %.6f  lr %.2e  %.1fs\n", r.epoch,
                    r.train_rel_l2, r.test_rel_l2, r.lr, r.seconds);
        std::fflush(stdout);
    });
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_csv((fs::path(rc.output_dir) / "metrics.csv").string(), metrics_to_csv(res.history));

    nlohmann::json summary;
    summary["problem"] = data.problem;
    summary["seed"] = rc.train.seed;
    summary["epochs_run"] = res.history.size();
    summary["aborted"] = res.aborted;
    summary["abort_reason"] = res.abort_reason;
    summary["parameter_count"] = model.count_parameters();
    summary["wall_seconds"] = wall;
    if (!res.aborted) {
        NoGradGuard ng;
        Tensor tr_in = slice(data.inputs, 0, 0, (std::size_t)data.n_train);
        Tensor tr_out = slice(data.outputs, 0, 0, (std::size_t)data.n_train);
        Tensor te_in = slice(data.inputs, 0, (std::size_t)data.n_train, (std::size_t)data.n_test());
        Tensor te_out = slice(data.outputs, 0, (std::size_t)data.n_train, (std::size_t)data.n_test());
        summary["final_train_rel_l2"] = evaluate(model, tr_in, tr_out, data.grid, rc.train.batch_size);
        summary["final_test_rel_l2"] = evaluate(model, te_in, te_out, data.grid, rc.train.batch_size);
    }
    std::ofstream sj(fs::path(rc.output_dir) / "summary.json");
    sj << summary.dump(2) << "\n";
    if (res.aborted) {
        std::cerr << "error: " << res.abort_reason << " (partial metrics retained)\n";
        return 4;
    }
    std::cout << "final test rel-l2 " << summary["final_test_rel_l2"].get<double>() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_eval(const std::string& checkpoint, const std::string& data_path,
             const std::string& split, const std::string& out_csv) {
    UwnoModel model = UwnoModel::load(checkpoint);
    DatasetBundle data = DatasetBundle::load(data_path);
    if (model.config().spatial_dims != data.spatial_dims())
        throw ShapeError("checkpoint is " + std::to_string(model.config().spatial_dims) +
                         "D but dataset is " + std::to_string(data.spatial_dims()) + "D");
    for (int d = 0; d < data.spatial_dims(); ++d)
        if (model.config().resolution[d] != data.grid.dim(d))
            throw ShapeError("checkpoint resolution " +
                             std::to_string(model.config().resolution[d]) +
                             " != dataset resolution " + std::to_string(data.grid.dim(d)));

    std::size_t start = 0, count = 0;
    if (split == "train") {
        start = 0;
        count = (std::size_t)data.n_train;
    } else if (split == "test") {
        start = (std::size_t)data.n_train;
        count = (std::size_t)data.n_test();
    } else if (split == "all") {
        start = 0;
        count = (std::size_t)data.n_samples();
    } else {
        throw ValueError("split must be train, test or all");
    }
    NoGradGuard ng;
    Tensor in = slice(data.inputs, 0, start, count);
    Tensor out = slice(data.outputs, 0, start, count);
    const double mean_err = evaluate(model, in, out, data.grid);

    CsvTable t;
    t.header = {"sample", "rel_l2"};
    const std::size_t inner = out.numel() / out.dim(0);
    for (std::size_t s = 0; s < count; ++s) {
        Tensor bx = slice(in, 0, s, 1);
        Tensor by = slice(out, 0, s, 1);
        Tensor uhat = model.forward(bx, data.grid);
        double num = 0, den = 0;
        for (std::size_t k = 0; k < inner; ++k) {
            num += (uhat.data()[k] - by.data()[k]) * (uhat.data()[k] - by.data()[k]);
            den += by.data()[k] * by.data()[k];
        }
        t.rows.push_back({double(start + s), std::sqrt(num) / std::sqrt(den)});
    }
    write_csv(out_csv, t);
    std::printf("mean_rel_l2=%.17g split=%s n=%zu\n", mean_err, split.c_str(), count);
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_dwt_check(const std::string& wavelet, std::size_t length, int level, int trials,
                  std::uint64_t seed) {
    const WaveletFilter& f = WaveletFilter::get(wavelet);
    if (trials < 1) throw ValueError("dwt-check: trials must be >= 1");
    if (length < f.length())
        throw ValueError("dwt-check: length " + std::to_string(length) +
                         " shorter than the " + wavelet + " filter");
    if (level < 1 || level > max_dwt_level(length))
        throw ValueError("dwt-check: level " + std::to_string(level) +
                         " too deep for length " + std::to_string(length) +
                         "; maximum level is " + std::to_string(max_dwt_level(length)));

    NoGradGuard ng;
    double max_rt = 0, max_energy = 0, max_lin = 0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(seed, "dwt.trial", (std::uint64_t)t);
        std::vector<double> xs(length), ys(length);
        for (auto& v : xs) v = rng.uniform(-1.0, 1.0);
        for (auto& v : ys) v = rng.uniform(-1.0, 1.0);
        Tensor x = Tensor::from_data({length}, xs);
        Tensor y = Tensor::from_data({length}, ys);

        DwtCoeffs cx = dwt1d(x, f, level);
        double rt = max_abs_diff(idwt1d(cx, f), x);

        double ex = 0, ec = 0;
        for (double v : xs) ex += v * v;
        for (double v : cx.approx.data()) ec += v * v;
        for (const auto& d : cx.details)
            for (double v : d.data()) ec += v * v;
        double energy = std::abs(ex - ec);

        const double alpha = rng.uniform(-2.0, 2.0), beta = rng.uniform(-2.0, 2.0);
        Tensor z = add(mul(x, alpha), mul(y, beta));
        DwtCoeffs cy = dwt1d(y, f, level);
        DwtCoeffs cz = dwt1d(z, f, level);
        double lin = max_abs_diff(cz.approx, add(mul(cx.approx, alpha), mul(cy.approx, beta)));
        for (std::size_t j = 0; j < cz.details.size(); ++j)
            lin = std::max(lin, max_abs_diff(cz.details[j],
                                             add(mul(cx.details[j], alpha),
                                                 mul(cy.details[j], beta))));

        if (rt > 1e-10 || energy > 1e-10 || lin > 1e-12)
            throw PropertyError("dwt-check: invariant violated on trial " + std::to_string(t) +
                                " (seed " + std::to_string(seed) + "): roundtrip " +
                                format_double(rt) + ", energy " + format_double(energy) +
                                ", linearity " + format_double(lin));
        max_rt = std::max(max_rt, rt);
        max_energy = std::max(max_energy, energy);
        max_lin = std::max(max_lin, lin);
    }
    std::printf("wavelet=%s length=%zu level=%d trials=%d\n", wavelet.c_str(), length, level,
                trials);
    std::printf("roundtrip_max=%.3e energy_max=%.3e linearity_max=%.3e\n", max_rt, max_energy,
                max_lin);
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_bias_demo(const std::string& adaptive, int epochs, std::uint64_t seed,
                  const std::string& out_dir, bool freeze, int record_every) {
    if (adaptive != "on" && adaptive != "off")
        throw ValueError("bias-demo: --adaptive must be on or off");
    BiasDemoConfig cfg;
    cfg.adaptive = adaptive == "on";
    cfg.freeze_slopes = freeze;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.record_every = record_every;
    BiasDemoResult res = run_bias_demo(cfg);

    fs::create_directories(out_dir);
    write_csv((fs::path(out_dir) / "trajectory.csv").string(), bias_trajectory_csv(res));

    std::vector<SvgSeries> fit(2);
    fit[0] = {"target", res.xs, res.target};
    fit[1] = {"prediction", res.xs, res.prediction};
    write_text_file((fs::path(out_dir) / "fit.svg").string(),
                    svg_line_plot(fit, "spatial fit (adaptive " + adaptive + ")"));

    std::vector<SvgSeries> freq(3);
    freq[0].label = "frequency 2";
    freq[1].label = "frequency 7";
    freq[2].label = "frequency 16";
    for (const auto& r : res.trajectory) {
        freq[0].x.push_back(r.epoch);
        freq[0].y.push_back(r.mag2);
        freq[1].x.push_back(r.epoch);
        freq[1].y.push_back(r.mag7);
        freq[2].x.push_back(r.epoch);
        freq[2].y.push_back(r.mag16);
    }
    write_text_file((fs::path(out_dir) / "frequency_error.svg").string(),
                    svg_line_plot(freq, "residual DFT magnitude"));

    std::printf("adaptive=%s epochs=%d seed=%llu epochs_to_f16_below_0.2=%d\n",
                adaptive.c_str(), epochs, (unsigned long long)seed,
                res.epochs_to_f16_below(0.2));
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_plot(const std::string& data_path, const std::string& kind, const std::string& out) {
    CsvTable t = read_csv(data_path);
    if (kind == "line") {
        if (t.cols() < 2) throw ValueError("plot: line needs at least 2 columns");
        std::vector<SvgSeries> series;
        for (std::size_t c = 1; c < t.cols(); ++c) {
            SvgSeries s;
            s.label = t.header[c];
            for (const auto& row : t.rows) {
                s.x.push_back(row[0]);
                s.y.push_back(row[c]);
            }
            series.push_back(std::move(s));
        }
        write_text_file(out, svg_line_plot(series, ""));
    } else if (kind == "heatmap") {
        if (t.cols() != 3) throw ValueError("plot: heatmap needs exactly 3 columns (x,y,value)");
        if (t.rows.empty()) throw ValueError("plot: heatmap needs data rows");
        // row-major rows sorted by (y, x): the first block of constant y gives nx
        std::size_t nx = 1;
        while (nx < t.rows.size() && t.rows[nx][1] == t.rows[0][1]) ++nx;
        if (t.rows.size() % nx != 0)
            throw ValueError("plot: heatmap rows are not a full nx*ny grid (nx=" +
                             std::to_string(nx) + ", rows=" + std::to_string(t.rows.size()) +
                             ")");
        const std::size_t ny = t.rows.size() / nx;
        std::vector<double> values(nx * ny);
        for (std::size_t i = 0; i < t.rows.size(); ++i) values[i] = t.rows[i][2];
        write_text_file(out, svg_heatmap(values, nx, ny, ""));
    } else {
        throw ValueError("plot: kind must be line or heatmap");
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uwno: wavelet neural operator toolkit"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a dataset container");
    std::string g_problem, g_out;
    std::int64_t g_n = 0, g_ntrain = 0;
    std::size_t g_res = 0;
    std::uint64_t g_seed = 0;
    double g_tfinal = 0.5, g_nu = 0.1, g_sharp = 0.0;
    int g_case = 1;
    gen->add_option("--problem", g_problem, "poisson | advection | burgers")->required();
    gen->add_option("--n", g_n, "number of samples")->required();
    gen->add_option("--resolution", g_res, "grid resolution")->required();
    auto* g_seed_opt = gen->add_option("--seed", g_seed, "generator seed");
    gen->add_option("--out", g_out, "output container path")->required();
    gen->add_option("--t-final", g_tfinal, "advection transport time (default 0.5)");
    gen->add_option("--nu", g_nu, "burgers viscosity (default 0.1)");
    gen->add_option("--case", g_case, "advection case: 1 = final time, 2 = space-time field");
    gen->add_option("--n-train", g_ntrain, "training split size (default 4/5)");
    gen->add_option("--sharpness", g_sharp, "advection ellipse constant a (default 2/width)");

    // train
    auto* tr = app.add_subcommand("train", "train a model from a JSON config");
    std::string t_config;
    std::uint64_t t_seed = 0;
    int t_epochs = -1;
    tr->add_option("--config", t_config, "JSON run configuration")->required();
    auto* t_seed_opt = tr->add_option("--seed", t_seed, "seed override");
    tr->add_option("--epochs", t_epochs, "epoch-count override");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string e_ckpt, e_data, e_split = "test", e_out = "eval_errors.csv";
    ev->add_option("--checkpoint", e_ckpt, "checkpoint container")->required();
    ev->add_option("--data", e_data, "dataset container")->required();
    ev->add_option("--split", e_split, "train | test | all (default test)");
    ev->add_option("--out", e_out, "per-sample error CSV (default eval_errors.csv)");

    // dwt-check
    auto* dc = app.add_subcommand("dwt-check", "wavelet transform property suite");
    std::string d_wavelet = "db6";
    std::size_t d_length = 1024;
    int d_level = 8, d_trials = 100;
    std::uint64_t d_seed = 0;
    dc->add_option("--wavelet", d_wavelet, "db1..db8 (default db6)");
    dc->add_option("--length", d_length, "signal length (default 1024)");
    dc->add_option("--level", d_level, "decomposition level (default 8)");
    dc->add_option("--trials", d_trials, "number of random trials (default 100)");
    auto* d_seed_opt = dc->add_option("--seed", d_seed, "trial seed");

    // bias-demo
    auto* bd = app.add_subcommand("bias-demo", "spectral-bias frequency-convergence demo");
    std::string b_adaptive = "on", b_out = "bias_demo";
    int b_epochs = 4000, b_record = 100;
    std::uint64_t b_seed = 1;
    bool b_freeze = false;
    bd->add_option("--adaptive", b_adaptive, "on | off")->required();
    bd->add_option("--epochs", b_epochs, "training epochs (default 4000)");
    auto* b_seed_opt = bd->add_option("--seed", b_seed, "seed (default 1)");
    bd->add_option("--out", b_out, "output directory")->required();
    bd->add_flag("--freeze-slopes", b_freeze, "keep adaptive slopes fixed at 1/n");
    bd->add_option("--record-every", b_record, "recording stride in epochs (default 100)");

    // plot
    auto* pl = app.add_subcommand("plot", "render a CSV as an SVG");
    std::string p_data, p_kind, p_out;
    pl->add_option("--data", p_data, "input CSV")->required();
    pl->add_option("--kind", p_kind, "line | heatmap")->required();
    pl->add_option("--out", p_out, "output SVG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (gen->parsed())
        return run_guarded([&] {
            if (!*g_seed_opt) g_seed = env_seed_fallback();
            return cmd_gen_data(g_problem, g_n, g_res, g_seed, g_out, g_tfinal, g_nu, g_case,
                                g_ntrain, g_sharp);
        });
    if (tr->parsed())
        return run_guarded(
            [&] { return cmd_train(t_config, !!*t_seed_opt, t_seed, t_epochs); });
    if (ev->parsed())
        return run_guarded([&] { return cmd_eval(e_ckpt, e_data, e_split, e_out); });
    if (dc->parsed())
        return run_guarded([&] {
            if (!*d_seed_opt) d_seed = env_seed_fallback();
            return cmd_dwt_check(d_wavelet, d_length, d_level, d_trials, d_seed);
        });
    if (bd->parsed())
        return run_guarded([&] {
            if (!*b_seed_opt && std::getenv("UWNO_SEED")) b_seed = env_seed_fallback();
            return cmd_bias_demo(b_adaptive, b_epochs, b_seed, b_out, b_freeze, b_record);
        });
    if (pl->parsed()) return run_guarded([&] { return cmd_plot(p_data, p_kind, p_out); });
    return 2;
}
