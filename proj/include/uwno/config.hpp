#pragma once

// Run configuration: a strict JSON document. Unknown keys are rejected with
// the offending key name so typos fail fast; absent optional fields take the
// documented defaults.
//
// {
//   "problem": "poisson",                    // tag, matched against the data
//   "output_dir": "runs/poisson",
//   "model": {
//     "width": 32, "proj_dim": 128, "layers": 4, "wavelet": "db4",
//     "level": 3, "activation": "gelu", "slope_scale": 10,
//     "unet_channels": [32, 32, 64], "in_channels": 1, "out_channels": 1,
//     "baseline_wno": false
//   },
//   "train": {
//     "epochs": 100, "batch_size": 20, "lr0": 1e-3, "decay_factor": 0.5,
//     "decay_every": 50, "seed": 7, "checkpoint_every": 0
//   },
//   "data": {
//     "path": "poisson.uwno",                // either a container path...
//     "generate": {                          // ...or generator parameters
//       "problem": "poisson", "n": 250, "resolution": 33, "seed": 7,
//       "t_final": 0.5, "nu": 0.1, "case": 1, "n_train": 200
//     },
//     "n_train": 200                         // optional split override
//   }
// }
//
// model.spatial_dims and model.resolution are inferred from the dataset.

#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "uwno/data.hpp"
#include "uwno/model.hpp"
#include "uwno/training.hpp"

namespace uwno {

struct GenerateSpec {
    std::string problem;
    std::int64_t n = 0;
    std::size_t resolution = 0;
    std::uint64_t seed = 0;
    double t_final = 0.5;
    double nu = 0.1;
    int advection_case = 1;
    std::int64_t n_train = 0;  // 0 = default 4/5 split
};

struct RunConfig {
    std::string problem;
    std::string output_dir = ".";
    UwnoConfig model;
    TrainConfig train;
    std::string data_path;
    std::optional<GenerateSpec> generate;
    std::int64_t n_train_override = 0;
    bool seed_given = false;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& context) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ValueError("config: unknown key '" + it.key() + "' in " + context);
}

template <typename T>
inline T get_or(const nlohmann::json& j, const std::string& key, T def) {
    if (!j.contains(key)) return def;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValueError("config: key '" + key + "' has the wrong type");
    }
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValueError(std::string("config: invalid JSON: ") + e.what());
    }
    detail::check_keys(j, {"problem", "output_dir", "model", "train", "data"}, "the top level");

    RunConfig rc;
    rc.problem = detail::get_or<std::string>(j, "problem", "");
    rc.output_dir = detail::get_or<std::string>(j, "output_dir", ".");

    if (j.contains("model")) {
        const auto& m = j.at("model");
        detail::check_keys(m,
                           {"width", "proj_dim", "layers", "wavelet", "level", "activation",
                            "slope_scale", "unet_channels", "in_channels", "out_channels",
                            "baseline_wno"},
                           "'model'");
        rc.model.width = detail::get_or<int>(m, "width", 64);
        rc.model.proj_dim = detail::get_or<int>(m, "proj_dim", 128);
        rc.model.layers = detail::get_or<int>(m, "layers", 4);
        rc.model.wavelet = detail::get_or<std::string>(m, "wavelet", "db6");
        rc.model.level = detail::get_or<int>(m, "level", 3);
        rc.model.activation =
            activation_from_string(detail::get_or<std::string>(m, "activation", "gelu"));
        rc.model.slope_scale = detail::get_or<int>(m, "slope_scale", 10);
        rc.model.unet_channels = detail::get_or<std::vector<int>>(m, "unet_channels", {});
        rc.model.in_channels = detail::get_or<int>(m, "in_channels", 1);
        rc.model.out_channels = detail::get_or<int>(m, "out_channels", 1);
        rc.model.baseline_wno = detail::get_or<bool>(m, "baseline_wno", false);
    }

    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::check_keys(t,
                           {"epochs", "batch_size", "lr0", "decay_factor", "decay_every",
                            "seed", "checkpoint_every"},
                           "'train'");
        rc.train.epochs = detail::get_or<int>(t, "epochs", 500);
        rc.train.batch_size = detail::get_or<int>(t, "batch_size", 20);
        rc.train.lr0 = detail::get_or<double>(t, "lr0", 1e-3);
        rc.train.decay_factor = detail::get_or<double>(t, "decay_factor", 0.5);
        rc.train.decay_every = detail::get_or<int>(t, "decay_every", 50);
        if (t.contains("seed")) {
            rc.train.seed = t.at("seed").get<std::uint64_t>();
            rc.seed_given = true;
        }
        rc.train.checkpoint_every = detail::get_or<int>(t, "checkpoint_every", 0);
    }

    if (!j.contains("data")) throw ValueError("config: missing 'data' section");
    const auto& d = j.at("data");
    detail::check_keys(d, {"path", "generate", "n_train"}, "'data'");
    rc.data_path = detail::get_or<std::string>(d, "path", "");
    rc.n_train_override = detail::get_or<std::int64_t>(d, "n_train", 0);
    if (d.contains("generate")) {
        const auto& g = d.at("generate");
        detail::check_keys(
            g, {"problem", "n", "resolution", "seed", "t_final", "nu", "case", "n_train"},
            "'data.generate'");
        GenerateSpec gs;
        gs.problem = detail::get_or<std::string>(g, "problem", rc.problem);
        gs.n = detail::get_or<std::int64_t>(g, "n", 0);
        gs.resolution = detail::get_or<std::size_t>(g, "resolution", 0);
        gs.seed = detail::get_or<std::uint64_t>(g, "seed", 0);
        gs.t_final = detail::get_or<double>(g, "t_final", 0.5);
        gs.nu = detail::get_or<double>(g, "nu", 0.1);
        gs.advection_case = detail::get_or<int>(g, "case", 1);
        gs.n_train = detail::get_or<std::int64_t>(g, "n_train", 0);
        rc.generate = gs;
    }
    if (rc.data_path.empty() && !rc.generate)
        throw ValueError("config: 'data' needs either 'path' or 'generate'");
    if (!rc.data_path.empty() && rc.generate)
        throw ValueError("config: 'data' cannot have both 'path' and 'generate'");
    return rc;
}

inline DatasetBundle run_generator(const GenerateSpec& g) {
    if (g.problem == "poisson") return gen_poisson(g.n, g.resolution, g.seed, g.n_train);
    if (g.problem == "advection")
        return gen_advection(g.n, g.resolution, g.t_final, g.seed, g.advection_case, 0.0,
                             g.n_train);
    if (g.problem == "burgers") return gen_burgers(g.n, g.resolution, g.nu, g.seed, g.n_train);
    throw ValueError("unknown problem '" + g.problem + "' (poisson, advection or burgers)");
}

}  // namespace uwno
