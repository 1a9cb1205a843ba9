#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "datlab/analysis.hpp"
#include "datlab/config.hpp"
#include "datlab/data.hpp"
#include "datlab/errors.hpp"
#include "datlab/network.hpp"
#include "datlab/rng.hpp"
#include "datlab/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string out_root(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("DATLAB_OUT"); env && *env) return env;
    return "runs";
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep))
        if (!part.empty()) out.push_back(part);
    return out;
}

std::vector<uint64_t> parse_seeds(const std::string& s) {
    std::vector<uint64_t> out;
    for (const std::string& v : split(s, ',')) {
        try {
            out.push_back(std::stoull(v));
        } catch (const std::exception&) {
            throw datlab::UsageError("seeds: not an integer: " + v);
        }
    }
    return out;
}

datlab::GridAxes parse_axes(const std::string& s) {
    datlab::GridAxes ax;
    for (const std::string& part : split(s, ';')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos)
            throw datlab::UsageError("axes: expected key=v1,v2,... in '" + part + "'");
        const std::string key = part.substr(0, eq);
        const std::string vals = part.substr(eq + 1);
        if (key == "losses")
            ax.losses = split(vals, ',');
        else if (key == "regs")
            ax.regs = split(vals, ',');
        else if (key == "seeds")
            ax.seeds = parse_seeds(vals);
        else
            throw datlab::UsageError("axes: unknown axis '" + key + "'");
    }
    return ax;
}

json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw datlab::IoError("cannot open " + p.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw datlab::IoError("invalid json in " + p.string() + ": " + e.what());
    }
    return j;
}

void print_kv_line(std::ostream& os, const char* title, const json& j,
                   const std::vector<std::string>& keys) {
    os << title << ":";
    for (const std::string& k : keys) {
        os << " " << k << "=";
        if (!j.contains(k) || j[k].is_null())
            os << "-";
        else if (j[k].is_string())
            os << j[k].get<std::string>();
        else
            os << j[k].dump();
    }
    os << "\n";
}

int report_dir(const fs::path& dir) {
    if (fs::exists(dir / "summary.tsv")) {
        std::ifstream in(dir / "summary.tsv");
        std::cout << "grid " << dir.string() << "\n" << in.rdbuf();
        return 0;
    }
    if (fs::exists(dir / "ablation_report.tsv")) {
        std::ifstream in(dir / "ablation_report.tsv");
        std::cout << "ablation " << dir.string() << "\n" << in.rdbuf();
        return 0;
    }
    if (!fs::exists(dir / "status.json"))
        throw datlab::IoError("not a run directory (no status.json): " + dir.string());

    const json st = read_json_file(dir / "status.json");
    std::cout << "run " << st.value("run_id", std::string("?")) << ": "
              << st.value("status", std::string("?")) << " (iteration "
              << st.value("last_iteration", 0LL) << ", "
              << st.value("wall_clock_s", 0.0) << " s)\n";
    const std::string err = st.value("error", std::string());
    if (!err.empty()) std::cout << "error: " << err << "\n";

    if (fs::exists(dir / "config.json")) {
        const json cfg = read_json_file(dir / "config.json");
        std::cout << "loss=" << cfg.value("loss", std::string("?"))
                  << " regularizer=" << cfg["regularizer"].value("kind", std::string("?"))
                  << " dat=" << (cfg["dat"].value("enabled", false) ? "on" : "off")
                  << " seed=" << cfg.value("seed", 0ULL) << "\n";
    }

    // last metrics row
    std::ifstream in(dir / "metrics.tsv");
    if (in) {
        std::string line, header, last;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            if (header.empty())
                header = line;
            else
                last = line;
        }
        if (!header.empty() && !last.empty()) {
            const std::vector<std::string> hs = split(header, '\t');
            const std::vector<std::string> vs = split(last, '\t');
            std::cout << "final:";
            for (size_t i = 0; i < hs.size() && i < vs.size(); ++i)
                std::cout << " " << hs[i] << "=" << vs[i];
            std::cout << "\n";
        }
    }
    if (fs::exists(dir / "attack_report.json"))
        print_kv_line(std::cout, "attack", read_json_file(dir / "attack_report.json"),
                      {"kbar_fake", "kbar_real", "success_rate_fake", "success_rate_real"});
    if (fs::exists(dir / "lipschitz_report.json"))
        print_kv_line(std::cout, "lipschitz", read_json_file(dir / "lipschitz_report.json"),
                      {"spectral_bound", "empirical_sup", "grad_norm_mean", "grad_norm_max"});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale adversarial-training laboratory for 2-D GANs"};
    app.require_subcommand(1);

    std::string cfg_path, out_flag, run_id_flag, axes_str, kind, net_path, gen_path, run_dir;
    std::string seeds_flag;

    CLI::App* run = app.add_subcommand("run", "train one experiment from a config file");
    run->add_option("config", cfg_path, "config json file")->required();
    run->add_option("--out", out_flag, "output root (default $DATLAB_OUT or ./runs)");
    run->add_option("--run-id", run_id_flag, "override the config's run_id");

    CLI::App* grid = app.add_subcommand("grid", "run a loss x variant x seed sweep");
    grid->add_option("config", cfg_path, "base config json file")->required();
    grid->add_option("--axes", axes_str, "losses=v1,v2;regs=v1,v2;seeds=1,2,3");
    grid->add_option("--out", out_flag, "output root");
    grid->add_option("--run-id", run_id_flag, "grid directory name");

    CLI::App* abl = app.add_subcommand("ablate", "run a predefined sweep");
    abl->add_option("kind", kind, "epsilon_sweep | step_sweep | position_sweep")->required();
    abl->add_option("config", cfg_path, "base config json file")->required();
    abl->add_option("--out", out_flag, "output root");
    abl->add_option("--run-id", run_id_flag, "sweep directory name");
    abl->add_option("--seeds", seeds_flag, "comma-separated seeds (default: seed, seed+1)");

    CLI::App* atk = app.add_subcommand("attack", "attack a saved discriminator");
    atk->add_option("network", net_path, "discriminator .net file")->required();
    atk->add_option("config", cfg_path, "config json file")->required();
    atk->add_option("--generator", gen_path, "generator .net (default: sibling g_final.net)");

    CLI::App* rep = app.add_subcommand("report", "summarize a finished run directory");
    rep->add_option("dir", run_dir, "run, grid, or ablation directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 5;
    }

    try {
        if (*run) {
            datlab::ExperimentConfig cfg = datlab::load_config(cfg_path);
            cfg.out_dir = out_root(out_flag);
            if (!run_id_flag.empty()) cfg.run_id = run_id_flag;
            const datlab::RunResult rr = datlab::run_experiment(cfg);
            std::cout << (rr.ok ? "ok " : "failed ") << rr.dir << "\n";
            if (!rr.ok) {
                std::cerr << rr.error << "\n";
                return 3;
            }
            return 0;
        }
        if (*grid) {
            datlab::ExperimentConfig cfg = datlab::load_config(cfg_path);
            cfg.out_dir = out_root(out_flag);
            if (!run_id_flag.empty()) cfg.run_id = run_id_flag;
            const datlab::GridResult g = datlab::run_grid(cfg, parse_axes(axes_str));
            std::cout << "grid " << g.dir << "\n";
            std::ifstream in(fs::path(g.dir) / "summary.tsv");
            std::cout << in.rdbuf();
            return 0;
        }
        if (*abl) {
            datlab::ExperimentConfig cfg = datlab::load_config(cfg_path);
            cfg.out_dir = out_root(out_flag);
            if (!run_id_flag.empty()) cfg.run_id = run_id_flag;
            datlab::AblationAxes ax;
            if (!seeds_flag.empty()) ax.seeds = parse_seeds(seeds_flag);
            const datlab::AblationResult a = datlab::run_ablation(kind, cfg, ax);
            std::cout << "ablation " << a.dir << "\n";
            std::ifstream in(fs::path(a.dir) / "ablation_report.tsv");
            std::cout << in.rdbuf();
            return 0;
        }
        if (*atk) {
            const datlab::MlpNetwork D = datlab::load_network(net_path);
            const datlab::ExperimentConfig cfg = datlab::load_config(cfg_path);
            std::string gpath = gen_path;
            if (gpath.empty()) {
                const fs::path sib = fs::path(net_path).parent_path() / "g_final.net";
                if (fs::exists(sib)) gpath = sib.string();
            }
            if (gpath.empty())
                throw datlab::UsageError(
                    "attack: no generator next to the network file; pass --generator");
            const datlab::MlpNetwork G = datlab::load_network(gpath);
            const datlab::MixtureSpec spec = datlab::dataset_spec(cfg.dataset);
            const uint64_t master = cfg.train.seed;
            const datlab::Mat real = datlab::sample_mixture(
                spec, cfg.attack_samples,
                datlab::derive_seed(datlab::derive_seed(master, datlab::streams::eval_data), 0));
            const datlab::Mat z = datlab::sample_latent(
                G.in_dim(), cfg.attack_samples,
                datlab::derive_seed(datlab::derive_seed(master, datlab::streams::eval_latent), 0));
            const datlab::Mat fake = datlab::mlp_forward(G, z);
            const datlab::AttackReport ar = datlab::attack_statistics(D, real, fake, cfg.attack);
            json aj;
            aj["tau"] = ar.cfg.tau;
            aj["alpha"] = ar.cfg.alpha;
            aj["max_iters"] = ar.cfg.max_iters;
            aj["samples"] = cfg.attack_samples;
            aj["kbar_real"] = ar.kbar_real ? json(*ar.kbar_real) : json();
            aj["kbar_fake"] = ar.kbar_fake ? json(*ar.kbar_fake) : json();
            aj["success_rate_real"] = ar.success_rate_real;
            aj["success_rate_fake"] = ar.success_rate_fake;
            std::cout << aj.dump(2) << "\n";
            return 0;
        }
        if (*rep) return report_dir(run_dir);
    } catch (const datlab::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const datlab::TrainingError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const datlab::IoError& e) {
        std::cerr << e.what() << "\n";
        return 4;
    } catch (const datlab::UsageError& e) {
        std::cerr << e.what() << "\n";
        return 5;
    } catch (const datlab::Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
