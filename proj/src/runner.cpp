#include "datlab/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "datlab/analysis.hpp"
#include "datlab/autodiff.hpp"
#include "datlab/dat.hpp"
#include "datlab/errors.hpp"
#include "datlab/gan.hpp"
#include "datlab/regularizers.hpp"
#include "datlab/rng.hpp"

namespace datlab {

namespace fs = std::filesystem;
using nlohmann::json;

MixtureSpec dataset_spec(DatasetKind d) {
    return d == DatasetKind::balanced9 ? MixtureSpec::balanced9() : MixtureSpec::imbalanced9();
}

double median(std::vector<double> v) {
    if (v.empty()) throw UsageError("median of empty set");
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

constexpr uint64_t kStreamInitG = streams::init_g, kStreamInitD = streams::init_d,
                   kStreamData = streams::data, kStreamLatent = streams::latent,
                   kStreamPenalty = streams::penalty, kStreamEvalData = streams::eval_data,
                   kStreamEvalLatent = streams::eval_latent,
                   kStreamLipschitz = streams::lipschitz;

std::string fmt17(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

void write_points(const fs::path& path, const Mat& pts) {
    std::string s = "x y\n";
    s.reserve(s.size() + static_cast<size_t>(pts.rows) * 50);
    for (int i = 0; i < pts.rows; ++i) {
        s += fmt17(pts(i, 0));
        s += ' ';
        s += fmt17(pts(i, 1));
        s += '\n';
    }
    write_text(path, s);
}

std::string pad_iter(long long k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%07lld", k);
    return buf;
}

Mat vstack(const Mat& a, const Mat& b) {
    if (a.rows == 0) return b;
    if (b.rows == 0) return a;
    if (a.cols != b.cols) throw ShapeError("vstack: column count mismatch");
    Mat out(a.rows + b.rows, a.cols);
    std::copy(a.a.begin(), a.a.end(), out.a.begin());
    std::copy(b.a.begin(), b.a.end(),
              out.a.begin() + static_cast<std::ptrdiff_t>(a.a.size()));
    return out;
}

Mat head_rows(const Mat& m, int n) {
    if (n >= m.rows) return m;
    Mat out(n, m.cols);
    std::copy(m.a.begin(), m.a.begin() + static_cast<std::ptrdiff_t>(n) * m.cols, out.a.begin());
    return out;
}

const char* kMetricsHeader =
    "iteration\td_loss_clean\td_loss_adv\tg_loss\tdelta_norm_mean\tsign_frac_real\t"
    "sign_frac_fake\tpenalty\tgrad_norm_mean\tgrad_norm_max\tspectral_bound\t"
    "covered_modes\thq_fraction\ttv_distance\tfrechet_2d\twall_clock_s";

// training-step means accumulated between evaluation rows
struct IntervalAccum {
    double d_clean = 0, d_adv = 0, sr = 0, sf = 0, pen = 0;
    long long d_steps = 0;
    double g = 0;
    long long g_steps = 0;
    double dn_sum = 0;
    long long dn_rows = 0;

    void add_d(const StepMetrics& m) {
        d_clean += m.d_loss_clean;
        d_adv += m.d_loss_adv;
        sr += m.sign_frac_real;
        sf += m.sign_frac_fake;
        pen += m.penalty;
        dn_sum += m.delta_norm_sum;
        dn_rows += m.delta_rows;
        ++d_steps;
    }
    void add_g(const StepMetrics& m) {
        g += m.g_loss;
        dn_sum += m.delta_norm_sum;
        dn_rows += m.delta_rows;
        ++g_steps;
    }
};

json cell_record(const json& meta, const ExperimentConfig& cfg) {
    json rec = meta;
    rec["seed"] = cfg.train.seed;
    rec["run_id"] = cfg.run_id;
    return rec;
}

// Runs one sweep cell, folding its finals into the median collectors.
void run_cell(const ExperimentConfig& cfg, json& rec, std::vector<double>& cov,
              std::vector<double>& hq, std::vector<double>& tv, std::vector<double>& fd,
              std::vector<double>& kb) {
    try {
        RunResult rr = run_experiment(cfg);
        rec["ok"] = rr.ok;
        rec["dir"] = rr.dir;
        rec["error"] = rr.error;
        rec["final"] = rr.final;
        rec["attack"] = rr.attack;
        if (rr.ok && rr.final.contains("covered_modes")) {
            cov.push_back(rr.final["covered_modes"].get<double>());
            hq.push_back(rr.final["hq_fraction"].get<double>());
            tv.push_back(rr.final["tv_distance"].get<double>());
            fd.push_back(rr.final["frechet_2d"].get<double>());
            if (rr.attack.contains("kbar_fake") && !rr.attack["kbar_fake"].is_null())
                kb.push_back(rr.attack["kbar_fake"].get<double>());
        }
    } catch (const Error& e) {
        rec["ok"] = false;
        rec["error"] = e.what();
    }
}

void median_fields(json& s, const std::vector<double>& cov, const std::vector<double>& hq,
                   const std::vector<double>& tv, const std::vector<double>& fd,
                   const std::vector<double>& kb) {
    s["n_ok"] = cov.size();
    if (!cov.empty()) {
        s["covered_modes"] = median(cov);
        s["hq_fraction"] = median(hq);
        s["tv_distance"] = median(tv);
        s["frechet_2d"] = median(fd);
    }
    if (!kb.empty()) s["kbar_fake"] = median(kb);
}

void append_summary_tsv(std::string& tsv, const json& s, const std::string& head) {
    tsv += head + "\t" + std::to_string(s["n_ok"].get<long long>());
    for (const char* k : {"covered_modes", "hq_fraction", "tv_distance", "frechet_2d", "kbar_fake"}) {
        tsv += '\t';
        tsv += s.contains(k) ? fmt17(s[k].get<double>()) : std::string("-");
    }
    tsv += '\n';
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
    cfg.check();
    RunResult res;
    const fs::path dir = fs::path(cfg.out_dir) / cfg.run_id;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
    res.dir = dir.string();

    write_text(dir / "config.json", config_to_json(cfg).dump(2) + "\n");

    const MixtureSpec spec = dataset_spec(cfg.dataset);
    const uint64_t master = cfg.train.seed;
    MlpNetwork G = make_mlp_default(cfg.train.latent_dim, 2, cfg.hidden_layers, cfg.hidden_width,
                                    derive_seed(master, kStreamInitG));
    MlpNetwork D = make_mlp_default(2, 1, cfg.hidden_layers, cfg.hidden_width,
                                    derive_seed(master, kStreamInitD));
    Rng data_rng(derive_seed(master, kStreamData));
    Rng latent_rng(derive_seed(master, kStreamLatent));
    Rng penalty_rng(derive_seed(master, kStreamPenalty));
    Optimizer opt_d(cfg.train.opt_d), opt_g(cfg.train.opt_g);

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    std::ofstream metrics(dir / "metrics.tsv", std::ios::binary);
    if (!metrics) throw IoError("cannot write metrics stream in " + dir.string());
    metrics << "# schema: datlab-metrics-v1\n" << kMetricsHeader << "\n";

    const bool eval_snapshots = cfg.snapshot_networks == "eval";
    if (eval_snapshots) {
        fs::create_directories(dir / "snapshots", ec);
        if (ec) throw IoError("cannot create snapshot directory: " + ec.message());
    }

    IntervalAccum acc;
    Mat eval_real_last, eval_fake_last;
    double grad_mean_sum = 0.0;
    long long eval_count = 0;
    json last_row;

    auto do_eval = [&](long long k) {
        Mat eval_real = sample_mixture(
            spec, cfg.eval_samples,
            derive_seed(derive_seed(master, kStreamEvalData), static_cast<uint64_t>(k)));
        Mat eval_z = sample_latent(
            cfg.train.latent_dim, cfg.eval_samples,
            derive_seed(derive_seed(master, kStreamEvalLatent), static_cast<uint64_t>(k)));
        Mat eval_fake = mlp_forward(G, eval_z);
        const ModeStats ms = mode_stats(eval_fake, spec);
        const double fd = frechet_2d(eval_real, eval_fake);

        Mat sub = head_rows(eval_real, cfg.eval_grad_samples);
        Mat gx = grad_input(D, sub, [](Tape&, int y) { return y; });
        double gsum = 0.0, gmax = 0.0;
        for (int i = 0; i < gx.rows; ++i) {
            const double n = row_norm(gx, i);
            gsum += n;
            gmax = std::max(gmax, n);
        }
        const double gmean = gx.rows ? gsum / gx.rows : 0.0;
        const double bound = lipschitz_upper_bound(D);

        const double d_clean = acc.d_steps ? acc.d_clean / acc.d_steps : 0.0;
        const double d_adv = acc.d_steps ? acc.d_adv / acc.d_steps : 0.0;
        const double sr = acc.d_steps ? acc.sr / acc.d_steps : 0.0;
        const double sf = acc.d_steps ? acc.sf / acc.d_steps : 0.0;
        const double pen = acc.d_steps ? acc.pen / acc.d_steps : 0.0;
        const double g = acc.g_steps ? acc.g / acc.g_steps : 0.0;
        const double dnm = acc.dn_rows ? acc.dn_sum / static_cast<double>(acc.dn_rows) : 0.0;
        const double wall = elapsed();

        std::string row = std::to_string(k);
        for (double v : {d_clean, d_adv, g, dnm, sr, sf, pen, gmean, gmax, bound}) {
            row += '\t';
            row += fmt17(v);
        }
        row += '\t';
        row += std::to_string(ms.covered_modes);
        for (double v : {ms.hq_fraction, ms.tv_distance, fd, wall}) {
            row += '\t';
            row += fmt17(v);
        }
        metrics << row << '\n';
        metrics.flush();

        last_row = json{{"iteration", k},
                        {"d_loss_clean", d_clean},
                        {"d_loss_adv", d_adv},
                        {"g_loss", g},
                        {"delta_norm_mean", dnm},
                        {"sign_frac_real", sr},
                        {"sign_frac_fake", sf},
                        {"penalty", pen},
                        {"grad_norm_mean", gmean},
                        {"grad_norm_max", gmax},
                        {"spectral_bound", bound},
                        {"covered_modes", ms.covered_modes},
                        {"hq_fraction", ms.hq_fraction},
                        {"tv_distance", ms.tv_distance},
                        {"frechet_2d", fd},
                        {"wall_clock_s", wall}};
        grad_mean_sum += gmean;
        ++eval_count;
        eval_real_last = std::move(eval_real);
        eval_fake_last = std::move(eval_fake);

        if (eval_snapshots) {
            save_network(D, (dir / "snapshots" / ("d_" + pad_iter(k) + ".net")).string());
            save_network(G, (dir / "snapshots" / ("g_" + pad_iter(k) + ".net")).string());
            write_points(dir / "snapshots" / ("points_fake_" + pad_iter(k) + ".txt"),
                         eval_fake_last);
        }
        acc = IntervalAccum{};
    };

    const long long K = cfg.train.n_iter;
    long long done = 0;
    std::string fail_msg;
    try {
        for (long long k = 1; k <= K; ++k) {
            for (int j = 0; j < cfg.train.n_dis; ++j) {
                Batch b;
                b.x_r = sample_mixture(spec, cfg.train.batch_size, data_rng);
                b.z = sample_latent(cfg.train.latent_dim, cfg.train.batch_size, latent_rng);
                b.x_f = mlp_forward(G, b.z);
                StepMetrics dm;
                if (cfg.dat.enabled) {
                    dm = cfg.dat.mode == PerturbConfig::Mode::datt
                             ? discriminator_step_datt(D, b, cfg.train.loss, cfg.dat, opt_d, k)
                             : discriminator_step_dat(D, b, cfg.train.loss, cfg.dat, opt_d, k);
                } else if (cfg.reg.tag != RegTag::none && cfg.reg.lambda > 0.0) {
                    dm = discriminator_step_regularized(D, b, cfg.train.loss, cfg.reg, opt_d,
                                                        penalty_rng, k);
                } else {
                    dm = discriminator_step_clean(D, b, cfg.train.loss, opt_d, k);
                }
                acc.add_d(dm);
            }
            Mat z = sample_latent(cfg.train.latent_dim, cfg.train.batch_size, latent_rng);
            StepMetrics gm;
            if (cfg.dat.enabled && cfg.dat.pos_gen && cfg.dat.epsilon > 0.0) {
                // a fresh real batch only when position (iii) actually perturbs,
                // so disabled runs keep the same data-stream alignment
                Mat x_r = sample_mixture(spec, cfg.train.batch_size, data_rng);
                gm = generator_step_dat(G, D, z, x_r, cfg.train.loss, cfg.dat, opt_g, k);
            } else {
                gm = generator_step(G, D, z, cfg.train.loss, opt_g, k);
            }
            acc.add_g(gm);
            done = k;
            if (k % cfg.eval_every == 0 || k == K) do_eval(k);
        }
    } catch (const Error& e) {
        fail_msg = e.what();
    }
    res.ok = fail_msg.empty();
    res.error = fail_msg;
    res.last_iteration = done;

    try {
        save_network(G, (dir / "g_final.net").string());
        save_network(D, (dir / "d_final.net").string());
        if (eval_real_last.rows == 0) {  // failed before the first evaluation row
            eval_real_last = sample_mixture(
                spec, cfg.eval_samples,
                derive_seed(derive_seed(master, kStreamEvalData), static_cast<uint64_t>(done)));
            Mat ez = sample_latent(
                cfg.train.latent_dim, cfg.eval_samples,
                derive_seed(derive_seed(master, kStreamEvalLatent), static_cast<uint64_t>(done)));
            eval_fake_last = mlp_forward(G, ez);
        }
        write_points(dir / "points_real.txt", eval_real_last);
        write_points(dir / "points_fake.txt", eval_fake_last);

        Mat areal = sample_mixture(spec, cfg.attack_samples,
                                   derive_seed(derive_seed(master, kStreamEvalData), 0));
        Mat az = sample_latent(cfg.train.latent_dim, cfg.attack_samples,
                               derive_seed(derive_seed(master, kStreamEvalLatent), 0));
        Mat afake = mlp_forward(G, az);
        const AttackReport ar = attack_statistics(D, areal, afake, cfg.attack);
        json aj;
        aj["tau"] = ar.cfg.tau;
        aj["alpha"] = ar.cfg.alpha;
        aj["max_iters"] = ar.cfg.max_iters;
        aj["samples"] = cfg.attack_samples;
        aj["kbar_real"] = ar.kbar_real ? json(*ar.kbar_real) : json();
        aj["kbar_fake"] = ar.kbar_fake ? json(*ar.kbar_fake) : json();
        aj["success_rate_real"] = ar.success_rate_real;
        aj["success_rate_fake"] = ar.success_rate_fake;
        write_text(dir / "attack_report.json", aj.dump(2) + "\n");
        res.attack = aj;

        const uint64_t lip = derive_seed(master, kStreamLipschitz);
        Mat lreal = sample_mixture(spec, 512, derive_seed(lip, 1));
        Mat lz = sample_latent(cfg.train.latent_dim, 512, derive_seed(lip, 2));
        Mat lsamples = vstack(lreal, mlp_forward(G, lz));
        const LipschitzEstimate le =
            estimate_lipschitz(D, lsamples, cfg.lipschitz_pairs, derive_seed(lip, 3));
        json lj{{"spectral_bound", le.spectral_bound}, {"empirical_sup", le.empirical_sup},
                {"grad_norm_mean", le.grad_norm_mean},  {"grad_norm_max", le.grad_norm_max},
                {"pairs", cfg.lipschitz_pairs},         {"samples", lsamples.rows}};
        write_text(dir / "lipschitz_report.json", lj.dump(2) + "\n");
        res.lipschitz = lj;
    } catch (const Error& e) {
        if (res.ok) {
            res.ok = false;
            res.error = std::string("final reports: ") + e.what();
        }
    }

    last_row["grad_norm_mean_run_avg"] = eval_count ? grad_mean_sum / eval_count : 0.0;
    res.final = last_row;

    json st;
    st["status"] = res.ok ? "ok" : "failed";
    st["error"] = res.error;
    st["last_iteration"] = done;
    st["run_id"] = cfg.run_id;
    st["wall_clock_s"] = elapsed();
    write_text(dir / "status.json", st.dump(2) + "\n");
    return res;
}

ExperimentConfig apply_variant(const ExperimentConfig& base, const std::string& variant) {
    ExperimentConfig c = base;
    c.dat.enabled = false;
    c.reg = RegKind{};
    if (variant == "none") {
        // clean training
    } else if (variant == "gp" || variant == "lp" || variant == "zero_gp") {
        c.reg.tag = reg_from_name(variant);
        c.reg.lambda = (base.reg.tag == c.reg.tag && base.reg.lambda > 0.0)
                           ? base.reg.lambda
                           : default_lambda(c.reg.tag);
    } else if (variant == "dat" || variant == "datt") {
        c.dat = base.dat;
        c.dat.enabled = true;
        c.dat.mode = variant == "dat" ? PerturbConfig::Mode::dat : PerturbConfig::Mode::datt;
        if (!c.dat.pos_real && !c.dat.pos_fake && !c.dat.pos_gen)
            c.dat.pos_real = c.dat.pos_fake = true;
    } else {
        throw ConfigError("unknown training variant: " + variant);
    }
    return c;
}

GridResult run_grid(const ExperimentConfig& base, const GridAxes& axes_in) {
    GridAxes ax = axes_in;
    if (ax.losses.empty()) ax.losses = {"vanilla", "lsgan", "wgan"};
    if (ax.regs.empty()) ax.regs = {"none", "gp", "lp", "zero_gp", "dat", "datt"};
    if (ax.seeds.empty()) ax.seeds = {1, 2, 3};
    for (const std::string& l : ax.losses) (void)loss_from_name(l);
    for (const std::string& r : ax.regs) (void)apply_variant(base, r);

    const fs::path dir = fs::path(base.out_dir) / base.run_id;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create grid directory: " + ec.message());

    GridResult gr;
    gr.dir = dir.string();
    gr.cells = json::array();
    gr.summary = json::array();

    std::string tsv =
        "loss\tvariant\tn_ok\tcovered_modes\thq_fraction\ttv_distance\tfrechet_2d\tkbar_fake\n";
    for (const std::string& loss : ax.losses) {
        for (const std::string& reg : ax.regs) {
            std::vector<double> cov, hq, tv, fd, kb;
            for (uint64_t seed : ax.seeds) {
                ExperimentConfig cell = apply_variant(base, reg);
                cell.train.loss = loss_from_name(loss);
                cell.train.seed = seed;
                cell.run_id = "cell_" + loss + "_" + reg + "_s" + std::to_string(seed);
                cell.out_dir = (dir / "cells").string();
                json rec = cell_record(json{{"loss", loss}, {"variant", reg}}, cell);
                run_cell(cell, rec, cov, hq, tv, fd, kb);
                gr.cells.push_back(rec);
            }
            json s{{"loss", loss}, {"variant", reg}};
            median_fields(s, cov, hq, tv, fd, kb);
            gr.summary.push_back(s);
            append_summary_tsv(tsv, s, loss + "\t" + reg);
        }
    }
    write_text(dir / "summary.tsv", tsv);
    write_text(dir / "summary.json",
               json{{"dir", gr.dir}, {"cells", gr.cells}, {"summary", gr.summary}}.dump(2) + "\n");
    return gr;
}

std::vector<double> epsilon_sweep_axis() {
    return {0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 2.0, 3.0};
}

std::vector<int> step_sweep_axis() { return {1, 2, 3, 4, 5}; }

std::vector<std::string> position_sweep_axis() {
    return {"generator_only", "real_only", "fake_only", "discriminator_only", "all"};
}

AblationResult run_ablation(const std::string& kind, const ExperimentConfig& base,
                            const AblationAxes& axes) {
    std::vector<uint64_t> seeds = axes.seeds;
    if (seeds.empty()) seeds = {base.train.seed, base.train.seed + 1};
    const std::string dat_mode =
        base.dat.mode == PerturbConfig::Mode::datt ? "datt" : "dat";

    struct Point {
        std::string label;
        json meta;
        ExperimentConfig cfg;
    };
    std::vector<Point> pts;

    if (kind == "epsilon_sweep") {
        const std::vector<double> eps = axes.epsilons.empty() ? epsilon_sweep_axis() : axes.epsilons;
        for (double e : eps) {
            ExperimentConfig c = apply_variant(base, dat_mode);
            c.dat.epsilon = e;
            char lbl[32];
            std::snprintf(lbl, sizeof lbl, "eps%g", e);
            pts.push_back({lbl, json{{"epsilon", e}}, c});
        }
    } else if (kind == "step_sweep") {
        const std::vector<int> st = axes.steps.empty() ? step_sweep_axis() : axes.steps;
        for (int s : st) {
            ExperimentConfig c = apply_variant(base, dat_mode);
            c.dat.steps = s;
            pts.push_back({"steps" + std::to_string(s), json{{"steps", s}}, c});
        }
    } else if (kind == "position_sweep") {
        const std::vector<std::string> pos =
            axes.positions.empty() ? position_sweep_axis() : axes.positions;
        for (const std::string& p : pos) {
            ExperimentConfig c = apply_variant(base, dat_mode);
            c.dat.pos_real = c.dat.pos_fake = c.dat.pos_gen = false;
            if (p == "generator_only")
                c.dat.pos_gen = true;
            else if (p == "real_only")
                c.dat.pos_real = true;
            else if (p == "fake_only")
                c.dat.pos_fake = true;
            else if (p == "discriminator_only")
                c.dat.pos_real = c.dat.pos_fake = true;
            else if (p == "all")
                c.dat.pos_real = c.dat.pos_fake = c.dat.pos_gen = true;
            else
                throw ConfigError("unknown position variant: " + p);
            pts.push_back({p, json{{"position", p}}, c});
        }
    } else {
        throw ConfigError("unknown ablation kind: " + kind);
    }

    const fs::path dir = fs::path(base.out_dir) / base.run_id;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create ablation directory: " + ec.message());

    AblationResult ar;
    ar.dir = dir.string();
    ar.points = json::array();

    std::string tsv =
        "label\tn_ok\tcovered_modes\thq_fraction\ttv_distance\tfrechet_2d\tkbar_fake\n";
    for (const Point& p : pts) {
        json runs = json::array();
        std::vector<double> cov, hq, tv, fd, kb;
        for (uint64_t seed : seeds) {
            ExperimentConfig c = p.cfg;
            c.train.seed = seed;
            c.run_id = "point_" + p.label + "_s" + std::to_string(seed);
            c.out_dir = (dir / "points").string();
            json rec = cell_record(p.meta, c);
            run_cell(c, rec, cov, hq, tv, fd, kb);
            runs.push_back(rec);
        }
        json s = p.meta;
        s["label"] = p.label;
        median_fields(s, cov, hq, tv, fd, kb);
        s["runs"] = runs;
        ar.points.push_back(s);
        append_summary_tsv(tsv, s, p.label);
    }
    write_text(dir / "ablation_report.tsv", tsv);
    write_text(dir / "ablation_report.json",
               json{{"kind", kind}, {"dir", ar.dir}, {"points", ar.points}}.dump(2) + "\n");
    return ar;
}

}  // namespace datlab
