#include "datlab/config.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "datlab/errors.hpp"

namespace datlab {

using nlohmann::json;

std::string dataset_name(DatasetKind d) {
    return d == DatasetKind::balanced9 ? "balanced9" : "imbalanced9";
}

DatasetKind dataset_from_name(const std::string& s) {
    if (s == "balanced9") return DatasetKind::balanced9;
    if (s == "imbalanced9") return DatasetKind::imbalanced9;
    throw ConfigError("unknown dataset: " + s);
}

namespace {

// Walks one json object, tracking which keys were consumed so leftovers can
// be reported by their full dotted path.
struct ObjReader {
    const json& j;
    std::string path;
    std::set<std::string> seen;

    ObjReader(const json& jj, std::string p) : j(jj), path(std::move(p)) {
        if (!j.is_object()) throw ConfigError(path.empty() ? "config: expected an object"
                                                           : path + ": expected an object");
    }

    std::string full(const std::string& key) const {
        return path.empty() ? key : path + "." + key;
    }

    bool has(const std::string& key) { return j.contains(key); }

    const json& raw(const std::string& key) {
        seen.insert(key);
        return j.at(key);
    }

    std::string str(const std::string& key, const std::string& dflt) {
        if (!has(key)) return dflt;
        const json& v = raw(key);
        if (!v.is_string()) throw ConfigError(full(key) + ": expected a string");
        return v.get<std::string>();
    }

    double num(const std::string& key, double dflt) {
        if (!has(key)) return dflt;
        const json& v = raw(key);
        if (!v.is_number()) throw ConfigError(full(key) + ": expected a number");
        return v.get<double>();
    }

    long long integer(const std::string& key, long long dflt) {
        if (!has(key)) return dflt;
        const json& v = raw(key);
        if (!v.is_number_integer()) throw ConfigError(full(key) + ": expected an integer");
        return v.get<long long>();
    }

    uint64_t uinteger(const std::string& key, uint64_t dflt) {
        if (!has(key)) return dflt;
        const json& v = raw(key);
        if (v.is_number_unsigned()) return v.get<uint64_t>();
        if (v.is_number_integer() && v.get<long long>() >= 0)
            return static_cast<uint64_t>(v.get<long long>());
        throw ConfigError(full(key) + ": expected a non-negative integer");
    }

    bool boolean(const std::string& key, bool dflt) {
        if (!has(key)) return dflt;
        const json& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(full(key) + ": expected a boolean");
        return v.get<bool>();
    }

    void finish() {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!seen.count(it.key())) throw ConfigError("unknown key: " + full(it.key()));
    }
};

OptimKind read_optimizer(ObjReader& parent, const std::string& key, const OptimKind& dflt) {
    if (!parent.has(key)) return dflt;
    ObjReader r(parent.raw(key), parent.full(key));
    OptimKind k = dflt;
    std::string name = r.str("kind", optim_name(k.tag));
    try {
        k.tag = optim_from_name(name);
    } catch (const ConfigError&) {
        throw ConfigError(r.full("kind") + ": unknown optimizer: " + name);
    }
    k.lr = r.num("lr", k.lr);
    k.beta1 = r.num("beta1", k.beta1);
    k.beta2 = r.num("beta2", k.beta2);
    k.eps = r.num("eps", k.eps);
    r.finish();
    if (!(k.lr > 0.0)) throw ConfigError(r.full("lr") + ": must be positive");
    if (k.beta1 < 0.0 || k.beta1 >= 1.0) throw ConfigError(r.full("beta1") + ": must be in [0,1)");
    if (k.beta2 < 0.0 || k.beta2 >= 1.0) throw ConfigError(r.full("beta2") + ": must be in [0,1)");
    if (!(k.eps > 0.0)) throw ConfigError(r.full("eps") + ": must be positive");
    return k;
}

}  // namespace

void ExperimentConfig::check() const {
    if (run_id.empty()) throw ConfigError("run_id: must not be empty");
    for (char c : run_id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
            throw ConfigError("run_id: only alphanumerics, '_', '-', '.' allowed");
    if (train.batch_size < 1) throw ConfigError("batch_size: must be >= 1");
    if (train.n_dis < 1) throw ConfigError("n_dis: must be >= 1");
    if (train.n_iter < 1) throw ConfigError("n_iter: must be >= 1");
    if (train.latent_dim < 1) throw ConfigError("latent_dim: must be >= 1");
    if (hidden_layers < 0) throw ConfigError("network.hidden_layers: must be >= 0");
    if (hidden_width < 1) throw ConfigError("network.hidden_width: must be >= 1");
    if (eval_every < 1) throw ConfigError("eval.every: must be >= 1");
    if (eval_samples < 3) throw ConfigError("eval.samples: must be >= 3");
    if (eval_grad_samples < 1) throw ConfigError("eval.grad_samples: must be >= 1");
    if (!(attack.tau > 0.0)) throw ConfigError("attack.tau: must be positive");
    if (!(attack.alpha > 0.0)) throw ConfigError("attack.alpha: must be positive");
    if (attack.max_iters < 1) throw ConfigError("attack.max_iters: must be >= 1");
    if (attack_samples < 1) throw ConfigError("attack.samples: must be >= 1");
    if (lipschitz_pairs < 1) throw ConfigError("lipschitz_pairs: must be >= 1");
    if (snapshot_networks != "final" && snapshot_networks != "eval")
        throw ConfigError("snapshot_networks: must be \"final\" or \"eval\"");
    if (reg.lambda < 0.0) throw ConfigError("regularizer.lambda: must be >= 0");
    if (dat.epsilon < 0.0) throw ConfigError("dat.epsilon: must be >= 0");
    if (dat.steps < 1) throw ConfigError("dat.steps: must be >= 1");
    if (dat.enabled && !dat.pos_real && !dat.pos_fake && !dat.pos_gen)
        throw ConfigError("dat.positions: must not be empty when enabled");
    if (dat.enabled && reg.tag != RegTag::none)
        throw ConfigError("config: pick a gradient penalty or adversarial training, not both");
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    ObjReader r(j, "");

    c.run_id = r.str("run_id", c.run_id);
    c.dataset = dataset_from_name(r.str("dataset", dataset_name(c.dataset)));
    c.train.seed = r.uinteger("seed", c.train.seed);
    c.train.batch_size = static_cast<int>(r.integer("batch_size", c.train.batch_size));
    c.train.n_dis = static_cast<int>(r.integer("n_dis", c.train.n_dis));
    c.train.n_iter = r.integer("n_iter", c.train.n_iter);
    c.train.latent_dim = static_cast<int>(r.integer("latent_dim", c.train.latent_dim));
    {
        std::string name = r.str("loss", loss_name(c.train.loss));
        try {
            c.train.loss = loss_from_name(name);
        } catch (const ConfigError&) {
            throw ConfigError("loss: unknown loss: " + name);
        }
    }
    c.train.opt_g = read_optimizer(r, "optimizer_g", c.train.opt_g);
    c.train.opt_d = read_optimizer(r, "optimizer_d", c.train.opt_d);

    if (r.has("regularizer")) {
        ObjReader rr(r.raw("regularizer"), "regularizer");
        if (!rr.has("kind")) throw ConfigError("regularizer.kind: required");
        std::string name = rr.str("kind", "");
        try {
            c.reg.tag = reg_from_name(name);
        } catch (const ConfigError&) {
            throw ConfigError("regularizer.kind: unknown kind: " + name);
        }
        c.reg.lambda = rr.num("lambda", default_lambda(c.reg.tag));
        rr.finish();
    }

    if (r.has("dat")) {
        ObjReader rd(r.raw("dat"), "dat");
        c.dat.enabled = rd.boolean("enabled", true);  // presence implies intent
        std::string mode = rd.str("mode", "dat");
        if (mode == "dat")
            c.dat.mode = PerturbConfig::Mode::dat;
        else if (mode == "datt")
            c.dat.mode = PerturbConfig::Mode::datt;
        else
            throw ConfigError("dat.mode: must be \"dat\" or \"datt\"");
        c.dat.epsilon = rd.num("epsilon", c.dat.epsilon);
        c.dat.steps = static_cast<int>(rd.integer("steps", c.dat.steps));
        if (rd.has("positions")) {
            const json& pos = rd.raw("positions");
            if (!pos.is_array()) throw ConfigError("dat.positions: expected an array");
            c.dat.pos_real = c.dat.pos_fake = c.dat.pos_gen = false;
            for (const json& p : pos) {
                if (!p.is_string()) throw ConfigError("dat.positions: expected strings");
                std::string s = p.get<std::string>();
                if (s == "real")
                    c.dat.pos_real = true;
                else if (s == "fake")
                    c.dat.pos_fake = true;
                else if (s == "generator")
                    c.dat.pos_gen = true;
                else
                    throw ConfigError("dat.positions: unknown position: " + s);
            }
        }
        rd.finish();
    }

    if (r.has("network")) {
        ObjReader rn(r.raw("network"), "network");
        c.hidden_layers = static_cast<int>(rn.integer("hidden_layers", c.hidden_layers));
        c.hidden_width = static_cast<int>(rn.integer("hidden_width", c.hidden_width));
        rn.finish();
    }

    if (r.has("eval")) {
        ObjReader re(r.raw("eval"), "eval");
        c.eval_every = re.integer("every", c.eval_every);
        c.eval_samples = static_cast<int>(re.integer("samples", c.eval_samples));
        c.eval_grad_samples = static_cast<int>(re.integer("grad_samples", c.eval_grad_samples));
        re.finish();
    }

    if (r.has("attack")) {
        ObjReader ra(r.raw("attack"), "attack");
        c.attack.tau = ra.num("tau", c.attack.tau);
        c.attack.alpha = ra.num("alpha", c.attack.alpha);
        c.attack.max_iters = static_cast<int>(ra.integer("max_iters", c.attack.max_iters));
        c.attack_samples = static_cast<int>(ra.integer("samples", c.attack_samples));
        ra.finish();
    }

    c.lipschitz_pairs = static_cast<int>(r.integer("lipschitz_pairs", c.lipschitz_pairs));
    c.snapshot_networks = r.str("snapshot_networks", c.snapshot_networks);
    r.finish();

    c.check();
    return c;
}

ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid json: ") + e.what());
    }
    return config_from_json(j);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["run_id"] = c.run_id;
    j["dataset"] = dataset_name(c.dataset);
    j["seed"] = c.train.seed;
    j["batch_size"] = c.train.batch_size;
    j["n_dis"] = c.train.n_dis;
    j["n_iter"] = c.train.n_iter;
    j["latent_dim"] = c.train.latent_dim;
    j["loss"] = loss_name(c.train.loss);
    auto opt_json = [](const OptimKind& k) {
        return json{{"kind", optim_name(k.tag)},
                    {"lr", k.lr},
                    {"beta1", k.beta1},
                    {"beta2", k.beta2},
                    {"eps", k.eps}};
    };
    j["optimizer_g"] = opt_json(c.train.opt_g);
    j["optimizer_d"] = opt_json(c.train.opt_d);
    j["regularizer"] = json{{"kind", reg_name(c.reg.tag)}, {"lambda", c.reg.lambda}};
    json positions = json::array();
    if (c.dat.pos_real) positions.push_back("real");
    if (c.dat.pos_fake) positions.push_back("fake");
    if (c.dat.pos_gen) positions.push_back("generator");
    j["dat"] = json{{"enabled", c.dat.enabled},
                    {"mode", c.dat.mode == PerturbConfig::Mode::dat ? "dat" : "datt"},
                    {"epsilon", c.dat.epsilon},
                    {"steps", c.dat.steps},
                    {"positions", positions}};
    j["network"] = json{{"hidden_layers", c.hidden_layers}, {"hidden_width", c.hidden_width}};
    j["eval"] = json{{"every", c.eval_every},
                     {"samples", c.eval_samples},
                     {"grad_samples", c.eval_grad_samples}};
    j["attack"] = json{{"tau", c.attack.tau},
                       {"alpha", c.attack.alpha},
                       {"max_iters", c.attack.max_iters},
                       {"samples", c.attack_samples}};
    j["lipschitz_pairs"] = c.lipschitz_pairs;
    j["snapshot_networks"] = c.snapshot_networks;
    return j;
}

}  // namespace datlab
