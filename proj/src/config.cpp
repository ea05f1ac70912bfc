#include "bvm/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace bvm {

namespace {

Target target_from_string(const std::string& s, const std::string& field) {
    if (s == "cov" || s == "covariance") return Target::covariance;
    if (s == "prec" || s == "precision") return Target::precision;
    throw ConfigParse(field, "expected 'cov' or 'prec', got '" + s + "'");
}

std::string target_to_string(Target t) { return t == Target::covariance ? "cov" : "prec"; }

std::vector<double> vector_from_json(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) throw ConfigParse(field, "expected a nonempty numeric array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number()) throw ConfigParse(field, "expected a numeric array");
        out.push_back(x.get<double>());
    }
    return out;
}

// truth forms: "identity" (needs p), {"diag": [...]}, inline [[...]], {"csv": path}
SymMatrix truth_matrix_from_json(const nlohmann::json& j, int p, const std::filesystem::path& base_dir,
                                 const std::string& field) {
    if (j.is_string()) {
        if (j.get<std::string>() != "identity")
            throw ConfigParse(field, "unknown matrix shorthand '" + j.get<std::string>() + "'");
        if (p < 1) throw ConfigParse(field, "'identity' requires a positive 'p'");
        return SymMatrix::identity(p);
    }
    if (j.is_object() && j.contains("diag")) return SymMatrix::diagonal(vector_from_json(j.at("diag"), field));
    if (j.is_object() && j.contains("csv")) {
        const auto rel = j.at("csv").get<std::string>();
        return load_sym_csv(base_dir / rel);
    }
    if (j.is_array()) {
        const int dim = static_cast<int>(j.size());
        std::vector<double> entries;
        entries.reserve(static_cast<std::size_t>(dim) * dim);
        for (const auto& row : j) {
            if (!row.is_array() || static_cast<int>(row.size()) != dim)
                throw ConfigParse(field, "inline matrix must be square");
            for (const auto& x : row) entries.push_back(x.get<double>());
        }
        return SymMatrix(dim, std::move(entries));
    }
    throw ConfigParse(field, "expected 'identity', {diag: [...]}, inline rows, or {csv: path}");
}

SpdMatrix require_spd(SymMatrix m, const std::string& field) {
    try {
        return SpdMatrix(std::move(m));
    } catch (const NotPositiveDefinite&) {
        throw ConfigParse(field, "matrix is not positive definite");
    }
}

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& scope) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.contains(key))
            throw ConfigParse(scope.empty() ? key : scope + "." + key, "unknown key");
    }
}

}  // namespace

FunctionalSpec functional_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind")) throw ConfigParse("functional", "expected {kind, ...}");
    reject_unknown_keys(j, {"kind", "i", "j", "m", "u", "v", "target"}, "functional");
    const std::string kind = j.at("kind").get<std::string>();
    const Target target = j.contains("target")
                              ? target_from_string(j.at("target").get<std::string>(), "functional.target")
                              : Target::covariance;
    if (kind == "entry") {
        if (!j.contains("i") || !j.contains("j")) throw ConfigParse("functional", "entry requires i and j");
        return EntryFunctional{j.at("i").get<int>(), j.at("j").get<int>(), target};
    }
    if (kind == "quadratic") {
        if (!j.contains("v")) throw ConfigParse("functional", "quadratic requires v");
        return QuadraticFunctional{vector_from_json(j.at("v"), "functional.v"), target};
    }
    if (kind == "bilinear") {
        if (!j.contains("u") || !j.contains("v")) throw ConfigParse("functional", "bilinear requires u and v");
        return BilinearFunctional{vector_from_json(j.at("u"), "functional.u"),
                                  vector_from_json(j.at("v"), "functional.v"), target};
    }
    if (kind == "logdet") return LogDetFunctional{};
    if (kind == "entropy") return EntropyFunctional{};
    if (kind == "eigenvalue") {
        if (!j.contains("m")) throw ConfigParse("functional", "eigenvalue requires m");
        return EigenvalueFunctional{j.at("m").get<int>(), target};
    }
    throw ConfigParse("functional", "unknown kind '" + kind + "'");
}

nlohmann::json functional_to_json(const FunctionalSpec& f) {
    nlohmann::json j{{"kind", functional_kind(f)}};
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, EntryFunctional>) {
                j["i"] = v.i;
                j["j"] = v.j;
                j["target"] = target_to_string(v.target);
            } else if constexpr (std::is_same_v<T, QuadraticFunctional>) {
                j["v"] = v.v;
                j["target"] = target_to_string(v.target);
            } else if constexpr (std::is_same_v<T, BilinearFunctional>) {
                j["u"] = v.u;
                j["v"] = v.v;
                j["target"] = target_to_string(v.target);
            } else if constexpr (std::is_same_v<T, EigenvalueFunctional>) {
                j["m"] = v.m;
                j["target"] = target_to_string(v.target);
            }
        },
        f);
    return j;
}

ParsedConfig parse_config_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigParse("<root>", "config must be a JSON object");
    reject_unknown_keys(j, {"schema",       "seed",     "p",       "n",       "truth",   "prior",
                            "b",            "lambda",   "functional", "i",    "j",       "m",
                            "u",            "v",        "target",  "n_draws", "replications", "alpha",
                            "threads",      "plug_in_variance", "mcmc", "da", "kato_reps", "expand"},
                        "");
    if (!j.contains("schema")) throw ConfigParse("schema", "missing (expected 1)");
    if (!j.at("schema").is_number_integer() || j.at("schema").get<int>() != 1)
        throw ConfigParse("schema", "unsupported schema version (expected 1)");

    ParsedConfig out;
    ExperimentConfig& exp = out.experiment;

    if (j.contains("seed")) out.seed = j.at("seed").get<std::uint64_t>();
    exp.seed = RngStream(out.seed, 0);

    const int p = j.contains("p") ? j.at("p").get<int>() : -1;
    if (j.contains("p") && p < 1) throw ConfigParse("p", "must be >= 1");

    if (j.contains("n")) {
        exp.n = j.at("n").get<int>();
        if (exp.n < 1) throw ConfigParse("n", "must be >= 1");
    }
    if (j.contains("n_draws")) {
        exp.n_draws = j.at("n_draws").get<int>();
        if (exp.n_draws < 100) throw ConfigParse("n_draws", "must be >= 100");
    }
    if (j.contains("replications")) {
        exp.replications = j.at("replications").get<int>();
        if (exp.replications < 1) throw ConfigParse("replications", "must be >= 1");
    }
    if (j.contains("alpha")) {
        exp.alpha = j.at("alpha").get<double>();
        if (!(exp.alpha > 0.0 && exp.alpha < 1.0)) throw ConfigParse("alpha", "must lie in (0, 1)");
    }
    if (j.contains("threads")) {
        exp.threads = j.at("threads").get<int>();
        if (exp.threads < 0) throw ConfigParse("threads", "must be >= 0");
    }
    if (j.contains("plug_in_variance")) exp.plug_in_variance = j.at("plug_in_variance").get<bool>();

    if (j.contains("mcmc")) {
        const auto& m = j.at("mcmc");
        reject_unknown_keys(m, {"steps", "burn_in", "thinning", "step_scale", "adapt"}, "mcmc");
        if (m.contains("steps")) exp.mcmc.steps = m.at("steps").get<int>();
        if (exp.mcmc.steps < 1) throw ConfigParse("mcmc.steps", "must be >= 1");
        if (m.contains("burn_in")) exp.mcmc.burn_in = m.at("burn_in").get<int>();
        if (m.contains("thinning")) {
            exp.mcmc.thinning = m.at("thinning").get<int>();
            if (exp.mcmc.thinning < 1) throw ConfigParse("mcmc.thinning", "must be >= 1");
        }
        if (m.contains("step_scale")) {
            exp.mcmc.step_scale = m.at("step_scale").get<double>();
            if (!(exp.mcmc.step_scale > 0.0)) throw ConfigParse("mcmc.step_scale", "must be > 0");
        }
        if (m.contains("adapt")) exp.mcmc.adapt = m.at("adapt").get<bool>();
        if (exp.mcmc.effective_burn_in() >= exp.mcmc.steps)
            throw ConfigParse("mcmc.burn_in", "must be smaller than steps");
    }

    if (j.contains("prior")) {
        out.has_prior = true;
        const auto& pr = j.at("prior");
        std::string kind;
        if (pr.is_string()) {
            kind = pr.get<std::string>();
        } else if (pr.is_object() && pr.contains("kind")) {
            reject_unknown_keys(pr, {"kind", "b", "lambda"}, "prior");
            kind = pr.at("kind").get<std::string>();
        } else {
            throw ConfigParse("prior", "expected 'wishart'/'gaussian' or {kind, ...}");
        }
        if (kind == "wishart") {
            int b = 1;
            if (pr.is_object() && pr.contains("b"))
                b = pr.at("b").get<int>();
            else if (j.contains("b"))
                b = j.at("b").get<int>();
            if (b < 1) throw ConfigParse("b", "must be >= 1");
            exp.prior = WishartPrior{b};
        } else if (kind == "gaussian") {
            double lambda = 0.0;
            if (pr.is_object() && pr.contains("lambda"))
                lambda = pr.at("lambda").get<double>();
            else if (j.contains("lambda"))
                lambda = j.at("lambda").get<double>();
            if (!(lambda > 0.0) || !std::isfinite(lambda))
                throw ConfigParse("lambda", "must be a finite positive number");
            exp.prior = ConstrainedGaussianPrior{lambda};
        } else {
            throw ConfigParse("prior", "unknown prior '" + kind + "'");
        }
    }

    if (j.contains("da") && j.contains("truth"))
        throw ConfigParse("truth", "give either 'truth' or 'da', not both");

    if (j.contains("da")) {
        out.has_da = true;
        const auto& da = j.at("da");
        reject_unknown_keys(da, {"mode", "mu_x", "mu_y", "sigma_x", "sigma_y", "z", "x_csv", "y_csv"},
                            "da");
        if (!da.contains("mode")) throw ConfigParse("da.mode", "missing (expected 'lda' or 'qda')");
        const std::string mode = da.at("mode").get<std::string>();
        if (mode == "lda")
            exp.da_mode = DaMode::lda;
        else if (mode == "qda")
            exp.da_mode = DaMode::qda;
        else
            throw ConfigParse("da.mode", "expected 'lda' or 'qda'");
        for (const char* key : {"mu_x", "mu_y", "sigma_x", "sigma_y", "z"})
            if (!da.contains(key)) throw ConfigParse(std::string("da.") + key, "missing");
        auto mu_x = vector_from_json(da.at("mu_x"), "da.mu_x");
        auto mu_y = vector_from_json(da.at("mu_y"), "da.mu_y");
        auto z = vector_from_json(da.at("z"), "da.z");
        const int dp = static_cast<int>(mu_x.size());
        SpdMatrix sigma_x = require_spd(truth_matrix_from_json(da.at("sigma_x"), dp, base_dir, "da.sigma_x"),
                                        "da.sigma_x");
        SpdMatrix sigma_y = require_spd(truth_matrix_from_json(da.at("sigma_y"), dp, base_dir, "da.sigma_y"),
                                        "da.sigma_y");
        try {
            exp.truth = DaTruth(std::move(mu_x), std::move(mu_y), std::move(sigma_x), std::move(sigma_y),
                                std::move(z));
        } catch (const DimensionMismatch& e) {
            throw ConfigParse("da", e.what());
        }
        if (da.contains("x_csv") != da.contains("y_csv"))
            throw ConfigParse("da", "x_csv and y_csv must be given together");
        if (da.contains("x_csv")) {
            Dataset x = load_dataset_csv(base_dir / da.at("x_csv").get<std::string>());
            Dataset y = load_dataset_csv(base_dir / da.at("y_csv").get<std::string>());
            if (x.p != y.p) throw ConfigParse("y.p", "class dimensions differ");
            if (x.n != y.n) throw ConfigParse("y.n", "unequal class sample sizes");
            if (x.p != exp.da_truth().dim()) throw ConfigParse("x_csv", "data dimension != truth dimension");
            exp.n = x.n;
            exp.da_data = DaDataset(std::move(x), std::move(y));
        }
    } else if (j.contains("truth")) {
        exp.truth = TruthSpec(require_spd(truth_matrix_from_json(j.at("truth"), p, base_dir, "truth"),
                                          "truth"));
        if (p >= 1 && exp.plain_truth().dim() != p) throw ConfigParse("truth", "dimension != p");
    }

    if (j.contains("functional")) {
        out.has_functional = true;
        const auto& fj = j.at("functional");
        nlohmann::json obj;
        if (fj.is_string()) {
            obj = nlohmann::json{{"kind", fj.get<std::string>()}};
            for (const char* key : {"i", "j", "m", "u", "v", "target"})
                if (j.contains(key)) obj[key] = j.at(key);
        } else {
            obj = fj;
        }
        exp.functional = functional_from_json(obj);
    }

    if (j.contains("kato_reps")) {
        out.kato_reps = j.at("kato_reps").get<int>();
        if (out.kato_reps < 1) throw ConfigParse("kato_reps", "must be >= 1");
    }
    if (j.contains("expand")) {
        const auto& e = j.at("expand");
        reject_unknown_keys(e, {"dims", "ns", "ts", "cases"}, "expand");
        if (e.contains("dims")) {
            out.expand_dims.clear();
            for (const auto& x : e.at("dims")) out.expand_dims.push_back(x.get<int>());
        }
        if (e.contains("ns")) {
            out.expand_ns.clear();
            for (const auto& x : e.at("ns")) out.expand_ns.push_back(x.get<int>());
        }
        if (e.contains("ts")) {
            out.expand_ts.clear();
            for (const auto& x : e.at("ts")) out.expand_ts.push_back(x.get<double>());
        }
        if (e.contains("cases")) {
            out.expand_cases = e.at("cases").get<int>();
            if (out.expand_cases < 1) throw ConfigParse("expand.cases", "must be >= 1");
        }
    }

    // cross-field checks
    if (out.has_functional && std::holds_alternative<TruthSpec>(exp.truth)) {
        const int dim = exp.plain_truth().dim();
        try {
            const double v = asymptotic_variance(*exp.functional, exp.plain_truth());
            if (!(v > 0.0)) throw ConfigParse("truth", "variance at truth is not positive");
        } catch (const ZeroEigengap&) {
            throw ConfigParse("truth", "eigengap at truth is zero for the eigenvalue functional");
        } catch (const InvalidArgument& e) {
            throw ConfigParse("functional", std::string(e.what()) + " (p = " + std::to_string(dim) + ")");
        } catch (const DimensionMismatch& e) {
            throw ConfigParse("functional", e.what());
        }
    }
    if (out.has_da) {
        const auto& t = exp.da_truth();
        const double v2 = *exp.da_mode == DaMode::lda ? lda_variance(t).v2 : qda_variance(t).v2;
        if (!(v2 > 0.0)) throw ConfigParse("da", "variance at truth is not positive");
        if (!out.has_prior) {
            exp.prior = ConstrainedGaussianPrior{0.0};  // flagged below
        }
        if (!std::holds_alternative<ConstrainedGaussianPrior>(exp.prior) ||
            !(std::get<ConstrainedGaussianPrior>(exp.prior).lambda_cap > 0.0))
            throw ConfigParse("prior", "DA mode requires the gaussian prior with lambda > 0");
    }

    return out;
}

ParsedConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParse("config_path", "cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigParse("<root>", std::string("JSON parse error: ") + e.what());
    }
    return parse_config_json(j, path.parent_path());
}

nlohmann::json config_to_json(const ParsedConfig& config) {
    const ExperimentConfig& exp = config.experiment;
    nlohmann::json j{{"schema", 1}, {"seed", config.seed}};
    j["n"] = exp.n;
    j["n_draws"] = exp.n_draws;
    j["replications"] = exp.replications;
    j["alpha"] = exp.alpha;
    j["threads"] = exp.threads;
    j["plug_in_variance"] = exp.plug_in_variance;
    j["mcmc"] = {{"steps", exp.mcmc.steps},
                 {"burn_in", exp.mcmc.burn_in},
                 {"thinning", exp.mcmc.thinning},
                 {"step_scale", exp.mcmc.step_scale},
                 {"adapt", exp.mcmc.adapt}};
    if (config.has_prior) {
        if (const auto* w = std::get_if<WishartPrior>(&exp.prior))
            j["prior"] = {{"kind", "wishart"}, {"b", w->b}};
        else
            j["prior"] = {{"kind", "gaussian"},
                          {"lambda", std::get<ConstrainedGaussianPrior>(exp.prior).lambda_cap}};
    }
    if (config.has_functional) j["functional"] = functional_to_json(*exp.functional);
    if (config.has_da) {
        const auto& t = exp.da_truth();
        j["da"] = {{"mode", *exp.da_mode == DaMode::lda ? "lda" : "qda"},
                   {"mu_x", t.mu_x},
                   {"mu_y", t.mu_y},
                   {"sigma_x", matrix_to_json(t.sigma_x.sym()).at("entries")},
                   {"sigma_y", matrix_to_json(t.sigma_y.sym()).at("entries")},
                   {"z", t.z}};
    } else if (std::holds_alternative<TruthSpec>(exp.truth)) {
        j["p"] = exp.plain_truth().dim();
        j["truth"] = matrix_to_json(exp.plain_truth().sigma_star.sym()).at("entries");
    }
    j["kato_reps"] = config.kato_reps;
    j["expand"] = {{"dims", config.expand_dims},
                   {"ns", config.expand_ns},
                   {"ts", config.expand_ts},
                   {"cases", config.expand_cases}};
    return j;
}

}  // namespace bvm
