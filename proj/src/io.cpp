#include "lcm/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#ifndef LCM_VERSION_STRING
#define LCM_VERSION_STRING "unknown"
#endif

namespace lcm {

using nlohmann::json;

std::string version_string() { return std::string("lcm4rec ") + LCM_VERSION_STRING; }

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    return in;
}

json error_to_json(const ErrorDistribution& err) {
    json j;
    j["kind"] = err.name();
    if (const auto* g = std::get_if<Gumbel>(&err.kind())) {
        j["location"] = g->location;
        j["scale"] = g->scale;
    } else if (const auto* e = std::get_if<SignedExponential>(&err.kind())) {
        j["location"] = e->location;
        j["scale"] = e->scale;
    } else {
        const auto& m = std::get<GaussianMixture>(err.kind());
        j["weights"] = m.weights;
        j["means"] = m.means;
        j["stddevs"] = m.stddevs;
    }
    return j;
}

ErrorDistribution error_from_json(const json& j) {
    const std::string kind = j.at("kind");
    if (kind == "gumbel")
        return ErrorDistribution::gumbel(j.at("location"), j.at("scale"));
    if (kind == "signed_exponential")
        return ErrorDistribution::signed_exponential(j.at("location"), j.at("scale"));
    if (kind == "gaussian_mixture")
        return ErrorDistribution::gaussian_mixture(j.at("weights"), j.at("means"),
                                                   j.at("stddevs"));
    throw std::runtime_error("unknown error distribution kind: " + kind);
}

json utility_to_json(const UtilityParams& p) {
    json j;
    j["n_users"] = p.n_users();
    j["n_items"] = p.n_items();
    j["dim"] = p.dim();
    j["user_embeddings"] = p.user_embeddings_flat();
    j["item_embeddings"] = p.item_embeddings_flat();
    j["item_constants"] = p.item_constants();
    return j;
}

UtilityParams utility_from_json(const json& j) {
    UtilityParams p(j.at("n_users"), j.at("n_items"), j.at("dim"));
    p.user_embeddings_flat() = j.at("user_embeddings").get<std::vector<double>>();
    p.item_embeddings_flat() = j.at("item_embeddings").get<std::vector<double>>();
    p.item_constants() = j.at("item_constants").get<std::vector<double>>();
    if (p.user_embeddings_flat().size() != p.n_users() * p.dim() ||
        p.item_embeddings_flat().size() != p.n_items() * p.dim() ||
        p.item_constants().size() != p.n_items())
        throw std::runtime_error("utility params: inconsistent dimensions");
    return p;
}

}  // namespace

void write_dataset(const std::filesystem::path& path,
                   const std::vector<ChoiceObservation>& observations,
                   const std::vector<std::pair<std::string, std::string>>& meta) {
    std::ofstream out = open_out(path);
    json m;
    m["version"] = version_string();
    for (const auto& [k, v] : meta) m[k] = v;
    out << json{{"meta", m}}.dump() << '\n';
    for (const auto& obs : observations) {
        json j;
        j["user"] = obs.user;
        j["chosen"] = obs.chosen;
        j["choice_set"] = obs.choice_set;
        out << j.dump() << '\n';
    }
}

std::vector<ChoiceObservation> read_dataset(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    std::vector<ChoiceObservation> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line);
        if (j.contains("meta")) continue;
        ChoiceObservation obs;
        obs.user = j.at("user");
        obs.chosen = j.at("chosen");
        obs.choice_set = j.at("choice_set").get<std::vector<ItemId>>();
        try {
            validate(obs);
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": " + e.what());
        }
        out.push_back(std::move(obs));
    }
    return out;
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt) {
    json j;
    j["version"] = version_string();
    j["n_users"] = gt.n_users;
    j["n_items"] = gt.n_items;
    j["utility"] = utility_to_json(gt.params);
    j["error"] = error_to_json(gt.error);
    open_out(path) << j.dump(2) << '\n';
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
    json j = json::parse(open_in(path));
    GroundTruth gt;
    gt.n_users = j.at("n_users");
    gt.n_items = j.at("n_items");
    gt.params = utility_from_json(j.at("utility"));
    gt.error = error_from_json(j.at("error"));
    return gt;
}

void write_checkpoint(const std::filesystem::path& path, const FittedModel& model) {
    json j;
    j["format"] = "lcm-checkpoint-v1";
    j["version"] = version_string();
    j["model_kind"] = to_string(model.model_kind);
    j["utility"] = utility_to_json(model.utility);
    if (model.kernel.has_value()) {
        const DerivedKernels dk = derive(*model.kernel);
        j["kernel"]["raw"]["alphas"] = model.kernel->alphas;
        j["kernel"]["raw"]["betas"] = model.kernel->betas;
        j["kernel"]["raw"]["lambda"] = model.kernel->lambda;
        j["kernel"]["derived"]["weights"] = dk.weights;
        j["kernel"]["derived"]["bandwidths"] = dk.bandwidths;
        j["kernel"]["derived"]["design_points"] = dk.design_points;
        j["kernel"]["derived"]["scale"] = dk.scale;
    }
    const TrainConfig& c = model.config;
    j["config"] = {{"model_kind", to_string(c.model_kind)},
                   {"optimizer", to_string(c.optimizer)},
                   {"learning_rate", c.learning_rate},
                   {"batch_size", c.batch_size},
                   {"max_epochs", c.max_epochs},
                   {"patience", c.patience},
                   {"seed", c.seed},
                   {"kernel_count", c.kernel_count},
                   {"sample_count", c.sample_count},
                   {"embedding_dim", c.embedding_dim},
                   {"n_users", c.n_users},
                   {"n_items", c.n_items},
                   {"negatives_per_positive", c.negatives_per_positive},
                   {"gbce_t", c.gbce_t},
                   {"frozen_draws", c.frozen_draws},
                   {"validation_sample_count", c.validation_sample_count}};
    j["best_epoch"] = model.best_epoch;
    json hist = json::array();
    for (const auto& h : model.history)
        hist.push_back({{"train_nll", h.train_nll}, {"validation_nll", h.validation_nll}});
    j["history"] = hist;
    open_out(path) << j.dump(2) << '\n';
}

FittedModel read_checkpoint(const std::filesystem::path& path) {
    json j = json::parse(open_in(path));
    if (j.at("format") != "lcm-checkpoint-v1")
        throw std::runtime_error("unsupported checkpoint format in " + path.string());
    FittedModel m;
    m.model_kind = model_kind_from_string(j.at("model_kind"));
    m.utility = utility_from_json(j.at("utility"));
    if (j.contains("kernel")) {
        KernelCdfParams raw;
        raw.alphas = j.at("kernel").at("raw").at("alphas").get<std::vector<double>>();
        raw.betas = j.at("kernel").at("raw").at("betas").get<std::vector<double>>();
        raw.lambda = j.at("kernel").at("raw").at("lambda");
        m.kernel = raw;
    }
    const json& c = j.at("config");
    m.config.model_kind = model_kind_from_string(c.at("model_kind"));
    m.config.optimizer = optimizer_kind_from_string(c.at("optimizer"));
    m.config.learning_rate = c.at("learning_rate");
    m.config.batch_size = c.at("batch_size");
    m.config.max_epochs = c.at("max_epochs");
    m.config.patience = c.at("patience");
    m.config.seed = c.at("seed");
    m.config.kernel_count = c.at("kernel_count");
    m.config.sample_count = c.at("sample_count");
    m.config.embedding_dim = c.at("embedding_dim");
    m.config.n_users = c.at("n_users");
    m.config.n_items = c.at("n_items");
    m.config.negatives_per_positive = c.at("negatives_per_positive");
    m.config.gbce_t = c.at("gbce_t");
    m.config.frozen_draws = c.at("frozen_draws");
    m.config.validation_sample_count = c.at("validation_sample_count");
    m.best_epoch = j.at("best_epoch");
    for (const auto& h : j.at("history"))
        m.history.push_back({h.at("train_nll"), h.at("validation_nll")});
    return m;
}

std::string format_double(double v) {
    // shortest decimal that round-trips exactly
    for (int prec = 1; prec <= 17; ++prec) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v) return buf;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_report(const std::filesystem::path& path, const Report& report) {
    std::ofstream out = open_out(path);
    for (const auto& [k, v] : report.header) out << "# " << k << '\t' << v << '\n';
    for (std::size_t c = 0; c < report.columns.size(); ++c)
        out << report.columns[c] << (c + 1 < report.columns.size() ? '\t' : '\n');
    for (const auto& row : report.rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
            out << row[c] << (c + 1 < row.size() ? '\t' : '\n');
    }
}

}  // namespace lcm
