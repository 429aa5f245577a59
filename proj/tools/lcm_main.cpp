// Command-line front end: simulate, train, eval, exp1, exp2.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lcm/experiments.hpp"
#include "lcm/rng.hpp"

using namespace lcm;

namespace {

// Plain-text key-value config with optional [sections]; section names are
// prefixed onto keys as "section.key". Later occurrences win.
std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::map<std::string, std::string> kv;
    std::string line, section;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line has no '=': " + line);
        const std::string key = trim(line.substr(0, eq));
        kv[section.empty() ? key : section + "." + key] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, ',')) {
        if (!f.empty()) out.push_back(f);
    }
    return out;
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
    const auto kv = parse_config_file(path);
    auto get = [&](const std::string& key) -> const std::string* {
        const auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (const auto* v = get("experiment.n_users")) cfg.n_users = std::stoi(*v);
    if (const auto* v = get("experiment.n_items")) cfg.n_items = std::stoi(*v);
    if (const auto* v = get("experiment.choices_per_user"))
        cfg.choices_per_user = std::stoi(*v);
    if (const auto* v = get("experiment.set_size")) cfg.set_size = std::stoi(*v);
    if (const auto* v = get("experiment.repetitions")) cfg.repetitions = std::stoi(*v);
    if (const auto* v = get("experiment.treated_count"))
        cfg.treated_count = std::stoi(*v);
    if (const auto* v = get("experiment.seed")) cfg.seed = std::stoull(*v);
    if (const auto* v = get("experiment.error_laws")) cfg.error_laws = split_csv(*v);
    if (const auto* v = get("experiment.bias_kinds")) cfg.bias_kinds = split_csv(*v);
    if (const auto* v = get("experiment.models")) {
        cfg.models.clear();
        for (const auto& m : split_csv(*v)) cfg.models.push_back(model_kind_from_string(m));
    }
    if (const auto* v = get("experiment.threads")) cfg.threads = std::stoi(*v);
    if (const auto* v = get("model.kernel_count")) cfg.kernel_count = std::stoi(*v);
    if (const auto* v = get("model.sample_count")) cfg.sample_count = std::stoi(*v);
    if (const auto* v = get("model.embedding_dim")) cfg.embedding_dim = std::stoi(*v);
    if (const auto* v = get("train.max_epochs")) cfg.max_epochs = std::stoi(*v);
    if (const auto* v = get("train.patience")) cfg.patience = std::stoi(*v);
    if (const auto* v = get("train.batch_size")) cfg.batch_size = std::stoi(*v);
}

struct CommonOpts {
    std::string profile = "desk";
    std::string config_file;
    std::string out = "out";
    std::uint64_t seed = 1;
    std::string models;
    std::string error_law;
    bool resume = false;
    bool control = false;
    int threads = 2;
};

ExperimentConfig build_config(const CommonOpts& o, const std::string& experiment) {
    ExperimentConfig cfg;
    cfg.experiment = experiment;
    cfg.apply_profile(o.profile);
    if (!o.config_file.empty()) apply_config_file(cfg, o.config_file);
    cfg.out_dir = o.out;
    cfg.seed = o.seed;
    cfg.resume = o.resume;
    cfg.control = o.control;
    cfg.threads = o.threads;
    if (!o.models.empty()) {
        cfg.models.clear();
        for (const auto& m : split_csv(o.models))
            cfg.models.push_back(model_kind_from_string(m));
    }
    if (!o.error_law.empty() && o.error_law != "all")
        cfg.error_laws = split_csv(o.error_law);
    if (experiment == "exp2") {
        // univariate baselines are excluded from the exposure study
        std::erase_if(cfg.models, [](ModelKind m) {
            return m == ModelKind::BL || m == ModelKind::BCE || m == ModelKind::GBCE;
        });
    }
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--profile", o.profile, "size profile: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--config", o.config_file, "key-value config file");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--models", o.models, "comma-separated model list");
    cmd->add_option("--error-law", o.error_law,
                    "gumbel | signed_exponential | gaussian_mixture | all");
    cmd->add_option("--threads", o.threads, "worker threads");
    cmd->add_flag("--resume", o.resume, "skip repetitions with cached results");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Choice-model learning toolkit"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    // simulate
    CommonOpts sim_opts;
    std::string sim_protocol = "uniform";
    auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
    add_common(sim, sim_opts);
    sim->add_option("--protocol", sim_protocol,
                    "uniform | overexposure | competition_popular | "
                    "competition_unpopular");

    // train
    std::string train_data, train_model = "mnl", train_ckpt = "model.json";
    std::string train_optimizer;
    double train_lr = -1.0;
    std::uint64_t train_seed = 1;
    auto* tr = app.add_subcommand("train", "fit one model on a simulated dataset");
    tr->add_option("--data", train_data, "dataset directory (from simulate)")
        ->required();
    tr->add_option("--model", train_model, "model kind");
    tr->add_option("--out", train_ckpt, "checkpoint path");
    tr->add_option("--optimizer", train_optimizer, "sgd | adam");
    tr->add_option("--lr", train_lr, "learning rate");
    tr->add_option("--seed", train_seed, "training seed");

    // eval
    std::string eval_data, eval_ckpt, eval_out = "metrics.tsv";
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    ev->add_option("--data", eval_data, "dataset directory")->required();
    ev->add_option("--model", eval_ckpt, "checkpoint path")->required();
    ev->add_option("--out", eval_out, "metrics output path");

    // exp1 / exp2
    CommonOpts e1_opts, e2_opts;
    auto* e1 = app.add_subcommand("exp1", "accuracy and robustness experiment");
    add_common(e1, e1_opts);
    auto* e2 = app.add_subcommand("exp2", "exposure-bias experiment");
    add_common(e2, e2_opts);
    e2->add_flag("--control", e2_opts.control, "null protocol: O' and O'' identical");
    std::string e2_bias = "all";
    e2->add_option("--bias", e2_bias, "overexposure | competition | all");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            ExperimentConfig cfg = build_config(sim_opts, "simulate");
            const ErrorDistribution law = error_law_from_name(
                cfg.error_laws.size() == 1 ? cfg.error_laws[0] : "gumbel");
            const GroundTruth gt = gen_ground_truth(cfg.seed, cfg.n_users, cfg.n_items,
                                                    cfg.embedding_dim, law);
            const SplitPlan plan =
                make_split_plan(cfg.n_users, cfg.n_items, cfg.seed);
            ExposureProtocol protocol;
            protocol.set_size = cfg.set_size;
            protocol.kind = protocol_kind_from_string(sim_protocol);
            if (protocol.kind != ExposureProtocol::Kind::Uniform) {
                Rng rng(mix_key(cfg.seed, 0x72EA7ED));
                std::vector<ItemId> pool = plan.train_items;
                for (int i = 0; i < cfg.treated_count &&
                                i < static_cast<int>(pool.size());
                     ++i) {
                    const std::size_t pick =
                        static_cast<std::size_t>(i) +
                        rng.uniform_index(pool.size() - static_cast<std::size_t>(i));
                    std::swap(pool[i], pool[pick]);
                    protocol.treated_items.push_back(pool[i]);
                }
                std::sort(protocol.treated_items.begin(), protocol.treated_items.end());
            }
            const auto observations =
                gen_choices(gt, protocol, cfg.choices_per_user, cfg.seed, &plan);
            const SplitResult splits = split(observations, gt, cfg.seed);
            const std::filesystem::path dir = cfg.out_dir;
            auto meta = cfg.resolved();
            meta.emplace_back("protocol", sim_protocol);
            write_ground_truth(dir / "ground_truth.json", gt);
            write_dataset(dir / "train.jsonl", splits.train, meta);
            write_dataset(dir / "val.jsonl", splits.val, meta);
            write_dataset(dir / "test.jsonl", splits.test, meta);
            std::printf("wrote %zu train / %zu val / %zu test observations to %s\n",
                        splits.train.size(), splits.val.size(), splits.test.size(),
                        dir.string().c_str());
            return 0;
        }
        if (tr->parsed()) {
            const std::filesystem::path dir = train_data;
            const GroundTruth gt = read_ground_truth(dir / "ground_truth.json");
            const auto train_set = read_dataset(dir / "train.jsonl");
            const auto val_set = read_dataset(dir / "val.jsonl");
            ExperimentConfig ecfg;
            ecfg.n_users = gt.n_users;
            ecfg.n_items = gt.n_items;
            TrainConfig tc =
                default_train_config(model_kind_from_string(train_model), ecfg);
            if (!train_optimizer.empty())
                tc.optimizer = optimizer_kind_from_string(train_optimizer);
            if (train_lr >= 0.0) tc.learning_rate = train_lr;
            tc.seed = train_seed;
            const FittedModel model = train(train_set, val_set, tc);
            write_checkpoint(train_ckpt, model);
            std::printf("best epoch %d, validation NLL %s; checkpoint: %s\n",
                        model.best_epoch,
                        format_double(validation_nll(model, val_set)).c_str(),
                        train_ckpt.c_str());
            return 0;
        }
        if (ev->parsed()) {
            const std::filesystem::path dir = eval_data;
            const GroundTruth gt = read_ground_truth(dir / "ground_truth.json");
            const auto test_set = read_dataset(dir / "test.jsonl");
            const FittedModel model = read_checkpoint(eval_ckpt);
            // recover the evaluation users/items from the test set itself
            std::vector<char> seen_user(gt.n_users, 0), seen_item(gt.n_items, 0);
            for (const auto& obs : test_set) {
                seen_user[obs.user] = 1;
                for (ItemId j : obs.choice_set) seen_item[j] = 1;
            }
            std::vector<UserId> users;
            std::vector<ItemId> items;
            for (UserId u = 0; u < gt.n_users; ++u)
                if (seen_user[u]) users.push_back(u);
            for (ItemId j = 0; j < gt.n_items; ++j)
                if (seen_item[j]) items.push_back(j);
            const CorpusOracle oracle = make_corpus_oracle(gt, users, items);
            const MetricReport m = test_metrics(model, test_set, oracle);
            Report rep;
            rep.header = {{"version", version_string()},
                          {"model", to_string(model.model_kind)}};
            rep.columns = {"kld_corpus", "nll", "ndcg", "acc"};
            rep.rows.push_back({format_double(m.kld_corpus), format_double(m.nll),
                                format_double(m.ndcg), format_double(m.acc)});
            write_report(eval_out, rep);
            std::printf("kld=%s nll=%s ndcg=%s acc=%s -> %s\n",
                        format_double(m.kld_corpus).c_str(),
                        format_double(m.nll).c_str(), format_double(m.ndcg).c_str(),
                        format_double(m.acc).c_str(), eval_out.c_str());
            return 0;
        }
        if (e1->parsed()) {
            const ExperimentConfig cfg = build_config(e1_opts, "exp1");
            const ExperimentResult res = run_experiment1(cfg);
            if (res.failures > 0) {
                std::fprintf(stderr, "%d repetition(s) failed\n", res.failures);
                return 1;
            }
            return 0;
        }
        if (e2->parsed()) {
            ExperimentConfig cfg = build_config(e2_opts, "exp2");
            if (e2_bias != "all") cfg.bias_kinds = split_csv(e2_bias);
            const ExperimentResult res = run_experiment2(cfg);
            if (res.failures > 0) {
                std::fprintf(stderr, "%d repetition(s) failed\n", res.failures);
                return 1;
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
