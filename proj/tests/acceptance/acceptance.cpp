// End-to-end acceptance suite. Each criterion prints one [PASS]/[FAIL] line;
// the exit status is the number of failed criteria. Run a single criterion
// with --criterion N. Heavy criteria share one desk-scale experiment run
// cached under the output directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "lcm/evalkit.hpp"
#include "lcm/experiments.hpp"
#include "lcm/parallel.hpp"
#include "lcm/rng.hpp"

using namespace lcm;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int number;
    std::string description;
    std::function<bool(std::string&)> run;
};

fs::path g_out = "acceptance_out";
int g_threads = 2;

// ---------------------------------------------------------------- helpers

struct TsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const {
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c] == name) return static_cast<int>(c);
        throw std::runtime_error("missing column: " + name);
    }
};

TsvTable read_tsv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    TsvTable t;
    std::string line;
    bool have_cols = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) fields.push_back(f);
        if (!have_cols) {
            t.columns = fields;
            have_cols = true;
        } else {
            t.rows.push_back(fields);
        }
    }
    return t;
}

ExperimentConfig desk_exp1_config(const fs::path& out, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.experiment = "exp1";
    cfg.apply_profile("desk");
    cfg.models = {ModelKind::MNL, ModelKind::ENL, ModelKind::LCM4Rec};
    cfg.out_dir = out;
    cfg.seed = seed;
    cfg.threads = g_threads;
    cfg.resume = true;  // criteria 5 and 6 share this run
    return cfg;
}

void ensure_exp1_run() {
    const ExperimentConfig cfg = desk_exp1_config(g_out / "exp1_run_a", 20250801);
    const ExperimentResult res = run_experiment1(cfg);
    if (res.failures > 0)
        throw std::runtime_error("experiment 1 repetitions failed: " +
                                 std::to_string(res.failures));
}

// --------------------------------------------------------------- criteria

// Table-1 golden probabilities.
bool criterion1(std::string& message) {
    const Simplex m3 = mnl_probs(std::vector<double>{3.0, 1.0, 2.0});
    bool ok = std::abs(m3[0] - 0.665) < 0.0005 && std::abs(m3[1] - 0.090) < 0.0005 &&
              std::abs(m3[2] - 0.245) < 0.0005;

    const Simplex m2 = mnl_probs(std::vector<double>{3.0, 1.0});
    ok = ok && std::abs(m2[0] - 0.881) < 0.0005 && std::abs(m2[1] - 0.119) < 0.0005;

    // The binary-matching scale reproduces the published binary row.
    const double p_binary = std::exp(2.0) / (1.0 + std::exp(2.0));
    const double s_binary = -2.0 / std::log(2.0 * (1.0 - p_binary));
    const Simplex e2 = enl_probs(std::vector<double>{3.0, 1.0}, s_binary);
    ok = ok && std::abs(e2[0] - 0.881) < 0.005 && std::abs(e2[1] - 0.119) < 0.005;

    // The published ternary row is reproduced under the scale calibrated to
    // its top entry; the two remaining entries are then model predictions.
    double lo = 1.0, hi = 3.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (enl_probs(std::vector<double>{3.0, 1.0, 2.0}, mid)[0] > 0.702 ? lo : hi) = mid;
    }
    const Simplex e3 = enl_probs(std::vector<double>{3.0, 1.0, 2.0}, 0.5 * (lo + hi));
    ok = ok && std::abs(e3[0] - 0.702) < 0.005 && std::abs(e3[1] - 0.053) < 0.005 &&
         std::abs(e3[2] - 0.245) < 0.005;

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "mnl=(%.4f, %.4f, %.4f) enl=(%.4f, %.4f, %.4f)", m3[0], m3[1],
                  m3[2], e3[0], e3[1], e3[2]);
    message = buf;
    return ok;
}

struct GradInstance {
    UtilityParams up;
    KernelCdfParams raw;
    std::vector<ChoiceObservation> batch;
};

GradInstance random_grad_instance(Rng& rng, int n_users, int n_items, int K,
                                  int n_obs, int set_size) {
    GradInstance inst;
    inst.up = UtilityParams(n_users, n_items, 2);
    for (double& x : inst.up.user_embeddings_flat()) x = rng.uniform(-0.8, 0.8);
    for (double& x : inst.up.item_embeddings_flat()) x = rng.uniform(-0.8, 0.8);
    for (double& x : inst.up.item_constants()) x = rng.uniform(0, 1);
    inst.raw.alphas.resize(K);
    inst.raw.betas.resize(K);
    for (double& a : inst.raw.alphas) a = rng.uniform(-1, 1);
    for (double& b : inst.raw.betas) b = rng.uniform(0.3, 2.5);
    inst.raw.lambda = rng.uniform(0.6, 2.0);
    for (int n = 0; n < n_obs; ++n) {
        ChoiceObservation obs;
        obs.user = static_cast<UserId>(rng.uniform_index(n_users));
        while (static_cast<int>(obs.choice_set.size()) < set_size) {
            const ItemId cand = static_cast<ItemId>(rng.uniform_index(n_items));
            bool dup = false;
            for (ItemId j : obs.choice_set) dup |= j == cand;
            if (!dup) obs.choice_set.push_back(cand);
        }
        obs.chosen = obs.choice_set[rng.uniform_index(set_size)];
        inst.batch.push_back(obs);
    }
    return inst;
}

// Every gradient component matches central finite differences.
bool criterion2(std::string& message) {
    Rng rng(321);
    double worst = 0.0;
    const double step = 1e-5;
    auto rel = [](double a, double b) {
        return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
    };
    for (int rep = 0; rep < 20; ++rep) {
        GradInstance inst = random_grad_instance(rng, 3, 5, 3, 6, 3);
        McConfig cfg;
        cfg.sample_count = 4;
        cfg.seed = 1000 + rep;
        const LossAndGradients res =
            loss_and_gradients(inst.batch, inst.up, inst.raw, cfg);
        auto loss_at = [&](const UtilityParams& up, const KernelCdfParams& raw) {
            return loss_and_gradients(inst.batch, up, raw, cfg).loss;
        };
        auto fd_raw = [&](double* slot) {
            const double orig = *slot;
            *slot = orig + step;
            const double up = loss_at(inst.up, inst.raw);
            *slot = orig - step;
            const double dn = loss_at(inst.up, inst.raw);
            *slot = orig;
            return (up - dn) / (2 * step);
        };
        for (int k = 0; k < 3; ++k) {
            worst = std::max(worst, rel(fd_raw(&inst.raw.alphas[k]),
                                        res.gradients.d_alphas[k]));
            worst = std::max(worst, rel(fd_raw(&inst.raw.betas[k]),
                                        res.gradients.d_betas[k]));
        }
        worst = std::max(worst, rel(fd_raw(&inst.raw.lambda), res.gradients.d_lambda));
        for (UserId u = 0; u < 3; ++u) {
            for (int d = 0; d < 2; ++d) {
                double* slot = &inst.up.user_embeddings_flat()[u * 2 + d];
                const double fd = fd_raw(slot);
                const auto it = res.gradients.d_user_embeddings.find(u);
                const double g =
                    it == res.gradients.d_user_embeddings.end() ? 0.0 : it->second[d];
                if (std::abs(fd) < 1e-9 && std::abs(g) < 1e-12) continue;
                worst = std::max(worst, rel(fd, g));
            }
        }
        for (ItemId j = 0; j < 5; ++j) {
            for (int d = 0; d < 2; ++d) {
                double* slot = &inst.up.item_embeddings_flat()[j * 2 + d];
                const double fd = fd_raw(slot);
                const auto it = res.gradients.d_item_embeddings.find(j);
                const double g =
                    it == res.gradients.d_item_embeddings.end() ? 0.0 : it->second[d];
                if (std::abs(fd) < 1e-9 && std::abs(g) < 1e-12) continue;
                worst = std::max(worst, rel(fd, g));
            }
            double* slot = &inst.up.item_constants()[j];
            const double fd = fd_raw(slot);
            const auto it = res.gradients.d_item_constants.find(j);
            const double g = it == res.gradients.d_item_constants.end() ? 0.0 : it->second;
            if (std::abs(fd) < 1e-9 && std::abs(g) < 1e-12) continue;
            worst = std::max(worst, rel(fd, g));
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "worst relative error %.3g (tolerance 1e-4)", worst);
    message = buf;
    return worst < 1e-4;
}

// Monte-Carlo estimates agree with quadrature; RMSE shrinks with S.
bool criterion3(std::string& message) {
    const int n_instances = 100;
    Rng rng(777);
    std::vector<GradInstance> instances;
    for (int i = 0; i < n_instances; ++i)
        instances.push_back(random_grad_instance(rng, 2, 6, 4, 1, 4));

    std::vector<int> violations(n_instances, 0);
    std::vector<double> sq_err_100(n_instances), sq_err_1k(n_instances),
        sq_err_10k(n_instances);
    for_each_chunk(n_instances, 1, g_threads, [&](std::size_t i, std::size_t,
                                                  std::size_t) {
        const GradInstance& inst = instances[i];
        const DerivedKernels dk = derive(inst.raw);
        const auto& obs = inst.batch[0];
        std::vector<double> utils;
        std::size_t chosen_pos = 0;
        for (std::size_t c = 0; c < obs.choice_set.size(); ++c) {
            utils.push_back(utility(inst.up, obs.user, obs.choice_set[c]));
            if (obs.choice_set[c] == obs.chosen) chosen_pos = c;
        }
        const double truth = generic_probs(utils, as_error_law(dk))[chosen_pos];

        const McEstimate big = choice_prob_mc(obs, inst.up, dk, 100000, {i, 0, 0});
        double var = 0.0;
        for (double p : big.per_sample) var += (p - big.mean) * (p - big.mean);
        var /= (big.per_sample.size() - 1.0);
        const double se = std::sqrt(var / static_cast<double>(big.per_sample.size()));
        if (std::abs(big.mean - truth) >= 3.0 * se) violations[i] = 1;

        const McEstimate e100 = choice_prob_mc(obs, inst.up, dk, 100, {i, 1, 0});
        const McEstimate e1k = choice_prob_mc(obs, inst.up, dk, 1000, {i, 2, 0});
        const McEstimate e10k = choice_prob_mc(obs, inst.up, dk, 10000, {i, 3, 0});
        sq_err_100[i] = (e100.mean - truth) * (e100.mean - truth);
        sq_err_1k[i] = (e1k.mean - truth) * (e1k.mean - truth);
        sq_err_10k[i] = (e10k.mean - truth) * (e10k.mean - truth);
    });

    const int total_violations =
        std::accumulate(violations.begin(), violations.end(), 0);
    auto rmse = [&](const std::vector<double>& v) {
        return std::sqrt(std::accumulate(v.begin(), v.end(), 0.0) / v.size());
    };
    const double r100 = rmse(sq_err_100), r1k = rmse(sq_err_1k), r10k = rmse(sq_err_10k);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "3-SE violations %d/100; RMSE(S=1e2,1e3,1e4) = %.2e > %.2e > %.2e",
                  total_violations, r100, r1k, r10k);
    message = buf;
    return total_violations == 0 && r100 > r1k && r1k > r10k;
}

// Constructive approximation of the standard normal cdf.
bool criterion4(std::string& message) {
    auto target = [](double x) { return 0.5 * std::erfc(-x * 0.70710678118654752); };
    const DerivedKernels dk = construct_approximation(target, 200, -4.0, 4.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double x = -4.0 + 8.0 * i / 9999.0;
        worst = std::max(worst, std::abs(kernel_cdf(dk, x) - target(x)));
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "sup error %.5f (tolerance 0.01)", worst);
    message = buf;
    return worst < 0.01;
}

// Error-distribution recovery beats the misspecified parametric references
// and the Gaussian mixture's bimodality is visible in the estimate.
bool criterion5(std::string& message) {
    ensure_exp1_run();
    const fs::path base = g_out / "exp1_run_a" / "exp1";
    const std::map<std::string, double> reference{{"gumbel", 1.19},
                                                  {"signed_exponential", 1.25},
                                                  {"gaussian_mixture", 0.43}};
    bool ok = true;
    double worst_margin = 1e9;
    const TsvTable per_rep = read_tsv(base / "per_repetition.tsv");
    const int law_c = per_rep.col("law"), model_c = per_rep.col("model"),
              rep_c = per_rep.col("rep"), kld_c = per_rep.col("error_dist_kld");
    std::map<std::string, int> seen;
    for (const auto& row : per_rep.rows) {
        if (row[model_c] != "lcm4rec") continue;
        const double kld = std::stod(row[kld_c]);
        const double limit = reference.at(row[law_c]);
        seen[row[law_c]]++;
        worst_margin = std::min(worst_margin, limit - kld);
        if (!(kld < limit)) ok = false;
        (void)rep_c;
    }
    for (const auto& [law, limit] : reference)
        if (seen[law] != 5) ok = false;

    // bimodality of every Gaussian-mixture estimate: two local maxima with a
    // clearly lower local minimum between them
    int bimodal = 0;
    for (int rep = 0; rep < 5; ++rep) {
        char name[64];
        std::snprintf(name, sizeof name, "rep%03d_lcm4rec.json", rep);
        const FittedModel m = read_checkpoint(base / "gaussian_mixture" / name);
        const DerivedKernels dk = derive(*m.kernel);
        const int n = 1201;
        std::vector<double> pdf(n);
        const double lo = dk.design_points.front() - 2.0,
                     hi = dk.design_points.back() + 2.0;
        for (int i = 0; i < n; ++i)
            pdf[i] = kernel_pdf(dk, lo + (hi - lo) * i / (n - 1));
        // peaks and the deepest valley between the two highest peaks
        std::vector<int> peaks;
        for (int i = 1; i + 1 < n; ++i)
            if (pdf[i] > pdf[i - 1] && pdf[i] > pdf[i + 1]) peaks.push_back(i);
        bool found = false;
        for (std::size_t a = 0; a < peaks.size() && !found; ++a) {
            for (std::size_t b = a + 1; b < peaks.size() && !found; ++b) {
                double valley = 1e300;
                for (int i = peaks[a]; i <= peaks[b]; ++i)
                    valley = std::min(valley, pdf[i]);
                const double lower_peak = std::min(pdf[peaks[a]], pdf[peaks[b]]);
                if (valley < 0.9 * lower_peak) found = true;
            }
        }
        bimodal += found ? 1 : 0;
    }
    ok = ok && bimodal == 5;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "worst margin to reference %.3f; bimodal mixtures %d/5",
                  worst_margin, bimodal);
    message = buf;
    return ok;
}

// Robustness ordering of corpus KLD across laws.
bool criterion6(std::string& message) {
    ensure_exp1_run();
    const TsvTable t2 = read_tsv(g_out / "exp1_run_a" / "exp1" / "table2.tsv");
    const int law_c = t2.col("law"), model_c = t2.col("model"),
              kld_c = t2.col("kld_mean");
    std::map<std::string, std::map<std::string, double>> kld;
    for (const auto& row : t2.rows)
        kld[row[law_c]][row[model_c]] = std::stod(row[kld_c]);

    const double mnl_g = kld["gumbel"]["mnl"], enl_g = kld["gumbel"]["enl"],
                 lcm_g = kld["gumbel"]["lcm4rec"];
    const double mnl_s = kld["signed_exponential"]["mnl"],
                 enl_s = kld["signed_exponential"]["enl"],
                 lcm_s = kld["signed_exponential"]["lcm4rec"];
    const double mnl_m = kld["gaussian_mixture"]["mnl"],
                 enl_m = kld["gaussian_mixture"]["enl"],
                 lcm_m = kld["gaussian_mixture"]["lcm4rec"];

    const bool correct_best_gumbel = mnl_g <= enl_g;
    const bool correct_best_signed = enl_s <= mnl_s;
    const bool lcm_within_2x = lcm_g <= 2.0 * mnl_g && lcm_s <= 2.0 * enl_s;
    const bool lcm_best_mixture = lcm_m < mnl_m && lcm_m < enl_m;
    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "gumbel(mnl %.3f, enl %.3f, lcm %.3f) signed(mnl %.3f, enl %.3f, "
                  "lcm %.3f) mixture(mnl %.3f, enl %.3f, lcm %.3f)",
                  mnl_g, enl_g, lcm_g, mnl_s, enl_s, lcm_s, mnl_m, enl_m, lcm_m);
    message = buf;
    return correct_best_gumbel && correct_best_signed && lcm_within_2x &&
           lcm_best_mixture;
}

// Exposure bias: LCM4Rec shifts less than MNL under competition; the control
// run's confidence intervals cover zero.
bool criterion7(std::string& message) {
    ExperimentConfig cfg;
    cfg.experiment = "exp2";
    cfg.apply_profile("desk");
    cfg.models = {ModelKind::MNL, ModelKind::LCM4Rec};
    cfg.error_laws = {"signed_exponential"};
    cfg.bias_kinds = {"competition"};
    cfg.out_dir = g_out / "exp2_run";
    cfg.seed = 20250802;
    cfg.threads = g_threads;
    cfg.resume = true;
    if (run_experiment2(cfg).failures > 0)
        throw std::runtime_error("experiment 2 repetitions failed");

    ExperimentConfig control = cfg;
    control.control = true;
    control.out_dir = g_out / "exp2_control";
    if (run_experiment2(control).failures > 0)
        throw std::runtime_error("experiment 2 control repetitions failed");

    const TsvTable t4 = read_tsv(cfg.out_dir / "exp2" / "table4.tsv");
    const int model_c = t4.col("model"), mean_c = t4.col("rank_shift_mean");
    double mnl_shift = 0.0, lcm_shift = 0.0;
    for (const auto& row : t4.rows) {
        if (row[model_c] == "mnl") mnl_shift = std::stod(row[mean_c]);
        if (row[model_c] == "lcm4rec") lcm_shift = std::stod(row[mean_c]);
    }

    const TsvTable tc = read_tsv(control.out_dir / "exp2" / "table4.tsv");
    const int lo_c = tc.col("ci_lo"), hi_c = tc.col("ci_hi");
    bool control_ok = !tc.rows.empty();
    for (const auto& row : tc.rows) {
        const double lo = std::stod(row[lo_c]), hi = std::stod(row[hi_c]);
        if (lo > 0.0 || hi < 0.0) control_ok = false;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "competition shift mnl %.3f vs lcm4rec %.3f; control CIs cover 0: %s",
                  mnl_shift, lcm_shift, control_ok ? "yes" : "no");
    message = buf;
    return std::abs(mnl_shift) > std::abs(lcm_shift) && control_ok;
}

// The corrected NLL estimator is closer to the quadrature-true NLL than the
// plain -sum log P-hat, averaged over repeated draw sets at S = 5.
bool criterion8(std::string& message) {
    Rng rng(4242);
    GradInstance inst = random_grad_instance(rng, 2, 5, 3, 4, 3);
    const DerivedKernels dk = derive(inst.raw);

    double true_nll = 0.0;
    for (const auto& obs : inst.batch) {
        std::vector<double> utils;
        std::size_t chosen_pos = 0;
        for (std::size_t c = 0; c < obs.choice_set.size(); ++c) {
            utils.push_back(utility(inst.up, obs.user, obs.choice_set[c]));
            if (obs.choice_set[c] == obs.chosen) chosen_pos = c;
        }
        true_nll -= std::log(generic_probs(utils, as_error_law(dk))[chosen_pos]);
    }

    const int n_draws = 10000;
    std::vector<double> corrected(n_draws), uncorrected(n_draws);
    for_each_chunk(n_draws, 64, g_threads, [&](std::size_t, std::size_t b,
                                               std::size_t e) {
        for (std::size_t d = b; d < e; ++d) {
            double corr = 0.0, unc = 0.0;
            for (std::size_t n = 0; n < inst.batch.size(); ++n) {
                const McEstimate est =
                    choice_prob_mc(inst.batch[n], inst.up, dk, 5, {d, 0, n});
                std::vector<McEstimate> one{est};
                corr += nll_corrected(one).value;
                unc += -std::log(std::max(est.mean, kProbFloor));
            }
            corrected[d] = corr;
            uncorrected[d] = unc;
        }
    });
    const double mean_corr =
        std::accumulate(corrected.begin(), corrected.end(), 0.0) / n_draws;
    const double mean_unc =
        std::accumulate(uncorrected.begin(), uncorrected.end(), 0.0) / n_draws;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "|corrected - true| = %.5f vs |uncorrected - true| = %.5f",
                  std::abs(mean_corr - true_nll), std::abs(mean_unc - true_nll));
    message = buf;
    return std::abs(mean_corr - true_nll) < std::abs(mean_unc - true_nll);
}

// Rerunning the desk experiment with the same seed gives byte-identical
// reports.
bool criterion9(std::string& message) {
    ensure_exp1_run();
    const ExperimentConfig cfg = desk_exp1_config(g_out / "exp1_run_b", 20250801);
    if (run_experiment1(cfg).failures > 0)
        throw std::runtime_error("experiment 1 rerun failed");

    auto file_bytes = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
    };
    int compared = 0;
    for (const char* rel : {"exp1/table2.tsv", "exp1/table3.tsv",
                            "exp1/per_repetition.tsv"}) {
        const std::string a = file_bytes(g_out / "exp1_run_a" / rel);
        const std::string b = file_bytes(g_out / "exp1_run_b" / rel);
        if (a.empty() || a != b) {
            message = std::string("mismatch or empty: ") + rel;
            return false;
        }
        ++compared;
    }
    message = std::to_string(compared) + " reports byte-identical";
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
            only = std::atoi(argv[++i]);
        else if (std::strcmp(argv[i], "--out") == 0 && i + 1 < argc)
            g_out = argv[++i];
        else if (std::strcmp(argv[i], "--threads") == 0 && i + 1 < argc)
            g_threads = std::atoi(argv[++i]);
    }
    fs::create_directories(g_out);

    const std::vector<Criterion> criteria{
        {1, "Table-1 golden choice probabilities", criterion1},
        {2, "gradients match central finite differences", criterion2},
        {3, "Monte-Carlo matches quadrature; RMSE shrinks with S", criterion3},
        {4, "constructive approximation of the standard normal cdf", criterion4},
        {5, "error-distribution recovery beats misspecified references", criterion5},
        {6, "corpus-KLD robustness ordering", criterion6},
        {7, "exposure-bias shift ordering and control", criterion7},
        {8, "bias-corrected NLL beats the uncorrected estimator", criterion8},
        {9, "same-seed desk run reproduces reports byte-identically", criterion9},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (only != 0 && c.number != only) continue;
        const auto t0 = std::chrono::steady_clock::now();
        bool ok = false;
        std::string msg;
        try {
            ok = c.run(msg);
        } catch (const std::exception& e) {
            msg = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        std::printf("[%s] criterion %d: %s (%s; %.1fs)\n", ok ? "PASS" : "FAIL",
                    c.number, c.description.c_str(), msg.c_str(), secs);
        std::fflush(stdout);
        failures += ok ? 0 : 1;
    }
    return failures;
}
