#include "app.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "countthin/dispersion.hpp"
#include "countthin/errors.hpp"
#include "countthin/io.hpp"
#include "countthin/simgen.hpp"
#include "countthin/theory.hpp"
#include "countthin/thinning.hpp"
#include "experiments.hpp"

#ifndef COUNTTHIN_VERSION
#define COUNTTHIN_VERSION "unknown"
#endif

namespace countthin::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

/// Exit status of a command that ran to completion.
struct Outcome {
    int code = kSuccess;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& t : split_list(s)) {
        out.push_back(parse_double(t));
    }
    return out;
}

int default_threads() {
    if (const char* env = std::getenv("COUNTTHIN_THREADS")) {
        try {
            return std::stoi(env);
        } catch (const std::exception&) {
            return 0;
        }
    }
    return 0;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw InvalidInput("cannot create output directory '" + dir + "': " + ec.message());
    }
}

std::string in_dir(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

json option_values(const CLI::App* sub) {
    json params = json::object();
    for (const CLI::Option* opt : sub->get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name.empty()) {
            continue;
        }
        if (opt->count() > 0) {
            const auto& res = opt->results();
            if (opt->get_type_size() == 0) {
                params[name] = true;
            } else if (res.size() == 1) {
                params[name] = res.front();
            } else {
                params[name] = res;
            }
        } else if (opt->get_type_size() == 0) {
            params[name] = false;
        } else {
            params[name] = opt->get_default_str();
        }
    }
    return params;
}

void write_manifest(const std::string& dir, const CLI::App* sub, const std::vector<std::string>& args, int threads) {
    json m;
    m["program"] = "countthin";
    m["version"] = COUNTTHIN_VERSION;
    m["subcommand"] = sub->get_name();
    m["parameters"] = option_values(sub);
    m["threads"] = threads;
    m["argv"] = args;
    std::ofstream out(in_dir(dir, "manifest.json"), std::ios::trunc);
    if (!out) {
        throw InvalidInput("cannot write manifest in '" + dir + "'");
    }
    out << m.dump(2) << '\n';
}

void add_data_options(CLI::App* sub, DataSource& d) {
    sub->add_option("--input", d.input, "Count matrix (.mtx or .csv); simulated data are used when absent");
    sub->add_option_function<std::string>(
        "--format", [&d](const std::string& f) { d.format = parse_matrix_format(f); }, "auto, mtx or csv");
    sub->add_option("--min-cells", d.min_cells, "Drop genes nonzero in fewer cells (input data only)");
    sub->add_flag("--toy", d.toy, "Use the 100 x 2 NB(5, 5) toy design");
    sub->add_option("--n", d.n, "Simulated cells");
    sub->add_option("--p", d.p, "Simulated genes");
    sub->add_option("--k-star", d.k_star, "True number of clusters");
    sub->add_option("--beta-star", d.beta_star, "Log fold change of differential blocks");
    sub->add_option("--tau", d.tau, "Overdispersion level, b_j = mean_j / tau");
    sub->add_option("--reps", d.reps, "Replications");
}

void print_summary(std::ostream& out, const Table& t) {
    t.write(out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Negative binomial count splitting and cross-validation", "countthin"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();
    int threads = default_threads();
    app.add_option("--threads", threads, "Worker threads (0: OpenMP default; env COUNTTHIN_THREADS)");

    std::function<Outcome()> action;
    std::string out_dir;
    bool writes_manifest = false;

    // thin
    auto* thin = app.add_subcommand("thin", "Split a count matrix into folds");
    std::string thin_input, thin_format = "auto", thin_eps, thin_disp = "estimate";
    std::size_t thin_folds = 2, thin_min_cells = 0;
    std::uint64_t thin_seed = 1;
    thin->add_option("--input", thin_input, "Count matrix (.mtx or .csv)")->required();
    thin->add_option("--format", thin_format, "auto, mtx or csv");
    thin->add_option("--folds", thin_folds, "Number of folds M");
    thin->add_option("--eps", thin_eps, "Comma-separated fold weights (default equal)");
    thin->add_option("--dispersion", thin_disp, "inf, estimate, file:<path> or a number");
    thin->add_option("--min-cells", thin_min_cells, "Drop genes nonzero in fewer cells");
    thin->add_option("--seed", thin_seed, "Random seed");
    thin->add_option("--out", out_dir, "Output directory")->required();
    thin->callback([&] {
        writes_manifest = true;
        action = [&]() -> Outcome {
            const MatrixFormat fmt = resolve_format(thin_input, parse_matrix_format(thin_format));
            DataSource src;
            src.input = thin_input;
            src.format = fmt;
            src.min_cells = thin_min_cells;
            const DataProvider provider(src);
            const Replicate data = provider.get(0, thin_seed);
            ThinPlan plan = ThinPlan::equal(thin_folds);
            if (!thin_eps.empty()) {
                plan.eps = parse_double_list(thin_eps);
            }
            const DispersionSource disp = DispersionSource::parse(thin_disp);
            if (disp.kind == DispersionSource::Kind::Known || disp.kind == DispersionSource::Kind::Auto) {
                throw InvalidParameter("thin: --dispersion must be inf, estimate, file:<path> or a number");
            }
            plan.b_prime = resolve_b_prime(disp, data);
            const FoldSet folds = nb_count_split(data.counts, plan, derive_seed(thin_seed, "thin"));

            ensure_dir(out_dir);
            const std::string ext = fmt == MatrixFormat::MatrixMarket ? ".mtx" : ".csv";
            for (std::size_t m = 0; m < folds.size(); ++m) {
                write_matrix(in_dir(out_dir, "fold_" + std::to_string(m + 1) + ext), folds[m], fmt);
            }
            write_dispersion_file(in_dir(out_dir, "b_prime.tsv"), {data.gene_ids, plan.b_prime});

            // Per-gene fold-1 vs complement diagnostics against the closed-form moments.
            const std::size_t n = data.counts.rows();
            const std::size_t p = data.counts.cols();
            std::vector<double> sx(p), sxx(p), sf(p), sff(p), sc(p), scc(p), sfc(p);
            data.counts.for_each_nonzero([&](std::size_t i, std::size_t j, Count x) {
                const double f = folds[0].at(i, j);
                const double c = static_cast<double>(x) - f;
                sx[j] += x;
                sxx[j] += static_cast<double>(x) * x;
                sf[j] += f;
                sff[j] += f * f;
                sc[j] += c;
                scc[j] += c * c;
                sfc[j] += f * c;
            });
            Table diag({"gene", "b_prime", "mean", "b_moment", "emp_corr", "pred_mean", "pred_var", "pred_cov",
                        "pred_corr"});
            const double nn = static_cast<double>(n);
            const double nan = std::nan("");
            for (std::size_t j = 0; j < p; ++j) {
                const double mean = sx[j] / nn;
                const double var = n > 1 ? (sxx[j] - nn * mean * mean) / (nn - 1.0) : nan;
                const double b_mom = var > mean ? mean * mean / (var - mean) : kInfinity;
                const double cov_fc = sfc[j] / nn - (sf[j] / nn) * (sc[j] / nn);
                const double var_f = sff[j] / nn - (sf[j] / nn) * (sf[j] / nn);
                const double var_c = scc[j] / nn - (sc[j] / nn) * (sc[j] / nn);
                const double corr = var_f > 0 && var_c > 0 ? cov_fc / std::sqrt(var_f * var_c) : nan;
                const double bp = plan.b_prime_for(j);
                if (mean > 0.0) {
                    const ThinningMoments tm = thinning_moments(mean, b_mom, bp, plan.eps[0]);
                    diag.add(data.gene_ids[j], bp, mean, b_mom, corr, tm.mean, tm.variance, tm.covariance,
                             tm.correlation);
                } else {
                    diag.add(data.gene_ids[j], bp, mean, b_mom, corr, nan, nan, nan, nan);
                }
            }
            diag.write_file(in_dir(out_dir, "diagnostics.tsv"));
            out << "wrote " << folds.size() << " folds of " << n << " x " << p << " to " << out_dir << '\n';
            return {};
        };
    });

    // theory
    auto* theory = app.add_subcommand("theory", "Closed-form fold moments and Fisher information");
    std::string th_mu = "25", th_b = "8", th_bp = "inf";
    double th_eps = 0.5;
    theory->add_option("--mu", th_mu, "NB mean");
    theory->add_option("--b", th_b, "NB overdispersion (inf for Poisson)");
    theory->add_option("--b-prime", th_bp, "Thinning overdispersion (inf for multinomial)");
    theory->add_option("--eps", th_eps, "Fold weight");
    theory->add_option("--out", out_dir, "Optional output directory for theory.tsv and a manifest");
    theory->callback([&] {
        writes_manifest = !out_dir.empty();
        action = [&]() -> Outcome {
            const double mu = parse_double(th_mu);
            const double b = parse_double(th_b);
            const double bp = parse_double(th_bp);
            const ThinningMoments tm = thinning_moments(mu, b, bp, th_eps);
            const double info = fisher_information_nb(mu, b);
            Table t({"quantity", "value"});
            t.add("fold_mean", tm.mean);
            t.add("fold_variance", tm.variance);
            t.add("complement_variance", tm.complement_variance);
            t.add("covariance", tm.covariance);
            t.add("correlation", tm.correlation);
            t.add("fisher_information_total", info);
            if (bp == b) {
                t.add("fisher_information_fold", fold_information(mu, b, th_eps));
                t.add("fisher_information_complement", fold_information(mu, b, 1.0 - th_eps));
            }
            t.write(out);
            if (!out_dir.empty()) {
                ensure_dir(out_dir);
                t.write_file(in_dir(out_dir, "theory.tsv"));
            }
            return {};
        };
    });

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Simulate a latent-cluster count matrix with its truth");
    DataSource sim_src;
    std::string sim_format = "csv";
    std::uint64_t sim_seed = 1;
    simulate->add_option("--n", sim_src.n, "Cells");
    simulate->add_option("--p", sim_src.p, "Genes");
    simulate->add_option("--k-star", sim_src.k_star, "True number of clusters");
    simulate->add_option("--beta-star", sim_src.beta_star, "Log fold change of differential blocks");
    simulate->add_option("--tau", sim_src.tau, "Overdispersion level");
    simulate->add_flag("--toy", sim_src.toy, "Write the 100 x 2 NB(5, 5) toy matrix instead");
    simulate->add_option("--format", sim_format, "csv or mtx");
    simulate->add_option("--seed", sim_seed, "Random seed");
    simulate->add_option("--out", out_dir, "Output directory")->required();
    simulate->callback([&] {
        writes_manifest = true;
        action = [&]() -> Outcome {
            const MatrixFormat fmt = parse_matrix_format(sim_format);
            if (fmt == MatrixFormat::Auto) {
                throw InvalidParameter("simulate: --format must be csv or mtx");
            }
            const std::string ext = fmt == MatrixFormat::MatrixMarket ? ".mtx" : ".csv";
            ensure_dir(out_dir);
            if (sim_src.toy) {
                write_matrix(in_dir(out_dir, "counts" + ext), generate_toy(derive_seed(sim_seed, "simulate")), fmt);
            } else {
                SimDataset d = generate_dataset(sim_src.n, sim_src.p, sim_src.k_star, sim_src.beta_star, sim_src.tau,
                                                derive_seed(sim_seed, "simulate"));
                if (fmt == MatrixFormat::MatrixMarket) {
                    d.counts = d.counts.to_sparse();
                }
                write_matrix(in_dir(out_dir, "counts" + ext), d.counts, fmt);
                std::ofstream t(in_dir(out_dir, "truth.txt"), std::ios::trunc);
                write_truth(t, d.truth, sim_seed);
            }
            out << "wrote simulated data to " << out_dir << '\n';
            return {};
        };
    });

    // select-k
    auto* selk = app.add_subcommand("select-k", "Choose K by held-out error after a two-fold split");
    SelectKConfig sk;
    std::string sk_methods = "naive,nbcs,pcs";
    add_data_options(selk, sk.data);
    selk->add_option("--methods", sk_methods, "Comma list of naive, nbcs, pcs, sample-split");
    selk->add_option("--eps", sk.eps, "Training fold weight");
    selk->add_option("--k-max", sk.k_max, "Largest K");
    selk->add_option("--dispersion", sk.dispersion, "b' source: auto, known, estimate, inf, file:<path>, number");
    selk->add_option("--seed", sk.seed, "Random seed");
    selk->add_option("--out", out_dir, "Output directory")->required();
    selk->callback([&] {
        writes_manifest = true;
        action = [&]() -> Outcome {
            sk.methods = split_list(sk_methods);
            const ResultTables t = run_select_k(sk);
            ensure_dir(out_dir);
            t.detail.write_file(in_dir(out_dir, "results.tsv"));
            t.summary.write_file(in_dir(out_dir, "summary.tsv"));
            print_summary(out, t.summary);
            return {};
        };
    });

    // nbcv
    auto* nbcv = app.add_subcommand("nbcv", "Choose K by M-fold count-splitting cross-validation");
    NbcvConfig cvk;
    std::string cvk_methods = "nbcv,pcv";
    add_data_options(nbcv, cvk.data);
    nbcv->add_option("--methods", cvk_methods, "Comma list of nbcv, pcv");
    nbcv->add_option("--folds", cvk.folds, "Number of folds M");
    nbcv->add_option("--k-max", cvk.k_max, "Largest K");
    nbcv->add_option("--dispersion", cvk.dispersion, "b' source: auto, known, estimate, inf, file:<path>, number");
    nbcv->add_option("--seed", cvk.seed, "Random seed");
    nbcv->add_option("--out", out_dir, "Output directory")->required();
    nbcv->callback([&] {
        writes_manifest = true;
        action = [&]() -> Outcome {
            cvk.methods = split_list(cvk_methods);
            const ResultTables t = run_nbcv(cvk);
            ensure_dir(out_dir);
            t.detail.write_file(in_dir(out_dir, "results.tsv"));
            t.summary.write_file(in_dir(out_dir, "summary.tsv"));
            print_summary(out, t.summary);
            return {};
        };
    });

    // de
    auto* de = app.add_subcommand("de", "Differential expression between two estimated clusters");
    DeConfig dc;
    std::string dc_methods = "naive,nbcs,pcs";
    add_data_options(de, dc.data);
    de->add_option("--methods", dc_methods, "Comma list of naive, nbcs, pcs, sample-split");
    de->add_option("--eps", dc.eps, "Training fold weight");
    de->add_option("--dispersion", dc.dispersion, "b' source: auto, known, estimate, inf, file:<path>, number");
    de->add_option("--seed", dc.seed, "Random seed");
    de->add_option("--out", out_dir, "Output directory")->required();
    de->callback([&] {
        writes_manifest = true;
        action = [&]() -> Outcome {
            dc.methods = split_list(dc_methods);
            const ResultTables t = run_de(dc);
            ensure_dir(out_dir);
            t.detail.write_file(in_dir(out_dir, "pvalues.tsv"));
            t.summary.write_file(in_dir(out_dir, "summary.tsv"));
            print_summary(out, t.summary);
            return {};
        };
    });

    // cv
    auto* cv = app.add_subcommand("cv", "Cluster reproducibility: cluster-then-classify vs split-and-compare");
    CvConfig cc;
    std::string cc_methods = "naive,split";
    add_data_options(cv, cc.data);
    cv->add_option("--methods", cc_methods, "Comma list of naive, split");
    cv->add_option("--k", cc.k, "Number of clusters");
    cv->add_option("--n-folds", cc.n_folds, "Folds of the classifier cross-validation (naive)");
    cv->add_option("--dispersion", cc.dispersion, "b' source: auto, known, estimate, inf, file:<path>, number");
    cv->add_option("--seed", cc.seed, "Random seed");
    cv->add_option("--out", out_dir, "Output directory")->required();
    cv->callback([&] {
        writes_manifest = true;
        action = [&]() -> Outcome {
            cc.methods = split_list(cc_methods);
            const ResultTables t = run_cv(cc);
            ensure_dir(out_dir);
            t.detail.write_file(in_dir(out_dir, "confusion.tsv"));
            t.summary.write_file(in_dir(out_dir, "summary.tsv"));
            print_summary(out, t.summary);
            return {};
        };
    });

    // estimate-dispersion
    auto* est = app.add_subcommand("estimate-dispersion", "Smoothed per-gene NB overdispersion");
    std::string est_input, est_format = "auto";
    std::size_t est_min_cells = 0;
    double est_bw = 1.0;
    est->add_option("--input", est_input, "Count matrix (.mtx or .csv)")->required();
    est->add_option("--format", est_format, "auto, mtx or csv");
    est->add_option("--min-cells", est_min_cells, "Drop genes nonzero in fewer cells");
    est->add_option("--bandwidth-scale", est_bw, "Multiplier on the Silverman bandwidth");
    est->add_option("--out", out_dir, "Output directory")->required();
    est->callback([&] {
        writes_manifest = true;
        action = [&]() -> Outcome {
            DataSource src;
            src.input = est_input;
            src.format = parse_matrix_format(est_format);
            src.min_cells = est_min_cells;
            const Replicate data = DataProvider(src).get(0, 0);
            DispersionOptions opt;
            opt.bandwidth_scale = est_bw;
            const DispersionEstimate e = estimate_dispersions(data.counts, opt);
            ensure_dir(out_dir);
            write_dispersion_file(in_dir(out_dir, "dispersion.tsv"), {data.gene_ids, e.b_hat});
            Table t({"gene", "mean", "b_mle", "b_hat", "mle_diverged", "all_zero"});
            for (std::size_t j = 0; j < e.b_hat.size(); ++j) {
                t.add(data.gene_ids[j], e.mean_expr[j], e.b_mle[j], e.b_hat[j], e.mle_diverged[j] != 0,
                      e.all_zero[j] != 0);
            }
            t.write_file(in_dir(out_dir, "dispersion_details.tsv"));
            out << "bandwidth\t" << format_double(e.bandwidth) << '\n';
            if (e.smoothing_infeasible) {
                err << "warning: fewer than 5 finite estimates; dispersion.tsv holds unsmoothed values\n";
            }
            return {};
        };
    });

    // check
    auto* check = app.add_subcommand("check", "Verify that fold files add up to the original matrix");
    std::string chk_original, chk_format = "auto";
    std::vector<std::string> chk_folds;
    check->add_option("--original", chk_original, "Original matrix")->required();
    check->add_option("--folds", chk_folds, "Fold matrices")->required()->expected(1, -1);
    check->add_option("--format", chk_format, "auto, mtx or csv");
    check->callback([&] {
        action = [&]() -> Outcome {
            const MatrixFormat fmt = parse_matrix_format(chk_format);
            const CountMatrix x = read_matrix(chk_original, fmt);
            bool ok = true;
            std::vector<CountMatrix> folds;
            for (const auto& f : chk_folds) {
                folds.push_back(read_matrix(f, fmt));
                if (folds.back().rows() != x.rows() || folds.back().cols() != x.cols()) {
                    out << "shape\tFAIL\t" << f << " is " << folds.back().rows() << " x " << folds.back().cols()
                        << ", expected " << x.rows() << " x " << x.cols() << '\n';
                    ok = false;
                }
            }
            if (!ok) {
                return {kCheckFailed};
            }
            out << "shape\tPASS\n";
            std::vector<std::uint64_t> sum(x.rows() * x.cols(), 0);
            for (const auto& f : folds) {
                f.for_each_nonzero([&](std::size_t i, std::size_t j, Count v) { sum[i * x.cols() + j] += v; });
            }
            std::size_t mismatches = 0;
            std::vector<std::uint64_t> orig(sum.size(), 0);
            x.for_each_nonzero([&](std::size_t i, std::size_t j, Count v) { orig[i * x.cols() + j] = v; });
            for (std::size_t e = 0; e < sum.size(); ++e) {
                mismatches += sum[e] != orig[e];
            }
            if (mismatches > 0) {
                out << "additivity\tFAIL\t" << mismatches << " entries differ\n";
                return {kCheckFailed};
            }
            out << "additivity\tPASS\n";
            return {};
        };
    });

    // replay
    auto* replay = app.add_subcommand("replay", "Rerun the command recorded in a manifest");
    std::string manifest_path, replay_out;
    replay->add_option("manifest", manifest_path, "manifest.json")->required();
    replay->add_option("--out", replay_out, "Write into this directory instead of the recorded one");
    replay->callback([&] {
        action = [&]() -> Outcome {
            std::ifstream in(manifest_path);
            if (!in) {
                throw InvalidInput("cannot open manifest '" + manifest_path + "'");
            }
            json m;
            try {
                m = json::parse(in);
            } catch (const json::exception& e) {
                throw InvalidInput("manifest '" + manifest_path + "': " + e.what());
            }
            std::vector<std::string> argv = m.at("argv").get<std::vector<std::string>>();
            if (!replay_out.empty()) {
                for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
                    if (argv[i] == "--out") {
                        argv[i + 1] = replay_out;
                    } else if (argv[i].rfind("--out=", 0) == 0) {
                        argv[i] = "--out=" + replay_out;
                    }
                }
                if (!argv.empty() && argv.back().rfind("--out=", 0) == 0) {
                    argv.back() = "--out=" + replay_out;
                }
            }
            return {run(argv, out, err)};
        };
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsageError;
    }

    if (threads > 0) {
        omp_set_num_threads(threads);
    }
    try {
        const Outcome o = action();
        if (writes_manifest && o.code == kSuccess) {
            write_manifest(out_dir, app.get_subcommands().front(), args, threads);
        }
        return o.code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }
}

}  // namespace countthin::cli
