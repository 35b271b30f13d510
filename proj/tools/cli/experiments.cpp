#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>

#include "countthin/dispersion.hpp"
#include "countthin/errors.hpp"
#include "countthin/evaluation.hpp"
#include "countthin/rng.hpp"
#include "countthin/simgen.hpp"
#include "countthin/thinning.hpp"

namespace countthin::cli {

namespace {

template <typename F>
void for_each_rep(std::size_t reps, F&& f) {
    std::exception_ptr error;
    const auto count = static_cast<std::int64_t>(reps);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t r = 0; r < count; ++r) {
        try {
            f(static_cast<std::size_t>(r));
        } catch (...) {
#pragma omp critical(countthin_cli_error)
            if (!error) {
                error = std::current_exception();
            }
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

void require_method(const std::string& m, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed) {
        if (m == a) {
            return;
        }
    }
    std::string list;
    for (const char* a : allowed) {
        list += (list.empty() ? "" : ", ") + std::string(a);
    }
    throw InvalidParameter("unknown method '" + m + "' (expected one of " + list + ")");
}

std::vector<double> min_max_scaled(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    std::vector<double> out(v.size(), 0.0);
    if (*hi > *lo) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            out[i] = (v[i] - *lo) / (*hi - *lo);
        }
    }
    return out;
}

struct MethodSelection {
    std::string method;
    KSelectionResult result;
};

ResultTables selection_tables(const std::vector<std::vector<MethodSelection>>& per_rep,
                              const std::vector<std::string>& methods) {
    ResultTables t{Table({"rep", "method", "k", "mse", "mse_scaled", "selected", "k_selected"}),
                   Table({"method", "k", "reps", "mean_mse", "mean_mse_scaled", "selection_rate"})};
    struct Acc {
        std::vector<double> mse, scaled, chosen;
    };
    std::map<std::string, Acc> acc;
    for (std::size_t r = 0; r < per_rep.size(); ++r) {
        for (const auto& ms : per_rep[r]) {
            const auto& res = ms.result;
            const auto scaled = min_max_scaled(res.mse_by_k);
            Acc& a = acc[ms.method];
            a.mse.resize(res.mse_by_k.size(), 0.0);
            a.scaled.resize(res.mse_by_k.size(), 0.0);
            a.chosen.resize(res.mse_by_k.size(), 0.0);
            for (std::size_t k = 0; k < res.mse_by_k.size(); ++k) {
                const bool sel = res.k_selected == k + 1;
                t.detail.add(r + 1, ms.method, k + 1, res.mse_by_k[k], scaled[k], sel, res.k_selected);
                a.mse[k] += res.mse_by_k[k];
                a.scaled[k] += scaled[k];
                a.chosen[k] += sel;
            }
        }
    }
    const auto reps = static_cast<double>(per_rep.size());
    for (const auto& m : methods) {
        const Acc& a = acc[m];
        for (std::size_t k = 0; k < a.mse.size(); ++k) {
            t.summary.add(m, k + 1, per_rep.size(), a.mse[k] / reps, a.scaled[k] / reps, a.chosen[k] / reps);
        }
    }
    return t;
}

ThinPlan two_fold_plan(double eps, std::vector<double> b_prime) {
    ThinPlan plan;
    plan.eps = {eps, 1.0 - eps};
    plan.b_prime = std::move(b_prime);
    return plan;
}

}  // namespace

DispersionSource DispersionSource::parse(const std::string& text) {
    DispersionSource s;
    if (text == "auto") {
        s.kind = Kind::Auto;
    } else if (text == "known") {
        s.kind = Kind::Known;
    } else if (text == "estimate") {
        s.kind = Kind::Estimate;
    } else if (text.rfind("file:", 0) == 0) {
        s.kind = Kind::File;
        s.path = text.substr(5);
        if (s.path.empty()) {
            throw InvalidParameter("dispersion source 'file:' needs a path");
        }
    } else {
        double v = 0.0;
        try {
            v = parse_double(text);
        } catch (const InvalidInput&) {
            throw InvalidParameter("dispersion source must be auto, known, estimate, inf, file:<path> or a number; got '" +
                                   text + "'");
        }
        if (!(v > 0.0)) {
            throw InvalidParameter("dispersion value must be positive");
        }
        s.kind = std::isinf(v) ? Kind::Infinite : Kind::Value;
        s.value = v;
    }
    return s;
}

std::string DispersionSource::describe() const {
    switch (kind) {
        case Kind::Auto: return "auto";
        case Kind::Known: return "known";
        case Kind::Estimate: return "estimate";
        case Kind::Infinite: return "inf";
        case Kind::File: return "file:" + path;
        case Kind::Value: return format_double(value);
    }
    return "?";
}

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t rep) {
    return derive_seed(seed, static_cast<std::uint64_t>(rep));
}

DataProvider::DataProvider(DataSource source) : source_(std::move(source)) {
    if (source_.reps == 0) {
        throw InvalidParameter("--reps must be at least 1");
    }
    if (!source_.input.empty()) {
        Replicate r;
        CountMatrix raw = read_matrix(source_.input, source_.format);
        r.original_p = raw.cols();
        const auto ids = gene_ids(raw);
        if (source_.min_cells > 0) {
            r.counts = filter_genes(raw, source_.min_cells, r.kept);
        } else {
            r.counts = std::move(raw);
            r.kept.resize(r.original_p);
            for (std::size_t j = 0; j < r.original_p; ++j) {
                r.kept[j] = j;
            }
        }
        for (std::size_t j : r.kept) {
            r.gene_ids.push_back(ids[j]);
        }
        fixed_ = std::move(r);
    }
}

Replicate DataProvider::get(std::size_t rep, std::uint64_t seed) const {
    if (fixed_) {
        return *fixed_;
    }
    const std::uint64_t data_seed = derive_seed(replicate_seed(seed, rep), "data");
    Replicate r;
    if (source_.toy) {
        r.counts = generate_toy(data_seed);
        r.known_b.assign(2, 5.0);
        r.is_de.assign(2, 0);
        r.k_star = 1;
    } else {
        SimDataset d = generate_dataset(source_.n, source_.p, source_.k_star, source_.beta_star, source_.tau, data_seed);
        r.counts = std::move(d.counts);
        r.known_b = d.truth.b;
        r.is_de.assign(source_.p, 0);
        for (std::size_t j : d.truth.de_genes) {
            r.is_de[j] = 1;
        }
        r.k_star = source_.k_star;
    }
    r.gene_ids = gene_ids(r.counts);
    r.original_p = r.counts.cols();
    r.kept.resize(r.original_p);
    for (std::size_t j = 0; j < r.original_p; ++j) {
        r.kept[j] = j;
    }
    return r;
}

std::vector<double> resolve_b_prime(const DispersionSource& src, const Replicate& data) {
    const std::size_t p = data.counts.cols();
    DispersionSource::Kind kind = src.kind;
    if (kind == DispersionSource::Kind::Auto) {
        kind = data.known_b.empty() ? DispersionSource::Kind::Estimate : DispersionSource::Kind::Known;
    }
    switch (kind) {
        case DispersionSource::Kind::Known:
            if (data.known_b.empty()) {
                throw InvalidParameter("dispersion 'known' needs simulated data");
            }
            return data.known_b;
        case DispersionSource::Kind::Estimate:
            return estimate_dispersions(data.counts).b_hat;
        case DispersionSource::Kind::Infinite:
            return std::vector<double>(p, kInfinity);
        case DispersionSource::Kind::Value:
            return std::vector<double>(p, src.value);
        case DispersionSource::Kind::File: {
            const DispersionTable t = read_dispersion_file(src.path);
            if (t.b.size() == p) {
                return t.b;
            }
            if (t.b.size() == data.original_p) {
                std::vector<double> out;
                for (std::size_t j : data.kept) {
                    out.push_back(t.b[j]);
                }
                return out;
            }
            throw InvalidInput(src.path + ": dispersion file lists " + std::to_string(t.b.size()) +
                               " genes, the matrix has " + std::to_string(p));
        }
        case DispersionSource::Kind::Auto:
            break;
    }
    throw InvalidParameter("unresolved dispersion source");
}

ResultTables run_select_k(const SelectKConfig& config) {
    for (const auto& m : config.methods) {
        require_method(m, {"naive", "nbcs", "pcs", "sample-split"});
    }
    const DataProvider provider(config.data);
    const DispersionSource disp = DispersionSource::parse(config.dispersion);
    SelectOptions opt;
    opt.k_max = config.k_max;
    std::vector<std::vector<MethodSelection>> per_rep(config.data.reps);
    for_each_rep(config.data.reps, [&](std::size_t r) {
        const std::uint64_t rs = replicate_seed(config.seed, r);
        const Replicate data = provider.get(r, config.seed);
        for (const auto& m : config.methods) {
            const std::uint64_t ms = derive_seed(rs, m);
            KSelectionResult res;
            if (m == "naive") {
                res = select_k(data.counts, data.counts, 0.5, ms, opt);
            } else if (m == "sample-split") {
                res = sample_split_select_k(data.counts, ms, opt);
            } else {
                std::vector<double> bp = m == "pcs" ? std::vector<double>{kInfinity} : resolve_b_prime(disp, data);
                const FoldSet fs = nb_count_split(data.counts, two_fold_plan(config.eps, std::move(bp)),
                                                  derive_seed(ms, "split"));
                res = select_k(fs[0], fs[1], config.eps, derive_seed(ms, "select"), opt);
            }
            per_rep[r].push_back({m, std::move(res)});
        }
    });
    return selection_tables(per_rep, config.methods);
}

ResultTables run_nbcv(const NbcvConfig& config) {
    for (const auto& m : config.methods) {
        require_method(m, {"nbcv", "pcv"});
    }
    const DataProvider provider(config.data);
    const DispersionSource disp = DispersionSource::parse(config.dispersion);
    SelectOptions opt;
    opt.k_max = config.k_max;
    std::vector<std::vector<MethodSelection>> per_rep(config.data.reps);
    for_each_rep(config.data.reps, [&](std::size_t r) {
        const std::uint64_t rs = replicate_seed(config.seed, r);
        const Replicate data = provider.get(r, config.seed);
        for (const auto& m : config.methods) {
            std::vector<double> bp = m == "pcv" ? std::vector<double>{kInfinity} : resolve_b_prime(disp, data);
            per_rep[r].push_back(
                {m, nbcv_select_k(data.counts, config.folds, std::move(bp), derive_seed(rs, m), opt)});
        }
    });
    return selection_tables(per_rep, config.methods);
}

ResultTables run_de(const DeConfig& config) {
    for (const auto& m : config.methods) {
        require_method(m, {"naive", "nbcs", "pcs", "sample-split"});
    }
    const DataProvider provider(config.data);
    const DispersionSource disp = DispersionSource::parse(config.dispersion);
    struct RepDe {
        std::vector<std::string> methods;
        std::vector<DeResult> results;
        Replicate data;
    };
    std::vector<RepDe> per_rep(config.data.reps);
    for_each_rep(config.data.reps, [&](std::size_t r) {
        const std::uint64_t rs = replicate_seed(config.seed, r);
        RepDe& out = per_rep[r];
        out.data = provider.get(r, config.seed);
        for (const auto& m : config.methods) {
            const std::uint64_t ms = derive_seed(rs, m);
            DeResult res;
            if (m == "naive") {
                res = de_test(out.data.counts, out.data.counts, ms);
            } else if (m == "sample-split") {
                res = sample_split_de(out.data.counts, ms);
            } else {
                std::vector<double> bp = m == "pcs" ? std::vector<double>{kInfinity} : resolve_b_prime(disp, out.data);
                const FoldSet fs = nb_count_split(out.data.counts, two_fold_plan(config.eps, std::move(bp)),
                                                  derive_seed(ms, "split"));
                res = de_test(fs[0], fs[1], derive_seed(ms, "cluster"));
            }
            out.methods.push_back(m);
            out.results.push_back(std::move(res));
        }
        out.data.counts = CountMatrix{};
    });

    ResultTables t{Table({"rep", "method", "gene", "de_gene", "p_value", "warning"}),
                   Table({"method", "n_tests", "frac_below_0.05", "ks_statistic", "ks_p_value"})};
    std::map<std::string, std::vector<double>> null_p;
    for (std::size_t r = 0; r < per_rep.size(); ++r) {
        const RepDe& rd = per_rep[r];
        for (std::size_t mi = 0; mi < rd.methods.size(); ++mi) {
            const DeResult& res = rd.results[mi];
            for (std::size_t j = 0; j < res.p_values.size(); ++j) {
                const bool known = !rd.data.is_de.empty();
                const bool de = known && rd.data.is_de[j];
                t.detail.add(r + 1, rd.methods[mi], rd.data.gene_ids[j], known ? (de ? "1" : "0") : "NA",
                             res.p_values[j], res.warning[j] != 0);
                if (!de) {
                    null_p[rd.methods[mi]].push_back(res.p_values[j]);
                }
            }
        }
    }
    for (const auto& m : config.methods) {
        const auto& ps = null_p[m];
        if (ps.empty()) {
            t.summary.add(m, std::size_t{0}, "NA", "NA", "NA");
            continue;
        }
        const double below = static_cast<double>(std::count_if(ps.begin(), ps.end(), [](double v) { return v < 0.05; }));
        const KsResult ks = ks_uniform(ps);
        t.summary.add(m, ps.size(), below / static_cast<double>(ps.size()), ks.statistic, ks.p_value);
    }
    return t;
}

ResultTables run_cv(const CvConfig& config) {
    for (const auto& m : config.methods) {
        require_method(m, {"naive", "split"});
    }
    const DataProvider provider(config.data);
    const DispersionSource disp = DispersionSource::parse(config.dispersion);
    std::vector<std::vector<std::pair<std::string, ConfusionResult>>> per_rep(config.data.reps);
    for_each_rep(config.data.reps, [&](std::size_t r) {
        const std::uint64_t rs = replicate_seed(config.seed, r);
        const Replicate data = provider.get(r, config.seed);
        for (const auto& m : config.methods) {
            const std::uint64_t ms = derive_seed(rs, m);
            if (m == "naive") {
                per_rep[r].emplace_back(m, intradataset_cv_naive(data.counts, config.k, config.n_folds, ms));
            } else {
                per_rep[r].emplace_back(m, intradataset_cv_split(data.counts, config.k, resolve_b_prime(disp, data), ms));
            }
        }
    });

    ResultTables t{Table({"rep", "method", "row", "col", "count"}),
                   Table({"rep", "method", "diagonal_fraction", "ari", "missing_label"})};
    std::map<std::string, std::pair<double, double>> mean;
    for (std::size_t r = 0; r < per_rep.size(); ++r) {
        for (const auto& [m, c] : per_rep[r]) {
            for (std::size_t a = 0; a < c.rows; ++a) {
                for (std::size_t b = 0; b < c.cols; ++b) {
                    t.detail.add(r + 1, m, a + 1, b + 1, c.permuted_at(a, b));
                }
            }
            t.summary.add(std::to_string(r + 1), m, c.diagonal_fraction(), c.ari, c.missing_label);
            mean[m].first += c.diagonal_fraction();
            mean[m].second += c.ari;
        }
    }
    const auto reps = static_cast<double>(per_rep.size());
    for (const auto& m : config.methods) {
        t.summary.add("mean", m, mean[m].first / reps, mean[m].second / reps, "NA");
    }
    return t;
}

}  // namespace countthin::cli
