#include "qdd/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "qdd/baselines.hpp"
#include "qdd/benchmarks.hpp"
#include "qdd/error.hpp"
#include "qdd/gide.hpp"
#include "qdd/parallel.hpp"
#include "qdd/rng.hpp"

namespace qdd {

std::unique_ptr<Problem> make_problem(const ProblemConfig& cfg) {
    if (cfg.type == "separable")
        return std::make_unique<SeparableTableProblem>(make_separable_problem(cfg.m, cfg.K, cfg.d, cfg.seed));
    if (cfg.type == "rbm") {
        RbmBenchmarkOptions opts;
        opts.side = cfg.side;
        opts.hidden = cfg.hidden;
        opts.d = cfg.d;
        opts.training.epochs = cfg.epochs;
        opts.training.learning_rate = cfg.learning_rate;
        opts.training.batch_size = cfg.train_batch;
        opts.training.seed = cfg.seed;
        return std::make_unique<RbmProblem>(make_rbm_benchmark(opts));
    }
    throw ConfigError("key 'type': unknown problem type '" + cfg.type + "'");
}

std::vector<Genotype> load_genotypes(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read genotype file '" + path + "'");
    std::vector<Genotype> out;
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        out.push_back(parse_genotype(line));
    }
    return out;
}

namespace {

Table load_points(const std::string& path, std::size_t d) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read tessellation data file '" + path + "'");
    std::vector<double> values;
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#')
            continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        std::size_t count = 0;
        for (double v; fields >> v; ++count)
            values.push_back(v);
        if (count != d)
            throw IoError("tessellation data file '" + path + "': row " + std::to_string(rows + 1) + " has " +
                          std::to_string(count) + " values, expected " + std::to_string(d));
        ++rows;
    }
    Table t(rows, d);
    std::copy(values.begin(), values.end(), t.flat().begin());
    return t;
}

} // namespace

Tessellation make_tessellation(const Problem& problem, const RunConfig& cfg) {
    const ProblemSpec& spec = problem.spec();
    // Keyed on the problem, not the run seed: every run on a problem shares cells.
    const std::uint64_t seed = derive_seed(cfg.problem.seed, static_cast<std::uint64_t>(Stream::tessellation));
    if (!cfg.tessellation.data_file.empty())
        return build_kmeans_from_data(load_points(cfg.tessellation.data_file, spec.d), cfg.tessellation.cells, seed);
    return build_cvt(spec.descriptor_bounds, cfg.tessellation.cells, cfg.tessellation.effective_samples(), seed);
}

namespace {

std::vector<Evaluation> evaluate_all(const Problem& problem, const std::vector<Genotype>& xs) {
    std::vector<Evaluation> out(xs.size());
    parallel_for(xs.size(), [&](std::size_t i) { out[i] = problem.evaluate(xs[i]); });
    return out;
}

std::vector<GradientBundle> gradients_all(const Problem& problem, std::span<const Genotype> xs) {
    std::vector<GradientBundle> out(xs.size());
    parallel_for(xs.size(), [&](std::size_t i) { out[i] = problem.gradients(xs[i]); });
    return out;
}

Genotype random_genotype(const ProblemSpec& spec, Rng& rng) {
    std::uniform_int_distribution<int> cat(0, static_cast<int>(spec.K) - 1);
    Genotype g;
    g.values.resize(spec.m);
    for (int& v : g.values)
        v = cat(rng);
    return g;
}

Eigen::VectorXd onehot_vector(const Genotype& g, const ProblemSpec& spec) {
    const Table t = onehot_encode(g, spec);
    return Eigen::Map<const Eigen::VectorXd>(t.flat().data(), static_cast<Eigen::Index>(t.size()));
}

} // namespace

std::pair<Repertoire, std::uint64_t> initialize(const Problem& problem, const RunConfig& cfg) {
    const ProblemSpec& spec = problem.spec();
    Repertoire rep(make_tessellation(problem, cfg));

    std::vector<Genotype> init;
    if (!cfg.budget.init_file.empty()) {
        init = load_genotypes(cfg.budget.init_file);
        for (const auto& g : init)
            validate_genotype(g, spec);
    } else {
        Rng rng = make_stream(cfg.budget.seed, Stream::init);
        init.reserve(cfg.budget.init_count);
        for (std::size_t i = 0; i < cfg.budget.init_count; ++i)
            init.push_back(random_genotype(spec, rng));
    }
    const auto evals = evaluate_all(problem, init);
    for (std::size_t i = 0; i < init.size(); ++i)
        rep.try_insert(init[i], evals[i]);
    if (rep.occupied() == 0)
        throw Error("initialisation inserted no solution into the repertoire");
    return {std::move(rep), init.size()};
}

RunResult run(const Problem& problem, const RunConfig& cfg, const ProgressFn& progress) {
    cfg.validate();
    const ProblemSpec& spec = problem.spec();
    auto [rep, init_evals] = initialize(problem, cfg);
    RunResult result{std::move(rep), {}};
    Repertoire& archive = result.repertoire;
    RunMetrics& metrics = result.metrics;
    metrics.initial_evaluations = init_evals;

    const std::uint64_t seed = cfg.budget.seed;
    Rng selection_rng = make_stream(seed, Stream::selection);
    Rng weights_rng = make_stream(seed, Stream::weights);
    Rng emitter_rng = make_stream(seed, Stream::emitter);
    Rng crossover_rng = make_stream(seed, Stream::crossover);

    const std::size_t B = cfg.budget.batch_size;
    const auto n_emit = static_cast<std::size_t>(std::ceil((1.0 - cfg.method.crossover_fraction) * static_cast<double>(B)));
    const std::size_t n_cross = B - std::min(n_emit, B);
    const Method method = cfg.method.method;

    double lowest_fitness = std::numeric_limits<double>::infinity();
    for (std::size_t id : archive.occupied_ids())
        lowest_fitness = std::min(lowest_fitness, archive.cell(id)->fitness);

    const EntropyTarget target = EntropyTarget::from_alpha(cfg.method.alpha, spec.m, spec.K);
    GideOptions gide_opts;
    gide_opts.normalize = cfg.method.normalize_gradients;
    gide_opts.mode = cfg.method.temperature_mode == "per-candidate" ? TemperatureMode::per_candidate
                                                                    : TemperatureMode::shared;

    std::vector<CmaEmitterState> emitters;
    if (method == Method::cma_me_proj) {
        const bool diagonal = spec.m * spec.K > cfg.method.cma_max_full_dim;
        for (std::size_t e = 0; e < cfg.method.n_emitters; ++e) {
            const auto start = archive.sample_cells(1, emitter_rng);
            emitters.push_back(CmaEmitterState::create(onehot_vector(archive.cell(start[0])->genotype, spec),
                                                       cfg.method.sigma0, diagonal));
        }
    }

    std::uint64_t evaluations = init_evals;
    std::uint64_t gradient_evaluations = 0;
    for (std::size_t it = 1; it <= cfg.budget.iterations; ++it) {
        MetricsRow row;
        const auto parent_ids = archive.sample_cells(B, selection_rng);
        std::vector<Genotype> parents;
        parents.reserve(B);
        for (std::size_t id : parent_ids)
            parents.push_back(archive.cell(id)->genotype);
        const auto mates = n_cross ? archive.sample_cells(n_cross, selection_rng) : std::vector<std::size_t>{};

        std::vector<Genotype> candidates;
        candidates.reserve(B);
        const std::span<const Genotype> emit_parents(parents.data(), n_emit);
        std::vector<CmaSample> cma_book;

        switch (method) {
        case Method::me_gide: {
            std::normal_distribution<double> normal(0.0, 1.0);
            std::vector<DirectionWeights> w(n_emit, DirectionWeights{std::vector<double>(spec.d + 1)});
            for (auto& dw : w)
                for (double& v : dw.w)
                    v = normal(weights_rng);
            if (n_emit) {
                const auto grads = gradients_all(problem, emit_parents);
                gradient_evaluations += n_emit;
                GideResult g = gide_emit(emit_parents, grads, w, target, emitter_rng, gide_opts);
                gide_opts.warm_start = g.temperature;
                row.mean_entropy = g.mean_entropy;
                row.temperature = g.temperature;
                row.solver_iterations = g.solver_iterations;
                candidates = std::move(g.mutants);
            }
            break;
        }
        case Method::map_elites:
            for (const auto& p : emit_parents)
                candidates.push_back(random_point_mutation(p, cfg.method.n_flips, spec.K, emitter_rng));
            break;
        case Method::omg_mega_proj: {
            const OmgMegaConfig omg{cfg.method.sigma_g, cfg.method.normalize_gradients};
            std::vector<std::vector<double>> w;
            for (std::size_t n = 0; n < n_emit; ++n)
                w.push_back(draw_omg_weights(spec.d, omg, weights_rng));
            if (n_emit) {
                const auto grads = gradients_all(problem, emit_parents);
                gradient_evaluations += n_emit;
                for (std::size_t n = 0; n < n_emit; ++n)
                    candidates.push_back(omg_mega_step(emit_parents[n], grads[n], w[n], spec, omg.normalize));
            }
            break;
        }
        case Method::cma_me_proj: {
            CmaEmitResult r = cma_me_emit(emitters, n_emit, spec, emitter_rng);
            candidates = std::move(r.genotypes);
            cma_book = std::move(r.bookkeeping);
            break;
        }
        }

        for (std::size_t j = 0; j < n_cross; ++j)
            candidates.push_back(one_point_crossover(parents[n_emit + j], archive.cell(mates[j])->genotype,
                                                     crossover_rng));

        const auto evals = evaluate_all(problem, candidates);
        evaluations += candidates.size();

        std::vector<std::vector<CmaResult>> per_emitter(emitters.size());
        for (std::size_t n = 0; n < candidates.size(); ++n) {
            const InsertOutcome out = archive.try_insert(candidates[n], evals[n]);
            if (out.numeric_warning)
                ++metrics.nonfinite_rejections;
            else
                lowest_fitness = std::min(lowest_fitness, evals[n].fitness);
            if (n < cma_book.size()) {
                CmaResult r;
                r.sample = std::move(cma_book[n].sample);
                r.status = out.status;
                r.improvement = out.numeric_warning ? -std::numeric_limits<double>::infinity()
                                : out.previous_fitness ? evals[n].fitness - *out.previous_fitness
                                                       : evals[n].fitness;
                per_emitter[cma_book[n].emitter].push_back(std::move(r));
            }
        }
        for (std::size_t e = 0; e < emitters.size(); ++e)
            cma_me_update(emitters[e], per_emitter[e], archive, spec, emitter_rng);

        row.iteration = it;
        row.evaluations = evaluations;
        row.gradient_evaluations = gradient_evaluations;
        row.qd_score = archive.qd_score();
        row.coverage = archive.coverage();
        row.max_fitness = archive.max_fitness().value_or(0.0);
        row.qd_score_offset = row.qd_score - static_cast<double>(archive.occupied()) * lowest_fitness;
        metrics.rows.push_back(row);
        if (progress)
            progress(row);
    }
    return result;
}

std::uint64_t sweep_seed(std::uint64_t base_seed, std::size_t seed_index) {
    return seed_index == 0 ? base_seed : derive_seed(base_seed, seed_index);
}

std::vector<SweepRow> sweep(const RunConfig& base, const std::vector<GridAxis>& grid, std::size_t seeds,
                            const RunSink& sink) {
    if (seeds < 1)
        throw ConfigError("sweep: need at least one seed");
    std::size_t points = 1;
    for (const auto& axis : grid) {
        if (axis.values.empty())
            throw ConfigError("sweep: grid key '" + axis.key + "' has no values");
        points *= axis.values.size();
    }

    std::vector<SweepRow> rows;
    for (std::size_t p = 0; p < points; ++p) {
        RunConfig point_cfg = base;
        std::vector<std::pair<std::string, std::string>> assignment;
        std::size_t rest = p;
        // First axis outermost: decode p in mixed radix, last axis fastest.
        std::vector<std::size_t> digits(grid.size());
        for (std::size_t a = grid.size(); a-- > 0;) {
            digits[a] = rest % grid[a].values.size();
            rest /= grid[a].values.size();
        }
        for (std::size_t a = 0; a < grid.size(); ++a) {
            set_config_value(point_cfg, grid[a].key, grid[a].values[digits[a]]);
            assignment.emplace_back(grid[a].key, grid[a].values[digits[a]]);
        }

        for (std::size_t s = 0; s < seeds; ++s) {
            SweepRow row;
            row.run_index = rows.size();
            row.point_index = p;
            row.seed_index = s;
            row.run_seed = sweep_seed(base.budget.seed, s);
            row.assignment = assignment;
            row.config = point_cfg;
            row.config.budget.seed = row.run_seed;
            try {
                row.config.validate();
                const auto problem = make_problem(row.config.problem);
                RunResult r = run(*problem, row.config);
                if (!r.metrics.rows.empty())
                    row.final_row = r.metrics.rows.back();
                row.final_qd_score = r.repertoire.qd_score();
                row.final_coverage = r.repertoire.coverage();
                if (sink)
                    sink(row, r);
            } catch (const std::exception& e) {
                row.error = e.what();
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

} // namespace qdd
