#include "qdd/output.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "qdd/error.hpp"

namespace qdd {

namespace fs = std::filesystem;

namespace {

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw IoError("cannot write '" + p.string() + "'");
    return out;
}

void finish(std::ofstream& out, const fs::path& p) {
    out.flush();
    if (!out)
        throw IoError("failed while writing '" + p.string() + "'");
}

} // namespace

void write_metrics_csv(std::ostream& os, const RunMetrics& metrics) {
    os << "iteration,evaluations,gradient_evaluations,qd_score,qd_score_offset,coverage,max_fitness,"
          "mean_entropy,temperature,solver_iterations\n";
    for (const auto& r : metrics.rows) {
        os << r.iteration << ',' << r.evaluations << ',' << r.gradient_evaluations << ',' << format_real(r.qd_score)
           << ',' << format_real(r.qd_score_offset) << ',' << format_real(r.coverage) << ','
           << format_real(r.max_fitness) << ',' << opt_real(r.mean_entropy) << ',' << opt_real(r.temperature) << ','
           << (r.solver_iterations ? std::to_string(*r.solver_iterations) : std::string()) << '\n';
    }
}

void write_repertoire_csv(std::ostream& os, const Repertoire& repertoire) {
    const std::size_t d = repertoire.tessellation().dims();
    os << "cell_id";
    for (std::size_t k = 0; k < d; ++k)
        os << ",centroid_" << k;
    os << ",occupied,fitness";
    for (std::size_t k = 0; k < d; ++k)
        os << ",descriptor_" << k;
    os << ",genotype\n";
    const Table& c = repertoire.tessellation().centroids();
    for (std::size_t id = 0; id < repertoire.size(); ++id) {
        os << id;
        for (std::size_t k = 0; k < d; ++k)
            os << ',' << format_real(c(id, k));
        const auto& cell = repertoire.cell(id);
        if (cell) {
            os << ",1," << format_real(cell->fitness);
            for (double v : cell->descriptor)
                os << ',' << format_real(v);
            os << ",\"" << format_genotype(cell->genotype) << "\"\n";
        } else {
            os << ",0,";
            for (std::size_t k = 0; k < d; ++k)
                os << ',';
            os << ",\n";
        }
    }
}

void write_qd_svg(std::ostream& os, const RunMetrics& metrics) {
    constexpr double W = 640, H = 400, L = 60, R = 20, T = 20, Bm = 50;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n"
       << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n"
       << "<line x1=\"" << L << "\" y1=\"" << H - Bm << "\" x2=\"" << W - R << "\" y2=\"" << H - Bm
       << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - Bm << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\" font-size=\"12\">"
       << "evaluations</text>\n"
       << "<text x=\"15\" y=\"" << (T + H - Bm) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 15 "
       << (T + H - Bm) / 2 << ")\">QD-score</text>\n";
    if (!metrics.rows.empty()) {
        double x0 = static_cast<double>(metrics.initial_evaluations);
        double x1 = static_cast<double>(metrics.rows.back().evaluations);
        double y0 = metrics.rows.front().qd_score, y1 = y0;
        for (const auto& r : metrics.rows) {
            y0 = std::min(y0, r.qd_score);
            y1 = std::max(y1, r.qd_score);
        }
        if (x1 <= x0)
            x1 = x0 + 1.0;
        if (y1 <= y0)
            y1 = y0 + 1.0;
        os << "<text x=\"" << L - 5 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\" font-size=\"10\">"
           << format_real(y1) << "</text>\n"
           << "<text x=\"" << L - 5 << "\" y=\"" << H - Bm << "\" text-anchor=\"end\" font-size=\"10\">"
           << format_real(y0) << "</text>\n"
           << "<text x=\"" << W - R << "\" y=\"" << H - Bm + 15 << "\" text-anchor=\"end\" font-size=\"10\">"
           << format_real(x1) << "</text>\n"
           << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
        char buf[64];
        for (std::size_t i = 0; i < metrics.rows.size(); ++i) {
            const auto& r = metrics.rows[i];
            const double px = L + (static_cast<double>(r.evaluations) - x0) / (x1 - x0) * (W - L - R);
            const double py = H - Bm - (r.qd_score - y0) / (y1 - y0) * (H - Bm - T);
            std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", px, py);
            os << buf;
        }
        os << "\"/>\n";
    }
    os << "</svg>\n";
}

void emit_outputs(const Repertoire& repertoire, const RunMetrics& metrics, const ResolvedConfig& cfg,
                  const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create output directory '" + out_dir.string() + "': " + ec.message());
    {
        const auto p = out_dir / "metrics.csv";
        auto out = open_out(p);
        write_metrics_csv(out, metrics);
        finish(out, p);
    }
    {
        const auto p = out_dir / "repertoire.csv";
        auto out = open_out(p);
        write_repertoire_csv(out, repertoire);
        finish(out, p);
    }
    {
        const auto p = out_dir / "config-echo.json";
        auto out = open_out(p);
        out << to_json(cfg);
        finish(out, p);
    }
    if (cfg.run.output.svg) {
        const auto p = out_dir / "qd_score.svg";
        auto out = open_out(p);
        write_qd_svg(out, metrics);
        finish(out, p);
    }
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "run,point,seed_index,run_seed,assignment,final_qd_score,final_coverage,final_max_fitness,evaluations,error\n";
    for (const auto& r : rows) {
        std::string assign;
        for (const auto& [k, v] : r.assignment)
            assign += (assign.empty() ? "" : ";") + k + "=" + v;
        std::string err = r.error;
        std::replace(err.begin(), err.end(), '"', '\'');
        os << r.run_index << ',' << r.point_index << ',' << r.seed_index << ',' << r.run_seed << ",\"" << assign
           << "\"," << (r.error.empty() ? format_real(r.final_qd_score) : "") << ','
           << (r.error.empty() ? format_real(r.final_coverage) : "") << ','
           << (r.final_row ? format_real(r.final_row->max_fitness) : "") << ','
           << (r.final_row ? std::to_string(r.final_row->evaluations) : "") << ",\"" << err << "\"\n";
    }
}

void write_correlation_csv(std::ostream& os, const CorrelationReport& report) {
    os << "sample,rho,genotype\n";
    for (std::size_t s = 0; s < report.rho.size(); ++s)
        os << s << ',' << opt_real(report.rho[s]) << ",\"" << format_genotype(report.samples[s]) << "\"\n";
    os << "\nbin_lo,bin_hi,count\n";
    const std::size_t bins = report.histogram.size();
    for (std::size_t b = 0; b < bins; ++b) {
        const double lo = -1.0 + 2.0 * static_cast<double>(b) / static_cast<double>(bins);
        const double hi = -1.0 + 2.0 * static_cast<double>(b + 1) / static_cast<double>(bins);
        os << format_real(lo) << ',' << format_real(hi) << ',' << report.histogram[b] << '\n';
    }
    os << "\nsamples,defined,mean,median\n"
       << report.rho.size() << ',' << report.defined << ',' << (report.defined ? format_real(report.mean) : "") << ','
       << (report.defined ? format_real(report.median) : "") << '\n';
}

double read_final_metric(const fs::path& metrics_csv, const std::string& column) {
    std::ifstream in(metrics_csv);
    if (!in)
        throw IoError("cannot read '" + metrics_csv.string() + "'");
    std::string header, line, last;
    std::getline(in, header);
    while (std::getline(in, line))
        if (!line.empty())
            last = line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        for (std::string f; std::getline(ss, f, ',');)
            out.push_back(f);
        if (!s.empty() && s.back() == ',')
            out.emplace_back();
        return out;
    };
    const auto names = split(header);
    const auto it = std::find(names.begin(), names.end(), column);
    if (it == names.end())
        throw ConfigError("metric '" + column + "' is not a column of " + metrics_csv.string());
    if (last.empty())
        throw IoError("'" + metrics_csv.string() + "' has no rows");
    const auto values = split(last);
    const auto idx = static_cast<std::size_t>(it - names.begin());
    if (idx >= values.size() || values[idx].empty())
        throw IoError("'" + metrics_csv.string() + "' has no value for '" + column + "' in its last row");
    return std::stod(values[idx]);
}

std::vector<fs::path> find_run_dirs(const fs::path& dir) {
    if (fs::exists(dir / "metrics.csv"))
        return {dir};
    if (!fs::is_directory(dir))
        throw IoError("'" + dir.string() + "' is not a directory");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory() && fs::exists(entry.path() / "metrics.csv"))
            out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

Comparison compare_runs(const fs::path& dir_a, const fs::path& dir_b, const std::string& metric) {
    Comparison c;
    c.metric = metric;
    const auto ra = find_run_dirs(dir_a);
    const auto rb = find_run_dirs(dir_b);
    if (ra.size() != rb.size())
        throw ConfigError("compare: " + std::to_string(ra.size()) + " runs in '" + dir_a.string() + "' but " +
                          std::to_string(rb.size()) + " in '" + dir_b.string() + "'");
    for (std::size_t i = 0; i < ra.size(); ++i) {
        c.runs_a.push_back(ra[i].filename().string());
        c.runs_b.push_back(rb[i].filename().string());
        c.a.push_back(read_final_metric(ra[i] / "metrics.csv", metric));
        c.b.push_back(read_final_metric(rb[i] / "metrics.csv", metric));
    }
    c.test = wilcoxon_signed_rank(c.a, c.b);
    return c;
}

void write_comparison_csv(std::ostream& os, const Comparison& c) {
    os << "pair,run_a,run_b,a,b\n";
    for (std::size_t i = 0; i < c.a.size(); ++i)
        os << i << ',' << c.runs_a[i] << ',' << c.runs_b[i] << ',' << format_real(c.a[i]) << ','
           << format_real(c.b[i]) << '\n';
    os << "\nmetric,pairs,n_used,median_a,median_b,w_plus,w_minus,p_value_b_greater,exact,degenerate\n"
       << c.metric << ',' << c.a.size() << ',' << c.test.n_used << ',' << format_real(median(c.a)) << ','
       << format_real(median(c.b)) << ',' << format_real(c.test.w_plus) << ',' << format_real(c.test.w_minus) << ','
       << format_real(c.test.p_value) << ',' << (c.test.exact ? 1 : 0) << ',' << (c.test.degenerate ? 1 : 0) << '\n';
}

} // namespace qdd
