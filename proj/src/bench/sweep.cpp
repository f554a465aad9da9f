#include "septensor/bench/sweep.hpp"

#include <atomic>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace septensor::bench {

using json = nlohmann::json;

std::vector<RunRequest> SweepSpec::expand() const {
    std::vector<RunRequest> out;
    const std::vector<Decomposition> kinds = models.empty() ? std::vector<Decomposition>{Decomposition::CP} : models;
    const std::vector<std::size_t> pts = points.empty() ? std::vector<std::size_t>{base.points_per_axis} : points;
    const std::vector<std::uint64_t> sds = seeds.empty() ? std::vector<std::uint64_t>{base.seed} : seeds;
    for (const auto& problem : problems)
        for (auto kind : kinds)
            for (auto rank : ranks)
                for (auto n : pts)
                    for (auto seed : sds) {
                        RunRequest r;
                        r.problem = problem;
                        r.kind = kind;
                        r.config = base;
                        r.config.rank = rank;
                        r.config.points_per_axis = n;
                        r.config.seed = seed;
                        if (problem == "helmholtz3d") r.helmholtz = helmholtz;
                        r.output_dir = output_dir;
                        out.push_back(std::move(r));
                    }
    return out;
}

SweepSpec parse_sweep(const std::string& text) {
    SweepSpec spec;
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return spec;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) throw std::invalid_argument("sweep file must hold a JSON object");
        auto& b = spec.base;
        if (j.contains("pde")) spec.problems.push_back(j["pde"].get<std::string>());
        if (j.contains("pdes"))
            for (const auto& p : j["pdes"]) spec.problems.push_back(p.get<std::string>());
        if (j.contains("models"))
            for (const auto& m : j["models"]) spec.models.push_back(parse_decomposition(m.get<std::string>()));
        if (j.contains("ranks")) spec.ranks = j["ranks"].get<std::vector<std::size_t>>();
        if (j.contains("points")) spec.points = j["points"].get<std::vector<std::size_t>>();
        if (j.contains("seeds")) spec.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        b.iterations = j.value("iterations", b.iterations);
        b.learning_rate = j.value("lr", b.learning_rate);
        b.lambda = j.value("lambda", b.lambda);
        b.resample_every = j.value("resample_every", b.resample_every);
        b.loss_stride = j.value("loss_stride", b.loss_stride);
        if (j.contains("test_grid")) b.test_grid = j["test_grid"].get<Shape>();
        if (j.contains("helmholtz")) {
            spec.helmholtz.a = j["helmholtz"].value("a", spec.helmholtz.a);
            spec.helmholtz.k = j["helmholtz"].value("k", spec.helmholtz.k);
        }
        spec.output_dir = j.value("out", spec.output_dir);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed sweep file: ") + e.what());
    }
    return spec;
}

std::vector<AggregateRow> aggregate(const std::vector<SweepRow>& rows) {
    std::vector<AggregateRow> out;
    std::map<std::tuple<std::string, int, std::size_t, std::size_t>, std::size_t> where;
    std::vector<double> sums;
    for (const auto& row : rows) {
        const auto& r = row.request;
        const auto key = std::make_tuple(r.problem, static_cast<int>(r.kind), r.config.rank, r.config.points_per_axis);
        auto it = where.find(key);
        if (it == where.end()) {
            it = where.emplace(key, out.size()).first;
            AggregateRow a;
            a.problem = r.problem;
            a.kind = r.kind;
            a.rank = r.config.rank;
            a.points = r.config.points_per_axis;
            a.min_relative_l2 = std::numeric_limits<double>::quiet_NaN();
            out.push_back(a);
            sums.push_back(0.0);
        }
        auto& a = out[it->second];
        ++a.runs;
        if (row.status != "ok") {
            ++a.failed;
            continue;
        }
        const double l2 = row.record.final_relative_l2;
        sums[it->second] += l2;
        if (std::isnan(a.min_relative_l2) || l2 < a.min_relative_l2) a.min_relative_l2 = l2;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto ok = out[i].runs - out[i].failed;
        out[i].mean_relative_l2 = ok > 0 ? sums[i] / static_cast<double>(ok) : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

std::string runs_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream s;
    s.precision(17);
    s << "problem,model,rank,points,seed,iterations,status,initial_l2,final_l2,wall_seconds,iterations_per_second\n";
    for (const auto& row : rows) {
        const auto& r = row.request;
        std::string status = row.status;
        for (auto& ch : status)
            if (ch == ',' || ch == '\n') ch = ';';
        s << r.problem << ',' << to_string(r.kind) << ',' << r.config.rank << ',' << r.config.points_per_axis << ','
          << r.config.seed << ',' << row.record.iterations_completed << ',' << status << ','
          << row.record.initial_relative_l2 << ',' << row.record.final_relative_l2 << ',' << row.record.wall_seconds
          << ',' << row.record.iterations_per_second << '\n';
    }
    return s.str();
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::ostringstream s;
    s.precision(17);
    s << "problem,model,rank,points,runs,failed,mean_l2,min_l2\n";
    for (const auto& a : rows)
        s << a.problem << ',' << to_string(a.kind) << ',' << a.rank << ',' << a.points << ',' << a.runs << ','
          << a.failed << ',' << a.mean_relative_l2 << ',' << a.min_relative_l2 << '\n';
    return s.str();
}

std::size_t sweep_workers(std::size_t runs) {
    std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SEPTENSOR_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) n = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(n, runs));
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
    const auto requests = spec.expand();
    std::vector<SweepRow> rows(requests.size());
    std::atomic<std::size_t> next{0};
    std::mutex io;

    auto worker = [&] {
        for (std::size_t i = next++; i < requests.size(); i = next++) {
            auto& row = rows[i];
            row.request = requests[i];
            row.record.request = requests[i];
            try {
                const auto outcome = execute_run(requests[i]);
                row.record = outcome.record;
                row.status = outcome.record.diverged ? "diverged" : "ok";
                std::lock_guard lock(io);
                write_run_artifacts(outcome);
            } catch (const std::exception& e) {
                row.status = std::string("error: ") + e.what();
            }
        }
    };
    const std::size_t workers = sweep_workers(requests.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    const std::filesystem::path dir = spec.output_dir;
    write_file_atomic(dir / "runs.csv", runs_csv(rows));
    write_file_atomic(dir / "aggregate.csv", aggregate_csv(aggregate(rows)));
    return rows;
}

}  // namespace septensor::bench
