#include "septensor/bench/record.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#ifndef SEPTENSOR_GIT_REV
#define SEPTENSOR_GIT_REV "unknown"
#endif
#ifndef SEPTENSOR_BUILD_TYPE
#define SEPTENSOR_BUILD_TYPE "unknown"
#endif

namespace septensor::bench {

using json = nlohmann::ordered_json;

namespace {

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double read_number(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json request_json(const RunRequest& r) {
    const auto& c = r.config;
    json j;
    j["problem"] = r.problem;
    j["model"] = std::string(to_string(r.kind));
    j["rank"] = c.rank;
    j["points_per_axis"] = c.points_per_axis;
    j["iterations"] = c.iterations;
    j["learning_rate"] = c.learning_rate;
    j["lambda"] = c.lambda;
    j["seed"] = c.seed;
    j["resample_every"] = c.resample_every;
    j["test_grid"] = c.test_grid;
    j["loss_stride"] = c.loss_stride;
    j["helmholtz"] = {{"a", r.helmholtz.a}, {"k", r.helmholtz.k}};
    j["output_dir"] = r.output_dir;
    return j;
}

RunRequest request_from(const json& j) {
    RunRequest r;
    r.problem = j.at("problem").get<std::string>();
    r.kind = parse_decomposition(j.at("model").get<std::string>());
    auto& c = r.config;
    c.rank = j.at("rank").get<std::size_t>();
    c.points_per_axis = j.at("points_per_axis").get<std::size_t>();
    c.iterations = j.at("iterations").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.lambda = j.at("lambda").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.resample_every = j.at("resample_every").get<std::size_t>();
    c.test_grid = j.at("test_grid").get<Shape>();
    c.loss_stride = j.at("loss_stride").get<std::size_t>();
    r.helmholtz.a = j.at("helmholtz").at("a").get<std::array<double, 3>>();
    r.helmholtz.k = j.at("helmholtz").at("k").get<double>();
    r.output_dir = j.at("output_dir").get<std::string>();
    return r;
}

}  // namespace

bool ResultRecord::operator==(const ResultRecord& o) const {
    return request == o.request && same(initial_relative_l2, o.initial_relative_l2) &&
           same(final_relative_l2, o.final_relative_l2) && iterations_completed == o.iterations_completed &&
           same(wall_seconds, o.wall_seconds) && same(iterations_per_second, o.iterations_per_second) &&
           collocation_coordinates == o.collocation_coordinates && diverged == o.diverged &&
           divergence_message == o.divergence_message && warnings == o.warnings && build_stamp == o.build_stamp &&
           timestamp == o.timestamp;
}

void validate_request(const RunRequest& request) {
    const auto names = problem_names();
    if (std::find(names.begin(), names.end(), request.problem) == names.end())
        throw std::invalid_argument("unknown problem '" + request.problem + "'");
    request.config.validate();
    if (request.problem != "helmholtz3d" && request.helmholtz != HelmholtzOptions{})
        throw std::invalid_argument("--helmholtz-a / --helmholtz-k only apply to helmholtz3d");
}

std::string run_id(const RunRequest& r) {
    std::ostringstream s;
    s << r.problem << '_' << to_string(r.kind) << "_r" << r.config.rank << "_n" << r.config.points_per_axis << "_s"
      << r.config.seed;
    return s.str();
}

std::string build_stamp() {
    std::ostringstream s;
    s << "git " << SEPTENSOR_GIT_REV << ", " << SEPTENSOR_BUILD_TYPE;
#if defined(__clang__)
    s << ", clang " << __clang_major__ << '.' << __clang_minor__;
#elif defined(__GNUC__)
    s << ", gcc " << __GNUC__ << '.' << __GNUC_MINOR__;
#endif
    return s.str();
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string to_json(const ResultRecord& r) {
    json j;
    j["request"] = request_json(r.request);
    j["initial_relative_l2"] = number(r.initial_relative_l2);
    j["final_relative_l2"] = number(r.final_relative_l2);
    j["iterations_completed"] = r.iterations_completed;
    j["wall_seconds"] = number(r.wall_seconds);
    j["iterations_per_second"] = number(r.iterations_per_second);
    j["collocation_coordinates"] = r.collocation_coordinates;
    j["diverged"] = r.diverged;
    j["divergence_message"] = r.divergence_message;
    j["warnings"] = r.warnings;
    j["build_stamp"] = r.build_stamp;
    j["timestamp"] = r.timestamp;
    return j.dump(2) + "\n";
}

ResultRecord record_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        ResultRecord r;
        r.request = request_from(j.at("request"));
        r.initial_relative_l2 = read_number(j.at("initial_relative_l2"));
        r.final_relative_l2 = read_number(j.at("final_relative_l2"));
        r.iterations_completed = j.at("iterations_completed").get<std::size_t>();
        r.wall_seconds = read_number(j.at("wall_seconds"));
        r.iterations_per_second = read_number(j.at("iterations_per_second"));
        r.collocation_coordinates = j.at("collocation_coordinates").get<std::size_t>();
        r.diverged = j.at("diverged").get<bool>();
        r.divergence_message = j.at("divergence_message").get<std::string>();
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
        r.build_stamp = j.at("build_stamp").get<std::string>();
        r.timestamp = j.at("timestamp").get<std::string>();
        return r;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed result record: ") + e.what());
    }
}

std::string loss_curve_csv(const std::vector<LossPoint>& curve) {
    std::ostringstream s;
    s.precision(17);
    s << "iteration,loss\n";
    for (const auto& p : curve) s << p.iteration << ',' << p.loss << '\n';
    return s.str();
}

RunOutcome execute_run(const RunRequest& request, const TrainObserver& observer) {
    validate_request(request);
    const PDEProblem problem = make_problem(request.problem, request.helmholtz);
    const auto spec = make_model_spec(request.kind, problem.domain, request.config.rank);
    auto model = SeparatedModel::create(spec, request.config.seed);

    RunOutcome out;
    out.report = train(model, problem, request.config, observer);
    out.model = model;
    auto& r = out.record;
    r.request = request;
    r.request.config.test_grid = out.report.config.test_grid;
    r.initial_relative_l2 = out.report.initial_relative_l2;
    r.final_relative_l2 = out.report.final_relative_l2;
    r.iterations_completed = out.report.iterations_completed;
    r.wall_seconds = out.report.wall_seconds;
    r.iterations_per_second = out.report.iterations_per_second;
    r.collocation_coordinates = out.report.collocation_coordinates;
    r.diverged = out.report.diverged;
    r.divergence_message = out.report.divergence_message;
    r.warnings = out.report.warnings;
    r.build_stamp = build_stamp();
    r.timestamp = utc_timestamp();
    return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw std::runtime_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

RunArtifacts write_run_artifacts(const RunOutcome& outcome) {
    const std::filesystem::path dir = outcome.record.request.output_dir;
    const auto id = run_id(outcome.record.request);
    RunArtifacts a{dir / (id + ".json"), dir / (id + "_loss.csv")};
    write_file_atomic(a.loss_curve, loss_curve_csv(outcome.report.loss_curve));
    write_file_atomic(a.record, to_json(outcome.record));
    return a;
}

}  // namespace septensor::bench
