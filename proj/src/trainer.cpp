#include "septensor/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace septensor {

void TrainConfig::validate() const {
    if (points_per_axis < 2) throw std::invalid_argument("points_per_axis must be >= 2");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning rate must be > 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
    if (rank < 1) throw std::invalid_argument("rank must be >= 1");
    if (loss_stride < 1) throw std::invalid_argument("loss stride must be >= 1");
    for (auto e : test_grid)
        if (e < 2) throw std::invalid_argument("test grid extents must be >= 2");
}

Shape default_test_grid(std::size_t dim) { return Shape(dim, dim <= 3 ? 32 : 12); }

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double learning_rate) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw DimensionError("adam: parameter, gradient and moment lengths differ");
    for (double g : grads)
        if (!std::isfinite(g)) throw DivergenceError("non-finite gradient", state.step);

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g);
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

AxisPoints sample_axis_points(const PDEProblem& problem, std::size_t n, Rng& rng) {
    if (n < 2) throw std::invalid_argument("need at least two points per axis");
    AxisPoints out(problem.dim);
    for (std::size_t k = 0; k < problem.dim; ++k) {
        const auto [lo, hi] = problem.domain.at(k);
        if (!(hi > lo)) throw DimensionError("degenerate interval on axis " + std::to_string(k));
        auto& pts = out[k];
        pts.reserve(n);
        pts.push_back(lo);
        for (std::size_t j = 0; j + 2 < n; ++j) pts.push_back(rng.uniform(lo, hi));
        pts.push_back(hi);
        std::sort(pts.begin() + 1, pts.end() - 1);
    }
    return out;
}

std::size_t SubLattice::size() const {
    std::size_t s = 1;
    for (auto c : count) s *= c;
    return count.empty() ? 0 : s;
}

namespace {

// Visits the block in row-major order with global indices.
template <class F>
void for_each_index(const SubLattice& block, F&& f) {
    const std::size_t total = block.size();
    if (total == 0) return;
    const std::size_t d = block.first.size();
    std::vector<std::size_t> idx(block.first);
    for (std::size_t flat = 0; flat < total; ++flat) {
        f(flat, std::span<const std::size_t>(idx));
        for (std::size_t k = d; k-- > 0;) {
            if (++idx[k] < block.first[k] + block.count[k]) break;
            idx[k] = block.first[k];
        }
    }
}

void gather_point(const AxisPoints& points, std::span<const std::size_t> idx, std::vector<double>& x) {
    x.resize(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) x[k] = points[k][idx[k]];
}

const BoundarySpec* find_face(const PDEProblem& problem, std::size_t axis, FaceEnd end) {
    for (const auto& b : problem.boundary)
        if (b.axis == axis && b.end == end) return &b;
    return nullptr;
}

}  // namespace

CollocationLattice CollocationLattice::for_problem(const PDEProblem& problem, AxisPoints points) {
    const std::size_t d = problem.dim;
    if (points.size() != d) throw DimensionError("axis point lists do not match problem dimension");
    for (const auto& p : points)
        if (p.size() < 2) throw ArityError("each axis needs at least two points");

    CollocationLattice lat;
    lat.points = std::move(points);

    // Interior: drop the first/last row of an axis when that face is constrained.
    std::vector<std::size_t> lo(d), hi(d);
    for (std::size_t k = 0; k < d; ++k) {
        lo[k] = find_face(problem, k, FaceEnd::Low) ? 1 : 0;
        hi[k] = lat.points[k].size() - (find_face(problem, k, FaceEnd::High) ? 1 : 0);
        lat.interior.first.push_back(lo[k]);
        lat.interior.count.push_back(hi[k] > lo[k] ? hi[k] - lo[k] : 0);
    }
    lat.physics_points = lat.interior.size();

    lat.coefficients.resize(problem.terms.size());
    std::vector<double> x;
    if (lat.physics_points > 0) {
        lat.source.resize(lat.physics_points);
        for (std::size_t t = 0; t < problem.terms.size(); ++t)
            if (problem.terms[t].coefficient) lat.coefficients[t].resize(lat.physics_points);
        for_each_index(lat.interior, [&](std::size_t flat, std::span<const std::size_t> idx) {
            gather_point(lat.points, idx, x);
            lat.source[flat] = problem.source(x);
            for (std::size_t t = 0; t < problem.terms.size(); ++t)
                if (problem.terms[t].coefficient) lat.coefficients[t][flat] = problem.coefficient(problem.terms[t], x);
        });
    }

    // Boundary points, each counted once: a face on axis k excludes the
    // constrained rows of every earlier axis.
    for (std::size_t k = 0; k < d; ++k) {
        for (FaceEnd end : {FaceEnd::Low, FaceEnd::High}) {
            const BoundarySpec* face = find_face(problem, k, end);
            if (!face) continue;
            DataBlock blk;
            for (std::size_t j = 0; j < d; ++j) {
                if (j < k) {
                    blk.block.first.push_back(lo[j]);
                    blk.block.count.push_back(hi[j] > lo[j] ? hi[j] - lo[j] : 0);
                } else if (j == k) {
                    blk.block.first.push_back(end == FaceEnd::Low ? 0 : lat.points[k].size() - 1);
                    blk.block.count.push_back(1);
                } else {
                    blk.block.first.push_back(0);
                    blk.block.count.push_back(lat.points[j].size());
                }
            }
            const std::size_t m = blk.block.size();
            if (m == 0) continue;
            blk.targets.resize(m);
            for_each_index(blk.block, [&](std::size_t flat, std::span<const std::size_t> idx) {
                gather_point(lat.points, idx, x);
                blk.targets[flat] = face->target(x);
            });
            lat.data_points += m;
            lat.data.push_back(std::move(blk));
        }
    }
    if (problem.boundary.empty())
        lat.warnings.push_back("problem '" + problem.name + "' defines no boundary faces; data loss is zero");
    return lat;
}

CollocationLattice CollocationLattice::for_fit(AxisPoints points, const PointFunction& target) {
    if (points.size() < 2) throw ArityError("fit lattice needs at least two axes");
    CollocationLattice lat;
    lat.points = std::move(points);
    DataBlock blk;
    for (const auto& p : lat.points) {
        if (p.empty()) throw ArityError("axis point list is empty");
        blk.block.first.push_back(0);
        blk.block.count.push_back(p.size());
    }
    blk.targets.resize(blk.block.size());
    std::vector<double> x;
    for_each_index(blk.block, [&](std::size_t flat, std::span<const std::size_t> idx) {
        gather_point(lat.points, idx, x);
        blk.targets[flat] = target(x);
    });
    lat.data_points = blk.targets.size();
    lat.data.push_back(std::move(blk));
    return lat;
}

std::size_t CollocationLattice::coordinate_count() const {
    std::size_t n = 0;
    for (const auto& p : points) n += p.size();
    return n;
}

// ---------------------------------------------------------------------------

namespace {

FactorMatrix& channel_of(FactorBundle& b, FactorChannel c) {
    switch (c) {
        case FactorChannel::D1: return b.d1;
        case FactorChannel::D2: return b.d2;
        default: return b.value;
    }
}

const FactorMatrix& channel_of(const FactorBundle& b, FactorChannel c) {
    switch (c) {
        case FactorChannel::D1: return b.d1;
        case FactorChannel::D2: return b.d2;
        default: return b.value;
    }
}

void add_rows(FactorMatrix& dst, std::size_t first, const FactorMatrix& src) {
    const std::size_t w = dst.cols();
    auto out = dst.data().subspan(first * w, src.rows() * w);
    const auto in = src.data();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] += in[i];
}

struct ChannelSelection {
    std::vector<FactorChannel> channels;
    int term = -1;  // -1: the value grid feeding the reaction polynomial
};

// Cropped factors for one channel choice on one block.
std::vector<FactorMatrix> crop(const std::vector<FactorBundle>& bundles, const std::vector<FactorChannel>& channels,
                               const SubLattice& block) {
    std::vector<FactorMatrix> out;
    out.reserve(bundles.size());
    for (std::size_t k = 0; k < bundles.size(); ++k) {
        const auto& m = channel_of(bundles[k], channels[k]);
        if (block.first[k] == 0 && block.count[k] == m.rows())
            out.push_back(m);
        else
            out.push_back(m.row_block(block.first[k], block.count[k]));
    }
    return out;
}

// out[r_order[0], r_order[1], ...] = core[r].
CoreTensor permute_core(const CoreTensor& core, const std::vector<std::size_t>& order) {
    const Shape& src = core.shape();
    Shape dst_shape;
    for (auto j : order) dst_shape.push_back(src[j]);
    const auto dst_strides = row_major_strides(dst_shape);
    std::vector<std::size_t> stride_of(src.size());
    for (std::size_t j = 0; j < order.size(); ++j) stride_of[order[j]] = dst_strides[j];

    CoreTensor out(dst_shape, 0.0);
    SubLattice all{std::vector<std::size_t>(src.size(), 0), src};
    const auto in = core.data();
    auto o = out.data();
    for_each_index(all, [&](std::size_t flat, std::span<const std::size_t> r) {
        std::size_t off = 0;
        for (std::size_t j = 0; j < r.size(); ++j) off += r[j] * stride_of[j];
        o[off] = in[flat];
    });
    return out;
}

void unpermute_core_add(const CoreTensor& permuted, const std::vector<std::size_t>& order, CoreTensor& target) {
    const Shape& shape = target.shape();
    Shape perm_shape;
    for (auto j : order) perm_shape.push_back(shape[j]);
    const auto perm_strides = row_major_strides(perm_shape);
    std::vector<std::size_t> stride_of(shape.size());
    for (std::size_t j = 0; j < order.size(); ++j) stride_of[order[j]] = perm_strides[j];

    SubLattice all{std::vector<std::size_t>(shape.size(), 0), shape};
    const auto in = permuted.data();
    auto o = target.data();
    for_each_index(all, [&](std::size_t flat, std::span<const std::size_t> r) {
        std::size_t off = 0;
        for (std::size_t j = 0; j < r.size(); ++j) off += r[j] * stride_of[j];
        o[flat] += in[off];
    });
}

}  // namespace

LossGradient loss_and_gradient(const SeparatedModel& model, const PDEProblem* problem,
                               const CollocationLattice& lattice, double lambda) {
    const ModelSpec& spec = model.spec();
    const std::size_t d = spec.dim;
    if (lattice.points.size() != d) throw DimensionError("lattice dimension does not match model");
    if (problem && problem->dim != d) throw DimensionError("problem dimension does not match model");

    std::vector<NetworkPass> passes(d);
    std::vector<FactorBundle> bundles;
    std::vector<FactorBundle> grads;
    bundles.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        bundles.push_back(passes[k].forward(spec.networks[k], model.network_parameters(k), lattice.points[k]));
        const std::size_t n = lattice.points[k].size(), w = spec.networks[k].output_width;
        grads.push_back({FactorMatrix(n, w), FactorMatrix(n, w), FactorMatrix(n, w)});
    }

    const bool tucker = spec.kind == Decomposition::Tucker;
    CoreTensor core;
    CoreTensor core_grad;
    if (tucker) {
        core = model.core();
        core_grad = CoreTensor(core.shape(), 0.0);
    }
    const CoreTensor* core_ptr = tucker ? &core : nullptr;

    auto absorb = [&](const FactorAssembly& assembly, const std::vector<FactorChannel>& channels,
                      const SubLattice& block, const DenseTensor& adjoint) {
        auto g = assembly.backward(adjoint);
        for (std::size_t k = 0; k < d; ++k) add_rows(channel_of(grads[k], channels[k]), block.first[k], g.factors[k]);
        if (tucker) {
            auto dst = core_grad.data();
            const auto src = g.core.data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
    };

    LossGradient out;

    // Physics residual on the interior block.
    if (problem && lattice.physics_points > 0) {
        const std::size_t m = lattice.physics_points;
        // Tucker grids are expensive, so constant-coefficient terms and the
        // value grid go through one shared sweep.
        bool fuse = false;
        if (tucker)
            for (const auto& term : problem->terms) fuse = fuse || !term.coefficient;

        std::vector<ChannelSelection> selections;
        if (problem->uses_value() && !fuse)
            selections.push_back({std::vector<FactorChannel>(d, FactorChannel::Value), -1});
        for (std::size_t t = 0; t < problem->terms.size(); ++t) {
            const auto& term = problem->terms[t];
            if (fuse && !term.coefficient) continue;
            std::vector<FactorChannel> ch(d, FactorChannel::Value);
            ch[term.axis] = term.order == 1 ? FactorChannel::D1 : FactorChannel::D2;
            selections.push_back({std::move(ch), static_cast<int>(t)});
        }

        TuckerOperatorContraction fused;
        TuckerOperatorContraction::Output fused_out;
        if (fuse) {
            const std::vector<FactorChannel> values(d, FactorChannel::Value);
            const auto factors = crop(bundles, values, lattice.interior);
            std::vector<FactorMatrix> ops(d);
            std::vector<const FactorMatrix*> op_ptrs(d, nullptr);
            for (const auto& term : problem->terms) {
                if (term.coefficient) continue;
                const auto k = term.axis;
                const auto& src = channel_of(bundles[k], term.order == 1 ? FactorChannel::D1 : FactorChannel::D2)
                                      .row_block(lattice.interior.first[k], lattice.interior.count[k]);
                if (!op_ptrs[k]) ops[k] = FactorMatrix(src.rows(), src.cols());
                auto dst = ops[k].data();
                const auto in = src.data();
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += term.scale * in[i];
                op_ptrs[k] = &ops[k];
            }
            fused_out = fused.forward(core, factors, op_ptrs, problem->uses_value());
        }

        std::vector<FactorAssembly> assemblies;
        std::vector<DenseTensor> fields;
        assemblies.reserve(selections.size());
        for (const auto& sel : selections) {
            assemblies.emplace_back(spec, core_ptr);
            fields.push_back(assemblies.back().forward(crop(bundles, sel.channels, lattice.interior)));
        }

        auto add_reaction = [&](std::span<const double> f, std::vector<double>& r) {
            const auto& poly = problem->reaction;
            for (std::size_t i = 0; i < m; ++i) {
                double p = poly.back();
                for (std::size_t j = poly.size() - 1; j-- > 0;) p = p * f[i] + poly[j];
                r[i] += p;
            }
        };

        std::vector<double> r(m);
        for (std::size_t i = 0; i < m; ++i) r[i] = -lattice.source[i];
        if (fuse) {
            const auto sop = fused_out.op.data();
            for (std::size_t i = 0; i < m; ++i) r[i] += sop[i];
            if (problem->uses_value()) add_reaction(fused_out.value.data(), r);
        }
        for (std::size_t s = 0; s < selections.size(); ++s) {
            const auto& f = fields[s].data();
            const int t = selections[s].term;
            if (t < 0) {
                add_reaction(f, r);
            } else if (const auto& c = lattice.coefficients[static_cast<std::size_t>(t)]; !c.empty()) {
                for (std::size_t i = 0; i < m; ++i) r[i] += c[i] * f[i];
            } else {
                const double c0 = problem->terms[static_cast<std::size_t>(t)].scale;
                for (std::size_t i = 0; i < m; ++i) r[i] += c0 * f[i];
            }
        }
        double sq = 0.0;
        for (double v : r) sq += v * v;
        out.terms.physics = sq / static_cast<double>(m);

        if (lambda != 0.0) {
            const double w = 2.0 * lambda / static_cast<double>(m);
            if (fuse) {
                DenseTensor gop(fused_out.op.shape());
                for (std::size_t i = 0; i < m; ++i) gop[i] = w * r[i];
                DenseTensor gval;
                if (problem->uses_value()) {
                    gval = DenseTensor(fused_out.value.shape());
                    const auto v = fused_out.value.data();
                    for (std::size_t i = 0; i < m; ++i) gval[i] = w * r[i] * problem->reaction_derivative(v[i]);
                }
                const auto g = fused.backward(problem->uses_value() ? &gval : nullptr, gop);
                for (std::size_t k = 0; k < d; ++k)
                    add_rows(grads[k].value, lattice.interior.first[k], g.factors[k]);
                for (const auto& term : problem->terms) {
                    if (term.coefficient) continue;
                    const auto k = term.axis;
                    FactorMatrix scaled = g.op_factors[k];
                    for (auto& e : scaled.data()) e *= term.scale;
                    add_rows(channel_of(grads[k], term.order == 1 ? FactorChannel::D1 : FactorChannel::D2),
                             lattice.interior.first[k], scaled);
                }
                auto dst = core_grad.data();
                const auto src = g.core.data();
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
            }
            for (std::size_t s = 0; s < selections.size(); ++s) {
                DenseTensor adj(fields[s].shape());
                auto a = adj.data();
                const auto f = fields[s].data();
                const int t = selections[s].term;
                if (t < 0) {
                    for (std::size_t i = 0; i < m; ++i) a[i] = w * r[i] * problem->reaction_derivative(f[i]);
                } else if (const auto& c = lattice.coefficients[static_cast<std::size_t>(t)]; !c.empty()) {
                    for (std::size_t i = 0; i < m; ++i) a[i] = w * r[i] * c[i];
                } else {
                    const double c0 = problem->terms[static_cast<std::size_t>(t)].scale;
                    for (std::size_t i = 0; i < m; ++i) a[i] = w * r[i] * c0;
                }
                absorb(assemblies[s], selections[s].channels, lattice.interior, adj);
            }
        }
    }

    // Data term, pooled over every block.
    if (lattice.data_points > 0) {
        const std::vector<FactorChannel> values(d, FactorChannel::Value);
        const double inv = 1.0 / static_cast<double>(lattice.data_points);
        double sq = 0.0;
        auto residual_to_adjoint = [&](DenseTensor& grid, const std::vector<double>& targets) {
            auto g = grid.data();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double diff = g[i] - targets[i];
                sq += diff * diff;
                g[i] = 2.0 * inv * diff;
            }
        };
        for (const auto& blk : lattice.data) {
            const auto flat_axis = std::find(blk.block.count.begin(), blk.block.count.end(), std::size_t{1});
            if (tucker && flat_axis != blk.block.count.end()) {
                // Contracting the single-row axis first keeps every
                // intermediate small; a unit extent leaves the flat order intact.
                const auto k = static_cast<std::size_t>(flat_axis - blk.block.count.begin());
                std::vector<std::size_t> order{k};
                for (std::size_t j = 0; j < d; ++j)
                    if (j != k) order.push_back(j);
                auto factors = crop(bundles, values, blk.block);
                std::vector<FactorMatrix> permuted;
                for (auto j : order) permuted.push_back(std::move(factors[j]));
                TuckerContraction contraction;
                DenseTensor grid = contraction.forward(permute_core(core, order), permuted);
                residual_to_adjoint(grid, blk.targets);
                auto g = contraction.backward(grid);
                for (std::size_t j = 0; j < d; ++j) add_rows(grads[order[j]].value, blk.block.first[order[j]], g.factors[j]);
                unpermute_core_add(g.core, order, core_grad);
                continue;
            }
            FactorAssembly assembly(spec, core_ptr);
            DenseTensor grid = assembly.forward(crop(bundles, values, blk.block));
            residual_to_adjoint(grid, blk.targets);
            absorb(assembly, values, blk.block, grid);
        }
        out.terms.data = sq * inv;
    }
    out.terms.total = out.terms.data + lambda * out.terms.physics;

    out.gradient.assign(model.parameters().size(), 0.0);
    std::span<double> grad(out.gradient);
    for (std::size_t k = 0; k < d; ++k) {
        const auto slots = model.network_slots(k);
        passes[k].backward(grads[k].value, grads[k].d1, grads[k].d2, grad.subspan(slots.offset, slots.count));
    }
    if (tucker) {
        const auto slots = model.core_slots();
        const auto src = core_grad.data();
        for (std::size_t i = 0; i < slots.count; ++i) grad[slots.offset + i] += src[i];
    }
    return out;
}

// ---------------------------------------------------------------------------

ad::Var loss(ad::Tape& tape, const SeparatedModel& model, const PDEProblem* problem,
             const CollocationLattice& lattice, double lambda) {
    using ad::Var;
    const ModelSpec& spec = model.spec();
    const std::size_t d = spec.dim;
    if (lattice.points.size() != d) throw DimensionError("lattice dimension does not match model");

    const std::vector<Var> params = tape.parameters(model.parameters());
    const std::span<const Var> all(params);

    std::vector<BasicFactorMatrix<Var>> value, first, second;
    for (std::size_t k = 0; k < d; ++k) {
        const auto slots = model.network_slots(k);
        const auto& cfg = spec.networks[k];
        const std::size_t n = lattice.points[k].size();
        BasicFactorMatrix<Var> v(n, cfg.output_width), d1(n, cfg.output_width), d2(n, cfg.output_width);
        for (std::size_t i = 0; i < n; ++i) {
            const auto rows = forward_jet<Var>(cfg, all.subspan(slots.offset, slots.count), lattice.points[k][i]);
            for (std::size_t c = 0; c < cfg.output_width; ++c) {
                v(i, c) = rows.value[c];
                d1(i, c) = rows.d1[c];
                d2(i, c) = rows.d2[c];
            }
        }
        value.push_back(std::move(v));
        first.push_back(std::move(d1));
        second.push_back(std::move(d2));
    }
    BasicCoreTensor<Var> core;
    if (spec.kind == Decomposition::Tucker) {
        const auto slots = model.core_slots();
        core = BasicCoreTensor<Var>(model.core_shape(),
                                    std::vector<Var>(params.begin() + static_cast<std::ptrdiff_t>(slots.offset),
                                                     params.begin() + static_cast<std::ptrdiff_t>(slots.offset + slots.count)));
    }

    auto substituted = [&](std::size_t axis, int order) {
        auto factors = value;
        if (order == 1) factors[axis] = first[axis];
        if (order == 2) factors[axis] = second[axis];
        return parts_from_factors<Var>(spec, std::move(factors), core);
    };
    const auto value_parts = parts_from_factors<Var>(spec, value, core);

    Var physics(0.0);
    std::vector<double> x;
    if (problem && lattice.physics_points > 0) {
        std::vector<DecompositionParts<Var>> d1_parts(d), d2_parts(d);
        std::vector<bool> need1(d, false), need2(d, false);
        for (const auto& term : problem->terms) (term.order == 1 ? need1 : need2)[term.axis] = true;
        for (std::size_t k = 0; k < d; ++k) {
            if (need1[k]) d1_parts[k] = substituted(k, 1);
            if (need2[k]) d2_parts[k] = substituted(k, 2);
        }
        std::vector<Var> f1(d, Var(0.0)), f2(d, Var(0.0));
        for_each_index(lattice.interior, [&](std::size_t, std::span<const std::size_t> idx) {
            gather_point(lattice.points, idx, x);
            const Var u = problem->uses_value() ? pointwise_oracle(value_parts, idx) : Var(0.0);
            for (std::size_t k = 0; k < d; ++k) {
                if (need1[k]) f1[k] = pointwise_oracle(d1_parts[k], idx);
                if (need2[k]) f2[k] = pointwise_oracle(d2_parts[k], idx);
            }
            const Var r = problem->residual_at<Var>(u, f1, f2, x);
            physics = physics + r * r;
        });
        physics = physics * Var(1.0 / static_cast<double>(lattice.physics_points));
    }

    Var data(0.0);
    if (lattice.data_points > 0) {
        for (const auto& blk : lattice.data) {
            for_each_index(blk.block, [&](std::size_t flat, std::span<const std::size_t> idx) {
                const Var diff = pointwise_oracle(value_parts, idx) - Var(blk.targets[flat]);
                data = data + diff * diff;
            });
        }
        data = data * Var(1.0 / static_cast<double>(lattice.data_points));
    }
    return data + Var(lambda) * physics;
}

ad::Var loss(ad::Tape& tape, const SeparatedModel& model, const PDEProblem& problem, const AxisPoints& axis_points,
             double lambda) {
    const auto lattice = CollocationLattice::for_problem(problem, axis_points);
    return loss(tape, model, &problem, lattice, lambda);
}

// ---------------------------------------------------------------------------

double evaluate_relative_l2(const SeparatedModel& model, const PDEProblem& problem, const Shape& test_grid) {
    const Shape grid = test_grid.empty() ? default_test_grid(problem.dim) : test_grid;
    const auto axes = uniform_axis_points(problem.domain, grid);
    return relative_l2(model_values(model, axes), exact_grid(problem, axes));
}

TrainReport train(SeparatedModel& model, const PDEProblem& problem, const TrainConfig& config,
                  const TrainObserver& observer) {
    config.validate();
    if (model.dim() != problem.dim) throw DimensionError("model and problem dimensions differ");

    TrainReport report;
    report.config = config;
    if (report.config.test_grid.empty()) report.config.test_grid = default_test_grid(problem.dim);
    report.problem = problem.name;
    report.kind = model.spec().kind;
    report.warnings = problem.warnings;

    const auto test_axes = uniform_axis_points(problem.domain, report.config.test_grid);
    const DenseTensor truth = exact_grid(problem, test_axes);
    report.initial_relative_l2 = relative_l2(model_values(model, test_axes), truth);

    Rng rng(derive_seed(config.seed, 0x5a3c));
    auto lattice = CollocationLattice::for_problem(problem, sample_axis_points(problem, config.points_per_axis, rng));
    report.collocation_coordinates = lattice.coordinate_count();
    for (const auto& w : lattice.warnings) report.warnings.push_back(w);

    AdamState adam(model.parameters().size());
    const auto evals_before = instrument::network_point_evaluations();
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t it = 0; it < config.iterations; ++it) {
        if (it > 0 && config.resample_every > 0 && it % config.resample_every == 0)
            lattice = CollocationLattice::for_problem(problem, sample_axis_points(problem, config.points_per_axis, rng));

        const auto lg = loss_and_gradient(model, &problem, lattice, config.lambda);
        if (!std::isfinite(lg.terms.total)) {
            report.diverged = true;
            report.divergence_message = DivergenceError("non-finite loss", it).what();
            break;
        }
        if (it % config.loss_stride == 0) report.loss_curve.push_back({it, lg.terms.total});
        if (observer) observer(it, lg.terms);
        try {
            adam_step(adam, model.parameters(), lg.gradient, config.learning_rate);
        } catch (const DivergenceError& e) {
            report.diverged = true;
            report.divergence_message = e.what();
            break;
        }
        report.iterations_completed = it + 1;
    }
    const auto stop = std::chrono::steady_clock::now();
    report.wall_seconds = std::chrono::duration<double>(stop - start).count();
    const std::size_t passes = report.iterations_completed + (report.diverged ? 1 : 0);
    if (passes > 0)
        report.network_evaluations_per_iteration =
            static_cast<double>(instrument::network_point_evaluations() - evals_before) / static_cast<double>(passes);
    if (report.wall_seconds > 0.0)
        report.iterations_per_second = static_cast<double>(report.iterations_completed) / report.wall_seconds;

    report.final_relative_l2 = relative_l2(model_values(model, test_axes), truth);
    return report;
}

FitReport fit_function(SeparatedModel& model, const AxisPoints& axis_points, const PointFunction& target,
                       std::size_t max_iterations, double learning_rate, double stop_below) {
    if (axis_points.size() != model.dim()) throw DimensionError("axis point lists do not match model dimension");
    const auto lattice = CollocationLattice::for_fit(axis_points, target);
    AdamState adam(model.parameters().size());
    FitReport report;
    for (std::size_t it = 0; it < max_iterations; ++it) {
        const auto lg = loss_and_gradient(model, nullptr, lattice, 0.0);
        report.losses.push_back(lg.terms.data);
        report.final_mse = lg.terms.data;
        if (lg.terms.data < stop_below) return report;
        adam_step(adam, model.parameters(), lg.gradient, learning_rate);
        report.iterations = it + 1;
    }
    report.final_mse = loss_and_gradient(model, nullptr, lattice, 0.0).terms.data;
    return report;
}

GradientCheck check_gradient_fd(const SeparatedModel& model, const PDEProblem* problem,
                                const CollocationLattice& lattice, double lambda, double h) {
    const auto exact = loss_and_gradient(model, problem, lattice, lambda).gradient;
    SeparatedModel probe = model;
    auto params = probe.parameters();
    std::vector<double> fd(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        const double up = loss_and_gradient(probe, problem, lattice, lambda).terms.total;
        params[i] = keep - h;
        const double dn = loss_and_gradient(probe, problem, lattice, lambda).terms.total;
        params[i] = keep;
        fd[i] = (up - dn) / (2.0 * h);
    }
    double scale = 0.0, diff2 = 0.0, norm2 = 0.0;
    for (double v : fd) scale = std::max(scale, std::abs(v));
    GradientCheck out;
    out.parameters = fd.size();
    for (std::size_t i = 0; i < fd.size(); ++i) {
        out.max_relative_error = std::max(out.max_relative_error, relative_difference(exact[i], fd[i], 1e-3 * scale));
        diff2 += (exact[i] - fd[i]) * (exact[i] - fd[i]);
        norm2 += fd[i] * fd[i];
    }
    out.norm_relative_error = norm2 > 0.0 ? std::sqrt(diff2 / norm2) : std::sqrt(diff2);
    return out;
}

RouteComparison compare_gradient_routes(const SeparatedModel& model, const PDEProblem* problem,
                                        const CollocationLattice& lattice, double lambda) {
    const auto fast = loss_and_gradient(model, problem, lattice, lambda);
    ad::Tape tape;
    const ad::Var l = loss(tape, model, problem, lattice, lambda);
    const auto slow = tape.backward(l);
    double scale = 0.0;
    for (double v : fast.gradient) scale = std::max(scale, std::abs(v));
    RouteComparison out;
    for (std::size_t i = 0; i < slow.size(); ++i)
        out.gradient_difference =
            std::max(out.gradient_difference, relative_difference(fast.gradient[i], slow[i], 1e-3 * scale));
    out.loss_difference = relative_difference(fast.terms.total, l.value(), 1e-300);
    return out;
}

}  // namespace septensor
