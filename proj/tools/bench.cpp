// Times the OpenMP kernels against their serial reference implementations.
#include <chrono>
#include <cstdio>

#include "rnff/analysis.hpp"
#include "rnff/ensemble.hpp"
#include "rnff/kaczmarz.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(const char* name, double serial_s, double parallel_s) {
    std::printf("%-28s serial %8.3fs   parallel %8.3fs   speedup %5.2fx\n", name, serial_s,
                parallel_s, serial_s / parallel_s);
}

} // namespace

int main() {
    using namespace rnff;

    const int threads = effective_threads(0);
    std::printf("worker threads: %d\n\n", threads);

    {
        const OperatorFamily family = make_gaussian_hyperplane(16);
        const Vec x0(16, 1.0);
        const RngStream root = RngStream::substream(7, 2);
        const long trials = 200000;
        const int steps = 50;

        auto t0 = Clock::now();
        const auto ref = serial_ref::run_ensemble(family, x0, steps, trials, root);
        const double ts = seconds_since(t0);

        t0 = Clock::now();
        const auto par = run_ensemble(family, x0, steps, trials, root, 0);
        const double tp = seconds_since(t0);

        report("trajectory ensemble", ts, tp);
        std::printf("  E||R_%d||^2: serial %.6e, parallel %.6e\n\n", steps,
                    ref.residual_sq_mean.back(), par.residual_sq_mean.back());
    }

    {
        const auto finite = to_finite_family(make_uniform_coordinate_projection(3));
        Vec x0 = {1.0, 1.0, 1.0};
        const int depth = 13; // 3^13 ~ 1.6M leaves

        auto t0 = Clock::now();
        const auto ref = serial_ref::enumerate_expectation(*finite, x0, depth);
        const double ts = seconds_since(t0);

        t0 = Clock::now();
        const auto par = enumerate_expectation(*finite, x0, depth, 0);
        const double tp = seconds_since(t0);

        report("enumeration oracle", ts, tp);
        std::printf("  E||R_%d||^2: serial %.6e, parallel %.6e\n\n", depth,
                    ref.residual_sq.back(), par.residual_sq.back());
    }

    {
        LinearSystem system;
        const int d = 32;
        for (int i = 0; i < d; ++i) system.rows.push_back(unit_axis(d, i));
        system.rhs.assign(d, 1.0);
        system.x_true = Vec(d, 1.0);
        const Vec x_start(d, 0.0);
        const RngStream root = RngStream::substream(11, 2);
        const long trials = 100000;
        const int steps = 64;

        auto t0 = Clock::now();
        const auto ref =
            serial_ref::kaczmarz_error_ensemble(system, RowSampling::Uniform, x_start, steps,
                                                trials, root);
        const double ts = seconds_since(t0);

        t0 = Clock::now();
        const auto par = kaczmarz_error_ensemble(system, RowSampling::Uniform, x_start, steps,
                                                 trials, root, 0);
        const double tp = seconds_since(t0);

        report("kaczmarz error ensemble", ts, tp);
        std::printf("  E||e_%d||^2: serial %.6e, parallel %.6e\n", steps,
                    ref.error_sq_mean.back(), par.error_sq_mean.back());
    }

    return 0;
}
