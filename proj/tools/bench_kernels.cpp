// Times the OpenMP kernels against their serial reference and checks the
// results stay bit-identical.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "gnom/common.hpp"
#include "gnom/kernels.hpp"
#include "gnom/sparse.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<double> random_buf(size_t n, gnom::Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Case {
    const char* name;
    double ref_ms;
    double omp_ms;
    bool identical;
};

template <typename RefFn, typename OmpFn>
Case time_pair(const char* name, size_t out_size, int reps, RefFn ref, OmpFn omp_fn) {
    std::vector<double> out_ref(out_size), out_omp(out_size);
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) ref(out_ref.data());
    double ref_ms = ms_since(t0) / reps;
    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) omp_fn(out_omp.data());
    double omp_ms = ms_since(t0) / reps;
    return {name, ref_ms, omp_ms, bit_equal(out_ref, out_omp)};
}

}  // namespace

int main(int argc, char** argv) {
    int reps = argc > 1 ? std::atoi(argv[1]) : 5;
    gnom::Rng rng(12345);

    std::vector<Case> cases;

    for (int n : {64, 256, 512}) {
        auto a = random_buf(static_cast<size_t>(n) * n, rng);
        auto b = random_buf(static_cast<size_t>(n) * n, rng);
        std::string label = "matmul " + std::to_string(n) + "^3";
        static std::vector<std::string> labels;
        labels.push_back(label);
        cases.push_back(time_pair(
            labels.back().c_str(), static_cast<size_t>(n) * n, reps,
            [&](double* out) { gnom::kernels::ref::matmul(a.data(), b.data(), out, n, n, n); },
            [&](double* out) { gnom::kernels::matmul(a.data(), b.data(), out, n, n, n); }));
    }

    {
        // training-shaped: [2000,64] x [64,64]
        int m = 2000, k = 64, n = 64;
        auto a = random_buf(static_cast<size_t>(m) * k, rng);
        auto b = random_buf(static_cast<size_t>(n) * k, rng);
        cases.push_back(time_pair(
            "matmul_nt 2000x64x64", static_cast<size_t>(m) * n, reps,
            [&](double* out) { gnom::kernels::ref::matmul_nt(a.data(), b.data(), out, m, k, n); },
            [&](double* out) { gnom::kernels::matmul_nt(a.data(), b.data(), out, m, k, n); }));
    }

    {
        // sparse propagation over a ring-with-chords graph
        int n = 4000, d = 64;
        gnom::SparseMatrix s(n, n);
        for (int i = 0; i < n; ++i) {
            s.accumulate(i, (i + 1) % n, 0.3);
            s.accumulate(i, (i + 7) % n, 0.2);
            s.accumulate(i, i, 0.5);
        }
        s.finalize();
        gnom::Csr csr = gnom::Csr::from(s);
        auto x = random_buf(static_cast<size_t>(n) * d, rng);
        cases.push_back(time_pair(
            "spmm 4000 nodes d=64", static_cast<size_t>(n) * d, reps,
            [&](double* out) { gnom::kernels::ref::spmm(csr, x.data(), out, d); },
            [&](double* out) { gnom::kernels::spmm(csr, x.data(), out, d); }));
    }

    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    std::printf("kernel benchmark, %d OpenMP threads, %d reps\n", threads, reps);
    std::printf("%-24s %12s %12s %9s %6s\n", "kernel", "serial(ms)", "openmp(ms)", "speedup", "bits");
    bool all_ok = true;
    for (const auto& c : cases) {
        std::printf("%-24s %12.3f %12.3f %8.2fx %6s\n", c.name, c.ref_ms, c.omp_ms,
                    c.ref_ms / (c.omp_ms > 0 ? c.omp_ms : 1e-9), c.identical ? "equal" : "DIFF");
        all_ok = all_ok && c.identical;
    }
    return all_ok ? 0 : 1;
}
