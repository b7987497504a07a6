// Timing comparison between the serial reference kernels and the OpenMP
// versions. Not a test: run it by hand to see what threading buys on a
// given machine.
//
//   ./bench_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "afex/kernels.hpp"
#include "afex/linalg.hpp"
#include "afex/rng.hpp"

using afex::Rng;
using afex::Tensor;
namespace k = afex::kernels;

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
    return t;
}

template <typename F>
double time_ms(int repeats, F&& fn) {
    using clock = std::chrono::steady_clock;
    fn();  // warm-up
    const auto t0 = clock::now();
    for (int r = 0; r < repeats; ++r) fn();
    const auto t1 = clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled; both columns run the same code\n");
#endif

    Rng rng(7);
    const Tensor a = random_tensor(rng, {1000, 300});
    const Tensor b = random_tensor(rng, {300, 400});
    const Tensor big = random_tensor(rng, {1000, 1105});
    const Tensor v = random_tensor(rng, {300});
    Tensor out;

    report("gemm 1000x300x400",
           time_ms(repeats, [&] { k::serial::gemm(a, b, out); }),
           time_ms(repeats, [&] { k::gemm(a, b, out); }));

    report("gemm_tn 1000x300 squared",
           time_ms(repeats, [&] { k::serial::gemm_tn(a, a, out); }),
           time_ms(repeats, [&] { k::gemm_tn(a, a, out); }));

    report("matvec 1000x300",
           time_ms(repeats * 20, [&] { k::serial::matvec(a, v, out); }),
           time_ms(repeats * 20, [&] { k::matvec(a, v, out); }));

    report("map_tanh 1000x1105",
           time_ms(repeats, [&] { k::serial::map_tanh(big, out); }),
           time_ms(repeats, [&] { k::map_tanh(big, out); }));

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < 300; ++i) {
        for (std::size_t j = i + 1; j < 300; j += 30) pairs.emplace_back(i, j);
    }
    report("column_products",
           time_ms(repeats, [&] { k::serial::column_products(a, pairs, out); }),
           time_ms(repeats, [&] { k::column_products(a, pairs, out); }));

    // qr_decompose parallelizes internally; compare 1 thread vs the default.
    const Tensor tall = random_tensor(rng, {2000, 120});
#ifdef _OPENMP
    const int max_threads = omp_get_max_threads();
    omp_set_num_threads(1);
    const double qr_serial = time_ms(1, [&] { (void)afex::linalg::qr_decompose(tall); });
    omp_set_num_threads(max_threads);
#else
    const double qr_serial = time_ms(1, [&] { (void)afex::linalg::qr_decompose(tall); });
#endif
    report("qr_decompose 2000x120", qr_serial,
           time_ms(1, [&] { (void)afex::linalg::qr_decompose(tall); }));

    return 0;
}
