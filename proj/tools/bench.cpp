#include <chrono>
#include <cstdio>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "leafnet/kernels.hpp"
#include "leafnet/rng.hpp"
#include "leafnet/tensor.hpp"

using namespace leafnet;

static Tensor random_tensor(Shape shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return t;
}

template <typename F>
static double time_best_of(F&& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (s < best) best = s;
    }
    return best;
}

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::atoi(argv[1]) : 3;
    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    std::printf("kernel benchmark: parallel (%d threads) vs serial reference, best of %d\n",
                threads, reps);
    std::printf("%-34s %12s %12s %8s\n", "case", "parallel(s)", "serial(s)", "speedup");

    Rng rng(42);

    {
        const size_t m = 256, k = 256, n = 256;
        Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
        const double tp = time_best_of([&] { matmul(a, b); }, reps);
        const double ts = time_best_of([&] { ref::matmul(a, b); }, reps);
        std::printf("%-34s %12.4f %12.4f %8.2f\n", "matmul 256x256x256", tp, ts, ts / tp);
    }

    {
        Tensor x = random_tensor({8, 16, 64, 64}, rng);
        Tensor w = random_tensor({32, 16, 3, 3}, rng);
        Tensor b = random_tensor({32}, rng);
        const double tp =
            time_best_of([&] { conv2d_forward(x, w, b, 1, Padding::same); }, reps);
        const double ts =
            time_best_of([&] { ref::conv2d_forward(x, w, b, 1, Padding::same); }, reps);
        std::printf("%-34s %12.4f %12.4f %8.2f\n", "conv2d 8x16x64x64 -> 32f 3x3", tp, ts,
                    ts / tp);
    }

    {
        Tensor x = random_tensor({16, 32, 128, 128}, rng);
        const double tp = time_best_of([&] { maxpool2d_forward(x, 2, 2, 2); }, reps);
        const double ts = time_best_of([&] { ref::maxpool2d_forward(x, 2, 2, 2); }, reps);
        std::printf("%-34s %12.4f %12.4f %8.2f\n", "maxpool 16x32x128x128 2x2/2", tp, ts,
                    ts / tp);
    }

    return 0;
}
