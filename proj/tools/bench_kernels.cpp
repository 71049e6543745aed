// Compares the serial reference kernels against the OpenMP ones, and times
// the trial loop of a small batch experiment in both execution modes. The
// two paths are bit-identical by construction; this only measures speed.

#include <chrono>
#include <cstdio>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "invlab/harness.hpp"
#include "invlab/rng.hpp"

using namespace invlab;

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch())
        .count();
}

template <typename F>
double time_ms(int reps, F&& fn) {
    fn();  // warm up
    const double start = now_ms();
    for (int i = 0; i < reps; ++i) fn();
    return (now_ms() - start) / reps;
}

void row(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, parallel_ms,
                parallel_ms > 0 ? serial_ms / parallel_ms : 0.0);
}

ExperimentConfig batch_config(int threads) {
    nlohmann::json j = {
        {"schedule",
         {{"num_train_steps", 1000}, {"beta_start", 1e-4}, {"beta_end", 2e-2},
          {"inference_steps", 50}}},
        {"predictor",
         {{"kind", "gm_random"}, {"dim", 8}, {"components", 6}, {"radius", 4.0},
          {"sigma0_sq", 0.05}, {"labels", 2}, {"component_seed", 7}}},
        {"trials", 16},
        {"seed", 99},
        {"conditions", {{"source", 0}, {"target", 1}}},
        {"methods",
         nlohmann::json::array(
             {{{"method", "naive"}},
              {{"method", "spdinv"}, {"max_rounds", 25}, {"delta", 5e-6}, {"eta", 0.2}}})},
    };
    ExperimentConfig cfg = ExperimentConfig::from_json(j);
    cfg.threads = threads;
    return cfg;
}

}  // namespace

int main() {
#ifdef _OPENMP
    const int max_threads = omp_get_max_threads();
    std::printf("openmp enabled, max threads = %d\n", max_threads);
#else
    const int max_threads = 1;
    std::printf("built without openmp; parallel paths run serially\n");
#endif
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    const std::size_t n = 4'000'000;
    Rng rng(12345);
    Vec x = rng.gaussian_vec(n), y = rng.gaussian_vec(n);

    row("dot (4M doubles)",
        time_ms(5, [&] { (void)kernels::serial::dot(x.data(), y.data(), n); }),
        time_ms(5, [&] { (void)kernels::parallel::dot(x.data(), y.data(), n); }));
    row("squared_distance (4M)",
        time_ms(5, [&] { (void)kernels::serial::squared_distance(x.data(), y.data(), n); }),
        time_ms(5, [&] { (void)kernels::parallel::squared_distance(x.data(), y.data(), n); }));
    row("axpby (4M)",
        time_ms(5, [&] { kernels::serial::axpby(0.5, x.data(), 0.999, y.data(), n); }),
        time_ms(5, [&] { kernels::parallel::axpby(0.5, x.data(), 0.999, y.data(), n); }));

    // Trial-level parallelism: the productive axis at laboratory scale.
    const double batch_serial = time_ms(1, [&] { run_experiment(batch_config(1)); });
    const double batch_parallel =
        time_ms(1, [&] { run_experiment(batch_config(max_threads)); });
    row("trial batch (16 inversions)", batch_serial, batch_parallel);
    return 0;
}
