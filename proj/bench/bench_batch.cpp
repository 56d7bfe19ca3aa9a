// Times the parallel batch kernel against the serial reference on the
// bivariate model and checks that both produce the same draws.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include <omp.h>

#include "lgm/models.hpp"
#include "lgm/samplers.hpp"

using namespace lgm;

namespace {

double time_once(const std::function<void()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 2000;
  const Dataset data = simulate_dataset("bivariate", 7, 60);
  const ModelSetup setup = bivariate_linear_adapter(data);
  const FitterOptions opts;

  int failed = 0;
  std::vector<WeightedSample> ref;
  const double t_serial = time_once([&] {
    ref = sample_batch_serial(setup.target, setup.g0, 0, n, 42, opts, &failed);
  });
  std::printf("%-24s %8.3f s  (%d draws)\n", "serial reference", t_serial, n);

  for (int workers : {2, 4, omp_get_max_threads()}) {
    if (workers <= 1) continue;
    std::vector<WeightedSample> par;
    const double t = time_once([&] {
      int f = 0;
      par = sample_batch(setup.target, setup.g0, 0, n, 42, opts, workers, &f);
    });
    bool same = par.size() == ref.size();
    for (size_t i = 0; same && i < ref.size(); ++i)
      same = par[i].z == ref[i].z && par[i].log_weight == ref[i].log_weight;
    std::printf("%-2d workers               %8.3f s  speedup %5.2fx  %s\n",
                workers, t, t_serial / t, same ? "match" : "MISMATCH");
    if (!same) return 1;
  }
  return 0;
}
