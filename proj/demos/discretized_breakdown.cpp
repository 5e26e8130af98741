// Tile size at which coarse-grained witnesses of a weakly squeezed state stop detecting.
#include "phasewitness.hpp"

#include <cstdio>

using namespace phasewitness;

int main(int argc, char** argv) {
  const double lambda = argc > 1 ? std::atof(argv[1]) : 0.1;
  const NonLocalFrame frame = NonLocalFrame::unit();
  const Density2D q = tmsv_husimi(lambda, frame);

  const double wehrl = detection_range(q, 1.0, frame);
  const double detv =
      delta_break([&](double d) { return regular_discretized_value(q, WitnessId::detv(), d, frame); });
  const double renyi = delta_break([&](double d) { return optimal_renyi_discretized(q, d, frame).first; });
  const BestBeta best = best_beta_for_range(q, frame);

  std::printf("lambda = %.3f\n", lambda);
  std::printf("  detv           breaks at delta = %.4f\n", detv);
  std::printf("  wehrl          breaks at delta = %.4f\n", wehrl);
  std::printf("  renyi (opt)    breaks at delta = %.4f\n", renyi);
  std::printf("  single beta    %.3f reaches delta = %.4f\n", best.beta, best.range);
  return 0;
}
