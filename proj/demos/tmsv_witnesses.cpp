// Witness battery for the two-mode squeezed vacuum over a few squeezing values.
#include "phasewitness.hpp"

#include <cstdio>

using namespace phasewitness;

int main() {
  const NonLocalFrame frame = NonLocalFrame::unit();
  std::printf("%-8s %12s %12s %12s %12s %12s\n", "lambda", "wehrl", "renyi(5)", "detv", "dgcz", "mgvt");
  for (double lambda : {0.1, 1.0 / 3.0, 2.0 / 3.0, 0.9}) {
    const Density2D q = tmsv_husimi(lambda, frame);
    std::printf("%-8.4f", lambda);
    for (const WitnessId& id : {WitnessId::wehrl(), WitnessId::renyi(5), WitnessId::detv(), WitnessId::dgcz(),
                                WitnessId::mgvt()})
      std::printf(" %12.6f", evaluate_witness(q, id, frame).value);
    std::printf("\n");
  }
  return 0;
}
