#include <doctest.h>

#include <cmath>

#include "csc/qos.hpp"
#include "queue_validator.hpp"

using namespace csc;
using namespace csc::testing;

TEST_SUITE("queue")
{
  TEST_CASE("queue fed at the effective capacity respects the exponential tail")
  {
    LinkConfig l{1e3, 10.0, 200, 1e-3, 1e-3};
    const double r10 = finite_blocklength_rate(l);
    l.snr = 30.0;
    const double r30 = finite_blocklength_rate(l);
    const std::vector<double> service{r10, r30};
    const double theta = 1e-3;
    const double arrival = empirical_effective_capacity(service, theta);
    REQUIRE(arrival > r10);
    REQUIRE(arrival < 0.5 * (r10 + r30));

    l.snr = 20.0;
    const double lib = effective_capacity(l, two_point_snr(10.0, 30.0, 8, 400000), theta);
    CHECK(std::abs(lib - arrival) / arrival <= 5e-3);

    for (double eps : {0.2, 0.05, 0.01}) {
      const double q = -std::log(eps) / theta;
      const auto tail = queue_tail(service, arrival, q, 2000000, 31);
      INFO("eps = " << eps << ", tail = " << tail.fraction);
      CHECK(tail.fraction <= eps + 3.0 * tail.se);
      CHECK(tail.fraction > 0.0);
    }
  }

  TEST_CASE("the delay bound is the queue threshold divided by the service rate")
  {
    // With deterministic service C the bound -ln(eps)/(theta C) is the time to drain -ln(eps)/theta bits.
    const double C = 4.0774e6;
    const double theta = 1e-3;
    for (double eps : {0.3, 1e-3, 1e-6}) {
      CHECK(max_delay(eps, theta, C) * C == doctest::Approx(-std::log(eps) / theta).epsilon(1e-13));
    }
  }

  TEST_CASE("load below capacity shrinks the tail")
  {
    const std::vector<double> service{3000.0, 5000.0};
    const double theta = 1e-3;
    const double c = empirical_effective_capacity(service, theta);
    const double q = -std::log(0.05) / theta;
    const auto full = queue_tail(service, c, q, 500000, 4);
    const auto light = queue_tail(service, 0.95 * c, q, 500000, 4);
    CHECK(light.fraction < full.fraction);
  }
}
