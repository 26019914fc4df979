"""Distributed delay: the half-interval integral functional and its weights.

The functional (2/delta) int_{-delta}^{-delta/2} u(t+s) ds is discretised by
the composite trapezoidal rule on the grid nodes. Even N puts the endpoint
-delta/2 on the grid; odd N truncates the rule half a cell early and doubles
the last weight. Both variants are second-order accurate, which this demo
measures for the quadrature alone and for the full time integration.
"""

import math

from magnusdde import (
    compatible_polynomial_history,
    make_scalar_problem,
    method_of_steps,
    quadrature_error_order,
    run,
    trapezoid_half_interval_discretization,
)
from magnusdde.delay import DelayWindow

win = DelayWindow(delta=1.0, epsilon=0.5)

print("weights, N=4: ", trapezoid_half_interval_discretization(win, 4).weights)
print("weights, N=6: ", trapezoid_half_interval_discretization(win, 6).weights)
print("weights, N=3 (odd, truncated):",
      trapezoid_half_interval_discretization(win, 3).weights)

# quadrature order on xi(s) = s^2 with the exact value 7/12
errors, orders = quadrature_error_order(win, "trapezoid-half", lambda s: s * s,
                                        7.0 / 12.0, [4, 8, 16, 32])
print("\neven-N quadrature errors on s^2:", ["%.3e" % e for e in errors])
print("observed orders:", ["%.3f" % p for p in orders])

errors, orders = quadrature_error_order(win, "trapezoid-half", lambda s: s * s,
                                        7.0 / 12.0, [3, 5, 9, 17, 33])
print("odd-N quadrature errors on s^2: ", ["%.3e" % e for e in errors])
print("observed orders (odd):", ["%.3f" % p for p in orders])

# end-to-end: u' = -F(past u) u with a compatibilized cubic history
hist = compatible_polynomial_history(win, "trapezoid-half")
prob = make_scalar_problem(1.0, "trapezoid-half", hist, horizon=2.0)
oracle = method_of_steps(win, "trapezoid-half", hist, 2.0)

print("\nfull integration against the method-of-steps reference:")
for label, Ns in (("even", (16, 32, 64, 128)), ("odd", (17, 33, 65, 129))):
    prev_err, prev_N = None, None
    for N in Ns:
        r = run(prob, N)
        err = max(abs(r.states[k][0] - oracle(r.times[k])) for k in range(len(r.states)))
        order = ("order %.3f" % (math.log(prev_err / err) / math.log(N / prev_N))
                 if prev_err else "")
        print("  %-4s N=%4d  err=%.3e  %s" % (label, N, err, order))
        prev_err, prev_N = err, N
