"""Grid-refinement study for the delayed SIR model.

No closed-form solution exists, so the error is measured against the
integrator's own fine-grid trajectory, and that self-reference is sanity
checked by recomputing every error against a twice-finer reference: rows far
below the reference must agree to within 1%. The observed orders approach 2
from below; the history profile is the relaxed one (anchor profile evolved
under the frozen generator), which satisfies the first compatibility
condition exactly.
"""

import os

from magnusdde import (
    ConvergenceStudy,
    EpidemicParams,
    ExpmConfig,
    Grid2D,
    Kernel2D,
    convergence_study,
    make_epidemic_problem,
    telescoping_check,
    write_order_table,
)

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

grid = Grid2D(nx=8, ny=8)
params = EpidemicParams(beta=3.0, gamma=1.0, nu=0.2, mass=1.0,
                        kernel=Kernel2D.normalized(0.5))
prob = make_epidemic_problem(params, grid, "relaxed", mode="point",
                             delta=1.0, horizon=2.0)
cfg = ExpmConfig(tol=1e-12)

study = ConvergenceStudy(problem=prob, N_list=(8, 16, 32, 64), N_ref=512, expm_cfg=cfg)
table = convergence_study(study)
for r in table.rows:
    print("N=%3d  tau=%.5f  error=%.4e  order=%s"
          % (r.N, r.tau, r.error, "%.3f" % r.order if r.order == r.order else "-"))
write_order_table(os.path.join(OUT, "epidemic_orders.csv"), table)

print("\nreference sanity (errors vs N_ref=512 and 1024):")
for row in telescoping_check(prob, (8, 16, 32, 64), 512, cfg):
    print("  N=%3d  rel diff %.3f%%  %s"
          % (row["N"], 100 * row["rel_diff"],
             "enforced <= 1%" if row["enforced"] else "reported only"))
print("\nwrote", os.path.join(OUT, "epidemic_orders.csv"))
