"""Nested SD(1, beta sqrt(dt)) call on the tree against its dividend-yield limit."""
from _common import out_path, write_csv
from nestedrisk.lattice import convergence_study

rows = convergence_study(1.0, 1.2, 0.03, 0.15, 1.0, 0.5, [25, 50, 100, 200, 400, 800, 1600, 3200, 6400], threads=4)
write_csv(out_path("fig_convergence.csv"), ["n", "dt", "bid", "ask", "reference", "abs_error"],
          [(r.n, r.dt, r.bid, r.ask, r.reference, r.abs_error) for r in rows])
