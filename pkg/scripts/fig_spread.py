"""Bid-ask spread of the European call and put at x=1 as s_rho grows."""
import numpy as np

from _common import out_path, write_csv
from nestedrisk.closedform import EuroParams, spread_curve

p = EuroParams(1.0, 1.2, 0.03, 0.15, 0.0, 1.0)
grid = np.linspace(0.0, 0.5, 51)
calls = spread_curve(p, grid, "call")
puts = spread_curve(p, grid, "put")
rows = [(c[0], c[1], c[2], c[3], q[1], q[2], q[3]) for c, q in zip(calls, puts)]
write_csv(out_path("fig_spread.csv"), ["s_rho", "call_bid", "call_ask", "call_spread", "put_bid", "put_ask", "put_spread"], rows)
