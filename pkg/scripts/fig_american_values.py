"""American call and put bid/ask values at S0=1 against s_rho."""
import numpy as np

from _common import out_path, write_csv
from nestedrisk.american import AmerParams, value_curve
from nestedrisk.pdesolve import Grid

grid = Grid(0.0, 3.0, 200, 200)
s_grid = np.linspace(0.0, 0.4, 17)
rows = []
for kind in ("call", "put"):
    p = AmerParams(1.0, 1.0, 0.03, 0.15, 0.0, 1.0, 0.0, kind)
    rows += [(kind, s, bid, ask, ask - bid) for s, bid, ask in value_curve(p, s_grid, grid)]
write_csv(out_path("fig_american_values.csv"), ["kind", "s_rho", "bid", "ask", "spread"], rows)
