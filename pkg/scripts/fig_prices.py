"""European bid and ask prices across spots for several risk levels (K=1.2, r=0.03, sigma=0.15, T=1)."""
import numpy as np

from _common import out_path, write_csv
from nestedrisk.closedform import price_grid

rows = price_grid(np.linspace(0.6, 1.8, 121), [0.0, 0.1, 0.2, 0.3], 1.2, 0.03, 0.15, 1.0)
write_csv(out_path("fig_prices.csv"), ["x", "s_rho", "call_bid", "call_ask", "put_bid", "put_ask"], rows)
