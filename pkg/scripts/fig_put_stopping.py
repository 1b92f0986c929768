"""Put exercise boundaries L(t) for bid and ask at several risk levels (S0=K=1, r=0.03, sigma=0.15, T=1)."""
from _common import out_path, write_csv
from nestedrisk.american import AmerParams, solve_american
from nestedrisk.pdesolve import Grid

grid = Grid(0.0, 3.0, 300, 300)
rows = []
for s in (0.0, 0.1, 0.2, 0.3):
    p = AmerParams(1.0, 1.0, 0.03, 0.15, 0.0, 1.0, s, "put")
    _, bid = solve_american(p, "bid", grid)
    _, ask = solve_american(p, "ask", grid)
    rows += [(s, float(t), float(lb), float(la)) for t, lb, la in zip(bid.times, bid.levels, ask.levels)]
write_csv(out_path("fig_put_stopping.csv"), ["s_rho", "t", "L_bid", "L_ask"], rows)
