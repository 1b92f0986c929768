"""Initial optimal consumption and risky fraction against s_rho, both nu variants.

Also archives the variant adjudication report next to the CSV.
"""
from _common import out_path, write_csv
from nestedrisk.merton import MertonParams, adjudication_json, consumption_curve, default_s_grid

p = MertonParams(r=0.01, mu=0.1, sigma=0.3, gamma=0.4, epsilon=0.1, T=4.0, w0=1.0)
grid = default_s_grid(p, 31)
paper = consumption_curve(p, grid, "paper")
shift = consumption_curve(p, grid, "drift_shift")
path = out_path("fig_consumption.csv")
write_csv(path, ["s_rho", "consumption", "pi_star", "consumption_drift_shift"],
          [(a[0], a[1], a[2], b[1]) for a, b in zip(paper, shift)])
path.with_name("merton_adjudication.json").write_text(adjudication_json(p) + "\n")
