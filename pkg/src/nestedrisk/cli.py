"""Command-line front end: prices, stopping boundaries, Merton curves, convergence tables.

Every subcommand builds a table (header plus rows) and writes it as CSV or
JSON. Settings come from defaults, then an optional ``--config`` file
(flat key=value lines or a JSON object), then explicit flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .errors import SolverError, ValidationError

EXIT_OK, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2
FLOAT_FMT = "%.12g"


def _floats(text) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text) -> List[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _flag(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"expected a boolean, got {text!r}")


# name -> (converter, default, help). Names double as config-file keys.
MARKET = {
    "K": (float, 1.2, "strike"),
    "r": (float, 0.03, "risk-free rate"),
    "sigma": (float, 0.15, "volatility"),
    "T": (float, 1.0, "maturity"),
    "s_rho": (float, 0.0, "risk coefficient s_rho"),
    "spot": (float, 1.0, "spot price"),
}

COMMANDS: Dict[str, Dict[str, tuple]] = {
    "euro": {
        **MARKET,
        "method": (str, "closed", "closed or pde"),
        "spots": (_floats, None, "comma-separated spot sweep"),
        "s_grid": (_floats, None, "comma-separated s_rho sweep"),
        "nx": (int, 400, "PDE space nodes"),
        "nt": (int, 400, "PDE time steps"),
    },
    "amer": {
        **MARKET,
        "K": (float, 1.0, "strike"),
        "kind": (str, "put", "call or put"),
        "nx": (int, 300, "space nodes"),
        "nt": (int, 300, "time steps"),
        "method": (str, "psor", "psor or penalty"),
        "table": (str, "boundary", "boundary or values"),
        "s_grid": (_floats, None, "s_rho sweep for the value table"),
        "tolerance": (float, 1e-6, "exercise detection tolerance"),
    },
    "tree": {
        **MARKET,
        "kind": (str, "call", "call or put"),
        "n": (int, 100, "tree steps"),
        "measure": (str, "semideviation", "expectation, semideviation or avar"),
        "order": (float, 1.0, "semi-deviation order p"),
        "beta": (float, 0.5, "semi-deviation level beta"),
        "alpha": (float, 0.1, "AVaR level"),
        "undiscounted": (_flag, False, "drop the per-step discount"),
    },
    "merton": {
        "r": (float, 0.01, "risk-free rate"),
        "mu": (float, 0.1, "risky drift"),
        "sigma": (float, 0.3, "volatility"),
        "gamma": (float, 0.4, "relative risk aversion"),
        "epsilon": (float, 0.1, "terminal payout weight"),
        "T": (float, 4.0, "horizon"),
        "w0": (float, 1.0, "initial wealth"),
        "variant": (str, "paper", "paper or drift_shift"),
        "points": (int, 31, "number of s_rho grid points below (mu - r)/sigma"),
        "report": (str, None, "path for the JSON variant adjudication report"),
    },
    "converge": {
        "S0": (float, 1.0, "spot"),
        "K": (float, 1.2, "strike"),
        "r": (float, 0.03, "risk-free rate"),
        "sigma": (float, 0.15, "volatility"),
        "T": (float, 1.0, "maturity"),
        "beta": (float, 0.5, "semi-deviation level"),
        "n": (_ints, [100, 400, 1600, 6400], "comma-separated step counts"),
    },
    "selftest": {
        "trials": (int, 200, "random cases per axiom check"),
    },
}


@dataclass
class RunConfig:
    command: str
    values: Dict[str, Any]
    out: Optional[str] = None
    fmt: str = "csv"
    seed: int = 0
    threads: int = 1

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None


@dataclass
class Table:
    header: List[str]
    rows: List[Sequence[Any]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % v
    return v


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return float(FLOAT_FMT % v) if math.isfinite(v) else None
    return v


def render(table: Table, fmt: str) -> str:
    if fmt == "json":
        rows = [dict(zip(table.header, map(_json_value, r))) for r in table.rows]
        return json.dumps(rows, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.header)
    for r in table.rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def load_config(path: str) -> Dict[str, str]:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValidationError("JSON config must be an object")
        return {k.replace("-", "_"): v for k, v in data.items()}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def resolve(command: str, flags: Dict[str, Any], config: Dict[str, Any]) -> Dict[str, Any]:
    """Defaults < config file < flags, each value passed through its converter."""
    spec = COMMANDS[command]
    unknown = sorted(set(config) - set(spec) - {"out", "format", "seed", "threads"})
    if unknown:
        raise ValidationError(f"unknown config keys for {command}: {', '.join(unknown)}")
    values = {}
    for name, (conv, default, _) in spec.items():
        raw = flags.get(name, config.get(name, default))
        if raw is None:
            values[name] = None
            continue
        try:
            values[name] = conv(raw)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad value for {name}: {raw!r} ({exc})") from None
    return values


def cmd_price_euro(cfg: RunConfig) -> Table:
    from .closedform import EuroParams, option_value
    from .pdesolve import Grid, solve_european

    if cfg.method not in ("closed", "pde"):
        raise ValidationError(f"method must be 'closed' or 'pde', got {cfg.method!r}")
    spots = cfg.spots or [cfg.spot]
    s_grid = cfg.s_grid or [cfg.s_rho]
    table = Table(["x", "s_rho", "call_bid", "call_ask", "put_bid", "put_ask"])
    for s in s_grid:
        if cfg.method == "closed":
            for x in spots:
                p = EuroParams(x, cfg.K, cfg.r, cfg.sigma, 0.0, cfg.T, s)
                vals = [float(option_value(p, k, side)) for k in ("call", "put") for side in ("bid", "ask")]
                table.rows.append((x, s, *vals))
        else:
            p = EuroParams(spots[0], cfg.K, cfg.r, cfg.sigma, 0.0, cfg.T, s)
            grid = Grid(0.0, max(3.0 * cfg.K, 2.0 * max(spots)), cfg.nx, cfg.nt)
            sols = [solve_european(p, k, side, grid) for k in ("call", "put") for side in ("bid", "ask")]
            for x in spots:
                table.rows.append((x, s, *[float(sol.at(0.0, x)) for sol in sols]))
    first = table.rows[0]
    table.summary = {
        "call_bid": first[2], "call_ask": first[3], "call_spread": first[3] - first[2],
        "put_bid": first[4], "put_ask": first[5], "put_spread": first[5] - first[4],
    }
    return table


def cmd_price_amer(cfg: RunConfig) -> Table:
    from .american import AmerParams, boundary_table, solve_american, value_curve
    from .pdesolve import Grid

    grid = Grid(0.0, 3.0 * cfg.K, cfg.nx, cfg.nt)
    p = AmerParams(cfg.spot, cfg.K, cfg.r, cfg.sigma, 0.0, cfg.T, cfg.s_rho, cfg.kind)
    if cfg.table == "values":
        rows = value_curve(p, cfg.s_grid or [cfg.s_rho], grid)
        return Table(["s_rho", "bid", "ask"], rows, {"bid": rows[0][1], "ask": rows[0][2]})
    if cfg.table != "boundary":
        raise ValidationError(f"table must be 'boundary' or 'values', got {cfg.table!r}")
    bid, b_bid = solve_american(p, "bid", grid, cfg.method, tolerance=cfg.tolerance)
    ask, b_ask = solve_american(p, "ask", grid, cfg.method, tolerance=cfg.tolerance)
    return Table(
        ["t", "L_bid", "L_ask"],
        boundary_table(b_bid, b_ask),
        {
            "bid": float(bid.at(0.0, cfg.spot)),
            "ask": float(ask.at(0.0, cfg.spot)),
            "early_exercise_bid": b_bid.early_region_nonempty(),
            "early_exercise_ask": b_ask.early_region_nonempty(),
        },
    )


def cmd_price_tree(cfg: RunConfig) -> Table:
    from .lattice import build_tree, call_payoff, price_nested, put_payoff
    from .riskcore import RiskSpec

    if cfg.measure == "expectation":
        measure = RiskSpec.expectation()
    elif cfg.measure == "semideviation":
        measure = RiskSpec.semideviation(cfg.order, cfg.beta)
    elif cfg.measure == "avar":
        measure = RiskSpec.avar(cfg.alpha)
    else:
        raise ValidationError(f"unknown measure {cfg.measure!r}")
    if cfg.kind not in ("call", "put"):
        raise ValidationError(f"kind must be 'call' or 'put', got {cfg.kind!r}")
    payoff = call_payoff(cfg.K) if cfg.kind == "call" else put_payoff(cfg.K)
    tree = build_tree(cfg.spot, cfg.r, cfg.sigma, cfg.T, cfg.n)
    disc = not cfg.undiscounted
    bid = price_nested(tree, measure, payoff, "bid", disc).value
    ask = price_nested(tree, measure, payoff, "ask", disc).value
    return Table(["n", "measure", "bid", "ask"], [(cfg.n, measure.label(), bid, ask)], {"bid": bid, "ask": ask})


def cmd_merton(cfg: RunConfig) -> Table:
    from .merton import MertonParams, adjudication_json, consumption_curve, default_s_grid

    p = MertonParams(cfg.r, cfg.mu, cfg.sigma, cfg.gamma, cfg.epsilon, 0.0, cfg.T, cfg.w0)
    rows = consumption_curve(p, default_s_grid(p, cfg.points), cfg.variant)
    if cfg.report:
        with open(cfg.report, "w") as fh:
            fh.write(adjudication_json(p) + "\n")
    return Table(["s_rho", "consumption", "pi_star"], rows, {"s_max": p.s_max})


def cmd_converge(cfg: RunConfig) -> Table:
    from .lattice import convergence_study

    rows = convergence_study(cfg.S0, cfg.K, cfg.r, cfg.sigma, cfg.T, cfg.beta, cfg.n, threads=cfg.threads)
    return Table(
        ["n", "dt", "bid", "ask", "reference", "abs_error"],
        [(r.n, r.dt, r.bid, r.ask, r.reference, r.abs_error) for r in rows],
    )


def selftest_report(seed: int, trials: int = 200) -> Dict[str, Any]:
    """Oracle agreement checks; deterministic in ``seed`` and free of timings."""
    from .closedform import EuroParams, call_value, put_value
    from .lattice import build_tree, call_payoff, nested_wiener_value, price_nested, put_payoff
    from .merton import MertonParams, hjb_residual, ode_check
    from .oracle import SeededSampler, bs_reference, enumerate_nested, mc_nested_wiener
    from .riskcore import RiskSpec, axiom_report, gaussian_semideviation, s_rho

    checks = []

    def record(name, value, tol):
        checks.append({"name": name, "value": float(FLOAT_FMT % value), "tolerance": tol, "passed": bool(value <= tol)})

    record("s_rho_p1", abs(s_rho(1.0, 0.5) - 0.5 / math.sqrt(2 * math.pi)), 1e-12)
    record("s_rho_p2_quadrature", abs(s_rho(2.0, 1.0) - gaussian_semideviation(2.0, 1.0)), 1e-10)

    rng = SeededSampler(seed).generator()
    worst = 0.0
    for _ in range(5):
        tree = build_tree(rng.uniform(0.8, 1.2), rng.uniform(0.0, 0.05), rng.uniform(0.1, 0.4), 1.0, int(rng.integers(1, 9)))
        K = rng.uniform(0.8, 1.2)
        measure = RiskSpec.semideviation(float(rng.choice([1.0, 2.0])), rng.uniform(0.0, 1.0))
        for payoff in (call_payoff(K), put_payoff(K)):
            for side in ("bid", "ask"):
                worst = max(worst, abs(price_nested(tree, measure, payoff, side).value - enumerate_nested(tree, measure, payoff, side)))
    record("lattice_vs_enumeration", worst, 1e-10)

    worst = 0.0
    for x in (0.8, 1.0, 1.3):
        p = EuroParams(x, 1.2, 0.03, 0.15, 0.0, 1.0, 0.2)
        worst = max(worst, abs(float(call_value(p, "ask")) - bs_reference(x, 1.2, 0.03, -0.03, 0.15, 1.0, "call")))
        worst = max(worst, abs(float(put_value(p, "bid")) - bs_reference(x, 1.2, 0.03, -0.03, 0.15, 1.0, "put")))
    record("closed_form_vs_reference", worst, 1e-12)

    est, se = mc_nested_wiener(1.0, 4, 1.0, 0.5, 20_000, seed)
    exact = nested_wiener_value(1.0, 4, 1.0, [0.5] * 4)
    record("mc_nested_wiener_z", abs(est - exact) / se, 3.0)

    for measure in (RiskSpec.expectation(), RiskSpec.semideviation(1.0, 0.5), RiskSpec.semideviation(2.0, 0.3), RiskSpec.avar(0.1)):
        rep = axiom_report(measure, trials=trials, seed=seed)
        record(f"axioms_{measure.label()}", max(r.worst_violation for r in rep.results.values()), 1e-10)

    mp = MertonParams()
    record("merton_ode", ode_check(mp, "paper"), 1e-8)
    record("merton_hjb_s0", max(hjb_residual(mp, v) for v in ("paper", "drift_shift")), 1e-9)

    return {"seed": int(seed), "checks": checks, "all_passed": all(c["passed"] for c in checks)}


def cmd_selftest(cfg: RunConfig) -> Table:
    report = selftest_report(cfg.seed, cfg.trials)
    rows = [(c["name"], c["value"], c["tolerance"], c["passed"]) for c in report["checks"]]
    table = Table(["name", "value", "tolerance", "passed"], rows, {"all_passed": report["all_passed"]})
    table.report = report  # type: ignore[attr-defined]
    return table


HANDLERS: Dict[str, Callable[[RunConfig], Table]] = {
    "euro": cmd_price_euro,
    "amer": cmd_price_amer,
    "tree": cmd_price_tree,
    "merton": cmd_merton,
    "converge": cmd_converge,
    "selftest": cmd_selftest,
}


def _add_options(p: argparse.ArgumentParser, command: str):
    for name, (conv, default, text) in COMMANDS[command].items():
        flag = "--" + name.replace("_", "-")
        if conv is _flag:
            p.add_argument(flag, dest=name, action="store_const", const=True, help=text)
        else:
            p.add_argument(flag, dest=name, help=f"{text} (default: {default})")
    p.add_argument("--config", help="key=value or JSON file; flags take precedence")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), dest="fmt")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nestedrisk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    price = sub.add_parser("price", help="option prices")
    kinds = price.add_subparsers(dest="product", required=True)
    for name, text in (("euro", "European bid/ask"), ("amer", "American bid/ask and stopping boundaries"),
                       ("tree", "nested risk price on a binomial tree")):
        _add_options(kinds.add_parser(name, help=text, argument_default=argparse.SUPPRESS), name)
    for name, text in (("merton", "optimal consumption curve"), ("converge", "lattice convergence table"),
                       ("selftest", "oracle agreement suite")):
        _add_options(sub.add_parser(name, help=text, argument_default=argparse.SUPPRESS), name)
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("product", None) or args.pop("command")
    args.pop("command", None)
    config = load_config(args.pop("config")) if "config" in args else {}
    values = resolve(command, args, config)
    fmt = args.get("fmt", config.get("format", "csv"))
    if fmt not in ("csv", "json"):
        raise ValidationError(f"format must be csv or json, got {fmt!r}")
    threads = int(args.get("threads", config.get("threads", 1)))
    if threads < 1:
        raise ValidationError("threads must be >= 1")
    seed = int(args.get("seed", config.get("seed", 0)))
    if seed < 0:
        raise ValidationError("seed must be nonnegative")
    return RunConfig(command, values, args.get("out", config.get("out")), fmt, seed, threads)


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    table = HANDLERS[cfg.command](cfg)
    if cfg.command == "selftest" and cfg.fmt == "json":
        text = json.dumps(table.report, indent=2, sort_keys=True) + "\n"  # type: ignore[attr-defined]
    else:
        text = render(table, cfg.fmt)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
        for k, v in table.summary.items():
            print(f"{k} = {_fmt(v)}", file=stdout)
    else:
        stdout.write(text)
    if cfg.command == "selftest" and not table.summary["all_passed"]:
        return EXIT_SOLVER
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = parse_config(argv)
        return run(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
