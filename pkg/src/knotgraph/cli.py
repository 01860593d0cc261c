"""Command line front end.

    knotgraph classify --p 4 --theta 0 --ell 2
    knotgraph solve --graph tadpole.json --p 4 --split 1,0 --output-dir out
    knotgraph rank --graph fork.json --p 4 --ell 20
    knotgraph sweep --graph fork.json --p 4 --ell-range 0.6 25 --points 50 --output-dir out
    knotgraph portrait --graph tadpole.json --p 4 --split 1,0 --output-dir out
    knotgraph check-existence --graph tadpole.json

Graph files hold {"regular": {"H":..,"P":..,"L":..,"ell":..}} or
{"general": {"H":..,"pendants":[..],"loops":[..]}}.

Exit codes: 0 success, 1 configuration or I/O error, 2 internal
inconsistency, 3 no solution, 4 unsupported topology.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bound_state import (
    CAVEAT,
    InconsistentStateError,
    IntegrationFailure,
    NoCandidateError,
    NoRootError,
    build_core_symmetric,
    classify_monotone,
    rank_candidates,
    soliton_action,
)
from .graph_model import (
    HalfLineSplit,
    RegularGraph,
    SingleKnotGraph,
    UnsupportedTopologyError,
    as_regular,
    existence_condition,
    graph_from_dict,
    incidence_index,
)
from .length_functions import DECREASING, INCREASING
from .scalar_core import Nonlinearity, potential

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INCONSISTENT = 2
EXIT_NO_SOLUTION = 3
EXIT_TOPOLOGY = 4

COMMANDS = ("classify", "solve", "rank", "sweep", "portrait", "check-existence")


class NoSolutionError(RuntimeError):
    pass


@dataclass
class RunConfig:
    command: str
    p: float = 4.0
    graph_path: str | None = None
    theta: float | None = None
    split: tuple | None = None
    ell: float | None = None
    ell_range: tuple | None = None
    points: int = 50
    branch: str | None = None
    index: int = 0
    output_dir: str | None = None
    format: str = "json"
    jobs: int = 1
    overrides: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not (2.0 < self.p <= 10.0):
            raise ValueError("p must lie in (2, 10]")
        if self.command == "classify" and (self.theta is None or self.ell is None):
            raise ValueError("classify needs --theta and --ell")
        if self.command in ("solve", "rank", "sweep", "portrait", "check-existence") and not self.graph_path:
            raise ValueError(f"{self.command} needs --graph")
        if self.command in ("solve", "portrait") and self.split is None:
            raise ValueError(f"{self.command} needs --split")
        if self.command == "sweep":
            if self.ell_range is None:
                raise ValueError("sweep needs --ell-range")
            if not (0 < self.ell_range[0] < self.ell_range[1]):
                raise ValueError("--ell-range needs 0 < min < max")
            if self.points < 2:
                raise ValueError("--points must be at least 2")


# ---------------------------------------------------------------------------
# serialisation


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with insertion-ordered keys and floats at 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# ---------------------------------------------------------------------------
# helpers


def load_graph(path: str) -> RegularGraph | SingleKnotGraph:
    if path == "-":
        doc = json.load(sys.stdin)
    else:
        with open(path) as fh:
            doc = json.load(fh)
    return graph_from_dict(doc)


def _regular(cfg: RunConfig) -> RegularGraph:
    g = load_graph(cfg.graph_path)
    if isinstance(g, SingleKnotGraph):
        reg = as_regular(g)
        if reg is None:
            raise UnsupportedTopologyError("this command needs a regular graph (equal pendants, loops of twice that length)")
        g = reg
    if cfg.ell is not None:
        g = RegularGraph(g.H, g.P, g.L, cfg.ell)
    if g.is_star:
        raise UnsupportedTopologyError("star graph: no compact edges, the incidence index is undefined")
    return g


def _diag_dict(d) -> dict:
    return {
        "nk_residual": d.nk_residual,
        "terminal_slope": d.terminal_slope,
        "hamiltonian_drift": d.hamiltonian_drift,
        "min_value": d.min_value,
        "valid": d.valid,
    }


def _state_dict(st) -> dict:
    return {
        "label": st.label,
        "kind": st.kind,
        "core_symmetric": st.core_symmetric,
        "split": [st.split.H_plus, st.split.H_minus],
        "theta": st.theta,
        "E0": st.E0,
        "z": st.z,
        "y": st.y,
        "b": st.b,
        "action": st.action,
        "action_direct": st.action_direct,
        "diagnostics": _diag_dict(st.diagnostics),
    }


def _graph_dict(g: RegularGraph) -> dict:
    return {"H": g.H, "P": g.P, "L": g.L, "ell": g.ell}


def _report_dict(rep) -> dict:
    return {
        "theta": rep.theta,
        "ell": rep.ell,
        "item": rep.item,
        "description": rep.description,
        "predicted": {
            "constant_solution": rep.predicted["constant"],
            "increasing_count": rep.predicted[INCREASING],
            "decreasing_count": rep.predicted[DECREASING],
        },
        "thresholds": {
            "ell_star_1": rep.thresholds["increasing_theta0"],
            "ell_star_2": rep.thresholds["decreasing"],
        },
        "computed_roots": {
            br: {
                "roots": list(rs.roots),
                "multiplicity_flag": rs.multiplicity_flag,
                "bracketing_grid_size": rs.bracketing_grid_size,
            }
            for br, rs in rep.computed_roots.items()
        },
        "consistent": rep.consistent,
    }


def solve_split(nl: Nonlinearity, g: RegularGraph, split: HalfLineSplit, grid: int = 400):
    """All positive core-symmetric states with this split, plus the classification."""
    theta = incidence_index(g, split)
    rep = classify_monotone(nl, theta, g.ell, grid)
    states = []
    if split.H_plus == split.H_minus:
        st = build_core_symmetric(nl, g, split, 1.0)
        st.label = "constant-core"
        states.append(st)
    for br in (INCREASING, DECREASING):
        rs = rep.computed_roots.get(br)
        if rs is None:
            continue
        for i, z in enumerate(rs.roots):
            st = build_core_symmetric(nl, g, split, z)
            st.label = f"{br} root {i}"
            if st.valid:
                states.append(st)
    return rep, states


def _select(cfg: RunConfig, states: list):
    if cfg.branch:
        want = "constant-core" if cfg.branch == "constant" else cfg.branch
        states = [s for s in states if s.kind == want]
    if not states:
        return None
    if not (0 <= cfg.index < len(states)):
        raise ValueError(f"--index {cfg.index} out of range; {len(states)} states found")
    return states[cfg.index]


def _no_solution_reason(rep, g: RegularGraph) -> str:
    l2 = rep.thresholds["decreasing"]
    if l2 is not None and g.ell < l2:
        return f"ell={g.ell} below ell*_2 = argsinh(|theta|/sqrt(1-theta^2)) = {l2:.6f}"
    return f"no positive state for theta={rep.theta}: {rep.description}"


# ---------------------------------------------------------------------------
# commands


def cmd_classify(cfg: RunConfig) -> tuple[dict, int]:
    nl = Nonlinearity(cfg.p)
    rep = classify_monotone(nl, cfg.theta, cfg.ell, cfg.overrides.get("grid", 400))
    out = {"command": "classify", "p": cfg.p}
    out.update(_report_dict(rep))
    return out, EXIT_OK if rep.consistent else EXIT_INCONSISTENT


def cmd_solve(cfg: RunConfig) -> tuple[dict, int]:
    nl = Nonlinearity(cfg.p)
    g = _regular(cfg)
    split = HalfLineSplit(*cfg.split)
    rep, states = solve_split(nl, g, split, cfg.overrides.get("grid", 400))
    st = _select(cfg, states)
    if st is None:
        raise NoSolutionError(_no_solution_reason(rep, g))
    out = {
        "command": "solve",
        "p": cfg.p,
        "graph": _graph_dict(g),
        "split": [split.H_plus, split.H_minus],
        "theta": incidence_index(g, split),
        "classification": rep.description,
        "selected": _state_dict(st),
        "all_states": [_state_dict(s) for s in states],
        "edges": [pr.edge_id for pr in st.profiles],
    }
    if cfg.output_dir:
        d = Path(cfg.output_dir)
        for pr in st.profiles:
            _write_profile(d / f"edge_{pr.edge_id}.csv", pr)
    return out, EXIT_OK


def _write_profile(path: Path, pr) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u", "uprime"])
        for x, u, v in zip(pr.x, pr.u, pr.slope):
            w.writerow([_fmt_float(float(x)), _fmt_float(float(u)), _fmt_float(float(v))])


def _rank_dict(nl, rep) -> dict:
    s_phi = soliton_action(nl)
    rows = []
    for i, c in enumerate(rep.candidates):
        row = {"rank": i + 1}
        row.update(_state_dict(c.state))
        row["action_over_soliton"] = c.state.action / s_phi
        row["open_flag"] = c.open_flag
        rows.append(row)
    return {
        "command": "rank",
        "p": nl.p,
        "graph": _graph_dict(rep.graph),
        "soliton_action": s_phi,
        "top_core_symmetric": rep.candidates[0].state.core_symmetric,
        "open_reasons": list(rep.open_reasons),
        "caveat": CAVEAT,
        "candidates": rows,
    }


def cmd_rank(cfg: RunConfig) -> tuple[dict, int]:
    nl = Nonlinearity(cfg.p)
    g = _regular(cfg)
    rep = rank_candidates(nl, g, eps=cfg.overrides.get("eps", 0.05), grid_size=cfg.overrides.get("grid", 400))
    return _rank_dict(nl, rep), EXIT_OK


def _sweep_point(args):
    p, H, P, L, ell, eps, grid = args
    nl = Nonlinearity(p)
    try:
        rep = rank_candidates(nl, RegularGraph(H, P, L, ell), eps=eps, grid_size=grid)
    except NoCandidateError:
        return []
    return [(ell, i + 1, c.label, c.state.kind, c.state.action, c.open_flag)
            for i, c in enumerate(rep.candidates)]


def cmd_sweep(cfg: RunConfig) -> tuple[dict, int]:
    g = _regular(cfg)
    lo, hi = cfg.ell_range
    ells = np.linspace(lo, hi, cfg.points)
    eps = cfg.overrides.get("eps", 0.05)
    grid = cfg.overrides.get("grid", 400)
    jobs = [(cfg.p, g.H, g.P, g.L, float(e), eps, grid) for e in ells]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as ex:
            results = list(ex.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    rows = [r for res in results for r in res]
    crossover = None
    prev = None
    for res in results:
        if not res:
            continue
        top_conc = res[0][3] == "concentrated"
        if prev is False and top_conc:
            crossover = res[0][0]
            break
        prev = top_conc
    if cfg.output_dir:
        path = Path(cfg.output_dir) / "sweep.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["ell", "rank", "label", "kind", "action", "open_flag"])
            for ell, rk, lab, kind, act, flag in rows:
                w.writerow([_fmt_float(ell), rk, lab, kind, _fmt_float(act), int(flag)])
    out = {
        "command": "sweep",
        "p": cfg.p,
        "graph": {"H": g.H, "P": g.P, "L": g.L},
        "ell_range": [lo, hi],
        "points": cfg.points,
        "rows": len(rows),
        "concentrated_overtakes_at": crossover,
    }
    return out, EXIT_OK


def portrait_svg(nl: Nonlinearity, orbits: list, size: int = 600) -> str:
    """Phase-plane picture: homoclinic curve plus one polyline per orbit."""
    R = 1.1 * nl.apex

    def px(u, v):
        return (u + R) / (2 * R) * size, (R - v) / (2 * R) * size

    def poly(us, vs, colour, width):
        pts = " ".join(f"{a:.3f},{b:.3f}" for a, b in (px(u, v) for u, v in zip(us, vs)))
        return f'<polyline fill="none" stroke="{colour}" stroke-width="{width}" points="{pts}"/>'

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    x0, y0 = px(0, 0)
    lines.append(f'<line x1="0" y1="{y0:.3f}" x2="{size}" y2="{y0:.3f}" stroke="#999"/>')
    lines.append(f'<line x1="{x0:.3f}" y1="0" x2="{x0:.3f}" y2="{size}" stroke="#999"/>')
    u = np.linspace(0.0, nl.apex, 400)
    v = np.sqrt(np.maximum(2.0 * np.asarray(potential(nl, u)), 0.0))
    lines.append(poly(np.concatenate([u, u[::-1]]), np.concatenate([v, -v[::-1]]), "#bbb", 1))
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    for i, (name, us, vs) in enumerate(orbits):
        lines.append(f"<!-- {name} -->")
        lines.append(poly(us, vs, palette[i % len(palette)], 2))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def cmd_portrait(cfg: RunConfig) -> tuple[dict, int]:
    nl = Nonlinearity(cfg.p)
    g = _regular(cfg)
    split = HalfLineSplit(*cfg.split)
    rep, states = solve_split(nl, g, split, cfg.overrides.get("grid", 400))
    st = _select(cfg, states)
    if st is None:
        raise NoSolutionError(_no_solution_reason(rep, g))
    compact = st.compact_profiles()
    orbits = [(compact[0].edge_id, compact[0].u, compact[0].slope)] if compact else []
    halves = [pr for pr in st.profiles if pr.kind == "half-line"]
    seen = set()
    for pr in halves:
        key = float(pr.u[0]), float(pr.slope[0])
        if key not in seen:
            seen.add(key)
            orbits.append((pr.edge_id, pr.u, pr.slope))
    level_err = max(
        float(np.max(np.abs(-0.5 * pr.slope**2 + np.asarray(potential(nl, pr.u)) - pr.level)))
        for pr in compact
    )
    if cfg.output_dir:
        d = Path(cfg.output_dir)
        _write(d / "portrait.svg", portrait_svg(nl, orbits))
        with open(d / "portrait.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["curve", "u", "uprime"])
            for name, us, vs in orbits:
                for a, b in zip(us, vs):
                    w.writerow([name, _fmt_float(float(a)), _fmt_float(float(b))])
    out = {
        "command": "portrait",
        "p": cfg.p,
        "graph": _graph_dict(g),
        "split": [split.H_plus, split.H_minus],
        "state": _state_dict(st),
        "core_level": compact[0].level if compact else None,
        "max_level_deviation": level_err,
        "axes": [-1.1 * nl.apex, 1.1 * nl.apex],
    }
    return out, EXIT_OK


def cmd_check_existence(cfg: RunConfig) -> tuple[dict, int]:
    g = load_graph(cfg.graph_path)
    if isinstance(g, RegularGraph) and cfg.ell is not None:
        g = RegularGraph(g.H, g.P, g.L, cfg.ell)
    gen = g.as_general() if isinstance(g, RegularGraph) else g
    if gen.P + gen.L == 0:
        raise UnsupportedTopologyError("star graph: the condition involves no compact edges")
    v = existence_condition(gen, cfg.overrides.get("eq_tol", 1e-12))
    verdict = "holds" if v.holds else f"violated, n={v.violating_n}"
    out = {
        "command": "check-existence",
        "H": gen.half_lines,
        "pendants": list(gen.pendant_lengths),
        "loops": list(gen.loop_lengths),
        "tanh_sum": v.tanh_sum,
        "holds": v.holds,
        "violating_n": v.violating_n,
        "verdict": verdict,
    }
    return out, EXIT_OK


HANDLERS = {
    "classify": cmd_classify,
    "solve": cmd_solve,
    "rank": cmd_rank,
    "sweep": cmd_sweep,
    "portrait": cmd_portrait,
    "check-existence": cmd_check_existence,
}


# ---------------------------------------------------------------------------
# argument parsing


def _split_arg(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("split must look like H+,H- (e.g. 1,0)")
    if a < 0 or b < 0:
        raise argparse.ArgumentTypeError("split counts must be non-negative")
    return a, b


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="knotgraph", description="Positive bound states on single-knot metric graphs.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, graph=True):
        sp.add_argument("--p", type=float, default=4.0, help="nonlinearity exponent in (2, 10]")
        if graph:
            sp.add_argument("--graph", dest="graph_path", help="graph JSON file ('-' for stdin)")
            sp.add_argument("--ell", type=float, default=None, help="override the edge length of a regular graph")
        sp.add_argument("--output-dir", default=None)
        sp.add_argument("--grid", type=int, default=400, help="bracketing grid size for root finding")

    sp = sub.add_parser("classify", help="predicted vs computed monotone solutions for (theta, ell)")
    common(sp, graph=False)
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--ell", type=float, required=True)

    for name, hlp in (("solve", "positive core-symmetric state for a split"),
                      ("portrait", "phase-plane picture of a state")):
        sp = sub.add_parser(name, help=hlp)
        common(sp)
        sp.add_argument("--split", type=_split_arg, required=True, help="H+,H-")
        sp.add_argument("--branch", choices=["constant", INCREASING, DECREASING], default=None)
        sp.add_argument("--index", type=int, default=0, help="which state when several exist")

    sp = sub.add_parser("rank", help="candidate states sorted by action")
    common(sp)
    sp.add_argument("--eps", type=float, default=0.05, help="concentration threshold on v(0)")

    sp = sub.add_parser("sweep", help="ranked actions over an ell grid")
    common(sp)
    sp.add_argument("--ell-range", type=float, nargs=2, metavar=("MIN", "MAX"), required=True)
    sp.add_argument("--points", type=int, default=50)
    sp.add_argument("--eps", type=float, default=0.05)
    sp.add_argument("--jobs", type=int, default=1)

    sp = sub.add_parser("check-existence", help="the tanh existence condition")
    sp.add_argument("--graph", dest="graph_path", required=True)
    sp.add_argument("--ell", type=float, default=None)
    sp.add_argument("--p", type=float, default=4.0)
    sp.add_argument("--output-dir", default=None)
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    overrides = {}
    for k in ("grid", "eps"):
        if getattr(ns, k, None) is not None:
            overrides[k] = getattr(ns, k)
    return RunConfig(
        command=ns.command,
        p=ns.p,
        graph_path=getattr(ns, "graph_path", None),
        theta=getattr(ns, "theta", None),
        split=getattr(ns, "split", None),
        ell=getattr(ns, "ell", None),
        ell_range=tuple(ns.ell_range) if getattr(ns, "ell_range", None) else None,
        points=getattr(ns, "points", 50),
        branch=getattr(ns, "branch", None),
        index=getattr(ns, "index", 0),
        output_dir=ns.output_dir,
        jobs=getattr(ns, "jobs", 1),
        overrides=overrides,
    )


def run(cfg: RunConfig) -> tuple[str, int]:
    out, code = HANDLERS[cfg.command](cfg)
    text = dumps(out) + "\n"
    if cfg.output_dir:
        _write(Path(cfg.output_dir) / "summary.json", text)
    return text, code


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        text, code = run(cfg)
    except UnsupportedTopologyError as exc:
        print(f"unsupported topology: {exc}", file=sys.stderr)
        return EXIT_TOPOLOGY
    except (NoSolutionError, NoRootError, NoCandidateError) as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except (InconsistentStateError, IntegrationFailure) as exc:
        print(f"inconsistent: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
