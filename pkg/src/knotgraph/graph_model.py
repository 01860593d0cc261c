"""Single-knot metric graphs: H half-lines, pendants and loops at one vertex."""
from __future__ import annotations

import math
from dataclasses import dataclass, field


class UnsupportedTopologyError(ValueError):
    """The operation does not apply to this graph (e.g. a star graph)."""


@dataclass(frozen=True)
class SingleKnotGraph:
    """General single-knot graph; loops are stored by their total length."""

    half_lines: int
    pendant_lengths: tuple = ()
    loop_lengths: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "pendant_lengths", tuple(float(x) for x in self.pendant_lengths))
        object.__setattr__(self, "loop_lengths", tuple(float(x) for x in self.loop_lengths))
        if int(self.half_lines) != self.half_lines or self.half_lines < 1:
            raise ValueError("a single-knot graph needs at least one half-line")
        if any(not (x > 0 and math.isfinite(x)) for x in self.pendant_lengths + self.loop_lengths):
            raise ValueError("edge lengths must be positive and finite")

    @property
    def P(self) -> int:
        return len(self.pendant_lengths)

    @property
    def L(self) -> int:
        return len(self.loop_lengths)


@dataclass(frozen=True)
class RegularGraph:
    """Every pendant has length ell and every loop length 2*ell."""

    H: int
    P: int
    L: int
    ell: float

    def __post_init__(self) -> None:
        for name in ("H", "P", "L"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer")
            object.__setattr__(self, name, int(v))
        if self.H < 1:
            raise ValueError("a single-knot graph needs at least one half-line")
        if not (self.ell > 0 and math.isfinite(self.ell)):
            raise ValueError("ell must be positive and finite")
        object.__setattr__(self, "ell", float(self.ell))

    @property
    def E(self) -> int:
        """Number of compact edges once every loop is cut at its midpoint."""
        return self.P + 2 * self.L

    @property
    def is_star(self) -> bool:
        return self.E == 0

    def as_general(self) -> SingleKnotGraph:
        return SingleKnotGraph(self.H, (self.ell,) * self.P, (2.0 * self.ell,) * self.L)


@dataclass(frozen=True)
class HalfLineSplit:
    """H_plus half-lines carry phi(x + y), H_minus carry phi(x - y)."""

    H_plus: int
    H_minus: int

    def __post_init__(self) -> None:
        if self.H_plus < 0 or self.H_minus < 0:
            raise ValueError("split counts must be non-negative")

    @property
    def H(self) -> int:
        return self.H_plus + self.H_minus


@dataclass(frozen=True)
class ExistenceVerdict:
    holds: bool
    violating_n: int | None = None
    tanh_sum: float = field(default=0.0, compare=False)


def incidence_index(g: RegularGraph, s: HalfLineSplit) -> float:
    """theta = (H+ - H-)/(P + 2L)."""
    if s.H != g.H:
        raise ValueError(f"split {s} does not match H={g.H}")
    if g.is_star:
        raise UnsupportedTopologyError("star graph: the incidence index is undefined")
    return (s.H_plus - s.H_minus) / g.E


def tanh_sum(g: SingleKnotGraph) -> float:
    return sum(math.tanh(x) for x in g.pendant_lengths) + 2.0 * sum(
        math.tanh(0.5 * x) for x in g.loop_lengths
    )


def existence_condition(g: SingleKnotGraph | RegularGraph, eq_tol: float = 1e-12) -> ExistenceVerdict:
    """Check sum tanh(pendants) + 2 sum tanh(loops/2) != H - 2n for n = 0..floor(H/2)."""
    if isinstance(g, RegularGraph):
        g = g.as_general()
    s = tanh_sum(g)
    for n in range(g.half_lines // 2 + 1):
        if abs(s - (g.half_lines - 2 * n)) <= eq_tol:
            return ExistenceVerdict(False, n, s)
    return ExistenceVerdict(True, None, s)


def violating_lengths(H: int, P: int, L: int) -> list[tuple[float, int]]:
    """Lengths ell of a regular graph at which the tanh condition fails, with n.

    On a regular graph the sum equals (P + 2L) tanh(ell), so the roots are
    ell = artanh((H - 2n)/(P + 2L)) whenever that ratio lies in (0, 1).
    """
    E = P + 2 * L
    out = []
    if E == 0:
        return out
    for n in range(H // 2 + 1):
        r = (H - 2 * n) / E
        if 0.0 < r < 1.0:
            out.append((math.atanh(r), n))
    return sorted(out)


def enumerate_splits(H: int) -> list[HalfLineSplit]:
    """All (H+, H-) with H+ + H- = H, by decreasing H+."""
    if H < 1:
        raise ValueError("H must be at least 1")
    return [HalfLineSplit(hp, H - hp) for hp in range(H, -1, -1)]


def normalize_loops(g: RegularGraph) -> RegularGraph:
    """Cut every loop at its midpoint: L loops become 2L pendants of length ell."""
    return RegularGraph(g.H, g.P + 2 * g.L, 0, g.ell)


def concentration_partition(g: RegularGraph, E0: int) -> tuple[int, int] | None:
    """(P0, L0) with P0 + 2 L0 = E0, P0 <= P and L0 <= L, preferring pendants."""
    for P0 in range(min(g.P, E0), -1, -1):
        rest = E0 - P0
        if rest % 2 == 0 and rest // 2 <= g.L:
            return P0, rest // 2
    return None


def graph_from_dict(doc: dict) -> RegularGraph | SingleKnotGraph:
    """Parse the JSON graph description used by the command line."""
    if not isinstance(doc, dict) or len(doc) != 1:
        raise ValueError('graph document must have exactly one key, "regular" or "general"')
    (kind, body), = doc.items()
    if not isinstance(body, dict):
        raise ValueError("graph body must be an object")
    if kind == "regular":
        allowed = {"H", "P", "L", "ell"}
        extra = set(body) - allowed
        if extra:
            raise ValueError(f"unknown keys in regular graph: {sorted(extra)}")
        missing = allowed - set(body)
        if missing:
            raise ValueError(f"missing keys in regular graph: {sorted(missing)}")
        for k in ("H", "P", "L"):
            if not isinstance(body[k], int) or isinstance(body[k], bool):
                raise ValueError(f"{k} must be an integer")
        return RegularGraph(body["H"], body["P"], body["L"], float(body["ell"]))
    if kind == "general":
        allowed = {"H", "pendants", "loops"}
        extra = set(body) - allowed
        if extra:
            raise ValueError(f"unknown keys in general graph: {sorted(extra)}")
        if "H" not in body:
            raise ValueError("general graph needs H")
        if not isinstance(body["H"], int) or isinstance(body["H"], bool):
            raise ValueError("H must be an integer")
        return SingleKnotGraph(body["H"], tuple(body.get("pendants", ())), tuple(body.get("loops", ())))
    raise ValueError(f'unknown graph kind {kind!r}; expected "regular" or "general"')


def as_regular(g: SingleKnotGraph) -> RegularGraph | None:
    """The regular graph equal to g, if all pendants share a length ell and loops have 2*ell."""
    lengths = list(g.pendant_lengths) + [0.5 * x for x in g.loop_lengths]
    if not lengths:
        return None
    ell = lengths[0]
    if all(abs(x - ell) <= 1e-12 * ell for x in lengths):
        return RegularGraph(g.half_lines, g.P, g.L, ell)
    return None
