"""Dynamic programming for the two-term recursion on M(N, a).

    M(N, a) <= A^(2-delta) M(N/(1+c), a - s1(N)) + A^(-delta) M(N, a - s2(N))

with s1 = C1 N log A and either s2 = C1 log N ("statement") or
s2 = C1 N log A ("proof", the default).  N runs over the geometric grid
N0 (1+c)^k so that N/(1+c) is again a node; a runs over a uniform grid.
Shifted arguments falling between a-nodes are rounded down to the node
below: M is nonincreasing in a, so this keeps every entry an upper bound.
Arguments below the grid take the row's tail, the tightest constant bound
for a -> -infinity: T_0 is the boundary there (capped), and iterating the
second term forever gives T_i = min(cap, A^(2-delta) T_(i-1) / (1 - A^(-delta))).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

VARIANTS = ("proof", "statement")
SNAP = 1e-9  # relative tolerance for a shift landing exactly on a node


class RecursionGridError(ValueError):
    """The a-grid cannot resolve the recursion's argument shifts."""


@dataclass
class RecursionState:
    N: np.ndarray
    a: np.ndarray
    M: np.ndarray  # shape (len(N), len(a))
    params: dict
    boundary: str
    variant: str = "proof"
    interpolation: str = "floor"
    notes: list = field(default_factory=list)
    tails: np.ndarray | None = None  # per-row bound for a below the grid

    def value(self, N: float, a: float) -> float:
        """Upper bound on M(N, a) at a grid N, any a (rounded down to a node)."""
        i = int(np.argmin(np.abs(self.N - N)))
        if not math.isclose(self.N[i], N, rel_tol=1e-9):
            raise ValueError(f"N={N} is not a grid node")
        if a < self.a[0]:
            return float(self.params["cap"] if self.tails is None else self.tails[i])
        j = min(int(math.floor((a - self.a[0]) / self.step + SNAP)), len(self.a) - 1)
        return float(self.M[i, j])

    @property
    def step(self) -> float:
        return float(self.a[1] - self.a[0])

    def as_dict(self, stride: int = 1) -> dict:
        return {"N": self.N.tolist(), "a": self.a[::stride].tolist(),
                "tails": None if self.tails is None else self.tails.tolist(),
                "M": self.M[:, ::stride].tolist(), "params": self.params, "boundary": self.boundary,
                "variant": self.variant, "interpolation": self.interpolation, "notes": self.notes}


def base_case_boundary(C: float = 2.0, beta: float = 1.0, N0: float = 10.0) -> Callable:
    """The analytic base-case curve C e^(-beta a / N0)."""
    def curve(N, a):
        return C * np.exp(-beta * np.asarray(a, dtype=float) / N0)
    curve.description = f"{C} exp(-{beta} a / {N0})"
    return curve


def _on_grid(shift: np.ndarray, h: float) -> np.ndarray:
    q = shift / h
    return np.abs(q - np.round(q)) <= SNAP * np.maximum(q, 1)


def _shift_index(shift: np.ndarray, h: float) -> np.ndarray:
    """Number of a-steps to look back, rounding an off-node landing point down."""
    q = shift / h
    return np.where(_on_grid(shift, h), np.round(q), np.ceil(q)).astype(np.int64)


def default_step(params: dict, subdivisions: int = 16) -> float:
    """a-step dividing C1 N0 log A into ``subdivisions`` parts."""
    return float(params["C1"]) * float(params["N0"]) * math.log(float(params["A"])) / subdivisions


def recursion_simulate(params: dict, boundary: Callable, N_range=(10.0, 160.0), a_range=(0.0, 1000.0),
                       a_step: float | None = None, variant: str = "proof",
                       cap: float | None = None) -> RecursionState:
    """Tabulate the tightest M consistent with the recursion and boundary.

    params: A, delta, c, C1 and N0 (default N_range[0]).  Row N0 is the
    boundary curve; every entry is capped by the trivial bound (default:
    content of the unit square at s = delta, 2^(delta/2)), and arguments
    below the grid use the row tails described in the module docstring.  The a-step must
    divide every shift C1 N log A; otherwise the grid is refused.  The
    statement variant's shift C1 log N is rounded down to the node below.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    A, delta, c, C1 = (float(params[k]) for k in ("A", "delta", "c", "C1"))
    N0 = float(params.get("N0", N_range[0]))
    if not (A > 1 and 0 < delta and c > 0 and C1 > 0):
        raise ValueError("need A > 1, delta > 0, c > 0, C1 > 0")
    cap = float(params.get("cap", 2 ** (delta / 2))) if cap is None else float(cap)
    h = default_step({"A": A, "C1": C1, "N0": N0}) if a_step is None else float(a_step)
    kmax = int(math.floor(math.log(N_range[1] / N0) / math.log1p(c) + 1e-9))
    Ns = N0 * (1 + c) ** np.arange(kmax + 1)
    a = a_range[0] + h * np.arange(int(math.floor((a_range[1] - a_range[0]) / h + 1e-9)) + 1)
    s1 = C1 * Ns[1:] * math.log(A)
    s2 = s1 if variant == "proof" else C1 * np.log(Ns[1:])
    if len(s1) and min(s1.min(), s2.min()) < h:
        raise RecursionGridError(f"a-step {h:.6g} exceeds the smallest shift {min(s1.min(), s2.min()):.6g}")
    if not np.all(_on_grid(s1, h)):
        bad = s1[~_on_grid(s1, h)][0]
        raise RecursionGridError(f"a-step {h:.6g} does not divide the shift C1 N log A = {bad:.6g}")
    j1 = _shift_index(s1, h)
    j2 = _shift_index(s2, h)
    w1 = A ** (2 - delta)
    w2 = A ** (-delta)
    M = np.empty((len(Ns), len(a)))
    M[0] = np.minimum(cap, boundary(Ns[0], a))
    tails = np.empty(len(Ns))
    with np.errstate(over="ignore", invalid="ignore"):
        t0 = float(np.asarray(boundary(Ns[0], np.array([-np.inf])), dtype=float).reshape(-1)[0])
    tails[0] = cap if math.isnan(t0) else min(cap, t0)
    for i in range(1, len(Ns)):
        tails[i] = min(cap, w1 * tails[i - 1] / (1 - w2))
        k1, k2 = int(j1[i - 1]), int(j2[i - 1])
        t1 = np.concatenate([np.full(k1, tails[i - 1]), M[i - 1][: max(len(a) - k1, 0)]])[: len(a)]
        row = np.full(len(a), tails[i])
        # row depends on itself k2 steps back: fill in blocks of k2
        for start in range(0, len(a), k2):
            stop = min(start + k2, len(a))
            back = row[start - k2:stop - k2] if start >= k2 else np.full(stop - start, tails[i])
            row[start:stop] = np.minimum(cap, w1 * t1[start:stop] + w2 * back)
        M[i] = row
    notes = []
    if variant == "statement":
        notes.append("second shift uses C1 log N as in the statement; the proof uses C1 N log A")
        if not np.all(_on_grid(s2, h)):
            notes.append("off-node shifts C1 log N rounded down to the node below")
    full = {"A": A, "delta": delta, "c": c, "C1": C1, "N0": N0, "cap": cap, "a_step": h}
    return RecursionState(Ns, a, M, full, getattr(boundary, "description", "custom"), variant, "floor", notes,
                          tails)


def fit_decay(state: RecursionState) -> dict:
    """Fit M(N, a) <= C' e^(-beta' a / N).

    For each row N above the boundary, the least-squares slope of log M in a
    (entries strictly between 0 and the cap) gives a rate beta_N = -N slope.
    beta' is the smallest rate over the rows (boundary row included), and C'
    the smallest constant making the bound hold on every grid point.
    """
    rows = []
    for N, m in zip(state.N, state.M):
        use = (m > 0) & (m < state.params["cap"])
        if use.sum() < 2:
            continue
        slope, intercept = np.polyfit(state.a[use], np.log(m[use]), 1)
        resid = np.log(m[use]) - (intercept + slope * state.a[use])
        rows.append({"N": float(N), "beta": float(-slope * N), "residual": float(np.sqrt(np.mean(resid**2)))})
    if not rows:
        return {"beta": None, "C": None, "rows": rows}
    beta = min(r["beta"] for r in rows)
    x = state.a[None, :] / state.N[:, None]
    with np.errstate(over="ignore"):
        C = float(np.max(state.M * np.exp(beta * x)))
    return {"beta": beta, "C": C, "rows": rows,
            "holds": bool(np.all(state.M <= C * np.exp(-beta * x) * (1 + 1e-12)))}


def induction_replay(A: float, delta: float, c: float, C1: float, beta: float) -> dict:
    """Closed-form check of A^(2-delta) e^(-c beta x) + A^(-delta) <= A^(-C1 beta), x = a0 / N.

    Returns the smallest x for which the inequality holds, or reports that no
    x works (A^(-delta) >= A^(-C1 beta), i.e. C1 beta >= delta).
    """
    target = A ** (-C1 * beta)
    room = target - A ** (-delta)
    if beta <= 0 or room <= 0:
        return {"holds_for_large_a": False, "x_min": None, "target": target,
                "reason": "need beta > 0 and C1 beta < delta"}
    x_min = max(0.0, math.log(A ** (2 - delta) / room) / (c * beta))
    return {"holds_for_large_a": True, "x_min": x_min, "target": target}


def refine_oracle(params: dict, boundary: Callable, N_range, a_range, a_step: float | None = None,
                  factor: int = 4, variant: str = "proof") -> tuple[RecursionState, RecursionState, float]:
    """The DP at a_step and at a_step / factor; returns both and the max relative gap
    on the common nodes."""
    coarse = recursion_simulate(params, boundary, N_range, a_range, a_step, variant)
    fine = recursion_simulate(params, boundary, N_range, a_range, coarse.step / factor, variant)
    sub = fine.M[:, ::factor][:, : coarse.M.shape[1]]
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(coarse.M > 0, np.abs(coarse.M - sub) / coarse.M, 0.0)
    return coarse, fine, float(np.max(rel))
