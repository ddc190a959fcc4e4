"""A small dense linear-programming solver.

The solver implements the bounded-variable primal simplex method on a dense
tableau, with a textbook two-phase start (artificial variables) and a Bland
anti-cycling fallback.  It is written for the moderate problem sizes this
package produces (tens to a few hundred variables) and favours exactness and
determinism over raw speed: solutions are basic, so optimal values such as
line capacities are reproduced bit-for-bit rather than to interior-point
accuracy.

Variables carry individual bounds which may be infinite on either side;
constraints are linear expressions compared to a right-hand side with one of
``<=``, ``=``, ``>=``.  The objective is always maximised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LinearProgram",
    "LpResult",
    "LpError",
    "solve_lp",
    "lp_format",
]

INF = math.inf

_AT_LB = 0
_AT_UB = 1
_FREE = 2
_BASIC = 3


class LpError(RuntimeError):
    """Numerical failure distinct from an infeasible or unbounded model."""


@dataclass
class LinearProgram:
    """A maximisation LP under construction.

    Use :meth:`add_var` to declare variables (returning their index), then
    :meth:`add_constraint` with ``{index: coefficient}`` expressions, and
    :meth:`set_objective`.
    """

    names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    rows: list[dict[int, float]] = field(default_factory=list)
    senses: list[str] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF) -> int:
        if lb > ub:
            raise ValueError(f"variable {name!r} has lb {lb} > ub {ub}")
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        return len(self.names) - 1

    def add_constraint(self, coeffs: dict[int, float], sense: str, rhs: float) -> int:
        if sense not in ("<=", "=", ">="):
            raise ValueError(f"bad sense {sense!r}")
        n = len(self.names)
        for idx in coeffs:
            if not (0 <= idx < n):
                raise ValueError(f"constraint references undeclared variable {idx}")
        self.rows.append({k: float(v) for k, v in coeffs.items() if v != 0.0})
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        return len(self.rows) - 1

    def set_objective(self, coeffs: dict[int, float]) -> None:
        n = len(self.names)
        for idx in coeffs:
            if not (0 <= idx < n):
                raise ValueError(f"objective references undeclared variable {idx}")
        self.objective = {k: float(v) for k, v in coeffs.items()}

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def num_rows(self) -> int:
        return len(self.rows)


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    objective: float | None
    x: np.ndarray | None

    def value(self, idx: int) -> float:
        assert self.x is not None
        return float(self.x[idx])


def lp_format(lp: LinearProgram) -> str:
    """Render the program as a human-readable text listing."""

    def term(coef: float, idx: int) -> str:
        return f"{coef:+g} {lp.names[idx]}"

    out = ["maximize"]
    obj = " ".join(term(c, j) for j, c in sorted(lp.objective.items())) or "0"
    out.append("  " + obj)
    out.append("subject to")
    for row, sense, rhs in zip(lp.rows, lp.senses, lp.rhs):
        expr = " ".join(term(c, j) for j, c in sorted(row.items())) or "0"
        out.append(f"  {expr} {sense} {rhs:g}")
    out.append("bounds")
    for j, name in enumerate(lp.names):
        out.append(f"  {lp.lb[j]:g} <= {name} <= {lp.ub[j]:g}")
    return "\n".join(out)


class _Tableau:
    """Dense simplex working state over the equality standard form."""

    def __init__(self, A: np.ndarray, b: np.ndarray, lb: np.ndarray, ub: np.ndarray):
        self.A = A
        self.b = b
        self.lb = lb
        self.ub = ub
        self.m, self.N = A.shape
        self.stat = np.empty(self.N, dtype=np.int8)
        for j in range(self.N):
            if math.isfinite(lb[j]):
                self.stat[j] = _AT_LB
            elif math.isfinite(ub[j]):
                self.stat[j] = _AT_UB
            else:
                self.stat[j] = _FREE
        self.basis = np.empty(self.m, dtype=np.int64)
        self.T = np.empty((0, 0))
        self.beta = np.empty(0)

    def nonbasic_value(self, j: int) -> float:
        if self.stat[j] == _AT_LB:
            return self.lb[j]
        if self.stat[j] == _AT_UB:
            return self.ub[j]
        return 0.0

    def values(self) -> np.ndarray:
        x = np.array([self.nonbasic_value(j) for j in range(self.N)])
        x[self.basis] = self.beta
        return x

    def set_basis(self, basis: np.ndarray) -> None:
        """Install a basis and rebuild the tableau from scratch."""
        self.basis = basis.copy()
        B = self.A[:, basis]
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise LpError("singular basis") from exc
        self.T = Binv @ self.A
        self.stat[basis] = _BASIC
        self._recompute_beta()

    def _recompute_beta(self) -> None:
        x_n = np.array([self.nonbasic_value(j) for j in range(self.N)])
        x_n[self.basis] = 0.0
        rhs = self.b - self.A @ x_n
        self.beta = np.linalg.solve(self.A[:, self.basis], rhs)

    def refresh(self, strict: bool = True) -> bool:
        """Refactorise to purge accumulated floating-point drift."""
        try:
            self.set_basis(self.basis)
            return True
        except LpError:
            if strict:
                raise
            return False

    def simplex(self, c: np.ndarray, *, eps: float = 1e-11,
                max_iter: int | None = None, allow_unbounded: bool) -> str:
        """Run primal simplex for objective ``c`` (maximise).

        Entering candidates are tried in decreasing reduced-cost order;
        a candidate whose best ratio-test pivot element is too small for a
        stable basis change is skipped, so near-noise reduced costs cannot
        corrupt the factorisation.  Returns "optimal" or "unbounded";
        raises :class:`LpError` when the iteration limit is exceeded.
        """
        m, N = self.m, self.N
        if max_iter is None:
            max_iter = 200 * (m + N) + 2000
        degenerate_streak = 0
        since_refresh = 0
        wedged = 0
        movable = (self.ub - self.lb) > 0.0
        pivot_tol = 1e-8

        for _ in range(max_iter):
            cb = c[self.basis]
            d = c - cb @ self.T
            d[self.basis] = 0.0

            # Entering candidates by status.
            cand_dir = np.zeros(N)
            at_lb = (self.stat == _AT_LB) & movable
            at_ub = (self.stat == _AT_UB) & movable
            free = self.stat == _FREE
            cand_dir[at_lb & (d > eps)] = 1.0
            cand_dir[at_ub & (d < -eps)] = -1.0
            cand_dir[free & (d > eps)] = 1.0
            cand_dir[free & (d < -eps)] = -1.0
            eligible = np.nonzero(cand_dir != 0.0)[0]
            if eligible.size == 0:
                return "optimal"

            if degenerate_streak > 40:  # Bland: lowest index, escape cycling
                order = eligible
            else:
                order = eligible[np.argsort(-np.abs(d[eligible]))]

            lo_b = self.lb[self.basis]
            up_b = self.ub[self.basis]
            feas_window = 1e-9 * np.maximum(
                1.0, np.maximum(np.abs(self.beta),
                                np.where(np.isfinite(lo_b), np.abs(lo_b), 0.0))
            )
            acted = False
            skipped_significant = False
            for j in order[:40]:
                j = int(j)
                direction = cand_dir[j]
                col = self.T[:, j]
                step = direction * col  # basic values move by -step * t

                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.full(m, INF)
                    relaxed = np.full(m, INF)
                    dec = step > 1e-11
                    ratio[dec] = (self.beta[dec] - lo_b[dec]) / step[dec]
                    relaxed[dec] = (self.beta[dec] - lo_b[dec] + feas_window[dec]) / step[dec]
                    inc = step < -1e-11
                    ratio[inc] = (self.beta[inc] - up_b[inc]) / step[inc]
                    relaxed[inc] = (self.beta[inc] - up_b[inc] - feas_window[inc]) / step[inc]
                ratio[~np.isfinite(ratio)] = INF
                relaxed[~np.isfinite(relaxed)] = INF
                ratio = np.maximum(ratio, 0.0)
                relaxed = np.maximum(relaxed, 0.0)

                t_flip = self.ub[j] - self.lb[j] if self.stat[j] != _FREE else INF
                t_pivot = float(np.min(ratio))
                t_relaxed = float(np.min(relaxed))

                if min(t_pivot, t_flip) == INF:
                    if abs(d[j]) <= 1e-7:
                        continue  # a noise-level ray is not proof of unboundedness
                    if allow_unbounded:
                        return "unbounded"
                    raise LpError("unexpected unbounded direction")

                if t_flip <= t_pivot:
                    # Bound flip: the entering variable runs to its other bound.
                    self.beta = self.beta - step * t_flip
                    self.stat[j] = _AT_UB if self.stat[j] == _AT_LB else _AT_LB
                    degenerate_streak = 0
                    acted = True
                    break

                # Harris-style: among rows within the feasibility window of
                # the strict minimum, pick the stablest pivot; step length is
                # that row's own (strict) ratio so bounds stay honoured.
                near = np.nonzero(ratio <= t_relaxed + 1e-15)[0]
                r = int(near[np.argmax(np.abs(col[near]))])
                if abs(col[r]) < pivot_tol:
                    if abs(d[j]) > 1e-7:
                        skipped_significant = True
                    continue
                t = float(min(max(ratio[r], 0.0), t_flip))

                entering_value = self.nonbasic_value(j) + direction * t
                leaving = int(self.basis[r])
                new_beta = self.beta - step * t
                leave_val = new_beta[r]
                # Classify which bound the leaving variable rests on.
                if math.isfinite(self.lb[leaving]) and abs(leave_val - self.lb[leaving]) <= abs(
                    leave_val - self.ub[leaving]
                ):
                    self.stat[leaving] = _AT_LB
                elif math.isfinite(self.ub[leaving]):
                    self.stat[leaving] = _AT_UB
                else:
                    self.stat[leaving] = _AT_LB  # degenerate: finite lb exists here

                pivot = self.T[r, j]
                self.T[r, :] /= pivot
                colj = self.T[:, j].copy()
                colj[r] = 0.0
                self.T -= np.outer(colj, self.T[r, :])
                self.basis[r] = j
                self.stat[j] = _BASIC
                new_beta[r] = entering_value
                self.beta = new_beta

                degenerate_streak = degenerate_streak + 1 if t <= 1e-12 else 0
                since_refresh += 1
                if since_refresh >= 300:
                    self.refresh(strict=False)
                    since_refresh = 0
                acted = True
                break

            if acted:
                wedged = 0
            else:
                if not skipped_significant:
                    return "optimal"  # only noise-level candidates remain
                # A significant candidate had no stable pivot: purge drift
                # and retry a few times before failing loudly.
                wedged += 1
                if wedged > 3 or not self.refresh(strict=False):
                    raise LpError("no numerically stable pivot available")
                since_refresh = 0
        raise LpError("iteration limit exceeded")


def _standard_form(lp: LinearProgram,
                   bound_overrides: dict[int, tuple[float, float]] | None):
    n = lp.num_vars
    m = lp.num_rows
    lb = np.array(lp.lb, dtype=float)
    ub = np.array(lp.ub, dtype=float)
    if bound_overrides:
        for j, (lo, hi) in bound_overrides.items():
            lb[j], ub[j] = float(lo), float(hi)
            if lo > hi:
                raise ValueError(f"override lb {lo} > ub {hi} for var {j}")

    # One slack per row: A x + s = b, slack bounds encode the sense.
    N = n + m
    A = np.zeros((m, N))
    b = np.array(lp.rhs, dtype=float)
    s_lb = np.empty(m)
    s_ub = np.empty(m)
    for i, (row, sense) in enumerate(zip(lp.rows, lp.senses)):
        for j, coef in row.items():
            A[i, j] = coef
        A[i, n + i] = 1.0
        if sense == "<=":
            s_lb[i], s_ub[i] = 0.0, INF
        elif sense == ">=":
            s_lb[i], s_ub[i] = -INF, 0.0
        else:
            s_lb[i], s_ub[i] = 0.0, 0.0
    full_lb = np.concatenate([lb, s_lb])
    full_ub = np.concatenate([ub, s_ub])
    c = np.zeros(N)
    for j, coef in lp.objective.items():
        c[j] = coef
    return A, b, full_lb, full_ub, c


def solve_lp(lp: LinearProgram, tol: float = 1e-8,
             bound_overrides: dict[int, tuple[float, float]] | None = None) -> LpResult:
    """Solve ``lp`` to optimality.

    Returns an :class:`LpResult` whose status is ``optimal`` (with a feasible
    assignment and objective), ``infeasible`` or ``unbounded``.  Numerical
    breakdown raises :class:`LpError` instead of being misreported as one of
    the three statuses.

    ``bound_overrides`` temporarily replaces selected variable bounds without
    mutating ``lp`` (used by the branch-and-bound driver).
    """
    A, b, lb, ub, c = _standard_form(lp, bound_overrides)
    m, N = A.shape

    if m == 0:
        # Pure box problem: each variable sits on the bound its cost prefers.
        x = np.where(c > 0, ub, np.where(c < 0, lb, np.where(np.isfinite(lb), lb, 0.0)))
        if np.any(~np.isfinite(x)):
            return LpResult("unbounded", None, None)
        return LpResult("optimal", float(c @ x), x[: lp.num_vars])

    # Phase 1: artificial columns with signs matching the initial residual.
    x0 = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    resid = b - A @ x0
    art_cols = np.zeros((m, m))
    for i in range(m):
        art_cols[i, i] = 1.0 if resid[i] >= 0 else -1.0
    A1 = np.hstack([A, art_cols])
    lb1 = np.concatenate([lb, np.zeros(m)])
    ub1 = np.concatenate([ub, np.full(m, INF)])
    tab1 = _Tableau(A1, b, lb1, ub1)
    tab1.set_basis(np.arange(N, N + m))

    c1 = np.zeros(N + m)
    c1[N:] = -1.0
    tab1.simplex(c1, allow_unbounded=False)
    art_total = float(np.sum(np.abs(tab1.values()[N:])))
    if art_total > max(tol, 1e-7):
        return LpResult("infeasible", None, None)

    # Freeze artificials at zero and optimise the true objective.
    tab1.lb[N:] = 0.0
    tab1.ub[N:] = 0.0
    c2 = np.concatenate([c, np.zeros(m)])
    status = tab1.simplex(c2, allow_unbounded=True)
    if status == "unbounded":
        return LpResult("unbounded", None, None)

    x = tab1.values()[:N]
    # Verification against the original rows; refresh and retry once if the
    # tableau drifted beyond tolerance.  x includes the slack columns, so
    # rows must hold as equalities; bounds cover the senses.  Residuals are
    # judged relative to the magnitude of the row's own terms.
    slack = max(tol, 1e-7)
    row_scale = np.abs(A) @ np.where(np.isfinite(x), np.abs(x), 0.0)
    for attempt in range(2):
        resid = A @ x - b
        tolerance = slack * np.maximum(1.0, np.maximum(np.abs(b), row_scale))
        rows_ok = bool(np.all(np.abs(resid) <= tolerance))
        lo_gap = np.where(np.isfinite(lb), x - lb, 0.0)
        hi_gap = np.where(np.isfinite(ub), ub - x, 0.0)
        scale = np.maximum(1.0, np.abs(x))
        bounds_ok = bool(np.all(lo_gap >= -slack * scale) and np.all(hi_gap >= -slack * scale))
        if rows_ok and bounds_ok:
            break
        if attempt == 1:
            raise LpError("solution failed final feasibility verification")
        tab1.refresh()
        tab1.simplex(c2, allow_unbounded=True)
        x = tab1.values()[:N]
        row_scale = np.abs(A) @ np.where(np.isfinite(x), np.abs(x), 0.0)

    obj = float(c @ x)
    return LpResult("optimal", obj, x[: lp.num_vars].copy())
