"""Suboptimal solution functions: monotone, sum-consistent surrogates for the OSFs.

Where some g_i(P_L) fail to increase, the fit replaces them on a load window
by the closest (weighted least squares) family gamma_i that

* rises with slope at least ``epsilon`` on every cell of the window,
* still sums to the load at every grid node, and
* meets the untouched OSFs at both window ends.

Outside the windows gamma_i is g_i, bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.isotonic import isotonic_regression

from .curves import MonotoneCurve, regularize_columns
from .osf import CriterionReport, OsfTable
from .tables import write_table


class ConvergenceError(RuntimeError):
    """The projection solver hit its iteration cap without settling."""


class FitInfeasibleError(ValueError):
    """No window reachable by the widening policy admits a feasible fit."""


WIDEN_POLICIES = ("low", "high", "both")


@dataclass(frozen=True)
class FitSpec:
    """Fitting options.

    ``widen`` chooses where an infeasible window grows: ``"low"`` extends it
    toward smaller loads first (so loads above a nonconvex region keep their
    exact optimum), ``"high"`` toward larger loads, ``"both"`` alternates.
    """

    epsilon: float = 0.02
    widen: str = "low"
    max_iter: int = 100_000

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.widen not in WIDEN_POLICIES:
            raise ValueError(f"widen must be one of {WIDEN_POLICIES}, got {self.widen!r}")


@dataclass(frozen=True)
class FitWindow:
    load_lo: float
    load_hi: float
    dg_ids: tuple[int, ...]
    objective: float


@dataclass(frozen=True, eq=False)
class SosfFit:
    """Fitted surrogate values on the OSF grid; ``gammas[k, i]`` is gamma_i(loads[k])."""

    loads: np.ndarray
    gammas: np.ndarray
    ids: tuple[int, ...]
    epsilon: float
    windows: tuple[FitWindow, ...] = ()
    # (cells, n) mask of cells that carry the epsilon slope constraint
    constrained: Optional[np.ndarray] = field(default=None)

    @property
    def objective(self) -> float:
        return sum(w.objective for w in self.windows)

    @property
    def n(self) -> int:
        return len(self.ids)

    def curves(self, eps_inv: float = 1e-6) -> tuple[list[MonotoneCurve], float]:
        """Strictly increasing gamma_i(P_L) curves for droop construction.

        Stretches where a DG is parked on a bound have zero slope; they are
        lifted jointly to ``eps_inv`` without breaking the sum identity (see
        :func:`regularize_columns`).  Returns the curves and the largest
        perturbation applied, in kW.
        """
        values, perturbation = regularize_columns(self.loads, self.gammas.T, eps_inv)
        curves = []
        for row in values:
            slopes = np.diff(row) / np.diff(self.loads)
            curves.append(MonotoneCurve(self.loads, row, eps_min=float(slopes.min()) * (1 - 1e-9)))
        return curves, perturbation

    def to_csv(self, path) -> None:
        header = ["P_L[kW]"] + [f"gamma_{i}[kW]" for i in self.ids]
        write_table(path, header, np.column_stack([self.loads, self.gammas]))


def fit_sosf(table: OsfTable, report: CriterionReport, spec: FitSpec = FitSpec()) -> SosfFit:
    """Monotone least-squares surrogates for every flagged OSF.

    Each cluster of overlapping violation intervals becomes one window.  A
    window is first made feasible by adding unflagged DGs (one at a time, the
    one with the most room to rise first), then by widening it per
    ``spec.widen``; the discretized problem is then solved by :func:`qp_solve`.
    """
    x = table.loads
    gammas = table.powers.copy()
    constrained = np.zeros((len(x) - 1, table.n), dtype=bool)
    if report.criterion_met:
        return SosfFit(x, gammas, table.ids, spec.epsilon, (), constrained)

    col = {dg_id: i for i, dg_id in enumerate(table.ids)}
    seeds = []
    for verdict in report.per_dg:
        for v in verdict.violations:
            a = int(np.searchsorted(x, v.load_lo - 1e-12 * max(1.0, abs(v.load_lo))))
            b = int(np.searchsorted(x, v.load_hi - 1e-12 * max(1.0, abs(v.load_hi))))
            seeds.append((a, b, {col[verdict.dg_id]}))
    clusters = _cluster(seeds)

    windows: list[tuple[int, int, set]] = []
    for a, b, dgs in clusters:
        a, b, dgs = _make_feasible(table, a, b, dgs, spec)
        # widening can swallow earlier windows
        while windows and windows[-1][1] >= a:
            pa, pb, pd = windows.pop()
            a, b, dgs = _make_feasible(table, min(a, pa), max(b, pb), dgs | pd, spec)
        windows.append((a, b, dgs))

    fitted = []
    w = _node_weights(x)
    for a, b, dgs in windows:
        rows = sorted(dgs)
        others = [j for j in range(table.n) if j not in dgs]
        seg = slice(a, b + 1)
        target = table.powers[seg, rows].T
        sums = x[seg] - table.powers[seg, others].sum(axis=1)
        min_step = spec.epsilon * np.diff(x[seg])
        sol = qp_solve(target, w[seg], sums, min_step, max_iter=spec.max_iter)
        gammas[a + 1 : b, rows] = sol[:, 1:-1].T
        constrained[a:b, rows] = True
        obj = float(np.sum(w[seg] * (sol - target) ** 2))
        fitted.append(FitWindow(float(x[a]), float(x[b]), tuple(table.ids[r] for r in rows), obj))
    return SosfFit(x, gammas, table.ids, spec.epsilon, tuple(fitted), constrained)


def _cluster(seeds):
    seeds = sorted(seeds, key=lambda s: (s[0], s[1]))
    out = []
    for a, b, dgs in seeds:
        if out and a <= out[-1][1]:
            pa, pb, pd = out[-1]
            out[-1] = (pa, max(pb, b), pd | dgs)
        else:
            out.append((a, b, set(dgs)))
    return out


def _node_weights(x: np.ndarray) -> np.ndarray:
    """Trapezoid weights: half the span of the two adjacent cells."""
    w = np.empty_like(x)
    w[1:-1] = 0.5 * (x[2:] - x[:-2])
    w[0] = 0.5 * (x[1] - x[0])
    w[-1] = 0.5 * (x[-1] - x[-2])
    return w


def window_slack(table: OsfTable, a: int, b: int, dgs: set, epsilon: float) -> float:
    """Smallest constraint slack of the fit on nodes a..b; feasible iff >= 0.

    With the end values pinned, a fit exists exactly when every fitted DG
    rises by at least ``epsilon`` per kW between the ends, and the load left
    to the fitted DGs grows by at least ``len(dgs) * epsilon`` per kW on
    every cell (a transportation argument: increments can then be split).
    """
    x = table.loads
    g = table.powers
    width = x[b] - x[a]
    rows = sorted(dgs)
    rise = g[b, rows] - g[a, rows] - epsilon * width
    others = [j for j in range(table.n) if j not in dgs]
    resid = x[a : b + 1] - g[a : b + 1, others].sum(axis=1)
    cell = np.diff(resid) - len(rows) * epsilon * np.diff(x[a : b + 1])
    return float(min(rise.min(), cell.min()))


def _make_feasible(table: OsfTable, a: int, b: int, dgs: set, spec: FitSpec):
    tol = -1e-12 * max(1.0, float(table.loads[-1]))
    last = len(table.loads) - 1
    dgs = set(dgs)
    step = 0
    while True:
        if window_slack(table, a, b, dgs, spec.epsilon) >= tol:
            return a, b, dgs
        if len(dgs) < table.n:
            g = table.powers
            room = {
                j: g[b, j] - g[a, j] for j in range(table.n) if j not in dgs
            }
            dgs.add(max(room, key=lambda j: (room[j], -j)))
            continue
        if a == 0 and b == last:
            raise FitInfeasibleError(
                "no feasible monotone fit even over the whole load range; "
                f"epsilon={spec.epsilon} may be too large for {table.n} DGs"
            )
        grow_low = {
            "low": a > 0,
            "high": b == last,
            "both": (step % 2 == 0 and a > 0) or b == last,
        }[spec.widen]
        if grow_low:
            a -= 1
        else:
            b += 1
        step += 1


def qp_solve(
    target: np.ndarray,
    weights: np.ndarray,
    sums: np.ndarray,
    min_step: np.ndarray,
    max_iter: int = 100_000,
    tol: float = 1e-13,
) -> np.ndarray:
    """Weighted projection of ``target`` onto {column sums fixed, rows rising by min_step}.

    Solves

        min  sum_k weights[k] * sum_i (Y[i, k] - target[i, k])^2
        s.t. sum_i Y[i, k] = sums[k]              (interior columns k)
             Y[i, k+1] - Y[i, k] >= min_step[k]    (every row, every cell)
             Y[:, 0], Y[:, -1] = target's end columns

    by Dykstra's alternating projections between the affine sum set and the
    slope cone (a bounded isotonic regression per row after subtracting the
    cumulative ``min_step``), followed by an exact active-set polish.
    """
    target = np.asarray(target, dtype=float)
    weights = np.asarray(weights, dtype=float)
    sums = np.asarray(sums, dtype=float)
    min_step = np.asarray(min_step, dtype=float)
    m, K = target.shape
    if K < 3:
        return target.copy()
    scale = max(1.0, float(np.abs(target).max()))
    offset = np.concatenate([[0.0], np.cumsum(min_step)])
    w_int = weights[1:-1]
    s_int = sums[1:-1]

    def proj_slope(y):
        out = np.empty_like(y)
        for i in range(m):
            z_lo = target[i, 0] - offset[0]
            z_hi = target[i, -1] - offset[-1]
            z = y[i] - offset[1:-1]
            out[i] = isotonic_regression(z, sample_weight=w_int, y_min=z_lo, y_max=z_hi) + offset[1:-1]
        return out

    def proj_sum(y):
        return y - (y.sum(axis=0) - s_int) / m

    def full(y):
        return np.column_stack([target[:, 0], y, target[:, -1]])

    def objective(y):
        return float(np.sum(w_int * (y - target[:, 1:-1]) ** 2))

    x = target[:, 1:-1].copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    converged = False
    for it in range(max_iter):
        y = proj_slope(x + p)
        p = x + p - y
        x_new = proj_sum(y + q)
        q = y + q - x_new
        change = float(np.abs(x_new - x).max())
        gap = float(np.abs(x_new - y).max())
        x = x_new
        if gap <= 1e-9 * scale and change <= tol * scale:
            converged = True
            break
        # the active set usually settles long before the iterates do
        if it % 50 == 49 and gap <= 1e-4 * scale:
            polished = _polish(target, weights, sums, min_step, full(y))
            if polished is not None:
                return polished

    polished = _polish(target, weights, sums, min_step, full(y))
    if polished is not None:
        return polished
    if not converged:
        raise ConvergenceError(
            f"projection did not settle in {max_iter} iterations "
            f"(set gap {gap:.3e}, last step {change:.3e}, objective {objective(x):.6g})"
        )
    return full(x)


def _polish(target, weights, sums, min_step, guess) -> Optional[np.ndarray]:
    """Solve the equality QP on the active set read off ``guess``; None if not optimal.

    The result is accepted only if it is primal feasible and every active
    slope constraint carries a multiplier of the right sign (KKT).
    """
    m, K = target.shape
    n_var = m * (K - 2)

    def idx(i, k):  # interior column k in 1..K-2
        return i * (K - 2) + (k - 1)

    rows, rhs, ineq = [], [], []
    for k in range(1, K - 1):
        r = np.zeros(n_var)
        for i in range(m):
            r[idx(i, k)] = 1.0
        rows.append(r)
        rhs.append(sums[k])
        ineq.append(False)
    inc = np.diff(guess, axis=1)
    active = inc - min_step[None, :] <= 1e-7 * max(1.0, float(np.abs(min_step).max()))
    for i in range(m):
        for k in range(K - 1):
            if not active[i, k]:
                continue
            r = np.zeros(n_var)
            b = min_step[k]
            if k + 1 <= K - 2:
                r[idx(i, k + 1)] += 1.0
            else:
                b -= target[i, -1]
            if k >= 1:
                r[idx(i, k)] -= 1.0
            else:
                b += target[i, 0]
            if not r.any():
                continue
            rows.append(r)
            rhs.append(b)
            ineq.append(True)
    A = np.array(rows)
    bvec = np.array(rhs)
    wdiag = np.repeat(weights[None, 1:-1], m, axis=0).ravel()
    t = target[:, 1:-1].ravel()
    n_con = len(rows)
    kkt = np.zeros((n_var + n_con, n_var + n_con))
    kkt[:n_var, :n_var] = np.diag(2.0 * wdiag)
    kkt[:n_var, n_var:] = A.T
    kkt[n_var:, :n_var] = A
    sol = np.linalg.lstsq(kkt, np.concatenate([2.0 * wdiag * t, bvec]), rcond=None)[0]
    y = sol[:n_var].reshape(m, K - 2)
    lam = sol[n_var:]
    full = np.column_stack([target[:, 0], y, target[:, -1]])

    scale = max(1.0, float(np.abs(target).max()))
    if np.abs(A @ sol[:n_var] - bvec).max() > 1e-10 * scale:
        return None
    if np.any(np.diff(full, axis=1) - min_step[None, :] < -1e-12 * scale):
        return None
    # stationarity 2W(y - t) + A^T lam = 0 with lam <= 0 on active inequalities
    ineq = np.array(ineq)
    if ineq.any():
        lam_scale = max(1e-12, float(np.abs(lam).max()))
        if np.any(lam[ineq] > 1e-8 * lam_scale):
            return None
    return full
