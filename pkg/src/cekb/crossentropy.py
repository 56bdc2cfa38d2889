"""Cross entropy and minimum-cross-entropy (I-)projection on finite spaces.

The projection of ``mu`` onto a closed convex set ``N`` of measures is the
unique ``nu`` in ``N`` minimising ``CE(nu, mu) = sum nu log(nu / mu)``.  Two
routes are used.  When ``N`` pins the masses of the cells its rows can see,
the answer is Jeffrey's rule on that partition and is exact.  Otherwise the
dual is maximised by cyclic coordinate ascent: each step is the exponential
tilt ``nu ~ mu * exp(sum_j lam_j c_j)`` that makes one row tight, with the
multipliers of inequality rows clipped at zero (the Dykstra correction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import LinearConstraint, brentq, minimize

from . import lp
from .statistics import LinearConstraintSet

EPS_FEAS = 1e-10
EPS_CONV = 1e-12
ORACLE_TOL = 1e-4
MAX_SWEEPS = 10 ** 6
ORACLE_MAX_ATOMS = 6


class NoModel(ValueError):
    """No measure absolutely continuous w.r.t. ``mu`` satisfies the constraints."""


class NotConverged(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class ProjectionResult:
    nu: np.ndarray = field(repr=False)
    ce_value: float
    method: str  # "jeffrey" | "iterative" | "oracle"
    iterations: int
    residual: float
    solver_ce: float = field(default=float("nan"), repr=False)
    cell_weights: tuple = field(default=(), repr=False)


def _weights(d) -> np.ndarray:
    w = getattr(d, "weights", d)
    return np.asarray(w, dtype=object if len(w) and isinstance(w[0], Fraction) else float)


def cross_entropy(nu, mu) -> float:
    """``sum_{nu(x) > 0} nu(x) log(nu(x) / mu(x))``; infinite unless ``nu << mu``."""
    nu = np.asarray(_weights(nu), dtype=float)
    mu = np.asarray(_weights(mu), dtype=float)
    if nu.shape != mu.shape:
        raise ValueError("distributions live on different spaces")
    pos = nu > 0
    if np.any(mu[pos] <= 0):
        return math.inf
    return float(np.sum(nu[pos] * np.log(nu[pos] / mu[pos])))


def _as_blocks(partition, n: int) -> np.ndarray:
    """Block index per point from a list of disjoint exhaustive masks."""
    blocks = np.full(n, -1, dtype=np.int64)
    for i, m in enumerate(partition):
        m = np.asarray(m, dtype=bool)
        if np.any(blocks[m] >= 0):
            raise ValueError("partition blocks overlap")
        blocks[m] = i
    if np.any(blocks < 0):
        raise ValueError("partition does not cover the space")
    return blocks


def jeffrey(mu, partition, p) -> np.ndarray:
    """Jeffrey's rule: ``nu(x) = p_i * mu(x) / mu(A_i)`` for ``x`` in block ``A_i``.

    Exact when ``mu`` and ``p`` hold Fractions.
    """
    mu = _weights(mu)
    blocks = _as_blocks(partition, len(mu))
    return conditional_mix(p, mu, blocks)


def conditional_mix(coarse, mu, blocks) -> np.ndarray:
    """``nu(C) = sum_i coarse_i * mu(C | A_i)`` with ``blocks[x]`` the block of ``x``."""
    mu = _weights(mu)
    blocks = np.asarray(blocks, dtype=np.int64)
    exact = mu.dtype == object
    zero = Fraction(0) if exact else 0.0
    nu = np.array([zero] * len(mu), dtype=object if exact else float)
    for i, w in enumerate(coarse):
        members = np.flatnonzero(blocks == i)
        mass = sum(mu[members], zero)
        if w == 0:
            continue
        if mass <= 0:
            raise NoModel(f"no model on this block: block {i} has weight {w} but measure zero")
        nu[members] = mu[members] * (w / mass)
    return nu


# --------------------------------------------------------------------------
# projection


def _column_cells(N: LinearConstraintSet):
    """Group variables whose coefficient is the same in every row."""
    cols = [tuple(r.coeffs.get(j, 0) for r in N.rows) for j in range(N.n)]
    index, cells = {}, np.zeros(N.n, dtype=np.int64)
    for j, col in enumerate(cols):
        cells[j] = index.setdefault(col, len(index))
    return cells, list(index)


def pinned_cell_weights(N: LinearConstraintSet, cells, signatures, allowed):
    """Exact cell masses if ``N`` restricted to allowed cells is a single point.

    Returns ``None`` when the masses are not determined and raises ``NoModel``
    when no admissible point exists.
    """
    k = len(signatures)
    rows_eq, rows_ge = [], []
    for r_i, r in enumerate(N.rows):
        row = [Fraction(sig[r_i]) for sig in signatures]
        (rows_eq if r.rel == "=" else rows_ge).append(row)
    rows_eq.append([Fraction(1)] * k)
    rhs_eq = [0] * (len(rows_eq) - 1) + [1]
    for c in range(k):
        if not allowed[c]:
            rows_eq.append([Fraction(1) if i == c else Fraction(0) for i in range(k)])
            rhs_eq.append(0)
    ge_rhs = [0] * len(rows_ge)
    first = lp.simplex([0] * k, rows_eq, rhs_eq, rows_ge, ge_rhs)
    if not first.ok:
        raise NoModel("no measure absolutely continuous with respect to mu satisfies the constraints")
    values = []
    for c in range(k):
        obj = [1 if i == c else 0 for i in range(k)]
        lo = lp.simplex(obj, rows_eq, rhs_eq, rows_ge, ge_rhs)
        hi = lp.simplex(obj, rows_eq, rhs_eq, rows_ge, ge_rhs, maximize=True)
        if lo.value != hi.value:
            return None
        values.append(lo.value)
    return values


def _max_support(C: np.ndarray, eq: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Largest set of candidate points carrying mass in some feasible measure.

    Homogeneous rows make the feasible cone closed under sums, so maximising
    ``sum t`` with ``t <= y`` and ``t <= 1`` puts ``t = 1`` exactly on it.
    """
    idx = np.flatnonzero(candidates)
    m = len(idx)
    if m == 0:
        return candidates
    sub = C[:, idx]
    A_eq = [list(sub[i]) + [0.0] * m for i in range(len(C)) if eq[i]]
    A_ge = [list(sub[i]) + [0.0] * m for i in range(len(C)) if not eq[i]]
    for a in range(m):
        row = [0.0] * (2 * m)
        row[a], row[m + a] = 1.0, -1.0  # y_a - t_a >= 0
        A_ge.append(row)
        cap = [0.0] * (2 * m)
        cap[m + a] = -1.0  # -t_a >= -1
        A_ge.append(cap)
    b_ge = [0.0] * (len(A_ge) - 2 * m) + [0.0, -1.0] * m
    c = [0.0] * m + [1.0] * m
    res = lp.highs(c, A_eq, [0.0] * len(A_eq), A_ge, b_ge, maximize=True)
    out = np.zeros_like(candidates)
    if res.ok:
        t = np.asarray(res.x[m:])
        out[idx[t > 0.5]] = True
    return out


def _logsumexp(a: np.ndarray) -> float:
    m = a.max()
    return float(m + np.log(np.exp(a - m).sum()))


def _tilt_root(logw: np.ndarray, c: np.ndarray) -> float | None:
    """``s`` with ``sum w c exp(s c) = 0``, or None when the sum never changes sign."""
    nz = c != 0
    if not nz.any():
        return None
    pos, neg = c > 0, c < 0
    if not pos.any() or not neg.any():
        return None
    vals = np.unique(c[nz])
    if len(vals) == 2:
        alpha, beta = vals[1], vals[0]
        la = _logsumexp(logw[c == alpha])
        lb = _logsumexp(logw[c == beta])
        return float((math.log(-beta) + lb - math.log(alpha) - la) / (alpha - beta))
    lw, cc = logw[nz], c[nz]

    def g(s):
        a = lw + s * cc
        return float(np.sum(cc * np.exp(a - a.max())))

    lo, hi = -1.0, 1.0
    while g(lo) > 0:
        lo *= 2
    while g(hi) < 0:
        hi *= 2
    return brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def ce_project(mu, N: LinearConstraintSet, trace=None, max_sweeps: int = MAX_SWEEPS,
               fast_path: bool = True) -> ProjectionResult:
    """Minimum cross-entropy projection of ``mu`` onto the measures satisfying ``N``.

    ``trace``, when given, is called as ``trace(sweep, row_id, residual, ce)``
    once per sweep of the iterative solver.  ``fast_path=False`` skips the
    closed form and always iterates.
    """
    mu_w = _weights(mu)
    n = len(mu_w)
    if n != N.n:
        raise ValueError(f"mu has {n} points but the constraint set has {N.n} variables")
    mu_f = np.asarray(mu_w, dtype=float)
    support = mu_f > 0

    # (a) rows that pin every cell they can see: Jeffrey's rule
    cells, sigs = _column_cells(N)
    allowed = [bool(support[cells == c].any()) for c in range(len(sigs))]
    weights = pinned_cell_weights(N, cells, sigs, allowed) if fast_path else None
    if weights is not None:
        nu = conditional_mix(weights, mu_w, cells)
        nu_f = np.asarray(nu, dtype=float)
        return ProjectionResult(nu, cross_entropy(nu_f, mu_f), "jeffrey", 0, N.residual(list(nu)),
                                cross_entropy(nu_f, mu_f), tuple(weights))

    # (b) cyclic tilting with clipped multipliers on the maximal feasible face
    C = np.array([r.dense(n, exact=False) for r in N.rows], dtype=float).reshape(len(N.rows), n)
    eq = np.array([r.rel == "=" for r in N.rows], dtype=bool)
    face = _max_support(C, eq, support)
    if not face.any():
        raise NoModel("no measure absolutely continuous with respect to mu satisfies the constraints")
    idx = np.flatnonzero(face)
    Cs = C[:, idx]
    logmu = np.log(mu_f[idx])
    lam = np.zeros(len(N.rows))
    active = [j for j in range(len(N.rows)) if np.any(Cs[j] != 0)]
    logits = logmu.copy()
    prev = np.exp(logits - _logsumexp(logits))
    residual = math.inf
    for sweep in range(1, max_sweeps + 1):
        for j in active:
            base = logits - lam[j] * Cs[j]
            s = _tilt_root(base, Cs[j])
            if s is None:
                new = 0.0
            elif eq[j]:
                new = s
            else:
                new = max(0.0, s)
            logits = base + new * Cs[j]
            lam[j] = new
        logz = _logsumexp(logits)
        nu_s = np.exp(logits - logz)
        viol = Cs @ nu_s
        residual = float(max(np.max(np.abs(viol[eq]), initial=0.0), np.max(-viol[~eq], initial=0.0)))
        change = 0.5 * float(np.abs(nu_s - prev).sum())
        prev = nu_s
        if trace is not None:
            worst = int(np.argmax(np.where(eq, np.abs(viol), -viol))) if len(viol) else -1
            trace(sweep, worst, residual, float(lam @ viol - logz))
        if residual <= EPS_FEAS and change <= EPS_CONV:
            break
    else:
        raise NotConverged("I-projection did not converge", residual)
    nu = np.zeros(n)
    nu[idx] = nu_s
    solver_ce = float(lam @ (Cs @ nu_s) - logz)
    return ProjectionResult(nu, cross_entropy(nu, mu_f), "iterative", sweep, residual, solver_ce)


def ce_project_oracle(mu, N: LinearConstraintSet, restarts: int = 100, seed: int = 0) -> np.ndarray:
    """Independent brute-force minimiser for tiny spaces (testing only).

    Multi-start SLSQP on the simplex; the best feasible local optimum wins
    and is then polished with a trust-region interior-point run.  Starts stop
    early once five of them agree to 1e-9.
    """
    mu = np.asarray(_weights(mu), dtype=float)
    n = len(mu)
    if n > ORACLE_MAX_ATOMS:
        raise ValueError(f"oracle limited to {ORACLE_MAX_ATOMS} points")
    idx = np.flatnonzero(mu > 0)
    C = np.array([r.dense(n, exact=False) for r in N.rows], dtype=float).reshape(len(N.rows), n)[:, idx]
    eq = [r.rel == "=" for r in N.rows]
    live = np.any(C != 0, axis=1)  # vacuous rows only confuse SLSQP
    C, eq = C[live], [e for e, keep in zip(eq, live) if keep]
    lm = np.log(mu[idx])

    def f(x):
        x = np.clip(x, 1e-300, None)
        return float(np.sum(x * (np.log(x) - lm)))

    def grad(x):
        return np.log(np.clip(x, 1e-18, None)) - lm + 1.0

    cons = [{"type": "eq", "fun": lambda x: x.sum() - 1.0, "jac": lambda x: np.ones_like(x)}]
    for row, is_eq in zip(C, eq):
        cons.append({"type": "eq" if is_eq else "ineq", "fun": (lambda x, r=row: r @ x), "jac": (lambda x, r=row: r)})
    rng = np.random.default_rng(seed)
    best, best_val, agree = None, math.inf, 0
    for k in range(restarts):
        x0 = rng.dirichlet(np.ones(len(idx))) if k else mu[idx] / mu[idx].sum()
        res = minimize(f, x0, jac=grad, bounds=[(0.0, 1.0)] * len(idx), constraints=cons,
                       method="SLSQP", options={"ftol": 1e-15, "maxiter": 1000})
        x = np.clip(res.x, 0.0, None)
        if x.sum() <= 0:
            continue
        x = x / x.sum()
        viol = C @ x
        bad = max([abs(v) if e else max(0.0, -v) for v, e in zip(viol, eq)], default=0.0)
        if bad > 1e-7:
            continue
        val = f(x)
        if best is not None and np.abs(x - best).sum() < 1e-9:
            agree += 1
        if val < best_val - 1e-13:
            best, best_val = x, val
        if agree >= 5:
            break
    if best is None:
        raise NoModel("oracle found no feasible point")
    m = len(idx)
    linear = [LinearConstraint(np.ones((1, m)), 1.0, 1.0)]
    linear += [LinearConstraint(row[None, :], 0.0, 0.0 if is_eq else np.inf) for row, is_eq in zip(C, eq)]
    res = minimize(f, best, jac=grad, hess=lambda x: np.diag(1.0 / np.clip(x, 1e-18, None)),
                   method="trust-constr", constraints=linear, bounds=[(0.0, 1.0)] * m,
                   options={"gtol": 1e-14, "xtol": 1e-16, "maxiter": 300})
    x = np.clip(res.x, 0.0, None)
    if x.sum() > 0:
        x = x / x.sum()
        viol = C @ x
        bad = max([abs(v) if e else max(0.0, -v) for v, e in zip(viol, eq)], default=0.0)
        if bad <= 1e-9 and f(x) < best_val:
            best = x
    out = np.zeros(n)
    out[idx] = best
    return out
