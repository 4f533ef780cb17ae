"""Bounded-variable dual simplex.

The LP ``max c·x  s.t.  rlo ≤ A x ≤ rhi,  lb ≤ x ≤ ub`` is handled in the
computational form ``min ĉ·z  s.t.  [A  -I] z = 0,  l ≤ z ≤ u`` where
``z = (x, s)`` appends one logical per row. The all-logical basis is
always a valid start: structural columns are placed at the bound their
cost sign prefers, which makes the start dual feasible, and the dual
simplex then restores primal feasibility. Infinite bounds are replaced by
artificial ±1e7 boxes; a nonbasic column still resting on one at the end
with a non-zero reduced cost means the LP is unbounded.

Linear algebra: the basis is factorized with SuperLU and updated with a
product-form eta file between refactorizations. Pricing uses dual
steepest-edge weights; the ratio test is a bound-flipping (long-step)
test with Harris tolerances. When the objective stalls (dual
degeneracy, e.g. flat prices) the nonbasic costs are perturbed by a small
random amount in their dual-feasible direction; once the perturbed problem
is optimal the true costs are restored and any reduced cost that changed
sign is repaired by bound flips and further dual iterations. Bland's
smallest-index rule is the last resort after repeated perturbations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import SolverError
from ..model import MilpModel

BIG = 1e7
STALL_ITERATIONS = 300
PERTURBATION = 1e-7
MAX_PERTURBATIONS = 3   # escalation steps between two cost restorations
MAX_RESTORES = 8
AT_LOWER = 1
AT_UPPER = 2
BASIC = 0


@dataclass(frozen=True)
class Basis:
    """Snapshot sufficient to warm-start another solve."""

    head: np.ndarray
    state: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None
    objective: float
    duals: np.ndarray | None  # row duals of the maximization problem
    reduced_costs: np.ndarray | None
    dual_objective: float
    iterations: int
    basis: Basis | None = None
    max_dual_infeasibility: float = 0.0

    @property
    def duality_gap(self) -> float:
        return abs(self.objective - self.dual_objective)


class DualSimplex:
    """Reusable LP engine over a fixed constraint matrix."""

    def __init__(self, A, c, lb, ub, rlo, rhi, *, feasibility_tol: float = 1e-7,
                 dual_tol: float = 1e-9, refactor_interval: int = 64,
                 max_iterations: int | None = None):
        A = sp.csc_matrix(A, dtype=float)
        A.sum_duplicates()
        self.A = A
        self.AT = sp.csr_matrix(A.T)
        self.m, self.n = A.shape
        c = np.asarray(c, dtype=float)
        # internal problem is a minimization with costs scaled to O(1)
        self.cscale = max(1.0, float(np.max(np.abs(c)))) if c.size else 1.0
        self.base_cost = np.concatenate([-c / self.cscale, np.zeros(self.m)])
        self.cost = self.base_cost.copy()
        self.perturbed = False
        self.perturbations = 0
        self.restores = 0
        self.lb = np.concatenate([np.asarray(lb, float), np.asarray(rlo, float)])
        self.ub = np.concatenate([np.asarray(ub, float), np.asarray(rhi, float)])
        self.ftol = feasibility_tol
        self.dtol = dual_tol
        self.refactor_interval = refactor_interval
        nm = self.n + self.m
        self.max_iterations = max_iterations or max(20_000, 40 * nm)

    # -- bounds --------------------------------------------------------------

    def _working_bounds(self, lb, ub):
        wl = np.maximum(lb, -BIG)
        wu = np.minimum(ub, BIG)
        return wl, wu

    # -- basis linear algebra -----------------------------------------------

    def _column(self, j: int) -> np.ndarray:
        v = np.zeros(self.m)
        if j < self.n:
            a = self.A
            lo, hi = a.indptr[j], a.indptr[j + 1]
            v[a.indices[lo:hi]] = a.data[lo:hi]
        else:
            v[j - self.n] = -1.0
        return v

    def _factor(self):
        head = self.head
        struct = head < self.n
        pos = np.arange(self.m)
        part = self.A[:, head[struct]].tocoo()
        rows = np.concatenate([part.row, head[~struct] - self.n])
        cols = np.concatenate([pos[struct][part.col], pos[~struct]])
        vals = np.concatenate([part.data, -np.ones(int((~struct).sum()))])
        B = sp.csc_matrix((vals, (rows, cols)), shape=(self.m, self.m))
        try:
            self.lu = splu(B, permc_spec="COLAMD", options={"SymmetricMode": False})
        except RuntimeError as exc:
            raise SolverError(
                f"singular basis after {self.iterations} iterations "
                f"({int(struct.sum())} structural columns basic): {exc}") from None
        self.etas = []

    def _ftran(self, v: np.ndarray) -> np.ndarray:
        y = self.lu.solve(v)
        for r, alpha, ar in self.etas:
            yr = y[r] / ar
            if yr != 0.0:
                y -= alpha * yr
            y[r] = yr
        return y

    def _btran(self, v: np.ndarray) -> np.ndarray:
        v = v.copy()
        for r, alpha, ar in reversed(self.etas):
            v[r] = (v[r] - alpha @ v + ar * v[r]) / ar
        return self.lu.solve(v, trans="T")

    def _recompute(self):
        """Primal basics from nonbasic values, reduced costs from scratch."""
        x = self.x
        basic = self.state == BASIC
        xn = np.where(basic, 0.0, x)
        rhs = self.A @ xn[: self.n] - xn[self.n:]
        x[self.head] = -self._ftran(rhs)
        y = self._btran(self.cost[self.head])
        d = np.empty(self.n + self.m)
        d[: self.n] = self.cost[: self.n] - self.AT @ y
        d[self.n:] = self.cost[self.n:] + y
        d[self.head] = 0.0
        self.d = d
        self.y = y

    # -- setup ---------------------------------------------------------------

    def _cold_start(self):
        n, m = self.n, self.m
        self.head = np.arange(n, n + m)
        state = np.full(n + m, AT_LOWER, dtype=np.int8)
        state[self.head] = BASIC
        c = self.cost[:n]
        wl, wu = self.wl[:n], self.wu[:n]
        prefer_up = (c < 0) | ((c == 0) & (self.lb[:n] == -np.inf) & (self.ub[:n] < np.inf))
        state[:n] = np.where(prefer_up, AT_UPPER, AT_LOWER)
        self.state = state
        self.x = np.zeros(n + m)
        self.x[:n] = np.where(prefer_up, wu, wl)
        self.w = np.ones(m)

    def _warm_start(self, basis: Basis):
        self.head = basis.head.copy()
        self.state = basis.state.copy()
        self.w = basis.weights.copy()
        self.x = np.zeros(self.n + self.m)
        nb = self.state != BASIC
        self.x[nb] = np.where(self.state[nb] == AT_UPPER, self.wu[nb], self.wl[nb])

    def _restore_dual_feasibility(self) -> bool:
        """Flip boxed nonbasics whose reduced cost has the wrong sign."""
        nb = self.state != BASIC
        bad_l = nb & (self.state == AT_LOWER) & (self.d < -self.dtol) & (self.wl < self.wu)
        bad_u = nb & (self.state == AT_UPPER) & (self.d > self.dtol) & (self.wl < self.wu)
        bad = bad_l | bad_u
        if not bad.any():
            return True
        art = (self.lb == -np.inf) | (self.ub == np.inf)
        if (bad & art).any():
            return False
        self.state[bad_l] = AT_UPPER
        self.state[bad_u] = AT_LOWER
        self.x[bad_l] = self.wu[bad_l]
        self.x[bad_u] = self.wl[bad_u]
        self._recompute()
        return True

    # -- main loop -----------------------------------------------------------

    def solve(self, lb=None, ub=None, basis: Basis | None = None,
              iteration_limit: int | None = None) -> LpSolution:
        """Solve with optional column-bound overrides and a warm-start basis.

        With ``iteration_limit`` the solve may stop early with status
        ``iteration-limit``; its objective is then the current dual bound.
        """
        lb_full = self.lb.copy()
        ub_full = self.ub.copy()
        if lb is not None:
            lb_full[: self.n] = lb
        if ub is not None:
            ub_full[: self.n] = ub
        if np.any(lb_full > ub_full + 1e-12):
            return self._infeasible(0)
        self.cur_lb, self.cur_ub = lb_full, ub_full
        self.wl, self.wu = self._working_bounds(lb_full, ub_full)
        self.iterations = 0
        self.iteration_limit = iteration_limit
        self.cost = self.base_cost.copy()
        self.perturbed = False
        self.perturbations = 0
        self.restores = 0
        same = (basis is not None and getattr(self, "lu", None) is not None
                and np.array_equal(basis.head, self.head)
                and len(self.etas) < self.refactor_interval // 2)
        if basis is not None:
            self._warm_start(basis)
        else:
            self._cold_start()
        if not same:
            self._factor()
        self._recompute()
        if basis is not None and not self._restore_dual_feasibility():
            self._cold_start()
            self._factor()
            self._recompute()
        return self._iterate()

    def _infeasible(self, iterations):
        return LpSolution("infeasible", None, float("nan"), None, None, float("nan"), iterations)

    def _iterate(self) -> LpSolution:
        n, m = self.n, self.m
        ftol, dtol = self.ftol, self.dtol
        bland = False
        best_obj = -np.inf
        last_progress = 0
        retried = False
        while True:
            if self.iterations >= self.max_iterations:
                inf = self._primal_infeasibility()[0]
                raise SolverError(
                    f"iteration limit {self.max_iterations} reached: m={m} n={n}, "
                    f"primal infeasibility {inf.sum():.3g}, bland={bland}, "
                    f"objective {self._objective():.10g}")
            if self.iteration_limit is not None and self.iterations >= self.iteration_limit:
                obj = self._objective()
                return LpSolution("iteration-limit", None, obj, None, None, obj, self.iterations)
            xb = self.x[self.head]
            lo, hi = self.wl[self.head], self.wu[self.head]
            infeas, cand = self._primal_infeasibility()
            if not cand.any():
                if self.perturbed:
                    self._unperturb()
                    best_obj, last_progress = -np.inf, self.iterations
                    continue
                res = self._finish()
                if res is not None:
                    return res
                continue
            if bland:
                r = int(np.flatnonzero(cand)[np.argmin(self.head[cand])])
            else:
                score = np.where(cand, infeas * infeas / self.w, -1.0)
                r = int(np.argmax(score))
            leaving = int(self.head[r])
            to_lower = xb[r] < lo[r]
            delta = infeas[r]

            e = np.zeros(m)
            e[r] = 1.0
            rho = self._btran(e)
            arow = np.empty(n + m)
            arow[:n] = self.AT @ rho
            arow[n:] = -rho
            ap = -arow if to_lower else arow
            nb = self.state != BASIC
            movable = nb & (self.wl < self.wu)
            piv = 1e-9 * max(1.0, float(np.max(np.abs(arow[movable]))) if movable.any() else 1.0)
            elig = movable & (((self.state == AT_LOWER) & (ap > piv))
                              | ((self.state == AT_UPPER) & (ap < -piv)))
            idx = np.flatnonzero(elig)
            if idx.size == 0:
                if not retried:
                    retried = True
                    self._factor()
                    self._recompute()
                    continue
                return self._infeasible(self.iterations)
            retried = False
            dj = self.d[idx]
            aj = ap[idx]
            # clamp tiny wrong-signed reduced costs produced by Harris steps
            t = np.maximum(dj / aj, 0.0)
            q, flips = self._ratio_test(idx, t, np.abs(aj), dj, delta, bland)
            if q < 0:
                if not retried:
                    retried = True
                    self._factor()
                    self._recompute()
                    continue
                return self._infeasible(self.iterations)

            if flips.size:
                dx = np.where(self.state[flips] == AT_LOWER,
                              self.wu[flips] - self.wl[flips], self.wl[flips] - self.wu[flips])
                self.state[flips] = np.where(self.state[flips] == AT_LOWER, AT_UPPER, AT_LOWER)
                self.x[flips] += dx
                delta_vec = np.zeros(m)
                sf = flips[flips < n]
                if sf.size:
                    delta_vec += self.A[:, sf] @ dx[flips < n]
                lf = flips[flips >= n]
                if lf.size:
                    np.add.at(delta_vec, lf - n, -dx[flips >= n])
                self.x[self.head] -= self._ftran(delta_vec)

            alpha = self._ftran(self._column(q))
            ar = alpha[r]
            if abs(ar) < 1e-11 or abs(ar - arow[q]) > 1e-6 * max(1.0, abs(ar)):
                # row and column disagree: refresh the factorization
                if len(self.etas) == 0 and abs(ar) < 1e-11:
                    raise SolverError(f"zero pivot at iteration {self.iterations}")
                self._factor()
                self._recompute()
                continue
            target = self.wl[leaving] if to_lower else self.wu[leaving]
            theta_p = (self.x[leaving] - target) / ar
            self.x[self.head] -= theta_p * alpha
            self.x[q] += theta_p
            self.x[leaving] = target

            theta_d = self.d[q] / arow[q]
            self.d[nb] -= theta_d * arow[nb]
            self.d[q] = 0.0
            self.d[leaving] = -theta_d

            # dual steepest-edge weights
            wr = float(rho @ rho)
            tau = self._ftran(rho)
            ratio = alpha / ar
            self.w = np.maximum(self.w - 2.0 * ratio * tau + ratio * ratio * wr, 1e-6)
            self.w[r] = max(wr / (ar * ar), 1e-6)

            self.head[r] = q
            self.state[q] = BASIC
            self.state[leaving] = AT_LOWER if to_lower else AT_UPPER
            self.etas.append((r, alpha, ar))
            self.iterations += 1
            if len(self.etas) >= self.refactor_interval:
                self._factor()
                self._recompute()

            obj = -self._objective()
            if obj > best_obj + 1e-12 * max(1.0, abs(best_obj)):
                best_obj = obj
                last_progress = self.iterations
                bland = False
            elif self.iterations - last_progress > STALL_ITERATIONS:
                if self.perturbations < MAX_PERTURBATIONS and self.restores < MAX_RESTORES:
                    self._perturb(PERTURBATION * 10.0 ** self.perturbations)
                    bland = False
                else:
                    bland = True
                best_obj, last_progress = -np.inf, self.iterations

    def _perturb(self, scale: float) -> None:
        """Push nonbasic reduced costs away from zero without losing dual feasibility."""
        rng = np.random.default_rng(self.perturbations + 7 * self.restores)
        self.perturbations += 1
        nb = self.state != BASIC
        xi = scale * (1.0 + rng.random(self.n + self.m)) * (1.0 + np.abs(self.base_cost))
        shift = np.where(nb & (self.state == AT_LOWER), xi, 0.0)
        shift -= np.where(nb & (self.state == AT_UPPER), xi, 0.0)
        shift[self.wl >= self.wu] = 0.0
        # only nonbasic costs move, so the duals y are unchanged
        self.cost = self.cost + shift
        self.d = self.d + shift
        self.perturbed = True

    def _unperturb(self) -> None:
        """Restore the true costs and flip nonbasics whose reduced cost changed sign."""
        self.cost = self.base_cost.copy()
        self.perturbed = False
        self.perturbations = 0
        self.restores += 1
        self._recompute()
        nb = self.state != BASIC
        movable = nb & (self.wl < self.wu)
        # real boxes flip on any wrong sign, artificial ones only beyond the tolerance
        boxed = np.isfinite(self.cur_lb) & np.isfinite(self.cur_ub)
        tol = np.where(boxed, 1e-14, self.dtol)
        bad_l = movable & (self.state == AT_LOWER) & (self.d < -tol)
        bad_u = movable & (self.state == AT_UPPER) & (self.d > tol)
        if bad_l.any() or bad_u.any():
            self.state[bad_l] = AT_UPPER
            self.state[bad_u] = AT_LOWER
            self.x[bad_l] = self.wu[bad_l]
            self.x[bad_u] = self.wl[bad_u]
            self._recompute()

    def _primal_infeasibility(self):
        xb = self.x[self.head]
        lo, hi = self.wl[self.head], self.wu[self.head]
        below, above = lo - xb, xb - hi
        infeas = np.maximum(np.maximum(below, above), 0.0)
        scale = np.maximum(1.0, np.abs(np.where(below > 0, lo, hi)))
        return infeas, infeas > self.ftol * scale

    def _ratio_test(self, idx, t, aabs, dj, delta, bland):
        """Bound-flipping ratio test; returns (entering, flipped columns)."""
        order = np.argsort(t, kind="stable")
        rng = (self.wu[idx] - self.wl[idx])
        art = (self.cur_lb[idx] == -np.inf) | (self.cur_ub[idx] == np.inf)
        slope = delta
        k = 0
        flips = []
        while k < order.size:
            rem = order[k:]
            tmax = np.min((np.abs(dj[rem]) + self.dtol) / aabs[rem])
            g = k
            while g < order.size and t[order[g]] <= tmax:
                g += 1
            if g == k:
                g = k + 1
            group = order[k:g]
            gsum = float(np.sum(aabs[group] * rng[group]))
            if not bland and not art[group].any() and slope - gsum > self.ftol and g < order.size:
                flips.extend(group.tolist())
                slope -= gsum
                k = g
                continue
            if bland:
                tmin = t[group].min()
                ties = group[t[group] <= tmin + 1e-12]
                pick = ties[np.argmin(idx[ties])]
            else:
                pick = group[np.argmax(aabs[group])]
            return int(idx[pick]), np.asarray([idx[f] for f in flips], dtype=int)
        return -1, np.zeros(0, dtype=int)

    def _objective(self) -> float:
        return float(self.cost @ self.x) * self.cscale * -1.0

    def _finish(self) -> LpSolution | None:
        """Verify optimality on recomputed values; None means keep iterating."""
        if len(self.etas) > 16:
            self._factor()
        self._recompute()
        if self._primal_infeasibility()[1].any():
            return None
        nb = self.state != BASIC
        at_art = nb & (((self.state == AT_LOWER) & (self.cur_lb == -np.inf))
                       | ((self.state == AT_UPPER) & (self.cur_ub == np.inf)))
        if at_art.any():
            j = np.flatnonzero(at_art)
            if np.any(np.abs(self.d[j]) > self.dtol):
                return LpSolution("unbounded", None, float("inf"), None, None, float("inf"),
                                  self.iterations)
            # zero reduced cost: park the column on a real bound (or zero)
            for jj in j:
                if self.cur_lb[jj] > -np.inf:
                    self.state[jj], self.x[jj] = AT_LOWER, self.cur_lb[jj]
                elif self.cur_ub[jj] < np.inf:
                    self.state[jj], self.x[jj] = AT_UPPER, self.cur_ub[jj]
                else:
                    self.wl[jj] = self.wu[jj] = 0.0
                    self.x[jj] = 0.0
            self._recompute()
            return None
        movable = nb & (self.wl < self.wu)
        dinf = np.where(movable & (self.state == AT_LOWER), np.maximum(-self.d, 0), 0.0) + \
            np.where(movable & (self.state == AT_UPPER), np.maximum(self.d, 0), 0.0)
        x = self.x[: self.n].copy()
        x = np.clip(x, self.cur_lb[: self.n], self.cur_ub[: self.n])
        obj = self._objective()
        # dual objective: sum of reduced cost times the bound each nonbasic rests on
        dual_obj = -float(self.d[nb] @ self.x[nb]) * self.cscale
        basis = Basis(self.head.copy(), self.state.copy(), self.w.copy())
        return LpSolution("optimal", x, obj, -self.y * self.cscale,
                          -self.d[: self.n] * self.cscale, dual_obj, self.iterations, basis,
                          float(dinf.max() * self.cscale) if dinf.size else 0.0)


def engine_for(model: MilpModel, tol: float = 1e-7) -> DualSimplex:
    lb, ub = model.bounds()
    rlo, rhi = model.row_bounds()
    return DualSimplex(model.matrix(), model.objective, lb, ub, rlo, rhi, feasibility_tol=tol)


def solve_lp(model: MilpModel, *, feasibility_tol: float = 1e-7) -> LpSolution:
    """Solve the continuous relaxation of ``model`` (binaries relaxed to [0, 1])."""
    sol = engine_for(model, feasibility_tol).solve()
    if sol.status == "optimal":
        return LpSolution(sol.status, sol.x, sol.objective + model.objective_constant, sol.duals,
                          sol.reduced_costs, sol.dual_objective + model.objective_constant,
                          sol.iterations, sol.basis, sol.max_dual_infeasibility)
    return sol
