"""Branch-and-bound over binary columns on top of the dual simplex.

Search order is depth-first until the first incumbent, then best-bound
with plunging: after a node branches, one child is processed immediately
and its sibling joins the open list. Children re-use the parent's optimal
basis; fixing a binary keeps that basis dual feasible, so each child LP is
a short dual-simplex run. A rounding heuristic (argmax within each
one-of-K group, nearest integer elsewhere, then an LP over the remaining
continuous columns) supplies incumbents early. A diving heuristic
complements it: the binaries closest to integral are fixed in batches and
the LP re-solved until the point is integral, which lets the continuous
columns follow each fixing (rounding alone can pick an SOC bin that the
stored energy does not sit in).
"""

from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass

import numpy as np

from ..errors import SolverError
from ..model import MilpModel
from .lp import DualSimplex, engine_for
from .options import SolverOptions

log = logging.getLogger("offshore_bess.solver")

INT_TOL = 1e-6
RELIABLE = 4  # pseudo-cost observations per direction before strong branching stops
SB_MAX_CANDIDATES = 8
SB_LOOKAHEAD = 4
SB_ITERATIONS = 300
DIVE_BATCH = 8  # a dive fixes about 1/DIVE_BATCH of the fractional binaries per round
DIVE_INTERVAL = 200


@dataclass(frozen=True, eq=False)
class MilpResult:
    status: str  # optimal | gap-limit | time-limit | infeasible
    x: np.ndarray | None
    objective: float
    bound: float
    gap: float
    nodes: int
    root_bound: float
    elapsed: float


def relative_gap(bound: float, incumbent: float) -> float:
    return max(0.0, bound - incumbent) / max(1.0, abs(incumbent))


def sos_groups(model: MilpModel) -> list[list[int]]:
    """Binary columns tied by a sum-to-one equality row."""
    binary = {j for j in model.binaries}
    out = []
    for r in model.rows:
        if r.sense == "E" and r.rhs == 1.0 and len(r.coeffs) > 1 and all(
                j in binary and v == 1.0 for j, v in r.coeffs):
            out.append([j for j, _ in r.coeffs])
    return out


class _Node:
    __slots__ = ("bound", "depth", "fix", "basis", "branch")

    def __init__(self, bound, depth, fix, basis, branch=None):
        self.bound = bound
        self.depth = depth
        self.fix = fix
        self.basis = basis
        self.branch = branch  # (column, direction, parent LP value, fractional part)


class BranchAndBound:
    def __init__(self, model: MilpModel, options: SolverOptions):
        self.model = model
        self.opt = options
        self.engine: DualSimplex = engine_for(model, options.feasibility_tol)
        self.lb0, self.ub0 = model.bounds()
        self.bins = np.array(model.binaries, dtype=int)
        self.const = model.objective_constant
        self.groups = sos_groups(model)
        grouped = {j for g in self.groups for j in g}
        self.loose = np.array([j for j in self.bins if j not in grouped], dtype=int)
        # tie-break priority: curve-selection binaries first, then a seeded order
        rng = np.random.default_rng(options.seed)
        jitter = rng.permutation(len(self.bins)) if options.seed else np.arange(len(self.bins))
        self.priority = {
            int(j): (0 if model.columns[j].symbol.startswith("U") else 1, int(jitter[i]))
            for i, j in enumerate(self.bins)}
        self.pc_sum = {}  # (col, dir) -> [sum of per-unit degradation, count]
        self.incumbent = None
        self.inc_obj = -np.inf
        self.nodes = 0
        self.pruned_max = -np.inf

    def _prune(self, bound, tol) -> bool:
        """True when a subtree with this bound cannot beat the incumbent by more than tol."""
        if self.incumbent is None or bound > self.inc_obj + tol:
            return False
        self.pruned_max = max(self.pruned_max, bound)
        return True

    # -- LP at a node ----------------------------------------------------------

    def _bounds(self, fix):
        lb, ub = self.lb0.copy(), self.ub0.copy()
        for j, v in fix:
            lb[j] = ub[j] = v
        return lb, ub

    def _lp(self, fix, basis, iteration_limit=None):
        lb, ub = self._bounds(fix)
        sol = self.engine.solve(lb, ub, basis, iteration_limit)
        if sol.status == "unbounded":
            raise SolverError("LP relaxation unbounded; the model needs finite bounds")
        return sol

    def _rc_fixings(self, sol, obj, fix, tol):
        """Binaries whose move off their bound would cost more than the incumbent margin."""
        if self.incumbent is None or sol.reduced_costs is None:
            return ()
        fixed = {j for j, _ in fix}
        rc = sol.reduced_costs[self.bins]
        v = sol.x[self.bins]
        limit = self.inc_obj + tol
        out = []
        for i in np.flatnonzero(((v <= INT_TOL) & (obj + rc <= limit))
                                | ((v >= 1.0 - INT_TOL) & (obj - rc <= limit))):
            j = int(self.bins[i])
            if j in fixed:
                continue
            val = 0.0 if v[i] <= INT_TOL else 1.0
            self.pruned_max = max(self.pruned_max, obj - abs(rc[i]))
            out.append((j, val))
        return tuple(out)

    def _fractional(self, x):
        v = x[self.bins]
        f = np.abs(v - np.round(v))
        return self.bins[f > INT_TOL]

    def _most_fractional(self, x, frac):
        def fr(j):
            f = x[j] - np.floor(x[j])
            return min(f, 1.0 - f)

        return int(max(frac, key=lambda j: (round(fr(j), 9), -self.priority[int(j)][0],
                                            -self.priority[int(j)][1])))

    def _pick(self, node, sol, obj, frac, tol):
        """Branching column plus any child LPs already solved while choosing it.

        Pseudo-cost branching is reliability-style: candidates whose
        pseudo-costs rest on fewer than RELIABLE observations are scored by
        strong branching (a few dual simplex iterations on each child).
        """
        if self.opt.branching != "pseudo-cost":
            return self._most_fractional(sol.x, frac), {}
        x = sol.x
        est = {int(j): self._pc_estimate(int(j), x[j]) for j in frac}
        order = sorted(est, key=lambda j: (-self._product(*est[j]), self.priority[j]))
        best_j, best_score, best_children = None, -1.0, {}
        stale = 0
        probes = 0
        for j in order:
            if self._reliable(j) or probes >= SB_MAX_CANDIDATES:
                score, children = self._product(*est[j]), {}
            else:
                probes += 1
                score, children = self._strong_branch(node, sol, obj, j, tol)
            key = (score, -self.priority[j][0], -self.priority[j][1])
            if best_j is None or key > (best_score, -self.priority[best_j][0],
                                        -self.priority[best_j][1]):
                best_j, best_score, best_children = j, score, children
                stale = 0
            else:
                stale += 1
                if stale >= SB_LOOKAHEAD:
                    break
        return best_j, best_children

    @staticmethod
    def _product(dn, up):
        return max(dn, 1e-6) * max(up, 1e-6)

    def _reliable(self, j):
        return all(self.pc_sum.get((j, d), (0, 0))[1] >= RELIABLE for d in (0, 1))

    def _pc_estimate(self, j, v):
        f = v - np.floor(v)
        out = []
        for d, unit in ((0, f), (1, 1.0 - f)):
            s = self.pc_sum.get((j, d))
            if s and s[1]:
                rate = s[0] / s[1]
            else:
                known = [a / n for (jj, dd), (a, n) in self.pc_sum.items() if dd == d and n]
                rate = float(np.mean(known)) if known else 1.0
            out.append(rate * unit)
        return out[0], out[1]

    def _strong_branch(self, node, sol, obj, j, tol):
        """Score column ``j`` by partially solving both children."""
        f = sol.x[j] - np.floor(sol.x[j])
        deltas, children = [], {}
        for val in (0.0, 1.0):
            fix = node.fix + ((j, val),)
            child = self._lp(fix, sol.basis, SB_ITERATIONS)
            if child.status == "infeasible":
                children[val] = child
                deltas.append(1e30)
                continue
            cobj = child.objective + self.const
            delta = max(obj - cobj, 0.0)
            unit = f if val == 0.0 else 1.0 - f
            if unit > 0:
                s = self.pc_sum.setdefault((j, int(val)), [0.0, 0])
                s[0] += delta / unit
                s[1] += 1
            if child.status == "optimal":
                children[val] = child
                if self._fractional(child.x).size == 0:
                    self._offer(child.x, cobj)
            deltas.append(delta)
        return self._product(*deltas), children

    def _record_pc(self, node, obj):
        if node.branch is None:
            return
        j, direction, parent_obj, f = node.branch
        unit = f if direction == 0 else 1.0 - f
        if unit <= 0:
            return
        s = self.pc_sum.setdefault((j, direction), [0.0, 0])
        s[0] += max(parent_obj - obj, 0.0) / unit
        s[1] += 1

    # -- heuristic -------------------------------------------------------------

    def _round(self, x, fix, basis):
        fixed = dict(fix)
        for g in self.groups:
            if all(j in fixed for j in g):
                continue
            best = max(g, key=lambda j: (x[j], -j))
            for j in g:
                fixed.setdefault(j, 1.0 if j == best else 0.0)
        for j in self.loose:
            fixed.setdefault(int(j), 1.0 if x[j] >= 0.5 else 0.0)
        sol = self._lp(tuple(sorted(fixed.items())), basis)
        if sol.status == "optimal":
            self._offer(sol.x, sol.objective + self.const)

    def _dive(self, sol, fix, backtracks: int = 8):
        """Fix near-integral binaries in batches, re-solving the LP after each batch.

        An infeasible batch is undone and its first column fixed the other
        way instead, up to ``backtracks`` times.
        """
        fixed = dict(fix)
        for _ in range(2 * len(self.bins)):
            frac = self._fractional(sol.x)
            if frac.size == 0:
                self._offer(sol.x, sol.objective + self.const)
                return
            if self._prune(sol.objective + self.const, 0.0):
                return
            v = sol.x[frac]
            order = np.argsort(np.minimum(v, 1.0 - v), kind="stable")
            batch = [(int(frac[i]), 1.0 if v[i] >= 0.5 else 0.0)
                     for i in order[:max(1, -(-frac.size // DIVE_BATCH))]]
            nxt = self._lp(tuple(sorted({**fixed, **dict(batch)}.items())), sol.basis)
            if nxt.status != "optimal":
                if backtracks <= 0:
                    return
                backtracks -= 1
                j, val = batch[0]
                batch = [(j, 1.0 - val)]
                nxt = self._lp(tuple(sorted({**fixed, j: 1.0 - val}.items())), sol.basis)
                if nxt.status != "optimal":
                    return
            fixed.update(batch)
            sol = nxt

    def _offer(self, x, obj):
        if obj > self.inc_obj:
            x = x.copy()
            x[self.bins] = np.round(x[self.bins])
            self.incumbent, self.inc_obj = x, obj
            return True
        return False

    # -- search ----------------------------------------------------------------

    def run(self) -> MilpResult:
        t0 = time.monotonic()
        opt = self.opt
        root = self._lp((), None)
        if root.status == "infeasible":
            return MilpResult("infeasible", None, float("nan"), float("nan"), float("inf"), 1,
                              float("nan"), time.monotonic() - t0)
        root_bound = root.objective + self.const
        self.nodes = 1
        heap: list = []
        seq = 0
        stack: list[_Node] = []
        current = (_Node(root_bound, 0, (), root.basis), root)
        status = "optimal"
        last_log = 0
        last_dive = 0

        def tol():
            return opt.gap * max(1.0, abs(self.inc_obj)) if self.incumbent is not None else 0.0

        def open_bound():
            b = [-h[0] for h in heap] + [n.bound for n in stack]
            if current is not None:
                b.append(current[0].bound)
            return max(b) if b else -np.inf

        while True:
            if current is None:
                if self.incumbent is not None and stack:
                    for n in stack:
                        seq += 1
                        heapq.heappush(heap, (-n.bound, seq, n))
                    stack.clear()
                if stack:
                    node = stack.pop()
                elif heap:
                    node = heapq.heappop(heap)[2]
                else:
                    break
                if self._prune(node.bound, tol()):
                    continue
                sol = self._lp(node.fix, node.basis)
                self.nodes += 1
                if sol.status != "optimal":
                    continue
                current = (node, sol)
            node, sol = current
            current = None
            obj = sol.objective + self.const
            self._record_pc(node, obj)
            if self._prune(obj, tol()):
                continue
            frac = self._fractional(sol.x)
            if frac.size == 0:
                self._offer(sol.x, obj)
                continue
            if self.incumbent is None and (self.nodes == 1 or self.nodes % 20 == 0) or \
                    self.nodes % 50 == 0:
                self._round(sol.x, node.fix, sol.basis)
                if self._prune(obj, tol()):
                    continue
            if self.nodes == 1 or self.nodes - last_dive >= DIVE_INTERVAL:
                last_dive = self.nodes
                self._dive(sol, node.fix)
                if self._prune(obj, tol()):
                    continue
            j, solved = self._pick(node, sol, obj, frac, tol())
            if self.incumbent is not None and self._prune(obj, tol()):
                continue
            v = sol.x[j]
            f = v - np.floor(v)
            first = 1.0 if f >= 0.5 else 0.0
            base = node.fix + self._rc_fixings(sol, obj, node.fix, tol())
            children = []
            for val in (first, 1.0 - first):
                pre = solved.get(val)
                if pre is not None and pre.status != "optimal":
                    continue  # infeasible child
                cbound = obj if pre is None else min(obj, pre.objective + self.const)
                if self._prune(cbound, tol()):
                    continue
                children.append((_Node(cbound, node.depth + 1, base + ((j, val),), sol.basis,
                                       (j, int(val), obj, f)), pre))
            if self.incumbent is None:
                for child, _ in reversed(children):
                    stack.append(child)
            elif children:
                # plunge into the preferred child, park its sibling
                for child, _ in children[1:]:
                    seq += 1
                    heapq.heappush(heap, (-child.bound, seq, child))
                child, pre = children[0]
                csol = pre if pre is not None else self._lp(child.fix, child.basis)
                self.nodes += 1
                if csol.status == "optimal":
                    current = (child, csol)
            if opt.log_interval and self.nodes - last_log >= opt.log_interval:
                last_log = self.nodes
                ob = open_bound()
                log.info("nodes=%d open=%d incumbent=%.10g bound=%.10g gap=%.3g", self.nodes,
                         len(heap) + len(stack), self.inc_obj, ob,
                         relative_gap(ob, self.inc_obj) if self.incumbent is not None else np.inf)
            if self.incumbent is not None:
                ob = open_bound()
                if relative_gap(ob, self.inc_obj) <= opt.gap:
                    break
            if opt.node_limit is not None and self.nodes >= opt.node_limit:
                status = "gap-limit"
                break
            if opt.time_limit is not None and time.monotonic() - t0 >= opt.time_limit:
                status = "time-limit"
                break

        elapsed = time.monotonic() - t0
        if self.incumbent is None:
            if status == "optimal":
                return MilpResult("infeasible", None, float("nan"), float("nan"), float("inf"),
                                  self.nodes, root_bound, elapsed)
            return MilpResult(status, None, float("nan"), open_bound(), float("inf"), self.nodes,
                              root_bound, elapsed)
        bound = max(open_bound(), self.inc_obj, self.pruned_max)
        gap = relative_gap(bound, self.inc_obj)
        if status != "optimal" and gap <= opt.gap:
            status = "optimal"
        return MilpResult(status, self.incumbent, self.inc_obj, bound, gap, self.nodes, root_bound,
                          elapsed)


def branch_and_bound(model: MilpModel, options: SolverOptions | None = None) -> MilpResult:
    return BranchAndBound(model, options or SolverOptions()).run()


def solve_milp(model: MilpModel, options: SolverOptions | None = None, scenario=None):
    """Solve ``model`` and return a validated :class:`DispatchSolution`."""
    from ..builder import extract_solution, infeasible_solution

    options = options or SolverOptions()
    res = branch_and_bound(model, options)
    if res.x is None:
        return infeasible_solution(model, res.status, bound=res.bound, nodes=res.nodes,
                                   elapsed=res.elapsed)
    return extract_solution(model, res.x, objective=res.objective, status=res.status,
                            bound=res.bound, gap=res.gap, scenario=scenario, nodes=res.nodes,
                            elapsed=res.elapsed)

