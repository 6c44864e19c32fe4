"""Stage 3: spatial branch and bound over the CG scalars, and the solve driver.

Nodes are boxes on the independent scalars (variables without a
definition); every other box follows by bound tightening. Each node is
bounded by the cutting-plane relaxation and explored best first.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..pep.qcqp import QcqpProblem
from ..pep.scaled import scaled_from_direction, to_direction, to_scaled
from .fbbt import Infeasible, Propagator
from .local import stage2_local
from .relax import Cut, Relaxation, RelaxationFailed, RelaxationInfeasible, seed_cuts
from .report import Incumbent, SolveReport, point_by_kind, relative_gap
from .stage1 import stage1_feasible

BRANCH_KINDS = ("beta", "gamma")


@dataclass
class SolverOptions:
    tol_rel: float = 1e-3
    max_nodes: int = 100_000
    max_time: float = 600.0
    seed: int = 0
    cuts_init: int = 0
    node_rounds: int = 60
    local_every: int = 10
    max_doublings: int = 4
    feas_tol: float = 1e-8
    branch_gram: bool = False
    reformulate: bool = True


@dataclass(order=True)
class _Node:
    key: tuple[float, int]
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    bound: float = field(compare=False)
    x: np.ndarray = field(compare=False)
    cuts: list[Cut] = field(compare=False)
    depth: int = field(compare=False, default=0)


@dataclass
class GlobalResult:
    upper: float
    incumbent: Incumbent
    nodes: int
    cuts: int
    termination: str
    min_eig: float


def branch_candidates(prob: QcqpProblem, gram_diagonal: bool = True) -> list[int]:
    """Scalars without a definition (all other scalars depend on them), and Gram diagonals."""
    out = [i for i, v in enumerate(prob.variables)
           if v.kind not in ("G", "H", "F") and i not in prob.definitions]
    if gram_diagonal:
        out += [int(prob.gram_index[a, a]) for a in range(prob.gram_size)]
    return out


def _dependents(prob: QcqpProblem, cands: list[int]) -> dict[int, set[int]]:
    """Variables whose definition (transitively) involves each candidate."""
    defs = prob.definitions
    memo: dict[int, set[int]] = {}

    def roots(k: int) -> set[int]:
        if k in memo:
            return memo[k]
        memo[k] = set()
        d = defs.get(k)
        out = {k} if d is None else set()
        if d is not None:
            for v in d.variables():
                out |= roots(v)
        memo[k] = out
        return out

    dep: dict[int, set[int]] = {c: {c} for c in cands}
    for k in defs:
        for r in roots(k):
            if r in dep:
                dep[r].add(k)
    return dep


class BranchAndBound:
    def __init__(self, prob: QcqpProblem, opts: SolverOptions):
        self.prob = prob
        self.opts = opts
        self.rel = Relaxation(prob)
        self.prop = Propagator(prob)
        lb, ub = prob.bounds()
        self.cands = [c for c in branch_candidates(prob, opts.branch_gram)
                      if c in self.rel.col and ub[c] > lb[c] and c in {k for pr in self.rel.pairs for k in pr}]
        self.deps = _dependents(prob, self.cands)
        self.gram_diag = {int(prob.gram_index[a, a]) for a in range(prob.gram_size)}
        # pair columns touching each variable, for the branching score
        touch: dict[int, list[tuple[int, int, int]]] = {}
        for (i, j), w in self.rel.pair_list:
            for v in {i, j}:
                touch.setdefault(v, []).append((i, j, w))
        self.touch = touch
        self._counter = 0

    # ------------------------------------------------------------------
    def _tighten(self, lb, ub, inc: Incumbent | None):
        cutoff = None if inc is None else (self.prob.objective, inc.value)
        return self.prop.run(lb, ub, cutoff=cutoff)

    def _bound_node(self, lb, ub, cuts, depth, parent_bound, parent_x=None) -> _Node | None:
        try:
            r = self.rel.evaluate(lb, ub, cuts, max_rounds=self.opts.node_rounds)
        except RelaxationInfeasible:
            return None
        except RelaxationFailed:
            if parent_x is None:
                raise
            # the parent's bound stays valid on the child box
            self._counter += 1
            self.lp_failures += 1
            return _Node((-parent_bound, self._counter), lb, ub, parent_bound, parent_x, list(cuts), depth)
        bound = min(r.bound, parent_bound)
        self._counter += 1
        self.new_cuts += len(r.new_cuts)
        self.last_eig = r.min_eig
        return _Node((-bound, self._counter), lb, ub, bound, r.x, r.active, depth)

    def _choose(self, node: _Node, root_w: np.ndarray) -> int | None:
        x, rel = node.x, self.rel
        scale = max(1.0, float(np.abs(x).max()))
        best, best_score = None, -1.0
        for k, c in enumerate(self.cands):
            w = node.ub[c] - node.lb[c]
            if not w > 1e-9 * max(1.0, abs(node.ub[c])):
                continue
            viol = 0.0
            for v in self.deps[c]:
                for i, j, col in self.touch.get(v, ()):
                    viol += abs(x[col] - x[rel.col[i]] * x[rel.col[j]])
            score = (viol / scale + 1e-12) * (w / root_w[k])
            if score > best_score:
                best, best_score = c, score
        return best

    def _split(self, node: _Node, c: int) -> list[tuple[np.ndarray, np.ndarray]]:
        lo, hi = node.lb[c], node.ub[c]
        v = float(node.x[self.rel.col[c]])
        if c in self.gram_diag and lo > 0:
            # Gram diagonals span orders of magnitude: split geometrically
            v = math.sqrt(lo * hi)
        v = min(max(v, lo + 0.1 * (hi - lo)), hi - 0.1 * (hi - lo))
        out = []
        for a, b in ((lo, v), (v, hi)):
            lb, ub = node.lb.copy(), node.ub.copy()
            lb[c], ub[c] = a, b
            out.append((lb, ub))
        return out

    def _local(self, node: _Node, inc: Incumbent) -> Incumbent:
        z = self.prob.complete(np.clip(self.rel.project(node.x), *self.prob.bounds()))
        G = self.prob.gram_matrix(z)
        self.prob.set_gram(z, G)
        cand = stage2_local(self.prob, Incumbent(z, -math.inf, "lp"), tol=self.opts.feas_tol)
        if cand.source == "stage2" and cand.value > inc.value:
            return Incumbent(cand.z, cand.value, "stage3")
        return inc

    # ------------------------------------------------------------------
    def run(self, inc: Incumbent, deadline: float) -> GlobalResult:
        opts, prob = self.opts, self.prob
        self.new_cuts = 0
        self.lp_failures = 0
        self.last_eig = 0.0
        rng = np.random.default_rng(opts.seed)
        lb, ub = prob.bounds()
        root_w = np.array([max(ub[c] - lb[c], 1e-12) for c in self.cands])
        try:
            lb, ub = self._tighten(lb, ub, inc)
        except Infeasible:
            return GlobalResult(inc.value, inc, 1, 0, "exhausted", 0.0)
        cuts = seed_cuts(self.rel, inc.z, rng, n_random=opts.cuts_init)
        root = self._bound_node(lb, ub, cuts, 0, math.inf)
        if root is None:
            return GlobalResult(inc.value, inc, 1, self.new_cuts, "exhausted", 0.0)
        heap = [root]
        nodes = 1
        pruned_max = -math.inf
        min_eig = root.x.size and self.last_eig
        termination = "exhausted"
        inc = self._local(root, inc)
        while heap:
            upper = max(heap[0].bound, pruned_max, inc.value)
            if relative_gap(upper, inc.value) <= opts.tol_rel:
                termination = "gap"
                break
            if nodes >= opts.max_nodes:
                termination = "nodes"
                break
            if time.perf_counter() >= deadline:
                termination = "time"
                break
            node = heapq.heappop(heap)
            if relative_gap(node.bound, inc.value) <= opts.tol_rel:
                pruned_max = max(pruned_max, node.bound)
                continue
            c = self._choose(node, root_w)
            if c is None:
                # nothing left to split: the relaxation bound stands
                pruned_max = max(pruned_max, node.bound)
                continue
            for clb, cub in self._split(node, c):
                try:
                    clb, cub = self._tighten(clb, cub, inc)
                except Infeasible:
                    continue
                child = self._bound_node(clb, cub, node.cuts, node.depth + 1, node.bound, node.x)
                nodes += 1
                if child is None:
                    continue
                if nodes % opts.local_every == 0:
                    inc = self._local(child, inc)
                if child.bound <= inc.value:
                    continue
                heapq.heappush(heap, child)
        upper = max([n.bound for n in heap[:1]] + [pruned_max, inc.value])
        if heap:
            min_eig = self.last_eig
        return GlobalResult(upper, inc, nodes, self.new_cuts, termination, float(min_eig))


def stage3_global(prob: QcqpProblem, inc: Incumbent, opts: SolverOptions | None = None,
                  deadline: float | None = None) -> GlobalResult:
    opts = opts or SolverOptions()
    if deadline is None:
        deadline = time.perf_counter() + opts.max_time
    return BranchAndBound(prob, opts).run(inc, deadline)


# ---------------------------------------------------------------------------
# driver


def heuristic_contacts(prob: QcqpProblem, z: np.ndarray, rtol: float = 1e-6) -> list[str]:
    """Heuristic boxes the point touches (the incumbent must be strictly inside)."""
    out = []
    for v, val in zip(prob.variables, z):
        if not v.heuristic:
            continue
        for end in (v.lb, v.ub):
            if math.isfinite(end) and end != 0.0 and abs(val - end) <= rtol * max(1.0, abs(end)):
                out.append(v.name)
    return out


def double_heuristic_boxes(prob: QcqpProblem) -> QcqpProblem:
    """Copy with every heuristic box end (away from zero) doubled."""
    out = prob.copy()
    for v in out.variables:
        if v.heuristic:
            if v.ub > 0:
                v.ub *= 2.0
            if v.lb < 0:
                v.lb *= 2.0
    if "gram_cap" in out.meta:
        out.meta["gram_cap"] = 2.0 * out.meta["gram_cap"]
    return out


def solve(prob: QcqpProblem, opts: SolverOptions | None = None, *, start: Incumbent | None = None) -> SolveReport:
    """Three-stage solve: feasible start, local improvement, certified bound.

    Direction PEPs are bounded through their step-scaled equivalent (same
    optimal value, far tighter relaxation); the incumbent is mapped back and
    checked against the original constraints.
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    deadline = t0 + opts.max_time
    doublings = 0
    stages: dict[str, float] = {}
    scaled = opts.reformulate and prob.meta.get("family") == "direction"
    while True:
        work = scaled_from_direction(prob) if scaled else prob
        inc = stage1_feasible(prob, seed=opts.seed, tol=opts.feas_tol)
        stages["stage1"] = inc.value
        if start is not None and start.value > inc.value:
            inc = start
        if scaled:
            z = to_scaled(prob, work, inc.z)
            inc = Incumbent(z, work.objective_value(z), inc.source)
        inc = stage2_local(work, inc, tol=opts.feas_tol)
        stages["stage2"] = inc.value
        res = stage3_global(work, inc, opts, deadline)
        stages["stage3"] = res.incumbent.value
        touched = heuristic_contacts(work, res.incumbent.z)
        if not touched or doublings >= opts.max_doublings or time.perf_counter() >= deadline:
            break
        prob = double_heuristic_boxes(prob)
        doublings += 1
    inc = res.incumbent
    z = to_direction(work, prob, inc.z) if scaled else inc.z
    term = res.termination
    if touched:
        term = term + "+heuristic-box"
    extra = {"doublings": doublings, "heuristic_contacts": touched, "tol_rel": opts.tol_rel,
             "seed": opts.seed, "relaxation_min_eig": res.min_eig}
    if scaled:
        extra["bounded_as"] = work.name
    return SolveReport(
        problem=prob.name,
        upper_bound=float(res.upper),
        incumbent_value=float(prob.objective_value(z)),
        incumbent=point_by_kind(prob, z),
        nodes=res.nodes,
        cuts=res.cuts,
        termination=term,
        wall_time=time.perf_counter() - t0,
        min_eig=float(np.linalg.eigvalsh(prob.gram_matrix(z)).min()),
        max_violation=float(prob.max_violation(z)),
        stages=stages,
        extra=extra,
    )
