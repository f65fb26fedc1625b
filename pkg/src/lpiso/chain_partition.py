"""Stage-bounded norm accounting and chain decomposition of disintegrations.

A disintegration assigns a vector to every node of a (possibly infinite)
tree, children summing to parents, incomparable nodes disjoint.  Its
domain is explored through a monotone stage enumeration.  The central
search: from a nonterminal node, find a child whose p-th-power norm is
within 2^-(level+1) of the best sibling, using only stage-bounded rational
approximations.  The trigger

    M(mu, t) - Sigma^-(children at t, t)  <  max m(child, t)

certifies that the currently enumerated children already contain a
maximal one; it fires at infinitely many stages, so a bounded search
either succeeds or reports an exhausted budget (never a wrong child).

Chains are grown deterministically: the root's chain is 0, each node's
almost norm-maximizing child continues its chain, every other child opens
a fresh chain in enumeration order.  Chain infima are atoms or zero; their
norms are only right-approximable, so exact limit values flow through a
transparent oracle adapter, while staged adapters taint results as
provisional.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .errors import (
    BudgetExhaustedError,
    NonterminalRequiredError,
    PrecisionExhaustedError,
)
from .lp_vectors import FinSuppVector, norm_power_p
from .presentations import ComputableVector, GenCombo, OracleAdapter, Presentation
from .scalar_core import (
    MAX_WORKING_PREC,
    DyadicInterval,
    PExponent,
    _width_target,
    pow_enclosure,
)
from .tree_maps import ROOT, FiniteTree, TreeNode, TreeValue

# ---------------------------------------------------------------------------
# sources
# ---------------------------------------------------------------------------


def norm_power_value(value: TreeValue, p: PExponent, k: int) -> DyadicInterval:
    """Enclosure of ||value||^p, width <= 2**-k, for either value kind."""
    if isinstance(value, FinSuppVector):
        return norm_power_p(value, p, k)
    kk = k + 2
    while True:
        box = value.norm_enclosure(kk)
        out = pow_enclosure(box, p, kk)
        if out.width <= _width_target(k):
            return out
        kk += max(4, kk // 2)
        if kk > MAX_WORKING_PREC:
            raise PrecisionExhaustedError("norm power refinement exceeded the cap")


class ChainSource:
    """A staged disintegration: values on nodes, revealed through stages."""

    p: PExponent
    pres: Optional[Presentation]

    def stage_tree(self, t: int) -> FiniteTree:
        raise NotImplementedError

    def value(self, node: TreeNode) -> TreeValue:
        raise NotImplementedError

    def certified_terminal(self, node: TreeNode) -> bool:
        """True only when the node provably never gains children."""
        return False

    def limit_vector(self, chain: Sequence[TreeNode]) -> Optional[TreeValue]:
        """Exact infimum along an infinite chain, when the source knows it."""
        return None

    def norm_power_approx(self, node: TreeNode, t: int) -> Fraction:
        """q(node, t) with |q - ||value||^p| < 2**-(t+1)."""
        return norm_power_value(self.value(node), self.p, t + 3).mid


class FiniteDisintegration(ChainSource):
    """A fully materialized finite disintegration with a reveal schedule."""

    def __init__(
        self,
        values: Dict[TreeNode, TreeValue],
        p: PExponent,
        pres: Optional[Presentation] = None,
        schedule: Optional[List[FiniteTree]] = None,
    ):
        if ROOT not in values:
            raise ValueError("a disintegration carries a root value")
        self.tree = FiniteTree(values.keys())
        if set(self.tree.nodes) != set(values):
            raise ValueError("value domain must be prefix-closed")
        self.values = dict(values)
        self.p = p
        self.pres = pres
        if schedule is None:
            ordered = self.tree.sorted_nodes()
            schedule = [FiniteTree(ordered[: i + 1]) for i in range(len(ordered))]
        for st in schedule:
            if not st.is_subtree_of(self.tree):
                raise ValueError("schedule trees must be subtrees of the domain")
        for a, b in zip(schedule, schedule[1:]):
            if not a.is_subtree_of(b):
                raise ValueError("schedule must be monotone")
        if schedule and schedule[-1] != self.tree:
            raise ValueError("schedule must eventually reveal the whole tree")
        self.schedule = schedule

    def stage_tree(self, t: int) -> FiniteTree:
        if not self.schedule:
            return self.tree
        return self.schedule[min(t, len(self.schedule) - 1)]

    def value(self, node: TreeNode) -> TreeValue:
        return self.values[node]

    def certified_terminal(self, node: TreeNode) -> bool:
        return self.tree.is_terminal(node)

    def check_exact(self) -> None:
        """Exact summativity / disjointness checks (transparent values only)."""
        for node in self.tree.sorted_nodes():
            kids = self.tree.children(node)
            if not kids:
                continue
            total = FinSuppVector.zero()
            for kid in kids:
                val = self.values[kid]
                if not isinstance(val, FinSuppVector):
                    return  # opaque values: nothing to check exactly
                total = total + val
            parent_val = self.values[node]
            if isinstance(parent_val, FinSuppVector) and parent_val != total:
                raise ValueError(f"summativity fails at {node}")


class LazyDisintegration(ChainSource):
    """An infinite disintegration described by callables (fixtures)."""

    def __init__(
        self,
        p: PExponent,
        pres: Optional[Presentation],
        value_fn: Callable[[TreeNode], TreeValue],
        stage_fn: Callable[[int], FiniteTree],
        terminal_fn: Callable[[TreeNode], bool] = lambda node: False,
        limit_fn: Optional[Callable[[Tuple[TreeNode, ...]], Optional[TreeValue]]] = None,
        norm_power_fn: Optional[Callable[[TreeNode, int], Fraction]] = None,
    ):
        self.p = p
        self.pres = pres
        self._value_fn = value_fn
        self._stage_fn = stage_fn
        self._terminal_fn = terminal_fn
        self._limit_fn = limit_fn
        self._norm_power_fn = norm_power_fn
        self._value_memo: Dict[TreeNode, TreeValue] = {}

    def norm_power_approx(self, node: TreeNode, t: int) -> Fraction:
        if self._norm_power_fn is not None:
            return self._norm_power_fn(node, t)
        return super().norm_power_approx(node, t)

    def stage_tree(self, t: int) -> FiniteTree:
        return self._stage_fn(t)

    def value(self, node: TreeNode) -> TreeValue:
        if node not in self._value_memo:
            self._value_memo[node] = self._value_fn(node)
        return self._value_memo[node]

    def certified_terminal(self, node: TreeNode) -> bool:
        return self._terminal_fn(node)

    def limit_vector(self, chain: Sequence[TreeNode]) -> Optional[TreeValue]:
        if self._limit_fn is None:
            return None
        return self._limit_fn(tuple(chain))


def dyadic_fixture(pres: Presentation) -> LazyDisintegration:
    """The textbook disintegration: root = sum 2^-n e_n, child n = 2^-n e_n."""
    from .scalar_core import GaussianRational

    def value(node: TreeNode) -> TreeValue:
        if node.is_root():

            def approx(k: int) -> GenCombo:
                # p >= 1 makes the lp tail at most the l1 tail 2^-(k+1)
                return GenCombo(
                    {n: GaussianRational.of(Fraction(1, 2**n)) for n in range(k + 2)}
                )

            return ComputableVector(approx, pres, "dyadic-root")
        if len(node) == 1:
            n = node.path[0]
            return FinSuppVector.basis(n, GaussianRational.of(Fraction(1, 2**n)))
        raise ValueError(f"node {node} outside the fixture domain")

    def stage(t: int) -> FiniteTree:
        return FiniteTree([TreeNode.of(n) for n in range(t + 1)])

    return LazyDisintegration(
        pres.p, pres, value, stage, terminal_fn=lambda node: len(node) == 1
    )


# ---------------------------------------------------------------------------
# stage bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StageBound:
    """Rational bracket for one node's p-th-power norm at stage t.

    m is clamped at zero: a p-th power is nonnegative, so a negative lower
    bound carries no information, and the trigger arithmetic needs m >= 0.
    """

    node: TreeNode
    t: int
    q: Fraction

    @property
    def m(self) -> Fraction:
        return max(self.q - _width_target(self.t + 1), Fraction(0))

    @property
    def M(self) -> Fraction:
        return self.q + _width_target(self.t + 1)


def stage_bounds(source: ChainSource, nodes: Sequence[TreeNode], t: int) -> Dict[TreeNode, StageBound]:
    return {node: StageBound(node, t, source.norm_power_approx(node, t)) for node in nodes}


def sigma_lower(bounds: Dict[TreeNode, StageBound]) -> Fraction:
    return sum((b.m for b in bounds.values()), Fraction(0))


def m_bar(bounds: Dict[TreeNode, StageBound]) -> Fraction:
    return max((b.m for b in bounds.values()), default=Fraction(0))


# ---------------------------------------------------------------------------
# the child search
# ---------------------------------------------------------------------------


@dataclass
class AnmCertificate:
    parent: TreeNode
    child: TreeNode
    stage: int
    m_child: Fraction
    slack: Fraction  # the certified bound: others <= m_child + slack


def find_anm_child(
    source: ChainSource,
    mu: TreeNode,
    *,
    max_stage: int = 4096,
) -> AnmCertificate:
    """An almost norm-maximizing child of mu, with a stage certificate.

    Searches stages t >= |mu| + 2 so the certified slack 2**-t is at most
    2^-(|child|+1), the constant in the definition (the looser search bound
    2^-|mu| is recorded implicitly by the stage).  Ties between maximizers
    go to the lexicographically least child.
    """
    if source.certified_terminal(mu):
        raise NonterminalRequiredError(f"{mu} is terminal")
    t = len(mu) + 2
    precision_failures = 0
    while t <= max_stage:
        tree = source.stage_tree(t)
        if mu in tree:
            kids = tree.children(mu)
            if kids:
                try:
                    parent_bound = StageBound(mu, t, source.norm_power_approx(mu, t))
                    kid_bounds = stage_bounds(source, kids, t)
                except PrecisionExhaustedError:
                    # precision demands only grow with t; a capped source
                    # will not start answering later
                    precision_failures += 1
                    if precision_failures > 4:
                        raise BudgetExhaustedError(
                            f"the source cannot answer stage bounds around {mu}; "
                            "build more stages",
                            budget=t,
                        )
                    t += 1
                    continue
                top = m_bar(kid_bounds)
                if parent_bound.M - sigma_lower(kid_bounds) < top:
                    best = min(k for k in kids if kid_bounds[k].m == top)
                    return AnmCertificate(mu, best, t, kid_bounds[best].m, _width_target(t))
        t += 1
    raise BudgetExhaustedError(
        f"almost norm-maximizing child of {mu} not certified by stage {max_stage}",
        budget=max_stage,
    )


# ---------------------------------------------------------------------------
# chain partition
# ---------------------------------------------------------------------------


@dataclass
class ChainPartition:
    assignment: Dict[TreeNode, int]
    chains: List[List[TreeNode]]
    certificates: Dict[TreeNode, AnmCertificate]
    explored: FiniteTree

    def chain_of(self, node: TreeNode) -> int:
        return self.assignment[node]

    def report(self, source: ChainSource, t: int) -> list:
        out = []
        for cid, nodes in enumerate(self.chains):
            bounds = {}
            for node in nodes:
                try:
                    bound = StageBound(node, t, source.norm_power_approx(node, t))
                    bounds[str(list(node.path))] = [str(bound.m), str(bound.M)]
                except PrecisionExhaustedError:
                    # e.g. the root of a shallow staged build: its tail bound
                    # cannot support this stage precision yet
                    bounds[str(list(node.path))] = None
            out.append(
                {
                    "chain": cid,
                    "nodes": [list(n.path) for n in nodes],
                    "norm_power_bounds": bounds,
                }
            )
        return out


def partition_chains(
    source: ChainSource,
    *,
    stage_budget: int = 64,
    search_budget: int = 4096,
) -> ChainPartition:
    """Deterministic chain decomposition of the stage-`stage_budget` tree.

    Nodes are processed in enumeration order (stage of first appearance,
    then level, then path).  Nonterminal nodes have their almost
    norm-maximizing child certified by the bounded search; the child
    continues the parent's chain and each remaining child opens a fresh
    one.
    """
    explored = source.stage_tree(stage_budget)
    appearance: Dict[TreeNode, int] = {}
    for t in range(stage_budget + 1):
        for node in source.stage_tree(t).sorted_nodes():
            appearance.setdefault(node, t)
    order = sorted(explored.sorted_nodes(), key=lambda n: (appearance[n], len(n), n.path))

    certificates: Dict[TreeNode, AnmCertificate] = {}
    for node in order:
        if not explored.is_terminal(node):
            certificates[node] = find_anm_child(source, node, max_stage=search_budget)

    assignment: Dict[TreeNode, int] = {}
    chains: List[List[TreeNode]] = []
    for node in order:
        if node.is_root():
            assignment[node] = 0
            chains.append([node])
            continue
        parent = node.parent()
        cert = certificates.get(parent)
        if cert is not None and cert.child == node:
            cid = assignment[parent]
        else:
            cid = len(chains)
            chains.append([])
        assignment[node] = cid
        chains[cid].append(node)
    for chain in chains:
        chain.sort(key=len)
    return ChainPartition(assignment, chains, certificates, explored)


# ---------------------------------------------------------------------------
# chain limits
# ---------------------------------------------------------------------------


@dataclass
class ChainLimit:
    chain_id: int
    vector: Optional[TreeValue]
    norm_power: DyadicInterval
    status: str  # "exact" | "zero" | "provisional"

    @property
    def is_zero(self) -> bool:
        return self.status == "zero"


def chain_limit(
    source: ChainSource,
    partition: ChainPartition,
    chain_id: int,
    oracle: OracleAdapter,
    k: int,
) -> ChainLimit:
    """The infimum of the values along one chain, to precision 2**-k.

    Exact when the chain provably ends (terminal node) or the transparent
    source knows the limit; otherwise the deepest enumerated value stands
    in, with one-sided norm information only, and the result is tainted
    provisional.  A certified-zero limit is flagged so callers can drop it.
    """
    nodes = partition.chains[chain_id]
    deepest = nodes[-1]
    deep_value = source.value(deepest)

    if source.certified_terminal(deepest):
        box = norm_power_value(deep_value, source.p, max(k, 8))
        status = "zero" if box.hi == 0 else "exact"
        return ChainLimit(chain_id, deep_value, box, status)

    known = source.limit_vector(nodes) if oracle.mode == "transparent" else None
    if known is not None:
        box = norm_power_value(known, source.p, max(k, 8))
        if box.hi == 0 or (box.is_point() and box.lo == 0):
            return ChainLimit(chain_id, known, box, "zero")
        if box.lo > 0:
            return ChainLimit(chain_id, known, box, "exact")
        return ChainLimit(chain_id, known, box, "exact")

    # staged fallback: norms along the chain only decrease, giving an upper
    # bound; nothing certifies how much is still to fall
    upper = norm_power_value(deep_value, source.p, max(k, 8)).hi
    return ChainLimit(
        chain_id, deep_value, DyadicInterval(Fraction(0), upper), "provisional"
    )
