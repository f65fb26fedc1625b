"""Chain machinery: stage bounds, the child search, partitions, limits."""

import random
from fractions import Fraction

import pytest

from lpiso.errors import NonterminalRequiredError
from lpiso.lp_vectors import FinSuppVector, norm_power_p
from lpiso.presentations import (CeSet, ComputableVector, GenCombo, OracleAdapter,
    StandardPresentation, build_adversarial)
from lpiso.scalar_core import GaussianRational, PExponent
from lpiso.chain_partition import (
    FiniteDisintegration,
    LazyDisintegration,
    StageBound,
    chain_limit,
    dyadic_fixture,
    find_anm_child,
    partition_chains,
    stage_bounds,
)
from lpiso.tree_maps import ROOT, FiniteTree, TreeNode

P1 = PExponent.from_fraction(1)
P32 = PExponent.from_fraction(Fraction(3, 2))


def fs(entries):
    return FinSuppVector({n: GaussianRational.of(Fraction(q)) for n, q in entries.items()})


def two_level_fixture():
    # root = e_0 + e_1 + e_2; children split it into {e_0 + e_1, e_2}; then
    # e_0 + e_1 splits into atoms
    values = {
        ROOT: fs({0: 1, 1: 1, 2: 1}),
        TreeNode.of(0): fs({0: 1, 1: 1}),
        TreeNode.of(1): fs({2: 1}),
        TreeNode.of(0, 0): fs({0: 1}),
        TreeNode.of(0, 1): fs({1: 1}),
    }
    return FiniteDisintegration(values, P1, StandardPresentation(P1))


class TestStageBounds:
    def test_unit_vector(self):
        src = two_level_fixture()
        bound = stage_bounds(src, [TreeNode.of(1)], 3)[TreeNode.of(1)]
        assert bound.m >= 1 - Fraction(1, 8)
        assert bound.M <= 1 + Fraction(1, 8)
        assert bound.m <= 1 <= bound.M

    def test_sum_lower(self):
        src = two_level_fixture()
        bounds = stage_bounds(src, [TreeNode.of(0), TreeNode.of(1)], 4)
        total = sum(b.m for b in bounds.values())
        assert total >= 3 - Fraction(2, 16)  # exact sum 2 + 1 with slack

    def test_clamp_at_zero(self):
        bound = StageBound(TreeNode.of(5), 2, Fraction(1, 1024))
        assert bound.m == 0  # q below the slack clamps to zero, never negative


class TestFindAnmChild:
    def test_dyadic_root(self):
        src = dyadic_fixture(StandardPresentation(P1))
        cert = find_anm_child(src, ROOT)
        assert cert.child == TreeNode.of(0)

    def test_tie_breaks_lexicographically(self):
        values = {
            ROOT: fs({0: 1, 1: 1}),
            TreeNode.of(3): fs({0: 1}),
            TreeNode.of(7): fs({1: 1}),
        }
        src = FiniteDisintegration(values, P1, StandardPresentation(P1))
        cert = find_anm_child(src, ROOT)
        assert cert.child == TreeNode.of(3)

    def test_terminal_rejected(self):
        src = two_level_fixture()
        with pytest.raises(NonterminalRequiredError):
            find_anm_child(src, TreeNode.of(1))

    def test_certificate_against_brute_force(self):
        src = two_level_fixture()
        cert = find_anm_child(src, ROOT)
        # brute force over the full child set
        kids = src.tree.children(ROOT)
        exact = {kid: norm_power_p(src.values[kid], P1, 30).mid for kid in kids}
        best = max(exact.values())
        assert exact[cert.child] >= best - Fraction(1, 2 ** (len(cert.child) + 1))


def random_disintegration(rng, max_depth=3, max_fanout=3):
    """Random finite transparent disintegration by support splitting."""
    width = rng.randint(2, 6)
    weights = [Fraction(rng.randint(1, 16), rng.randint(1, 4)) for _ in range(width)]
    root_val = fs({n: w for n, w in enumerate(weights)})
    values = {ROOT: root_val}

    def split(node, depth):
        vec = values[node]
        support = sorted(vec.support())
        if depth >= max_depth or len(support) < 2 or rng.random() < 0.3:
            return
        fanout = rng.randint(2, min(max_fanout, len(support)))
        buckets = [[] for _ in range(fanout)]
        for i, idx in enumerate(support):
            buckets[rng.randrange(fanout)].append(idx)
        buckets = [b for b in buckets if b]
        if len(buckets) < 2:
            return
        for label, bucket in enumerate(buckets):
            child = node.child(label)
            values[child] = vec.restrict(bucket)
            split(child, depth + 1)

    split(ROOT, 0)
    return FiniteDisintegration(values, P1, StandardPresentation(P1))


class TestPartition:
    def test_dyadic_partition_shape(self):
        src = dyadic_fixture(StandardPresentation(P1))
        part = partition_chains(src, stage_budget=6)
        assert part.chains[0][:2] == [ROOT, TreeNode.of(0)]
        # every other level-1 node is its own chain
        for cid, chain in enumerate(part.chains[1:], start=1):
            assert len(chain) == 1 and len(chain[0]) == 1

    def test_two_level(self):
        src = two_level_fixture()
        part = partition_chains(src, stage_budget=8)
        # root chain follows the heavier child (0) then its heavier atom (0,0)
        assert part.chains[0] == [ROOT, TreeNode.of(0), TreeNode.of(0, 0)]
        assert part.assignment[TreeNode.of(1)] != 0
        assert part.assignment[TreeNode.of(0, 1)] != 0

    def test_partition_covers_and_disjoint(self):
        rng = random.Random(7)
        for _ in range(10):
            src = random_disintegration(rng)
            part = partition_chains(src, stage_budget=64)
            seen = {}
            for cid, chain in enumerate(part.chains):
                for node in chain:
                    assert node not in seen
                    seen[node] = cid
            assert set(seen) == set(src.tree.nodes)

    def test_anm_certificates_match_brute_force(self):
        rng = random.Random(11)
        for _ in range(25):
            src = random_disintegration(rng)
            part = partition_chains(src, stage_budget=64)
            for parent, cert in part.certificates.items():
                kids = src.tree.children(parent)
                exact = {k: norm_power_p(src.values[k], P1, 30) for k in kids}
                best = max(box.mid for box in exact.values())
                slack = Fraction(1, 2 ** (len(cert.child) + 1))
                assert exact[cert.child].mid >= best - slack - Fraction(1, 2**28)


class TestChainLimit:
    def test_terminal_chain(self):
        src = two_level_fixture()
        part = partition_chains(src, stage_budget=8)
        oracle = OracleAdapter(CeSet.explicit([1]), "transparent")
        lim = chain_limit(src, part, 0, oracle, 10)
        assert lim.status == "exact"
        assert lim.vector == fs({0: 1})

    def test_infinite_descent_with_known_limit(self):
        # chain boring into the e_0 component of the adversarial generator,
        # desk-scale infinite set of odd numbers: gamma = 2/3
        pres = build_adversarial(CeSet.from_json({"kind": "named", "name": "odds"}), P1)
        atom = fs({0: Fraction(1, 3)})

        def value(node):
            if node.is_root() or set(node.path) == {0}:
                d = len(node)
                # (1/3) e_0 plus the tail of f_0 from enumeration position d on
                vec = dict(atom.entries)
                for m in range(d, d + 40):
                    c = pres.ce.element(m)
                    vec[m + 1] = GaussianRational.of(Fraction(1, 2**c))
                return fs({}) + FinSuppVector(vec)  # truncated stand-in
            if node.path[-1] == 1 and set(node.path[:-1]) <= {0}:
                d = len(node) - 1
                c = pres.ce.element(d)
                return fs({d + 1: Fraction(1, 2**c)})
            raise ValueError(node)

        def stage(t):
            zeros = [TreeNode(tuple([0] * d)) for d in range(1, t + 2)]
            atoms = [TreeNode(tuple([0] * d + [1])) for d in range(0, t + 1)]
            return FiniteTree(zeros + atoms)

        src = LazyDisintegration(
            P1,
            pres,
            value,
            stage,
            terminal_fn=lambda node: bool(node.path) and node.path[-1] == 1,
            limit_fn=lambda chain: atom if set(chain[-1].path) == {0} else None,
        )
        oracle = OracleAdapter(pres.ce, "transparent")
        part = partition_chains(src, stage_budget=4)
        zero_chain = part.assignment[TreeNode.of(0, 0)]
        lim = chain_limit(src, part, zero_chain, oracle, 8)
        assert lim.status == "exact"
        assert lim.vector == atom
        assert lim.norm_power.contains(Fraction(1, 3))

    def test_staged_oracle_is_provisional(self):
        pres = build_adversarial(CeSet.explicit([1]), P1)
        src = dyadic_fixture(StandardPresentation(P1))
        part = partition_chains(src, stage_budget=4)
        staged = OracleAdapter(pres.ce, "staged", stage_budget=1)

        # fabricate a nonterminal-ended chain by cutting the enumeration:
        # chain 0 is root + (0); (0) is terminal here, so instead query a
        # chain through the root of a lazy source without limit knowledge
        def value(node):
            if node.is_root():
                return src.value(ROOT)
            return fs({node.path[0]: Fraction(1, 2 ** node.path[0])})

        lazy = LazyDisintegration(P1, StandardPresentation(P1), src.value, src.stage_tree)
        part2 = partition_chains(lazy, stage_budget=4)
        lim = chain_limit(lazy, part2, 0, staged, 8)
        assert lim.status == "provisional"


class TestZeroLimit:
    def test_vanishing_chain_flagged_zero(self):
        # binary boring: the spine's values are geometric tails shrinking to 0
        pres = StandardPresentation(P1)

        def value(node):
            d = len(node)
            if node.is_root() or set(node.path) == {0}:
                def approx(k, d=d):
                    return GenCombo(
                        {n: GaussianRational.of(Fraction(1, 2**n)) for n in range(d, d + k + 2)}
                    )
                return ComputableVector(approx, pres, f"tail{d}")
            if node.path[-1] == 1 and set(node.path[:-1]) <= {0}:
                return fs({d - 1: Fraction(1, 2 ** (d - 1))})
            raise ValueError(node)

        def stage(t):
            zeros = [TreeNode(tuple([0] * d)) for d in range(1, t + 2)]
            atoms = [TreeNode(tuple([0] * d + [1])) for d in range(0, t + 1)]
            return FiniteTree(zeros + atoms)

        src = LazyDisintegration(
            P1,
            pres,
            value,
            stage,
            terminal_fn=lambda node: bool(node.path) and node.path[-1] == 1,
            limit_fn=lambda chain: FinSuppVector.zero()
            if set(chain[-1].path) == {0}
            else None,
        )
        part = partition_chains(src, stage_budget=4)
        oracle = OracleAdapter(CeSet.explicit([1]), "transparent")
        spine_chains = [
            cid
            for cid, chain in enumerate(part.chains)
            if chain and set(chain[-1].path) == {0}
        ]
        assert spine_chains  # the all-zeros spine keeps descending
        statuses = {
            chain_limit(src, part, cid, oracle, 8).status for cid in spine_chains
        }
        assert "zero" in statuses

    def test_limits_precede_chain_values(self):
        src = two_level_fixture()
        part = partition_chains(src, stage_budget=8)
        oracle = OracleAdapter(CeSet.explicit([1]), "transparent")
        from lpiso.lp_vectors import precedes, is_atom
        for cid, chain in enumerate(part.chains):
            lim = chain_limit(src, part, cid, oracle, 10)
            assert lim.status == "exact"
            for node in chain:
                val = src.value(node)
                if isinstance(val, FinSuppVector):
                    assert precedes(lim.vector, val)
            if not lim.is_zero:
                assert is_atom(lim.vector)
