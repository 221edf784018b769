"""Tests for the exact and Monte Carlo mass-transport checks."""

import numpy as np
import pytest

from brwlab import mtp
from brwlab.groups import GroupSpec
from brwlab.gw import OffspringDistribution

import oracles

T4 = GroupSpec("regular_tree", 4)
MU11 = OffspringDistribution([0.45, 0.0, 0.55])  # mean 1.1

PATH3 = {0: [1], 1: [0, 2], 2: [1]}


def test_exact_check_adjacency_indicator():
    lhs, rhs, ok = mtp.exact_mtp_check(PATH3, {0, 1, 2}, mtp.BUILTIN_TRANSPORT["adjacent"])
    assert ok
    assert lhs == pytest.approx(4 / 3)  # four ordered adjacent pairs over |A| = 3


def test_exact_check_leaf_indicator_example():
    """Plain leaf-target mass (no distance gate): six ordered pairs hit a
    leaf, divided by three marked vertices."""
    F = mtp.TransportFunction(
        "leaf_any", 2, lambda adj, marks, u, v: 1.0 if len(adj[v]) == 1 else 0.0
    )
    lhs, rhs, ok = mtp.exact_mtp_check(PATH3, {0, 1, 2}, F)
    assert ok
    assert lhs == pytest.approx(2.0)
    assert rhs == pytest.approx(2.0)


def test_exact_check_zero_function():
    F = mtp.TransportFunction("zero", 1, lambda adj, marks, u, v: 0.0)
    assert mtp.exact_mtp_check(PATH3, {0, 1, 2}, F) == (0.0, 0.0, True)


def test_exact_check_random_graphs():
    rng = np.random.default_rng(0)
    fs = list(mtp.BUILTIN_TRANSPORT.values())
    for i in range(30):
        t = oracles.random_marked_tree(rng, 50)
        F = fs[i % len(fs)]
        lhs, rhs, ok = mtp.exact_mtp_check(t, t.marks, F)
        assert ok, (lhs, rhs)


def test_exact_check_errors():
    with pytest.raises(ValueError):
        mtp.exact_mtp_check(PATH3, set(), mtp.BUILTIN_TRANSPORT["adjacent"])
    with pytest.raises(ValueError):
        mtp.exact_mtp_check(PATH3, {0, 9}, mtp.BUILTIN_TRANSPORT["adjacent"])


def test_builtin_locality_under_relabeling():
    """Built-in transports depend only on the local isomorphism type."""
    rng = np.random.default_rng(1)
    for _ in range(20):
        t = oracles.random_marked_tree(rng, 25)
        adj = t.adjacency()
        perm = {v: v * 7 + 3 for v in adj}
        adj2 = {perm[v]: [perm[w] for w in ns] for v, ns in adj.items()}
        marks2 = frozenset(perm[v] for v in t.marks)
        u = int(rng.integers(0, t.n_vertices))
        v = int(rng.integers(0, t.n_vertices))
        for F in mtp.BUILTIN_TRANSPORT.values():
            a = F(adj, frozenset(t.marks), u, v)
            b = F(adj2, marks2, perm[u], perm[v])
            assert a == b


def test_uniform_root_sampler_passes():
    rng = np.random.default_rng(2)
    sampler = mtp.uniform_root_sampler(PATH3, {0, 1, 2})
    rep = mtp.mc_mtp_test(
        sampler, mtp.BUILTIN_TRANSPORT["marked_neighbors"], mtp.BUILTIN_WEIGHT["unit"],
        2000, 0.01, rng,
    )
    assert rep.passed
    assert rep.inconclusive == 0


def test_fixed_root_sampler_fails():
    """A deterministic root is not exchangeable over the marked set; the
    test must detect it."""
    rng = np.random.default_rng(3)
    sampler = mtp.fixed_root_sampler(PATH3, {0, 1, 2}, 0)
    rep = mtp.mc_mtp_test(
        sampler, mtp.BUILTIN_TRANSPORT["leaf_target"], mtp.BUILTIN_WEIGHT["unit"],
        1000, 0.01, rng,
    )
    assert not rep.passed


def test_level_of_the_test():
    """Under a true null the alpha = 0.05 rejection rate over 200
    independent runs stays near its nominal level."""
    rng = np.random.default_rng(4)
    tree = oracles.random_marked_tree(rng, 12, mark_rate=1.0)
    sampler = mtp.uniform_root_sampler(tree, set(tree.parent))
    F = mtp.BUILTIN_TRANSPORT["marked_neighbors"]
    rejects = 0
    for _ in range(200):
        rep = mtp.mc_mtp_test(sampler, F, mtp.BUILTIN_WEIGHT["unit"], 1000, 0.05, rng)
        rejects += not rep.passed
    assert 0.01 <= rejects / 200 <= 0.12


def test_pullback_origin_rule():
    rng = np.random.default_rng(5)
    sampler = mtp.pullback_sampler(T4, MU11, 12, "origin")
    rep = mtp.mc_mtp_test(
        sampler, mtp.BUILTIN_TRANSPORT["target_degree"], mtp.BUILTIN_WEIGHT["unit"],
        3000, 0.01, rng,
    )
    assert rep.passed
    assert rep.n == 3000


def test_pullback_ball_rule():
    rng = np.random.default_rng(6)
    sampler = mtp.pullback_sampler(T4, MU11, 12, "ball", ball_radius=1)
    for fname in ("marked_neighbors", "leaf_target"):
        rep = mtp.mc_mtp_test(
            sampler, mtp.BUILTIN_TRANSPORT[fname], mtp.BUILTIN_WEIGHT["unit"],
            3000, 0.01, rng,
        )
        assert rep.passed, fname


def test_pullback_trace_rule_with_weight():
    rng = np.random.default_rng(7)
    sampler = mtp.pullback_sampler(T4, MU11, 12, "trace", depth2=20)
    rep = mtp.mc_mtp_test(
        sampler, mtp.BUILTIN_TRANSPORT["marked_neighbors"], mtp.BUILTIN_WEIGHT["ingredient"],
        3000, 0.01, rng,
    )
    assert rep.passed
    assert rep.mean_weight < 1.0  # returns beyond the root shrink the weight


def test_pushforward_trace_weight():
    """The walk image on the base graph, reweighted by inverse root
    visits, satisfies the transport identity."""
    rng = np.random.default_rng(8)
    sampler = mtp.pushforward_trace_sampler(T4, MU11, 12, ball_radius=6)
    rep = mtp.mc_mtp_test(
        sampler, mtp.BUILTIN_TRANSPORT["marked_neighbors"], mtp.BUILTIN_WEIGHT["ingredient"],
        3000, 0.01, rng,
    )
    assert rep.passed


def test_truncation_error_when_depth_too_small():
    rng = np.random.default_rng(9)
    sampler = mtp.pullback_sampler(T4, MU11, 2, "origin")
    with pytest.raises(mtp.TruncationError):
        mtp.mc_mtp_test(
            sampler, mtp.BUILTIN_TRANSPORT["target_degree"], mtp.BUILTIN_WEIGHT["unit"],
            100, 0.01, rng,
        )


def test_report_json_shape():
    rng = np.random.default_rng(10)
    sampler = mtp.uniform_root_sampler(PATH3, {0, 1, 2})
    rep = mtp.mc_mtp_test(
        sampler, mtp.BUILTIN_TRANSPORT["adjacent"], mtp.BUILTIN_WEIGHT["unit"], 100, 0.05, rng
    )
    d = rep.to_json_dict()
    assert set(d) == {"estimate", "ci_low", "ci_high", "n", "inconclusive", "alpha", "pass"}


def test_argument_validation():
    rng = np.random.default_rng(11)
    sampler = mtp.uniform_root_sampler(PATH3, {0, 1, 2})
    F = mtp.BUILTIN_TRANSPORT["adjacent"]
    with pytest.raises(ValueError):
        mtp.mc_mtp_test(sampler, F, mtp.BUILTIN_WEIGHT["unit"], 1, 0.05, rng)
    with pytest.raises(ValueError):
        mtp.mc_mtp_test(sampler, F, mtp.BUILTIN_WEIGHT["unit"], 100, 1.5, rng)
    bad_w = mtp.WeightFunction("bad", lambda s: 0.0)
    with pytest.raises(ValueError):
        mtp.mc_mtp_test(sampler, F, bad_w, 100, 0.05, rng)
