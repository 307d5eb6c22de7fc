import json
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from hourcast.events import TemporalGraph
from hourcast.user_assignment import (
    SELF,
    ArchetypeTable,
    UserAssigner,
    assign_hour,
    build_archetypes,
    build_history,
    derive_attributes,
    reconcile_counts,
    simulate,
)

T = 1000


def G(hour, edges):
    return TemporalGraph(hour, edges)


def rng(seed=0):
    return np.random.default_rng(seed)


def test_history_window_and_records():
    graphs = [G(T - 25, {("x", "y"): 1}), G(T - 1, {("a", "b"): 1, ("c", "b"): 2}),
              G(T, {("a", "b"): 3, ("b", "b"): 1, ("d", "a"): 1})]
    h = build_history(graphs, {"d": T}, lookback=24)
    assert h.span == range(T - 23, T + 1)
    assert len(h) == 5
    assert all(r.hour >= T - 23 for r in h.records)
    assert [r for r in h.records if r.hour == T and r.child == "a"][0].weight == 3
    assert [r.child_is_new for r in h.records if r.child == "d"] == [True]


def test_attributes_hand_example():
    attrs = derive_attributes(build_history([G(T, {("A", "B"): 3, ("C", "B"): 1})], {}))
    assert attrs["B"].influence_prob == 1
    assert attrs["A"].activity_prob == 0.75 and attrs["C"].activity_prob == 0.25
    assert attrs["B"].activity_prob == 0 and attrs["B"].parent_list == []
    assert sum(a.activity_prob for a in attrs.values()) == pytest.approx(1)


def test_attributes_self_loop_and_parent_probs():
    attrs = derive_attributes(build_history([G(T, {("A", "A"): 2, ("A", "B"): 6})], {}))
    assert attrs["A"].activity_prob == 1
    assert attrs["A"].parent_list == ["A", "B"]
    np.testing.assert_allclose(attrs["A"].parent_probs, [0.25, 0.75])
    solo = derive_attributes(build_history([G(T, {("A", "A"): 1})], {}))
    assert solo["A"].parent_list == ["A"] and solo["A"].influence_prob == 0


def test_archetypes_one_source_and_self_marker():
    h = build_history([G(T, {("A", "A"): 1, ("A", "B"): 1})], {})
    arch = build_archetypes(h, 5, rng())
    assert len(arch) == 5 and set(arch.sources) == {"A"}
    assert all(r.parent_list == [SELF, "B"] for r in arch.rows)
    # rows are copies, so mutating one leaves the others intact
    arch.rows[0].parent_probs[0] = 9
    assert arch.rows[1].parent_probs[0] == 0.5
    assert len(build_archetypes(h, 0, rng())) == 0
    with pytest.raises(ValueError):
        build_archetypes(build_history([], {}), 3, rng())


def test_archetype_sampling_matches_activity_weights():
    edges = {("A", "P"): 1, ("B", "P"): 2, ("C", "P"): 3, ("D", "P"): 4, ("E", "E"): 10}
    h = build_history([G(T, edges)], {})
    attrs = derive_attributes(h)
    arch = build_archetypes(h, 100_000, rng(1), attrs)
    freq = Counter(arch.sources)
    users = sorted(freq)
    expected = np.array([attrs[u].activity_prob for u in users]) * 100_000
    assert chisquare([freq[u] for u in users], expected).pvalue > 0.001


def test_archetype_sources_prefer_old_users():
    h = build_history([G(T, {("old", "x"): 1, ("new", "x"): 50})], {"new": T})
    assert set(build_archetypes(h, 50, rng()).sources) == {"old"}
    only_new = build_history([G(T, {("new", "x"): 1})], {"new": T})
    assert set(build_archetypes(only_new, 5, rng()).sources) == {"new"}


def test_assign_hour_examples():
    h = build_history([G(T, {("A", "B"): 1})], {})
    arch = build_archetypes(h, 10, rng())
    assert assign_hour(h, (0, 0, 0), arch, rng(), T + 1).graph.edges == {}
    out = assign_hour(h, (5, 1, 0), arch, rng(), T + 1)
    assert out.graph.edges == {("A", "B"): 5}
    with pytest.raises(ValueError, match="no old-user pool"):
        assign_hour(build_history([], {}), (3, 1, 0), ArchetypeTable([], [], 0), rng())


def test_parent_draws_follow_history():
    h = build_history([G(T, {("A", "P1"): 6, ("A", "P2"): 3, ("A", "A"): 1})], {})
    out = assign_hour(h, (10_000, 1, 0), build_archetypes(h, 1, rng()), rng(3), T + 1)
    got = [out.graph.edges.get(("A", p), 0) for p in ("A", "P1", "P2")]
    assert sum(got) == 10_000
    assert chisquare(got, [1000, 6000, 3000]).pvalue > 0.001


def _toy_history():
    edges = {(f"u{i}", f"u{(i * 7) % 13}"): 1 + i % 4 for i in range(13)}
    return build_history([G(T, edges)], {})


@pytest.mark.parametrize("counts", [(40, 5, 3), (20, 13, 0), (15, 30, 2), (7, 0, 7), (100, 1, 20)])
def test_conservation(counts):
    h = _toy_history()
    arch = build_archetypes(h, 50, rng())
    out = assign_hour(h, counts, arch, rng(5), T + 1, "sim:0")
    n_a, n_o, n_n = counts
    pool = len(h.children)
    assert out.graph.total_weight == n_a
    children = {c for c, _ in out.graph.edges}
    assert len([c for c in children if c.startswith("sim:")]) == n_n
    assert len([c for c in children if not c.startswith("sim:")]) == min(n_o, pool)
    assert out.trimmed == 0


def test_trimming_keeps_top_probability_users():
    h = build_history([G(T, {("a", "x"): 5, ("b", "x"): 3, ("c", "x"): 1})], {})
    out = assign_hour(h, (2, 3, 0), build_archetypes(h, 5, rng()), rng(), T + 1)
    assert out.trimmed == 1
    assert sorted(out.old_users) == ["a", "b"]
    assert out.graph.total_weight == 2


def test_no_users_records_unassigned():
    out = assign_hour(build_history([], {}), (4, 0, 0), ArchetypeTable([], [], 0), rng())
    assert out.unassigned == 4 and out.graph.edges == {}


def test_capacity_zero_falls_back_to_historical_parents():
    h = build_history([G(T, {("a", "x"): 1, ("b", "y"): 1})], {})
    out = assign_hour(h, (30, 0, 3), ArchetypeTable([], [], 0), rng(), T + 1, "sim:0")
    parents = {p for (_, p) in out.graph.edges}
    assert parents <= {"x", "y"}
    assert len(out.new_users) == 3


def test_reconcile_counts():
    Y = np.array([[5, 1, 0, 3], [1, 2, 0, 0], [1, 1, 0, 0]])
    R, changed = reconcile_counts(Y)
    assert R.tolist() == [[5, 3, 0, 3], [1, 2, 0, 0], [1, 1, 0, 1]]
    assert changed == 2


def _recent(hours=24, seed=0):
    r = rng(seed)
    users = [f"u{i}" for i in range(30)]
    out, first = [], {}
    for h in range(T - hours + 1, T + 1):
        edges = Counter()
        for _ in range(int(r.integers(5, 20))):
            c, p = r.choice(users, 2)
            edges[(str(c), str(p))] += 1
            first.setdefault(str(c), h)
            first.setdefault(str(p), h)
        out.append(G(h, dict(edges)))
    return out, first


def test_simulate_deterministic_and_conserving():
    recent, first = _recent()
    r = rng(8)
    Y, _ = reconcile_counts(np.vstack([r.integers(0, 30, 24), r.integers(0, 4, 24), r.integers(0, 10, 24)]))
    a = simulate(Y, recent, first, seed=7, trial=2)
    b = simulate(Y, recent, first, seed=7, trial=2)
    assert [g.edges for g in a.graphs] == [g.edges for g in b.graphs]
    assert [g.edges for g in simulate(Y, recent, first, seed=7, trial=3).graphs] != [g.edges for g in a.graphs]
    ids = [u for hour in a.new_users for u in hour]
    assert len(ids) == len(set(ids)) and not set(ids) & set(first)
    for t, g in enumerate(a.graphs):
        assert g.bin_start == T + 1 + t
        assert g.total_weight == Y[0, t]
        assert len(a.new_users[t]) == Y[1, t]
        assert len(a.old_users[t]) == Y[2, t]  # pool of 30 users covers every request


def test_simulate_zero_counts_give_empty_graphs():
    recent, first = _recent()
    out = simulate(np.zeros((3, 6), int), recent, first, seed=0)
    assert [g.edges for g in out.graphs] == [{}] * 6


def test_new_users_become_old_next_hour():
    # pool at t=1 is {a}; asking for two old users at t=2 forces the t=1 newcomer in
    recent = [G(T, {("a", "b"): 1})]
    Y = np.array([[1, 2], [1, 0], [0, 2]])
    out = simulate(Y, recent, {"a": T, "b": T}, seed=0)
    assert out.new_users[0] == [f"sim:0:{T + 1}:0"]
    assert sorted(out.old_users[1]) == sorted(["a", out.new_users[0][0]])


def test_window_slides_over_simulated_hours():
    recent, first = _recent(hours=3)
    Y = np.tile([[3], [3], [0]], 5)
    out = simulate(Y, recent, first, seed=1, lookback=2)
    # with a 2-hour window, hour 3 can only draw parents from hours 1-2 of the simulation
    for t in range(2, 5):
        window = out.graphs[t - 2:t]
        visible = {u for g in window for e in g.edges for u in e}
        for c, p in out.graphs[t].edges:
            assert p in visible or p == c


def test_ids_collision_free_at_scale():
    ids = {f"sim:{trial}:{T + h}:{i}" for trial in range(5) for h in range(200) for i in range(1000)}
    assert len(ids) == 1_000_000


def test_estimator_and_export(tmp_path):
    recent, first = _recent()
    est = UserAssigner(lookback=24, capacity=20, random_state=4).fit(recent, first)
    seq = est.predict(np.array([[5, 5], [1, 1], [2, 2]]), trial=1)
    seq.save(tmp_path, "x_trial1")
    man = json.loads((tmp_path / "x_trial1.manifest.json").read_text())
    assert man["seed"] == 4 and man["trial"] == 1 and len(man["hours"]) == 2
    assert (tmp_path / "x_trial1.jsonl").read_text().count("\n") == 2
    with pytest.raises(ValueError, match="consecutive"):
        UserAssigner().fit([recent[0], recent[5]], first)
    with pytest.raises(ValueError):
        UserAssigner().predict(np.zeros((3, 1)))
