import itertools
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from toproute import AggregationSpec, GainContext, InputError, phi, relaxed_poi_cost, upper_bound_marginal
from toproute.gain import fractional_bound, ratio_order
from toproute.bench import GeneratorConfig, generate_map
from toproute.model import Edge, Poi, PoiMap

from conftest import phi_oracle, sp_oracle

KINDS = ["power_law", "log", "coverage"]


def test_power_law_worked_values():
    assert phi(AggregationSpec("power_law", 1.0), [3, 5]) == 6.5
    assert phi(AggregationSpec("power_law", 2.0), [3, 5]) == 5.75
    assert phi(AggregationSpec("power_law", 0.0), [3, 5]) == 8


@pytest.mark.parametrize("kind", KINDS)
def test_empty_is_zero(kind):
    assert phi(AggregationSpec(kind, 1.0, 5.0), []) == 0


def test_log_and_coverage_values():
    assert phi(AggregationSpec("log"), [1.0, 2.0]) == pytest.approx(math.log(4))
    assert phi(AggregationSpec("coverage", scale=5.0), [2.5, 2.5]) == pytest.approx(0.75)


def test_bad_spec():
    with pytest.raises(InputError):
        AggregationSpec("max")
    with pytest.raises(InputError):
        AggregationSpec("power_law", -1)
    with pytest.raises(InputError):
        AggregationSpec("power_law", math.inf)


def random_ctx(rng, kind, n=10, features=3, beta=5.0):
    rows = {i: tuple(rng.choice([0.0, round(rng.uniform(0, beta), 3)]) for _ in range(features)) for i in range(n)}
    w = [rng.random() for _ in range(features)]
    tot = sum(w)
    return GainContext(rows, [v / tot for v in w], AggregationSpec(kind, rng.choice([0, 0.5, 1, 2]), beta))


def gain_by_hand(ctx, pois):
    total = 0.0
    for h, w in enumerate(ctx.weights):
        rs = [ctx.rows[i][h] for i in pois if ctx.rows[i][h] > 0]
        total += w * phi_oracle(ctx.spec.kind, ctx.spec.alpha, rs, ctx.spec.scale)
    return total


def test_gain_examples():
    ctx = GainContext({1: (4.0,), 2: (0.0,)}, [1.0], AggregationSpec("power_law", 1.7))
    assert ctx.gain([]) == 0
    assert ctx.gain([1]) == 4.0


@pytest.mark.parametrize("kind", KINDS)
def test_gain_matches_hand_computation(kind):
    rng = random.Random(kind)
    for _ in range(50):
        ctx = random_ctx(rng, kind)
        s = rng.sample(range(10), rng.randint(0, 6))
        assert ctx.gain(s) == pytest.approx(gain_by_hand(ctx, s), abs=1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_gain_identical_over_all_orderings(kind):
    rng = random.Random(1)
    ctx = random_ctx(rng, kind)
    s = rng.sample(range(10), 5)
    values = {ctx.gain(p) for p in itertools.permutations(s)}
    assert len(values) == 1


def test_marginal_gain():
    rng = random.Random(3)
    ctx = random_ctx(rng, "power_law")
    assert ctx.marginal_gain([1, 2], []) == 0
    assert ctx.marginal_gain([], [3, 4]) == ctx.gain([3, 4])
    for _ in range(30):
        a = rng.sample(range(10), 6)
        base, add = a[:3], a[3:]
        assert ctx.marginal_gain(base, add) == ctx.gain(base + add) - ctx.gain(base)
    with pytest.raises(InputError):
        ctx.marginal_gain([1, 2], [2])


def test_deltas_match_marginal_gain():
    rng = random.Random(5)
    for kind in KINDS:
        ctx = random_ctx(rng, kind)
        base = [0, 3, 7]
        cols = ctx.lists(base)
        d = ctx.deltas(cols, ctx.gain(base), [1, 2, 4])
        for i in (1, 2, 4):
            assert d[i] == pytest.approx(max(ctx.marginal_gain(base, [i]), 0.0), abs=1e-12)


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_submodular_monotone_nonnegative(kind, seed):
    rng = random.Random(seed)
    ctx = random_ctx(rng, kind)
    y = set(rng.sample(range(10), rng.randint(0, 8)))
    x = {i for i in y if rng.random() < 0.5}
    v = rng.choice([i for i in range(10) if i not in y] or [None])
    assert ctx.gain(x) >= 0
    assert ctx.gain(y) >= ctx.gain(x) - 1e-9
    if v is not None:
        assert ctx.marginal_gain(x, [v]) >= ctx.marginal_gain(y, [v]) - 1e-9
        assert ctx.marginal_gain(y, [v]) >= -1e-9


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_marginal_gain_is_submodular_in_the_addition(kind, seed):
    rng = random.Random(seed)
    ctx = random_ctx(rng, kind, n=12)
    ids = list(range(12))
    rng.shuffle(ids)
    base, rest = set(ids[:3]), ids[3:]
    y = set(rng.sample(rest[:-1], rng.randint(0, 6)))
    x = {i for i in y if rng.random() < 0.5}
    v = rest[-1]
    f = lambda s: ctx.marginal_gain(base, s)
    assert f(x | {v}) - f(x) >= f(y | {v}) - f(y) - 1e-9


def test_relaxed_cost_examples():
    pois = (Poi(0, 10.0), Poi(1), Poi(2))
    m = PoiMap(pois, (Edge(0, 1, 4.0), Edge(0, 2, 6.0)), (), False, 5.0)
    assert relaxed_poi_cost(m, 0) == 14
    assert relaxed_poi_cost(m, 0, "destination", stay=0.0) == 2


def test_relaxed_cost_directed_uses_both_sides():
    pois = (Poi(0, 1.0), Poi(1), Poi(2))
    m = PoiMap(pois, (Edge(0, 1, 4.0), Edge(1, 0, 10.0), Edge(2, 0, 2.0), Edge(0, 2, 8.0)), (), True, 5.0)
    assert relaxed_poi_cost(m, 0) == 1 + 1 + 2
    assert relaxed_poi_cost(m, 0, "destination") == 1 + 1


def test_isolated_node_has_no_relaxed_cost():
    m = PoiMap((Poi(0), Poi(1)), (), (), False, 5.0)
    with pytest.raises(InputError):
        relaxed_poi_cost(m, 0)


def test_min_in_edge_lower_bounds_travel():
    for seed in range(5):
        m = generate_map(GeneratorConfig(poi_count=30, edge_density=0.1, seed=seed, directed=seed % 2 == 1))
        for j in m.ids:
            d = sp_oracle(m, j)
            for i in m.ids:
                if i != j:
                    assert d[i] >= m.min_in_edge(i) - 1e-12


def test_fractional_bound_branches():
    items = [(4.0, 2.0, 1), (3.0, 3.0, 2)]
    assert fractional_bound(1.0, [], 10) == 1.0
    assert fractional_bound(1.0, items, 10) == 8.0
    assert fractional_bound(1.0, items, 3.5) == 1.0 + 4.0 + 1.5
    assert fractional_bound(1.0, items, -1) == 1.0


def test_ratio_order_ties_by_id():
    order = ratio_order({5: 2.0, 3: 2.0, 4: 4.0}, {5: 1.0, 3: 1.0, 4: 1.0})
    assert [i for _, _, i in order] == [4, 3, 5]


def test_upper_bound_examples():
    ctx = GainContext({0: (0.0,), 1: (2.0,), 2: (3.0,), 9: (1.0,)}, [1.0], AggregationSpec("power_law", 0.0))
    assert upper_bound_marginal(ctx, {0}, {}, 10, 9, 1) == 1.0
    assert upper_bound_marginal(ctx, {0}, {1: 1.0, 2: 1.0}, 10, 9, 1) == 6.0


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 10**9), kind=st.sampled_from(KINDS))
def test_upper_bound_beats_every_affordable_subset(seed, kind):
    rng = random.Random(seed)
    ctx = random_ctx(rng, kind, n=12)
    state = set(rng.sample(range(10), rng.randint(0, 3)))
    y = 11
    reach = {i: rng.uniform(1, 10) for i in range(10) if i not in state}
    reach = dict(list(reach.items())[:8])
    y_cost = rng.uniform(0.5, 5)
    budget = rng.uniform(0, 30)
    up = upper_bound_marginal(ctx, state, reach, budget, y, y_cost)
    items = list(reach)
    best = -math.inf
    for r in range(len(items) + 1):
        for sub in itertools.combinations(items, r):
            if sum(reach[i] for i in sub) + y_cost <= budget:
                best = max(best, ctx.marginal_gain(state, set(sub) | {y}))
    assert up >= best - 1e-9
