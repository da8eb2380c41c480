import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kglab.admissibility import INF
from kglab.experiments import (_corpus_table, leibniz_corpus, random_band_limited,
                               square_function_corpus)
from kglab.norms import (MixedNormSpec, NormError, leibniz_check, mixed_norm, mixed_spec,
                         sobolev_norm, space_norm, square_function_ratio, square_sum_bounds,
                         time_weights, volume_weights)
from kglab.spectral import build_partition

from conftest import gaussian

FIXTURES = json.loads((Path(__file__).parent / "fixtures" / "envelopes.json").read_text())


@pytest.fixture(scope="module")
def corpus_table():
    return _corpus_table()


def test_indicator_closed_form(free_model):
    t = np.linspace(0, 2.5, 26)
    u = np.ones((t.size, free_model.size))
    vol = volume_weights(free_model).sum()
    for q, r in [(4, 4), (2, 6), (3, 2)]:
        expected = 2.5 ** (1 / q) * vol ** (1 / r)
        assert mixed_norm(u, mixed_spec(free_model, t, q, r)) == pytest.approx(expected, rel=1e-12)


def test_space_time_l2_is_weighted_l2(free_model):
    rng = np.random.default_rng(0)
    t = np.linspace(0, 1, 11)
    u = rng.normal(size=(t.size, free_model.size))
    spec = mixed_spec(free_model, t, 2, 2)
    flat = math.sqrt(np.sum(np.outer(time_weights(t), volume_weights(free_model)) * u**2))
    assert mixed_norm(u, spec) == pytest.approx(flat, rel=1e-12)


def test_q_infinity_takes_max_slice(free_model):
    t = np.linspace(0, 1, 5)
    u = np.outer(np.arange(1, 6), gaussian(free_model))
    spec = mixed_spec(free_model, t, INF, 2)
    assert mixed_norm(u, spec) == pytest.approx(5 * space_norm(gaussian(free_model), free_model, 2))


def test_exponents_below_one_rejected(free_model):
    with pytest.raises(NormError):
        mixed_spec(free_model, [0, 1], 0.5, 2)
    with pytest.raises(NormError):
        mixed_norm(np.ones((3, 3)), mixed_spec(free_model, [0, 1], 2, 2))


@given(st.floats(-50, 50).filter(lambda c: abs(c) > 1e-6), st.integers(1, 6), st.integers(1, 6))
@settings(max_examples=30, deadline=None)
def test_homogeneity(c, q, r):
    from kglab.geometry import make_model

    model = make_model("euclidean", (), 3, 4.0, 0.1)
    t = np.linspace(0, 1, 7)
    u = np.outer(np.cos(t), np.exp(-model.r**2))
    spec = mixed_spec(model, t, q, r)
    assert mixed_norm(c * u, spec) == pytest.approx(abs(c) * mixed_norm(u, spec), rel=1e-10)


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 3), st.integers(0, 3))
@settings(max_examples=30, deadline=None)
def test_holder_on_probability_weights(q, r, dq, dr):
    rng = np.random.default_rng(q * 10 + r)
    u = rng.normal(size=(6, 9))
    vol = np.full(9, 1 / 9)
    dt = np.full(6, 1 / 6)
    small = mixed_norm(u, MixedNormSpec(q, r, vol, dt))
    big = mixed_norm(u, MixedNormSpec(q + dq, r + dr, vol, dt))
    assert big >= small * (1 - 1e-12)


def test_sobolev_zero_is_l2(free_model, free_table):
    f = gaussian(free_model)
    assert sobolev_norm(f, 0, free_table) == pytest.approx(space_norm(f, free_model, 2), rel=1e-8)


def test_sobolev_single_mode_ratio(free_table):
    lam = free_table.lam
    F = np.exp(-(((lam - 2.0) / 0.3) ** 2))
    f = free_table.inverse(F)
    ratio = sobolev_norm(f, 1, free_table) / sobolev_norm(f, 0, free_table)
    assert ratio == pytest.approx(math.sqrt(5), rel=0.02)


def test_sobolev_monotone_in_s(free_model, free_table):
    f = gaussian(free_model, 0.0, 0.5)
    vals = [sobolev_norm(f, s, free_table) for s in np.linspace(-1, 2, 13)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_sobolev_triangle_inequality(seed):
    table = _cached_corpus()
    rng = np.random.default_rng(seed)
    f = random_band_limited(table, rng)
    g = random_band_limited(table, rng)
    s = rng.uniform(-1, 2)
    assert sobolev_norm(f + g, s, table) <= (sobolev_norm(f, s, table)
                                             + sobolev_norm(g, s, table)) * (1 + 1e-12)


_CORPUS = []


def _cached_corpus():
    if not _CORPUS:
        _CORPUS.append(_corpus_table())
    return _CORPUS[0]


def test_square_function_p2_multiplier_bounds(corpus_table):
    part = build_partition(0, 4)
    lo, hi = square_sum_bounds(part, corpus_table.lam_max)
    rng = np.random.default_rng(3)
    for _ in range(10):
        f = random_band_limited(corpus_table, rng)
        ratio = square_function_ratio(f, 2, corpus_table, part)
        assert math.sqrt(lo) * (1 - 1e-6) <= ratio <= math.sqrt(hi) * (1 + 1e-6)


def test_square_function_rejects_zero(corpus_table):
    with pytest.raises(NormError):
        square_function_ratio(np.zeros(corpus_table.model.size), 4, corpus_table,
                              build_partition(0, 4))
    with pytest.raises(NormError):
        square_function_ratio(np.ones(corpus_table.model.size), 1, corpus_table,
                              build_partition(0, 4))


def test_square_function_p4_frozen_envelope():
    env = FIXTURES["square_function_p4"]
    ratios, _ = square_function_corpus(4, env["count"], env["seed"])
    assert len(ratios) == 50
    assert env["lower"] <= min(ratios) and max(ratios) <= env["upper"]


def test_leibniz_trivial_cases(corpus_table):
    f = random_band_limited(corpus_table, np.random.default_rng(1))
    one = np.ones(corpus_table.model.size)
    res = leibniz_check(f, one, 0.0, (2, 2, "inf", "inf", 2), corpus_table)
    assert res.lhs == pytest.approx(space_norm(f, corpus_table.model, 2))
    assert res.rhs >= space_norm(f, corpus_table.model, 2)
    assert math.isfinite(res.ratio)
    zero = leibniz_check(0 * f, f, 0.5, (2, 2, "inf", "inf", 2), corpus_table)
    assert zero.lhs == 0 and zero.lhs <= zero.rhs


def test_leibniz_gaussian_and_corpus(corpus_table):
    limit = FIXTURES["leibniz_half_2_inf"]["max_ratio"]
    f = np.exp(-corpus_table.model.r ** 2)
    assert leibniz_check(f, f, 0.5, (2, 2, "inf", "inf", 2), corpus_table).ratio <= limit
    ratios, _ = leibniz_corpus(FIXTURES["leibniz_half_2_inf"]["count"],
                               FIXTURES["leibniz_half_2_inf"]["seed"])
    assert max(ratios) <= limit


def test_leibniz_rejects_bad_exponents(corpus_table):
    f = np.ones(corpus_table.model.size)
    with pytest.raises(NormError):
        leibniz_check(f, f, 0.5, (2, 3, 3, 2, "inf"), corpus_table)
    with pytest.raises(NormError):
        leibniz_check(f, f, 1.5, (2, 2, "inf", "inf", 2), corpus_table)
