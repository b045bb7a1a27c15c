"""Ring buffer semantics: FIFO eviction, uniform sampling, empty errors."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resetrl.replay import ExampleBuffer, SegmentBuffer, TransitionBuffer


def test_store_then_sample_single():
    buf = TransitionBuffer(4, 2, 1)
    buf.add([1.0, 2.0], [0.5], 0.25, [3.0, 4.0], False)
    s, a, r, s2, term = buf.sample(np.random.default_rng(0), 3)
    assert np.all(s == [1.0, 2.0]) and np.all(a == 0.5)
    assert np.all(r == 0.25) and np.all(s2 == [3.0, 4.0]) and np.all(term == 0.0)


def test_fifo_eviction():
    buf = TransitionBuffer(3, 1, 1)
    for i in range(4):
        buf.add([float(i)], [0.0], 0.0, [0.0], False)
    assert len(buf) == 3
    remaining = sorted(buf.s[:3, 0].tolist())
    assert remaining == [1.0, 2.0, 3.0]  # oldest (0) evicted


def test_empty_sample_raises():
    buf = TransitionBuffer(3, 1, 1)
    with pytest.raises(ValueError):
        buf.sample(np.random.default_rng(0), 1)
    ex = ExampleBuffer(3, 2)
    with pytest.raises(ValueError):
        ex.sample(np.random.default_rng(0), 1)


def test_sampling_uniform_over_contents():
    buf = TransitionBuffer(8, 1, 1)
    for i in range(8):
        buf.add([float(i)], [0.0], 0.0, [0.0], False)
    rng = np.random.default_rng(1)
    draws = buf.sample(rng, 40_000)[0][:, 0]
    counts = np.bincount(draws.astype(int), minlength=8)
    assert counts.min() > 40_000 / 8 * 0.9


@given(capacity=st.integers(1, 20), n_adds=st.integers(0, 60))
@settings(max_examples=40, deadline=None)
def test_size_never_exceeds_capacity(capacity, n_adds):
    buf = ExampleBuffer(capacity, 1)
    for i in range(n_adds):
        buf.add([float(i)])
    assert len(buf) == min(capacity, n_adds)
    if n_adds > capacity:
        kept = sorted(buf.s[:capacity, 0].tolist())
        assert kept == [float(i) for i in range(n_adds - capacity, n_adds)]


def test_segment_buffer_roundtrip():
    buf = SegmentBuffer(5, 2, 1)
    buf.add([1, 2], [0.1], [3, 4], [5, 6], 7, 0.5, True, False)
    s, a, s_next, s_tail, n, dist, init, term = buf.sample(np.random.default_rng(0), 2)
    assert np.all(s_tail == [5.0, 6.0]) and np.all(n == 7)
    assert np.all(dist == 0.5) and np.all(init == 1.0) and np.all(term == 0.0)
    with pytest.raises(ValueError):
        buf.add([1, 2], [0.1], [3, 4], [5, 6], 0, 0.5, True, False)
