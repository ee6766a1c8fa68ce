import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ensembleqc import montecarlo as mc


@given(st.integers(0, 2**64 - 1), st.integers(1, 40000), st.integers(2, 8))
@settings(max_examples=15)
def test_counts_independent_of_thread_count(seed, trials, threads):
    p = [0.2, 0.5, 0.3]
    a = mc.draw_counts(p, trials, seed, threads=1)
    b = mc.draw_counts(p, trials, seed, threads=threads)
    assert np.array_equal(a, b) and a.sum() == trials


def test_different_seeds_differ():
    assert not np.array_equal(mc.draw_counts([0.5, 0.5], 10000, 1), mc.draw_counts([0.5, 0.5], 10000, 2))


def test_streams_are_independent_of_block_order():
    a = [mc.stream(9, i).random() for i in range(4)]
    b = [mc.stream(9, i).random() for i in reversed(range(4))][::-1]
    assert a == b


def test_standard_error_scales_as_inverse_sqrt():
    p = 0.3
    errs = []
    for n in (10**3, 10**4, 10**5):
        c = mc.draw_counts([1 - p, p], n, seed=42)
        est = mc.BinomialEstimate(n, int(c[1]))
        assert est.within(p)
        errs.append(est.stderr)
    assert errs[0] / errs[1] == pytest.approx(np.sqrt(10), rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(np.sqrt(10), rel=0.1)


def test_estimate_edges():
    est = mc.BinomialEstimate(100, 100)
    assert est.within(1.0) and est.stderr == 0
    assert not mc.BinomialEstimate(100, 0).within(1.0)
    d = mc.BinomialEstimate(10, 3).as_dict()
    assert d["frequency"] == 0.3 and d["trials"] == 10
