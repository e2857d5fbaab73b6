import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from contactlab import parallel
from contactlab.calculus import D, ExprForm
from contactlab.charts import PeriodicBox, sample_grid
from contactlab.positivity import contact_check, top_values
from oracles import T3


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 5000), st.integers(1, 600), st.integers(1, 8))
def test_map_concat_preserves_order(n, chunk, threads):
    pts = np.arange(n, dtype=float)[:, None]
    parallel.set_threads(threads)
    out = parallel.map_concat(lambda c: c[:, 0] * 2, pts, chunk)
    assert np.array_equal(out, 2 * pts[:, 0])


def test_threads_do_not_change_margins():
    M = PeriodicBox(T3)
    a = ExprForm(T3, 1, {"x": "cos(theta) + 0.1*sin(y)", "y": "-sin(theta)", "theta": "0.2*cos(x)"})
    g = sample_grid(M, 20)  # two chunks
    top = a * D(a)
    parallel.set_threads(1)
    v1 = top_values(top, M, g.points)
    parallel.set_threads(8)
    v8 = top_values(top, M, g.points)
    assert np.array_equal(v1, v8)
    assert contact_check(a, M, g).min_margin == contact_check(a, M, g).min_margin
