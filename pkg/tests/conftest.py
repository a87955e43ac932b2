from __future__ import annotations

from hypothesis import settings, strategies as st

from algtt.finset import FinMap, FinSet

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@st.composite
def finmaps(draw, max_dom: int = 6, max_cod: int = 6, cod: FinSet | None = None):
    if cod is None:
        cod = FinSet.range(draw(st.integers(0, max_cod)))
    n = draw(st.integers(0, max_dom)) if len(cod) else 0
    table = tuple(draw(st.sampled_from(cod.elements)) for _ in range(n))
    return FinMap(FinSet.range(n), cod, table)


@st.composite
def cospans(draw, max_size: int = 6):
    C = FinSet.range(draw(st.integers(1, max_size)))
    return draw(finmaps(max_size, cod=C)), draw(finmaps(max_size, cod=C))


@st.composite
def fiber_sizes(draw, max_base: int = 4, max_fiber: int = 3):
    return tuple(draw(st.lists(st.integers(0, max_fiber), max_size=max_base)))
