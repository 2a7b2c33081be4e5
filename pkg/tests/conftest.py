"""Shared strategies and numerical helpers for the test suite."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from detkit.geometry import Box

coord = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False, allow_infinity=False)
extent = st.floats(min_value=0.5, max_value=40.0, allow_nan=False, allow_infinity=False)


@st.composite
def boxes(draw, min_extent: float = 0.5) -> Box:
    x1 = draw(coord)
    y1 = draw(coord)
    w = draw(st.floats(min_value=min_extent, max_value=40.0))
    h = draw(st.floats(min_value=min_extent, max_value=40.0))
    return Box(x1, y1, x1 + w, y1 + h)


@st.composite
def int_boxes(draw) -> Box:
    x1 = draw(st.integers(-100, 100))
    y1 = draw(st.integers(-100, 100))
    w = draw(st.integers(1, 60))
    h = draw(st.integers(1, 60))
    return Box(float(x1), float(y1), float(x1 + w), float(y1 + h))


def central_diff(f, x: float, step: float = 1e-5) -> float:
    return (f(x + step) - f(x - step)) / (2.0 * step)


def rel_err(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def random_overlapping_pair(rng: np.random.Generator, margin: float = 0.05) -> tuple[Box, Box]:
    """Two overlapping boxes with every edge pair separated by > margin,
    keeping IOU differentiable at the sampled point."""
    while True:
        a = Box(*_rand_box(rng))
        b = Box(*_rand_box(rng))
        iw = min(a.x2, b.x2) - max(a.x1, b.x1)
        ih = min(a.y2, b.y2) - max(a.y1, b.y1)
        if iw < margin or ih < margin:
            continue
        edges = [abs(a.x1 - b.x1), abs(a.x2 - b.x2), abs(a.y1 - b.y1), abs(a.y2 - b.y2)]
        if min(edges) > margin:
            return a, b


def _rand_box(rng: np.random.Generator):
    x1, y1 = rng.uniform(0.0, 6.0, 2)
    w, h = rng.uniform(1.0, 6.0, 2)
    return x1, y1, x1 + w, y1 + h
