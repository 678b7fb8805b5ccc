"""Backend equivalence: the compiled kernels must match the pure fallback
bit for bit on every surface."""

import numpy as np
import pytest

from smartlid import kernels
from smartlid.kernels import _pure

native = pytest.importorskip(
    "smartlid.kernels._native", reason="compiled kernel core not built"
)


def random_masks(seed, count=30, size=48):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        fill = rng.uniform(0.05, 0.6)
        yield (rng.random((size, size)) < fill).astype(np.uint8)


def test_default_backend_is_native_when_built():
    assert kernels.backend_name in ("native", "pure")


def test_label_components_equivalent():
    for mask in random_masks(1):
        labels_p, count_p = _pure.label_components(mask)
        labels_n, count_n = native.label_components(mask)
        assert count_p == count_n
        assert (labels_p == labels_n).all()


def test_component_stats_equivalent():
    for mask in random_masks(2, count=15):
        labels, count = _pure.label_components(mask)
        areas_p, cr_p, cc_p, bbox_p = _pure.component_stats(labels, count)
        areas_n, cr_n, cc_n, bbox_n = native.component_stats(labels, count)
        assert (areas_p == areas_n).all()
        assert cr_p == pytest.approx(cr_n)
        assert cc_p == pytest.approx(cc_n)
        assert (bbox_p == bbox_n).all()


def test_trace_contour_equivalent():
    for mask in random_masks(3, count=15):
        labels, count = _pure.label_components(mask)
        flat = labels.ravel()
        fg = np.flatnonzero(flat)
        if count == 0:
            continue
        _, first = np.unique(flat[fg], return_index=True)
        width = labels.shape[1]
        for k in range(1, count + 1):
            start = int(fg[first[k - 1]])
            contour_p = _pure.trace_contour(labels, k, start // width, start % width)
            contour_n = native.trace_contour(labels, k, start // width, start % width)
            assert contour_p.tolist() == contour_n.tolist()


def test_single_row_and_column_shapes():
    for mask in (
        np.array([[1, 1, 1, 0, 1]], dtype=np.uint8),
        np.array([[1], [1], [0], [1]], dtype=np.uint8),
        np.ones((1, 1), dtype=np.uint8),
        np.zeros((3, 3), dtype=np.uint8),
    ):
        labels_p, count_p = _pure.label_components(mask)
        labels_n, count_n = native.label_components(mask)
        assert count_p == count_n
        assert (labels_p == labels_n).all()
