"""Property-based checks over randomized inputs (hypothesis)."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from codedcam import (
    SceneFrame,
    compute_depth_metrics,
    depth_weighted_loss,
    l1_loss,
    make_depth_bins,
    quantize_depth,
)
from codedcam.imgio import linear_to_srgb, srgb_to_linear


@settings(max_examples=40, deadline=None)
@given(count=st.integers(1, 60),
       near=st.floats(0.05, 2.0),
       span=st.floats(0.1, 10.0),
       spacing=st.sampled_from(["inverse", "linear"]))
def test_bins_ordered_and_bounded(count, near, span, spacing):
    bins = make_depth_bins(count, near, near + span, spacing)
    assert bins.count == count
    assert np.all(np.diff(bins.centers) > 0) or count == 1
    assert bins.centers[0] >= near - 1e-12
    assert bins.centers[-1] <= near + span + 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_quantize_partition_of_unity(seed):
    rng = np.random.default_rng(seed)
    depth = rng.uniform(0.0, 8.0, (6, 7))
    depth[rng.random((6, 7)) < 0.1] = np.nan
    bins = make_depth_bins(9, 0.5, 6.0)
    layers = quantize_depth(SceneFrame(rgb=np.zeros((6, 7, 3)), depth=depth), bins)
    np.testing.assert_allclose(layers.masks.sum(axis=0), 1.0)
    assert np.all((layers.layer_index >= 0) & (layers.layer_index < 9))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_metric_and_loss_sanity(seed):
    rng = np.random.default_rng(seed)
    gt = rng.uniform(0.1, 6.0, 25)
    pred = rng.uniform(0.1, 6.0, 25)
    m = compute_depth_metrics(pred, gt)
    assert 0.0 <= m.delta1 <= 1.0
    assert m.rmse >= m.l1 - 1e-12  # RMS dominates the mean
    assert l1_loss(pred, gt) >= 0
    assert depth_weighted_loss(pred, gt) >= 0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_srgb_round_trip_random(seed):
    rng = np.random.default_rng(seed)
    x = rng.random(50)
    np.testing.assert_allclose(srgb_to_linear(linear_to_srgb(x)), x, atol=1e-12)
