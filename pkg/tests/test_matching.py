import numpy as np
import pytest

from midms.grids import FeatureGrid, LatentGrid, rng_gaussian
from midms.matching import (
    ConfidenceMask,
    CorrelationMap,
    DescriptorConfig,
    FlowField,
    correlation_map,
    cycle_confidence_mask,
    iter_features,
    patch_descriptor,
    soft_argmax_flow,
    soft_warp,
)
from midms.rng import Rng


def feature_1x2(v0, v1):
    """FeatureGrid with two positions on a 1x2 grid."""
    data = np.stack([np.array([a, b], dtype=float).reshape(1, 2) for a, b in zip(v0, v1)])
    return FeatureGrid(data)


def test_patch_descriptor_constant_grid():
    g = LatentGrid.full(2, 4, 4, 3.7)
    d = patch_descriptor(g, DescriptorConfig(patch_radius=1))
    assert np.max(np.abs(d.data)) < 1e-12


def test_patch_descriptor_r0():
    g = LatentGrid(np.array([[[1.0]], [[5.0]]]))
    d = patch_descriptor(g, DescriptorConfig(patch_radius=0))
    assert np.allclose(d.data[:, 0, 0], [-2.0, 2.0])


def test_patch_descriptor_hand_case():
    g = LatentGrid(np.arange(1.0, 10.0).reshape(1, 3, 3))
    d = patch_descriptor(g, DescriptorConfig(patch_radius=1))
    assert d.dim == 9
    assert np.allclose(d.data[:, 1, 1], np.arange(1.0, 10.0) - 5.0)


def test_patch_descriptor_too_large():
    with pytest.raises(ValueError):
        patch_descriptor(LatentGrid.zeros(1, 3, 3), DescriptorConfig(patch_radius=2))


def test_correlation_self_diagonal():
    f = FeatureGrid(Rng(0).gaussians(4 * 2 * 3).reshape(4, 2, 3))
    c = correlation_map(f, f)
    assert np.allclose(np.diag(c.values), 1.0)
    # and transposing arguments transposes the map
    g = FeatureGrid(Rng(1).gaussians(4 * 2 * 3).reshape(4, 2, 3))
    assert np.allclose(correlation_map(f, g).values, correlation_map(g, f).values.T)


def test_correlation_hand_case():
    q = feature_1x2((1.0, 0.0), (0.0, 1.0))
    s = feature_1x2((1.0 / np.sqrt(2), 1.0 / np.sqrt(2)), (1.0, 0.0))
    c = correlation_map(q, s)
    assert np.allclose(c.values, [[0.70711, 1.0], [0.70711, 0.0]], atol=1e-5)


def test_correlation_zero_vector_is_neutral():
    q = feature_1x2((0.0, 0.0), (1.0, 0.0))
    s = feature_1x2((1.0, 0.0), (0.0, 1.0))
    c = correlation_map(q, s)
    assert np.allclose(c.values[0], [0.0, 0.0])


def test_correlation_dim_mismatch():
    a = FeatureGrid(np.zeros((2, 1, 1)))
    b = FeatureGrid(np.zeros((3, 1, 1)))
    with pytest.raises(ValueError):
        correlation_map(a, b)


def test_soft_warp_hard_gather_limit():
    values = np.array([[0.9, 0.1, 0.3], [0.2, 0.2, 0.8]])
    c = CorrelationMap(values=values, query_shape=(1, 2), source_shape=(1, 3))
    source = LatentGrid(np.array([4.0, -1.0, 7.0]).reshape(1, 1, 3))
    out = soft_warp(c, source, 1e-6)
    assert abs(out.data[0, 0, 0] - 4.0) < 1e-9
    assert abs(out.data[0, 0, 1] - 7.0) < 1e-9


def test_soft_warp_constant_source():
    c = CorrelationMap(
        values=Rng(2).uniforms(12).reshape(4, 3) * 2 - 1,
        query_shape=(2, 2),
        source_shape=(1, 3),
    )
    source = LatentGrid.full(3, 1, 3, 2.5)
    out = soft_warp(c, source, 0.7)
    assert np.max(np.abs(out.data - 2.5)) < 1e-12


def test_soft_warp_softmax_arithmetic():
    c = CorrelationMap(values=np.array([[1.0, 0.0]]), query_shape=(1, 1), source_shape=(1, 2))
    source = LatentGrid(np.array([0.0, 10.0]).reshape(1, 1, 2))
    out = soft_warp(c, source, 1.0)
    assert out.data[0, 0, 0] == pytest.approx(2.6894, abs=1e-4)


def test_soft_warp_size_mismatch():
    c = CorrelationMap(values=np.zeros((1, 2)), query_shape=(1, 1), source_shape=(1, 2))
    with pytest.raises(ValueError):
        soft_warp(c, LatentGrid.zeros(1, 1, 3), 0.1)


def test_soft_argmax_one_hot():
    values = np.full((1, 20), -1.0)
    values[0, 2 * 5 + 3] = 1.0  # source position (2, 3) on a 4x5 grid
    c = CorrelationMap(values=values, query_shape=(1, 1), source_shape=(4, 5))
    flow = soft_argmax_flow(c, 1e-6, (4, 5))
    assert np.allclose(flow.positions[0, 0], [2.0, 3.0], atol=1e-9)


def test_soft_argmax_uniform_row_centroid():
    c = CorrelationMap(values=np.zeros((1, 12)), query_shape=(1, 1), source_shape=(3, 4))
    flow = soft_argmax_flow(c, 0.5, (3, 4))
    assert np.allclose(flow.positions[0, 0], [1.0, 1.5])


def test_soft_argmax_weighted_average():
    # weights (0.75, ~0, 0.25) over source positions (0,0), (0,1), (0,2)
    c = CorrelationMap(
        values=np.array([[np.log(3.0), -1000.0, 0.0]]),
        query_shape=(1, 1),
        source_shape=(1, 3),
    )
    flow = soft_argmax_flow(c, 1.0, (1, 3))
    assert np.allclose(flow.positions[0, 0], [0.0, 0.5], atol=1e-9)


def test_soft_argmax_dims_mismatch():
    c = CorrelationMap(values=np.zeros((1, 6)), query_shape=(1, 1), source_shape=(2, 3))
    with pytest.raises(ValueError):
        soft_argmax_flow(c, 0.1, (3, 2))


def identity_corr(h, w):
    return CorrelationMap(values=np.eye(h * w), query_shape=(h, w), source_shape=(h, w))


def test_cycle_mask_identity_all_true():
    c = identity_corr(3, 3)
    for gamma in (0.3, 0.5):
        mask = cycle_confidence_mask(c, c.transposed(), gamma, 1e-6, (3, 3))
        assert mask.flags.all()


def test_cycle_mask_gamma_zero_all_false():
    c = identity_corr(3, 3)
    mask = cycle_confidence_mask(c, c.transposed(), 0.0, 1e-6, (3, 3))
    assert not mask.flags.any()


def test_cycle_mask_two_pixel_hand_case():
    # 1x2 grid; forward swaps the two positions
    swap = CorrelationMap(
        values=np.array([[0.0, 1.0], [1.0, 0.0]]), query_shape=(1, 2), source_shape=(1, 2)
    )
    mask = cycle_confidence_mask(swap, swap.transposed(), 0.5, 1e-6, (1, 2))
    assert mask.flags.all()  # swap composed with swap is the identity
    # backward replaced by the identity: cycle distances become (1, 1)
    ident = identity_corr(1, 2)
    mask2 = cycle_confidence_mask(swap, ident, 0.5, 1e-6, (1, 2))
    assert not mask2.flags.any()


def test_cycle_mask_role_check():
    c = CorrelationMap(values=np.eye(6), query_shape=(2, 3), source_shape=(3, 2))
    with pytest.raises(ValueError):
        cycle_confidence_mask(c, c, 0.3, 1e-6, (2, 3))


def test_cycle_mask_bijective_hard_correspondence():
    # random permutation matching with its exact inverse stays all-true
    rng = np.random.default_rng(0)
    perm = rng.permutation(12)
    values = np.zeros((12, 12))
    values[np.arange(12), perm] = 1.0
    fwd = CorrelationMap(values=values, query_shape=(3, 4), source_shape=(3, 4))
    mask = cycle_confidence_mask(fwd, fwd.transposed(), 1e-6, 1e-6, (3, 4))
    assert mask.flags.all()


def test_iter_features_wc_zero():
    r_tilde = rng_gaussian(Rng(3), (2, 4, 4))
    d_x = rng_gaussian(Rng(4), (2, 4, 4))
    cfg = DescriptorConfig(patch_radius=1, condition_weight=0.0)
    f = iter_features(r_tilde, d_x, cfg)
    main = patch_descriptor(r_tilde, cfg)
    assert np.array_equal(f.data[: main.dim], main.data)
    assert np.max(np.abs(f.data[main.dim :])) == 0.0


def test_iter_features_zero_condition():
    r_tilde = rng_gaussian(Rng(5), (2, 4, 4))
    cfg = DescriptorConfig(patch_radius=1, condition_weight=2.0)
    f = iter_features(r_tilde, LatentGrid.zeros(2, 4, 4), cfg)
    assert np.max(np.abs(f.data[f.dim // 2 :])) == 0.0


def test_iter_features_singleton():
    cfg = DescriptorConfig(patch_radius=0, condition_weight=0.5)
    f = iter_features(LatentGrid.full(1, 1, 1, 2.0), LatentGrid.full(1, 1, 1, 4.0), cfg)
    # r=0 single-channel descriptors are the value minus itself
    assert np.max(np.abs(f.data)) == 0.0


def test_iter_features_spatial_mismatch():
    with pytest.raises(ValueError):
        iter_features(LatentGrid.zeros(1, 2, 2), LatentGrid.zeros(1, 3, 3), DescriptorConfig())


def random_corr(rng, qh, qw, sh, sw):
    values = rng.uniforms(qh * qw * sh * sw).reshape(qh * qw, sh * sw) * 2.0 - 1.0
    return CorrelationMap(values=values, query_shape=(qh, qw), source_shape=(sh, sw))


def test_convex_hull_property():
    rng = Rng(6)
    for _ in range(50):
        c = random_corr(rng, 3, 3, 2, 4)
        source = LatentGrid(rng.gaussians(2 * 2 * 4).reshape(2, 2, 4))
        out = soft_warp(c, source, 0.05)
        for ch in range(2):
            assert out.data[ch].min() >= source.data[ch].min() - 1e-12
            assert out.data[ch].max() <= source.data[ch].max() + 1e-12


def test_permutation_equivariance():
    rng = Rng(7)
    c = random_corr(rng, 2, 2, 1, 6)
    source = LatentGrid(rng.gaussians(3 * 6).reshape(3, 1, 6))
    perm = np.random.default_rng(1).permutation(6)
    c_perm = CorrelationMap(
        values=c.values[:, perm], query_shape=(2, 2), source_shape=(1, 6)
    )
    source_perm = LatentGrid(source.data[:, :, perm])
    a = soft_warp(c, source, 0.1)
    b = soft_warp(c_perm, source_perm, 0.1)
    assert np.max(np.abs(a.data - b.data)) < 1e-12


def brute_soft_warp(c, source, temperature):
    qh, qw = c.query_shape
    sh, sw = c.source_shape
    out = np.zeros((source.channels, qh, qw))
    for u in range(qh * qw):
        row = c.values[u] / temperature
        w = np.exp(row - row.max())
        w = w / w.sum()
        acc = np.zeros(source.channels)
        for v in range(sh * sw):
            acc += w[v] * source.data[:, v // sw, v % sw]
        out[:, u // qw, u % qw] = acc
    return out


def brute_soft_argmax(c, temperature):
    qh, qw = c.query_shape
    sh, sw = c.source_shape
    pos = np.zeros((qh, qw, 2))
    for u in range(qh * qw):
        row = c.values[u] / temperature
        w = np.exp(row - row.max())
        w = w / w.sum()
        ey = ex = 0.0
        for v in range(sh * sw):
            ey += w[v] * (v // sw)
            ex += w[v] * (v % sw)
        pos[u // qw, u % qw] = (ey, ex)
    return pos


def test_brute_force_equivalence_small():
    rng = Rng(8)
    for qh, qw, sh, sw in [(2, 2, 2, 2), (3, 4, 4, 3), (8, 8, 8, 8)]:
        c = random_corr(rng, qh, qw, sh, sw)
        source = LatentGrid(rng.gaussians(2 * sh * sw).reshape(2, sh, sw))
        warped = soft_warp(c, source, 0.1)
        assert np.max(np.abs(warped.data - brute_soft_warp(c, source, 0.1))) < 1e-9
        flow = soft_argmax_flow(c, 0.1, (sh, sw))
        assert np.max(np.abs(flow.positions - brute_soft_argmax(c, 0.1))) < 1e-9


def test_flow_field_accessors():
    f = FlowField(np.zeros((2, 3, 2)))
    assert (f.height, f.width) == (2, 3)
    assert f.at(1, 2) == (0.0, 0.0)


def test_confidence_mask_coverage():
    m = ConfidenceMask(np.array([[True, False], [False, False]]))
    assert m.coverage == 0.25
