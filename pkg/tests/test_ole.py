import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from oaae.checks import random_ole_batch
from oaae.ole import LabeledLatentBatch, OleConfig, ole_grad, ole_loss, ole_loss_and_grad, partition_by_class
from conftest import numeric_grad


@st.composite
def batches(draw, max_d=6, max_m=10, max_c=3):
    d = draw(st.integers(1, max_d))
    m = draw(st.integers(1, max_m))
    y = draw(arrays(np.float64, (d, m), elements=st.floats(-5, 5, allow_nan=False)))
    labels = draw(st.lists(st.integers(0, max_c - 1), min_size=m, max_size=m))
    return LabeledLatentBatch(y, labels)


def test_partition_examples():
    y = np.arange(8.0).reshape(2, 4)
    parts = partition_by_class(LabeledLatentBatch(y, [0, 1, 0, 1]))
    assert [c for c, _ in parts] == [0, 1]
    np.testing.assert_array_equal(parts[0][1], y[:, [0, 2]])
    np.testing.assert_array_equal(parts[1][1], y[:, [1, 3]])
    (only,) = partition_by_class(LabeledLatentBatch(y, [2, 2, 2, 2]))
    assert only[0] == 2 and np.array_equal(only[1], y)
    assert [c for c, _ in partition_by_class(LabeledLatentBatch(y, [0, 2, 0, 2], num_classes=3))] == [0, 2]


@given(batches())
def test_partition_recovers_latents(batch):
    parts = partition_by_class(batch)
    order = np.concatenate([np.flatnonzero(batch.labels == c) for c, _ in parts])
    stacked = np.hstack([block for _, block in parts])
    recovered = np.empty_like(stacked)
    recovered[:, order] = stacked
    np.testing.assert_array_equal(recovered, batch.latents)


def test_batch_validation():
    with pytest.raises(ValueError):
        LabeledLatentBatch(np.zeros((2, 3)), [0, 1])
    with pytest.raises(ValueError):
        LabeledLatentBatch(np.zeros((2, 2)), [0, 3], num_classes=3)
    with pytest.raises(ValueError):
        OleConfig(delta_margin=-1.0)
    with pytest.raises(ValueError):
        OleConfig(sv_threshold=float("nan"))


def test_loss_fixtures():
    assert ole_loss(LabeledLatentBatch(np.zeros((4, 3)), [0, 1, 2]), OleConfig(1.0)) == 3.0
    assert ole_loss(LabeledLatentBatch(np.eye(4), [0, 0, 1, 1]), OleConfig(0.0)) == pytest.approx(0.0, abs=1e-12)
    u = np.array([[1.0], [0.0], [0.0]])
    # [u u] has singular values (sqrt 2, 0): loss = 1 + 1 - sqrt 2
    same = ole_loss(LabeledLatentBatch(np.hstack([u, u]), [0, 1]), OleConfig(0.0))
    assert same == pytest.approx(0.5857864376269049, abs=1e-12)


def test_grad_fixtures(rng):
    g = ole_grad(LabeledLatentBatch(np.zeros((3, 4)), [0, 1, 0, 1]), OleConfig(0.5))
    assert not np.any(g)
    y = rng.standard_normal((5, 4))
    g = ole_grad(LabeledLatentBatch(y, [1, 1, 1, 1]), OleConfig(0.0, 1e-12))
    np.testing.assert_allclose(g, 0.0, atol=1e-12)


def test_inactive_hinge_drops_class_term(rng):
    y = rng.standard_normal((4, 6)) * 0.01
    batch = LabeledLatentBatch(y, [0, 0, 0, 1, 1, 1])
    cfg = OleConfig(delta_margin=10.0, sv_threshold=1e-6)
    from oaae.linalg import nuclear_norm_subgradient
    np.testing.assert_allclose(ole_grad(batch, cfg), -nuclear_norm_subgradient(y, 1e-6))
    assert ole_loss(batch, cfg) == pytest.approx(20.0 - np.linalg.svd(y, compute_uv=False).sum())


def test_grad_matches_finite_differences(rng):
    cfg = OleConfig(0.0, 1e-6)
    batch = random_ole_batch(rng, d=6, m=8, num_classes=2)
    numeric = numeric_grad(lambda y: ole_loss(LabeledLatentBatch(y, batch.labels), cfg), batch.latents)
    np.testing.assert_allclose(ole_grad(batch, cfg), numeric, atol=1e-4)


def test_fused_loss_and_grad_agree(rng):
    batch = LabeledLatentBatch(rng.standard_normal((8, 12)), rng.integers(0, 3, 12))
    cfg = OleConfig()
    loss, grad = ole_loss_and_grad(batch, cfg)
    assert loss == pytest.approx(ole_loss(batch, cfg), abs=1e-12)
    np.testing.assert_allclose(grad, ole_grad(batch, cfg), atol=1e-12)


@given(batches())
def test_nonnegative_at_zero_margin(batch):
    assert ole_loss(batch, OleConfig(0.0)) >= -1e-8


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_zero_for_orthogonal_classes(k0, k1, seed):
    gen = np.random.default_rng(seed)
    q, _ = np.linalg.qr(gen.standard_normal((8, 8)))
    y = np.hstack([q[:, :k0] @ gen.standard_normal((k0, 3)), q[:, 4:4 + k1] @ gen.standard_normal((k1, 2))])
    batch = LabeledLatentBatch(y, [0, 0, 0, 1, 1])
    margin = min(np.linalg.svd(y[:, :3], compute_uv=False).sum(), np.linalg.svd(y[:, 3:], compute_uv=False).sum())
    assert ole_loss(batch, OleConfig(margin)) == pytest.approx(0.0, abs=1e-8 * max(1.0, np.abs(y).sum()))


@given(batches(), st.integers(0, 2**32 - 1))
def test_rotation_invariance(batch, seed):
    d = batch.latents.shape[0]
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((d, d)))
    rotated = LabeledLatentBatch(q @ batch.latents, batch.labels)
    cfg = OleConfig(0.5)
    scale = max(1.0, np.abs(batch.latents).sum())
    assert abs(ole_loss(rotated, cfg) - ole_loss(batch, cfg)) <= 1e-8 * scale


@given(st.integers(0, 2**32 - 1))
def test_column_permutation_equivariance(seed):
    gen = np.random.default_rng(seed)
    batch = LabeledLatentBatch(gen.standard_normal((5, 9)), gen.integers(0, 3, 9))
    perm = gen.permutation(9)
    permuted = LabeledLatentBatch(batch.latents[:, perm], batch.labels[perm])
    cfg = OleConfig(1.0, 1e-3)
    assert ole_loss(permuted, cfg) == pytest.approx(ole_loss(batch, cfg), abs=1e-10)
    np.testing.assert_allclose(ole_grad(permuted, cfg), ole_grad(batch, cfg)[:, perm], atol=1e-10)


def test_gradient_consistency_property(rng):
    cfg = OleConfig(0.0, 1e-6)
    for _ in range(5):
        c = int(rng.integers(2, 4))
        batch = random_ole_batch(rng, d=6, m=8, num_classes=c)
        numeric = numeric_grad(lambda y: ole_loss(LabeledLatentBatch(y, batch.labels), cfg), batch.latents)
        assert np.max(np.abs(ole_grad(batch, cfg) - numeric)) < 1e-4
