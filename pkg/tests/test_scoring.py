import io
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from oaae import scoring
from oaae.nn import build_model

finite = st.floats(-10, 10, allow_nan=False, width=64)


def identity_model(shape=(1, 2, 2)):
    return SimpleNamespace(encoder=lambda x: np.asarray(x).reshape(len(x), -1),
                           decoder=lambda z: np.asarray(z).reshape((len(z),) + shape))


@pytest.fixture(scope="module")
def model():
    return build_model((1, 8, 8), 8, 3, seed=0, channels=(4, 4, 4), hidden=16)


def test_identity_round_trip_scores_zero():
    x = np.random.default_rng(0).random((5, 1, 2, 2)) + 0.1
    assert np.allclose(scoring.angle_scores(identity_model(), x), 0.0, atol=1e-7)
    assert np.array_equal(scoring.mse_scores(identity_model(), x), np.zeros(5))


def test_angle_examples():
    assert scoring.latent_angle([1.0, 0.0], [0.0, 1.0])[0] == pytest.approx(np.pi / 2, abs=1e-12)
    z = np.array([[0.3, -1.2, 2.0]])
    assert scoring.latent_angle(z, z)[0] == pytest.approx(0.0, abs=1e-7)
    assert scoring.latent_angle(z, -z)[0] == pytest.approx(np.pi, abs=1e-7)


def test_degenerate_latent_rejected():
    with pytest.raises(scoring.DegenerateLatentError) as info:
        scoring.latent_angle([[1.0, 0.0], [0.0, 0.0]], [[1.0, 1.0], [1.0, 1.0]])
    assert info.value.indices == [1]


def test_score_batch_reports_global_indices():
    x = np.ones((300, 1, 2, 2))
    x[270] = 0.0
    with pytest.raises(scoring.DegenerateLatentError) as info:
        scoring.score_batch(identity_model(), x)
    assert info.value.indices == [270]


@given(arrays(np.float64, (4, 5), elements=finite), arrays(np.float64, (4, 5), elements=finite),
       st.floats(0.01, 100), st.floats(0.01, 100))
def test_angle_scale_invariant_and_bounded(z0, z1, a, b):
    if np.any(np.linalg.norm(z0, axis=1) < 1e-3) or np.any(np.linalg.norm(z1, axis=1) < 1e-3):
        return
    base = scoring.latent_angle(z0, z1)
    assert np.all((base >= 0) & (base <= np.pi))
    np.testing.assert_allclose(scoring.latent_angle(a * z0, b * z1), base, atol=1e-6)
    # angle = arccos(cos), hence monotone in 1 - cos; compared in cosine space
    # because arccos is too steep near 1 for a tolerance on angles
    cos = np.einsum("ij,ij->i", z0, z1) / np.linalg.norm(z0, axis=1) / np.linalg.norm(z1, axis=1)
    np.testing.assert_allclose(np.cos(base), np.clip(cos, -1, 1), atol=1e-12)


def test_mse_examples():
    class Const:
        def __init__(self, value):
            self.value = value

        def encoder(self, x):
            return np.ones((len(x), 2))

        def decoder(self, z):
            return np.full((len(z), 1, 2, 2), self.value)

    x = np.zeros((2, 1, 2, 2))
    np.testing.assert_allclose(scoring.mse_scores(Const(0.5), x), [0.25, 0.25])
    assert scoring.recon_error_score(Const(1.0), x[0]) == pytest.approx(1.0)


def test_empty_batch(model):
    empty = np.zeros((0, 1, 8, 8), np.float32)
    assert scoring.angle_scores(model, empty).shape == (0,)
    assert scoring.score_batch(model, empty, "mse") == []


def test_real_model_scores(model):
    x = np.random.default_rng(1).random((300, 1, 8, 8)).astype(np.float32)
    x[7] = x[3]
    scores = scoring.angle_scores(model, x)
    assert scores.shape == (300,) and np.all((scores >= 0) & (scores <= np.pi))
    assert scores[7] == scores[3]
    singles = [scoring.novelty_score(model, x[i]) for i in (0, 150, 299)]
    np.testing.assert_allclose(singles, scores[[0, 150, 299]], atol=1e-6)


def test_scoring_does_not_mutate_model(model):
    before = [p.copy() for net in model.networks().values() for p in net.params]
    x = np.random.default_rng(2).random((10, 1, 8, 8)).astype(np.float32)
    first = scoring.angle_scores(model, x)
    scoring.mse_scores(model, x)
    after = [p for net in model.networks().values() for p in net.params]
    assert all(np.array_equal(a, b) for a, b in zip(before, after))
    assert np.array_equal(first, scoring.angle_scores(model, x))


def test_score_batch_and_csv(model):
    x = np.random.default_rng(3).random((4, 1, 8, 8)).astype(np.float32)
    scored = scoring.score_batch(model, x, "angle", is_novel=[0, 1, 0, 1])
    assert [s.example_id for s in scored] == [0, 1, 2, 3]
    assert [s.is_novel for s in scored] == [False, True, False, True]
    buf = io.StringIO()
    scoring.write_scores_csv(scored, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "example_id,score,is_novel,score_kind"
    assert lines[2].startswith("1,") and lines[2].endswith(",1,angle")
    assert float(lines[1].split(",")[1]) == scored[0].novelty_score
    with pytest.raises(ValueError):
        scoring.score_batch(model, x, "ssim")
