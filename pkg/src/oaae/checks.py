"""Numerical self-checks: finite differences and brute-force oracles.

Each check returns a :class:`CheckResult` whose ``margin`` is the tolerance
minus the worst observed error (negative means failure).  The same routines
back ``oaae check`` and the acceptance tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import evaluation, linalg, ole
from .nn import layers as L
from .nn.network import Network

FD_STEP = 1e-6


@dataclass(frozen=True)
class CheckResult:
    name: str
    tolerance: float
    worst: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.worst) and self.worst <= self.tolerance)

    @property
    def margin(self) -> float:
        return self.tolerance - self.worst

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<28} worst={self.worst:.3e}  tol={self.tolerance:.1e}  "
                f"margin={self.margin:.3e}  {self.detail}").rstrip()


def central_difference(f, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f(x)
        flat[i] = old - h
        down = f(x)
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return grad


def _householder(rng, n):
    v = rng.standard_normal((n, 1))
    return np.eye(n) - 2.0 * (v @ v.T) / float(v[:, 0] @ v[:, 0])


def random_ole_batch(rng, d=6, m=8, num_classes=None, min_gap=1e-3):
    """Random labeled batch whose blocks all have simple singular values > ``min_gap``."""
    while True:
        c = num_classes or int(rng.choice([2, 3]))
        labels = np.concatenate([np.arange(c), rng.integers(0, c, m - c)])
        rng.shuffle(labels)
        y = rng.standard_normal((d, m))
        blocks = [y] + [y[:, labels == k] for k in range(c)]
        ok = True
        for b in blocks:
            s = np.linalg.svd(b, compute_uv=False)
            if s.min() <= min_gap or (s.size > 1 and np.min(-np.diff(s)) <= min_gap):
                ok = False
        if ok:
            return ole.LabeledLatentBatch(y, labels)


def check_ole_gradient(seed=0, batches=100, tol=1e-4) -> CheckResult:
    rng = np.random.default_rng(seed)
    cfg = ole.OleConfig(delta_margin=0.0, sv_threshold=1e-6)
    worst = 0.0
    for _ in range(batches):
        batch = random_ole_batch(rng)
        analytic = ole.ole_grad(batch, cfg)
        numeric = central_difference(
            lambda y: ole.ole_loss(ole.LabeledLatentBatch(y, batch.labels), cfg), batch.latents)
        worst = max(worst, float(np.max(np.abs(analytic - numeric))))
    return CheckResult("ole_gradient_fd", tol, worst, f"{batches} batches d=6 m=8")


def check_nuclear_norm_suite(seed=0, count=1000, tol=1e-8) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        r, c = rng.integers(1, 17, size=2)
        a = rng.standard_normal((r, c))
        b = rng.standard_normal((r, rng.integers(1, 17)))
        na = linalg.nuclear_norm(a)
        scale = max(1.0, na)
        q = _householder(rng, r)
        worst = max(worst, abs(linalg.nuclear_norm(q @ a) - na) / scale)
        excess = linalg.nuclear_norm(np.hstack([a, b])) - (na + linalg.nuclear_norm(b))
        worst = max(worst, excess / scale)
        g = linalg.nuclear_norm_subgradient(a, 1e-6)
        if np.any(g):
            worst = max(worst, linalg.spectral_norm(g) - 1.0)
        worst = max(worst, (linalg.frobenius_norm(a) - na) / scale)
    return CheckResult("nuclear_norm_suite", tol, worst, f"{count} matrices up to 16x16")


def check_nuclear_subgradient_fd(seed=0, count=20, tol=1e-4) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        a = rng.standard_normal((4, 3))
        numeric = central_difference(linalg.nuclear_norm, a)
        worst = max(worst, float(np.max(np.abs(linalg.nuclear_norm_subgradient(a, 1e-6) - numeric))))
    return CheckResult("nuclear_subgradient_fd", tol, worst, f"{count} random 4x3")


def check_svd_backends(seed=0, count=50, tol=1e-8) -> CheckResult:
    """LAPACK and Jacobi factorizations both reconstruct and agree on singular values."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        a = rng.standard_normal(tuple(rng.integers(1, 9, size=2)))
        norm = max(np.linalg.norm(a), 1e-300)
        results = [linalg.svd(a), linalg.jacobi_svd(a)]
        for res in results:
            k = res.s.size
            worst = max(worst, np.linalg.norm(res.reconstruct() - a) / norm,
                        np.max(np.abs(res.u.T @ res.u - np.eye(k))),
                        np.max(np.abs(res.v.T @ res.v - np.eye(k))))
        worst = max(worst, np.max(np.abs(results[0].s - results[1].s)) / norm)
    return CheckResult("svd_backends", tol, float(worst), f"{count} matrices")


def check_ole_fixtures(tol=1e-8) -> CheckResult:
    e = np.eye(4)
    orth = ole.ole_loss(ole.LabeledLatentBatch(e, [0, 0, 1, 1]), ole.OleConfig(0.0))
    u = np.array([[0.6], [0.8], [0.0]])
    same = ole.ole_loss(ole.LabeledLatentBatch(np.hstack([u, u]), [0, 1]), ole.OleConfig(0.0))
    zero = ole.ole_loss(ole.LabeledLatentBatch(np.zeros((3, 3)), [0, 1, 2]), ole.OleConfig(1.0))
    worst = max(abs(orth), abs(same - (2 - np.sqrt(2))), 0.0 if zero == 3.0 else np.inf)
    return CheckResult("ole_fixtures", tol, float(worst), "orthogonal / identical-column / zero batch")


def micro_networks(rng) -> dict[str, Network]:
    """One tiny float64 network exercising each layer kind."""
    nets = {
        "linear": Network("linear", (5,), [L.Linear(5, 3)], np.float64),
        "conv": Network("conv", (2, 5, 5), [L.Conv2d(2, 3, 3, 2, 1)], np.float64),
        "conv_transpose": Network("conv_transpose", (2, 3, 3),
                                  [L.ConvTranspose2d(2, 2, 3, 2, 1, output_padding=1)], np.float64),
        "leaky_relu": Network("leaky_relu", (4,), [L.Linear(4, 6), L.LeakyReLU(0.2)], np.float64),
        "sigmoid": Network("sigmoid", (4,), [L.Linear(4, 3), L.Sigmoid()], np.float64),
        "flatten": Network("flatten", (2, 3, 3), [L.Conv2d(2, 2, 3, 1, 1), L.Flatten(), L.Linear(18, 2)],
                           np.float64),
        "reshape": Network("reshape", (6,), [L.Linear(6, 8), L.Reshape((2, 2, 2)),
                                             L.ConvTranspose2d(2, 1, 3, 2, 1)], np.float64),
    }
    for net in nets.values():
        net.init_params(rng)
        # nonzero biases so their gradients are exercised
        net.set_params([p + 0.1 * rng.standard_normal(p.shape) for p in net.params])
    return nets


def _rel_err(a, n):
    return float(np.max(np.abs(a - n)) / max(np.max(np.abs(n)), 1e-12))


def gradient_errors(net: Network, rng, batch=2) -> list[float]:
    """Relative errors of every parameter gradient and the input gradient."""
    x = rng.standard_normal((batch,) + net.input_shape)
    proj = rng.standard_normal((batch,) + net.output_shape)
    out, cache = net.forward(x)
    grads, dx = net.backward(cache, proj)
    errors = [_rel_err(dx, central_difference(lambda xx: float(np.sum(net(xx) * proj)), x))]
    params = [p.copy() for p in net.params]
    for i in range(len(params)):
        def loss(p_i, i=i):
            trial = list(params)
            trial[i] = p_i
            net.set_params(trial)
            return float(np.sum(net(x) * proj))
        errors.append(_rel_err(grads[i], central_difference(loss, params[i])))
    net.set_params(params)
    return errors


def check_nn_gradients(seed=0, tol=1e-3) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, worst_kind = 0.0, ""
    for kind, net in micro_networks(rng).items():
        err = max(gradient_errors(net, rng))
        if err >= worst:
            worst, worst_kind = err, kind
    return CheckResult("nn_gradient_fd", tol, worst, f"worst layer kind: {worst_kind}")


def check_auroc_oracle(seed=0, count=500, max_n=200) -> CheckResult:
    rng = np.random.default_rng(seed)
    mismatches = 0
    for i in range(count):
        n = int(rng.integers(2, max_n + 1))
        flags = rng.random(n) < rng.uniform(0.1, 0.9)
        flags[0], flags[1] = True, False
        # every other set draws from a handful of values so ties are common
        scores = rng.integers(0, 5, n).astype(float) if i % 2 else rng.standard_normal(n)
        if evaluation.auroc(scores, flags) != evaluation.auroc_pairwise(scores, flags):
            mismatches += 1
    return CheckResult("auroc_oracle", 0.0, float(mismatches), f"{count} score sets, n<={max_n}")


ALL_CHECKS = (
    check_svd_backends,
    check_nuclear_norm_suite,
    check_nuclear_subgradient_fd,
    check_ole_fixtures,
    check_ole_gradient,
    check_nn_gradients,
    check_auroc_oracle,
)


def run_checks(seed: int = 0) -> list[CheckResult]:
    return [check(seed=seed) if check is not check_ole_fixtures else check() for check in ALL_CHECKS]
