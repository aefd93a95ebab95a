import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wmlab.attacks import (
    AttackConfig,
    Hyperplane,
    build_frequency_mask,
    fit_linear_svm,
    forge,
    forge_dct,
    forge_pgd,
    remove,
    traverse,
)
from wmlab.core import InvalidInputError, SeededRng, dct2
from wmlab.diffusion import encode, make_encoder


@pytest.fixture(scope="module")
def enc():
    return make_encoder(SeededRng(1))


def images(enc, seed, n=None):
    shape = enc.pixel_shape if n is None else (n,) + tuple(enc.pixel_shape)
    return 0.2 + 0.6 * SeededRng(seed).uniform(size=shape)


# -- penalised attacks -----------------------------------------------------------

def test_identity_target_gives_zero_delta(enc):
    x = images(enc, 2)
    res = forge(x, x, enc, AttackConfig(iterations=50))
    assert np.all(res.delta == 0) and np.all(res.loss_trace == 0)
    assert np.array_equal(res.adversarial_image, x)


def test_dominating_penalty_keeps_zero(enc):
    x, y = images(enc, 3), images(enc, 4)
    res = forge(x, y, enc, AttackConfig(lam=1e6, iterations=50))
    assert np.all(res.delta == 0)
    initial = np.linalg.norm(encode(enc, x) - encode(enc, y))
    assert res.final_latent_distance == pytest.approx(initial, rel=1e-12)


def test_constant_image_mean_guidance_is_noop(enc):
    x = np.full(enc.pixel_shape, 0.37)
    res = remove(x, enc, AttackConfig(iterations=50, guide_mode="mean_of_target"))
    assert np.max(np.abs(res.delta)) == 0.0


def test_guide_presence_rule(enc):
    x = images(enc, 5)
    with pytest.raises(InvalidInputError):
        remove(x, enc, AttackConfig(guide_mode="real_image"))
    with pytest.raises(InvalidInputError):
        remove(x, enc, AttackConfig(guide_mode="fixed_half"), guide=x)
    res = remove(x, enc, AttackConfig(guide_mode="real_image", iterations=20, lam=0.1), guide=images(enc, 6))
    assert res.loss_trace.shape == (20,)


def test_lambda_controls_tradeoff(enc):
    x, y = images(enc, 7, 4), images(enc, 8, 4)
    out = [forge(x, y, enc, AttackConfig(lam=lam, iterations=400)) for lam in (1.0, 0.4, 0.2)]
    for a, b in zip(out, out[1:]):
        assert np.all(b.final_delta_l2 >= a.final_delta_l2 - 1e-9)
        assert np.all(b.final_latent_distance <= a.final_latent_distance + 1e-9)


def test_batch_equals_single(enc):
    x, y = images(enc, 9, 3), images(enc, 10, 3)
    cfg = AttackConfig(lam=0.4, iterations=200)
    batch = forge(x, y, enc, cfg)
    one = forge(x[1], y[1], enc, cfg)
    assert np.allclose(batch.delta[1], one.delta, atol=1e-12)
    assert np.allclose(batch.loss_trace[1], one.loss_trace, atol=1e-12)


def test_deterministic(enc):
    x, y = images(enc, 11), images(enc, 12)
    cfg = AttackConfig(lam=0.3, iterations=300)
    a, b = forge(x, y, enc, cfg), forge(x, y, enc, cfg)
    assert a.delta.tobytes() == b.delta.tobytes() and a.loss_trace.tobytes() == b.loss_trace.tobytes()


def test_output_clamped(enc):
    x = np.clip(images(enc, 13) * 1.6 - 0.3, 0, 1)
    res = forge(x, images(enc, 14), enc, AttackConfig(lam=0.05, iterations=300))
    assert res.adversarial_image.min() >= 0 and res.adversarial_image.max() <= 1
    assert np.array_equal(res.adversarial_image, np.clip(x + res.delta, 0, 1))


def test_zero_iterations_is_noop(enc):
    x = images(enc, 15)
    res = forge(x, images(enc, 16), enc, AttackConfig(iterations=0))
    assert np.all(res.delta == 0) and res.loss_trace.size == 0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32), lam=st.floats(0.0, 2.0), lr=st.floats(0.001, 0.2))
def test_loss_trace_monotone(enc, seed, lam, lr):
    x, y = images(enc, seed), images(enc, seed + 1)
    res = forge(x, y, enc, AttackConfig(lam=lam, learning_rate=lr, iterations=300))
    assert np.all(np.diff(res.loss_trace) <= 1e-9 * np.maximum(1, res.loss_trace[:-1]))


def test_input_validation(enc):
    x = images(enc, 17)
    with pytest.raises(InvalidInputError):
        forge(x, np.zeros((8, 8, 3)), enc)
    with pytest.raises(InvalidInputError):
        forge(x * 2, x, enc)
    with pytest.raises(InvalidInputError):
        AttackConfig(lam=-1)
    with pytest.raises(InvalidInputError):
        AttackConfig(guide_mode="nope")


def test_trace_csv(enc, tmp_path):
    res = forge(images(enc, 18), images(enc, 19), enc, AttackConfig(iterations=5))
    res.write_trace_csv(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["iteration", "total_loss", "latent_distance", "delta_l2"]
    assert len(rows) == 6 and float(rows[-1][1]) == res.loss_trace[-1]


# -- PGD ---------------------------------------------------------------------------

def test_pgd_projection_single_step(enc):
    # sign steps of size 0.5: every raw component is +-0.5, every stored one +-0.1
    x, y = images(enc, 20), images(enc, 21)
    res = forge_pgd(x, y, enc, AttackConfig(epsilon=0.1, learning_rate=0.5, iterations=1, sign_gradient=True))
    e = (encode(enc, x) - encode(enc, y)).ravel()
    raw = -0.5 * np.sign((e @ enc.weight).reshape(x.shape))
    assert np.all(np.abs(raw) == 0.5)
    assert np.array_equal(res.delta, np.clip(raw, -0.1, 0.1))
    assert np.all(np.abs(res.delta) == 0.1)


def test_pgd_projection_raw_gradient(enc):
    x, y = images(enc, 20), images(enc, 21)
    cfg = AttackConfig(epsilon=0.01, learning_rate=0.5, iterations=1)
    res = forge_pgd(x, y, enc, cfg)
    e = (encode(enc, x) - encode(enc, y)).ravel()
    s = cfg.learning_rate * enc.spectral_norm**2
    raw = -cfg.learning_rate * ((e / np.sqrt(e @ e + s * s)) @ enc.weight).reshape(x.shape)
    assert np.max(np.abs(raw)) > 0.01
    assert np.allclose(res.delta, np.clip(raw, -0.01, 0.01), rtol=0, atol=1e-15)


def test_pgd_rejects_zero_budget(enc):
    x = images(enc, 22)
    with pytest.raises(InvalidInputError):
        forge_pgd(x, x, enc, AttackConfig(epsilon=0.0))
    with pytest.raises(InvalidInputError):
        forge_pgd(x, x, enc, AttackConfig())


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32), eps=st.floats(0.001, 0.3), sign=st.booleans())
def test_pgd_budget_every_iteration(enc, seed, eps, sign):
    # debug=True asserts the bound inside the loop after each projection
    res = forge_pgd(images(enc, seed), images(enc, seed + 7), enc,
                    AttackConfig(epsilon=eps, iterations=100, sign_gradient=sign, debug=True))
    assert np.max(np.abs(res.delta)) <= eps


# -- frequency mask and DCT attack -------------------------------------------------

def test_mask_examples():
    m = build_frequency_mask(4, 0.5)
    assert [tuple(p) for p in np.argwhere(m == 0)] == [(0, 0), (0, 1), (1, 0)]
    assert m.sum() == 13
    assert np.all(build_frequency_mask(8, 1.0) == 1)
    i, j = np.indices((8, 8))
    assert np.array_equal(build_frequency_mask(8, 0.0) == 0, i + j < 8)
    assert build_frequency_mask(10, 0.3).sum() == 100 - 28  # bound 7 despite 10 * 0.7 = 6.999...


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 64), alpha=st.floats(0, 1))
def test_mask_counts(n, alpha):
    m = build_frequency_mask(n, alpha)
    b = int(np.floor(n - alpha * n + 1e-9))
    zeros = sum(1 for i in range(n) for j in range(n) if i + j < b)
    assert m.size - m.sum() == zeros and set(np.unique(m)) <= {0.0, 1.0}


def test_mask_errors():
    for args in ((1, 0.5), (4, -0.1), (4, 1.1)):
        with pytest.raises(InvalidInputError):
            build_frequency_mask(*args)


def test_dct_masked_coefficients_bit_exact(enc):
    x, y = images(enc, 23, 2), images(enc, 24, 2)
    res = forge_dct(x, y, enc, AttackConfig(epsilon=0.1, alpha=0.5, iterations=100, debug=True))
    mask = build_frequency_mask(enc.pixel_shape[0], 0.5)[None, :, :, None] == 0
    mask = np.broadcast_to(mask, x.shape)
    ref = dct2(x)
    assert res.coefficients[mask].tobytes() == ref[mask].tobytes()
    assert np.max(np.abs(dct2(x + res.delta)[mask] - ref[mask])) < 1e-12
    assert np.max(np.abs(res.coefficients - ref)) <= 0.1
    assert np.any(res.coefficients[~mask] != ref[~mask])


def test_dct_zero_iterations_is_noop(enc):
    x = images(enc, 25)
    res = forge_dct(x, images(enc, 26), enc, AttackConfig(epsilon=0.1, alpha=0.0, iterations=0))
    assert np.array_equal(res.adversarial_image, x)


def test_dct_requires_alpha(enc):
    x = images(enc, 27)
    with pytest.raises(InvalidInputError):
        forge_dct(x, x, enc, AttackConfig(epsilon=0.1))


def test_dct_rejects_non_square():
    e = make_encoder(SeededRng(2), pixel_shape=(8, 16, 1), latent_shape=(4, 4, 1))
    x = np.full((8, 16, 1), 0.5)
    with pytest.raises(InvalidInputError):
        forge_dct(x, x, e, AttackConfig(epsilon=0.1, alpha=0.5))


# -- SVM and traversal ---------------------------------------------------------------

def test_svm_axis_separated():
    z = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
    h = fit_linear_svm(z, [1, -1], SeededRng(0))
    assert h.train_accuracy == 1.0
    assert h.normal @ np.array([1.0, 0.0, 0.0]) > 0.999


def test_svm_label_flip_symmetry():
    rng = SeededRng(1)
    z = np.concatenate([rng.child("a").normal((40, 8)) + 1.5, rng.child("b").normal((40, 8)) - 1.0])
    y = np.r_[np.ones(40), -np.ones(40)]
    h1 = fit_linear_svm(z, y, SeededRng(2), iterations=500)
    h2 = fit_linear_svm(z, -y, SeededRng(3), iterations=500)
    assert np.allclose(h1.normal, -h2.normal, atol=1e-12)
    assert abs(h1.offset) == pytest.approx(abs(h2.offset), abs=1e-12)
    assert h1.train_accuracy == h2.train_accuracy


def test_svm_errors():
    with pytest.raises(InvalidInputError):
        fit_linear_svm(np.zeros((3, 2)), [1, 1, 1])
    with pytest.raises(InvalidInputError):
        fit_linear_svm(np.zeros((3, 2)), [1, -1])
    with pytest.raises(InvalidInputError):
        Hyperplane(np.array([1.0, 1.0]), 0.0, 1.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), s=st.floats(-10, 10))
def test_traverse_geometry(seed, s):
    rng = SeededRng(seed)
    n = rng.child("n").normal((4, 4, 1))
    h = Hyperplane((n / np.linalg.norm(n)).ravel(), 0.3, 1.0)
    z = rng.child("z").normal((4, 4, 1))
    assert np.array_equal(traverse(z, h, 0.0), z)
    assert h.signed_distance(traverse(z, h, s)) == pytest.approx(h.signed_distance(z) + s, abs=1e-9)
