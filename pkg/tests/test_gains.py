"""Gain synthesis and verification against the algebraic contracts."""

import numpy as np
import pytest

from satsync.agents import AgentModel, mixed_decompose
from satsync.errors import SynthesisError, ValidationError
from satsync.gains import (
    GainSet,
    compute_Lambda,
    design_F,
    design_K_double,
    design_K_mixed,
    solve_P_neutral,
    synthesize_gains,
    verify_gains,
)
from satsync.linalg import is_hurwitz
from satsync.presets import example1_model, example2_model

ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])


def rotation_model():
    return AgentModel(a=ROTATION, b=np.array([[0.0], [1.0]]), c=np.eye(2), coupling="full")


def random_neutral(rng, max_pairs=2):
    """Random neutrally stable (a, b): oscillators + integrators, conjugated."""
    pairs = int(rng.integers(0, max_pairs + 1))
    zeros = int(rng.integers(1 if pairs == 0 else 0, 3))
    blocks = []
    for _ in range(pairs):
        w = float(rng.uniform(0.3, 4.0))
        blocks.append(np.array([[0.0, w], [-w, 0.0]]))
    n = 2 * pairs + zeros
    a = np.zeros((n, n))
    at = 0
    for blk in blocks:
        a[at:at + 2, at:at + 2] = blk
        at += 2
    t = rng.standard_normal((n, n))
    t += np.sign(np.linalg.det(t) or 1.0) * n * np.eye(n)
    return t @ a @ np.linalg.inv(t)


def test_solve_P_neutral_rotation_oracle():
    p = solve_P_neutral(ROTATION)
    # skew a: p = I satisfies p a + a' p = 0; solver must land on a PD
    # weight with the same vanishing commutator
    assert np.array_equal(p, p.T)
    assert np.linalg.eigvalsh(p).min() > 0
    res = np.linalg.eigvalsh(p @ ROTATION + ROTATION.T @ p).max()
    assert res <= 1e-8 * np.linalg.norm(ROTATION)


def test_solve_P_neutral_seeded_family():
    rng = np.random.default_rng(41)
    for _ in range(25):
        a = random_neutral(rng)
        p = solve_P_neutral(a)
        assert np.linalg.eigvalsh(p).min() > 0
        lam = np.linalg.eigvalsh(p @ a + a.T @ p).max()
        assert lam <= 1e-8 * max(1.0, np.linalg.norm(a))


def test_solve_P_neutral_rejects_unstable():
    with pytest.raises((SynthesisError, ValidationError)):
        solve_P_neutral(np.array([[1.0]]))


def test_design_F_stabilizes_both_demo_models():
    for model in (example1_model(), example2_model()):
        f = design_F(model.a, model.c)
        assert f.shape == (model.n, model.q_out)
        assert is_hurwitz(model.a - f @ model.c)


def test_design_K_double_blocks():
    k = design_K_double(2)
    assert np.array_equal(k, np.hstack([-np.eye(2), -np.eye(2)]))


def test_compute_Lambda_layout():
    model = example2_model()
    d = mixed_decompose(model.a, model.b, model.c)
    p_d = 2.0 * np.eye(d.q)
    lam = compute_Lambda(d, p_d)
    n, m, q = model.n, d.m, d.q
    assert np.array_equal(lam[q:2 * q, q:2 * q], p_d)
    assert np.array_equal(lam[m + q:, m + q:], np.eye(n - m - q))
    assert np.count_nonzero(lam) == q + (n - m - q)


def test_compute_Lambda_rejects_indefinite_p_d():
    model = example2_model()
    d = mixed_decompose(model.a, model.b, model.c)
    with pytest.raises(ValidationError, match="positive definite"):
        compute_Lambda(d, -np.eye(d.q))


def test_design_K_mixed_satisfies_both_conditions():
    model = example2_model()
    d = mixed_decompose(model.a, model.b, model.c)
    k = design_K_mixed(d)
    at = np.zeros_like(model.a)
    at[:2 * d.q, :2 * d.q] = d.a_s
    at[d.m + d.q:, d.m + d.q:] = d.a_omega
    lam = compute_Lambda(d, np.eye(d.q))
    bt = d.b_tilde
    assert np.linalg.norm(k @ at + bt.T @ lam) <= 1e-8 * max(1.0, np.linalg.norm(bt.T @ lam))
    gram = k @ bt + bt.T @ k.T
    assert np.linalg.eigvalsh(0.5 * (gram + gram.T)).max() < 0


def test_verify_gains_passes_on_synthesized():
    for model, kind in [
        (rotation_model(), "P1"),
        (example1_model(), "P4"),
        (example2_model(), "P6"),
    ]:
        gains = synthesize_gains(model, kind)
        report = verify_gains(model, gains, kind=kind)
        assert report.passed, [c.detail for c in report.failures()]


def test_verify_gains_fails_on_zero_F():
    model = example1_model()
    gains = synthesize_gains(model, "P4")
    broken = GainSet(rho=gains.rho, f=np.zeros_like(gains.f), k=gains.k)
    report = verify_gains(model, broken, kind="P4")
    assert not report.passed
    assert any(c.name == "f_stabilizes_observer" for c in report.failures())


def test_verify_gains_fails_on_zero_velocity_block():
    model = example1_model()
    gains = synthesize_gains(model, "P4")
    k = gains.k.copy()
    k[:, model.m:] = 0.0  # no velocity damping
    report = verify_gains(model, GainSet(rho=1.0, f=gains.f, k=k), kind="P4")
    assert not report.passed
    assert any(c.name == "k_blocks_negative_definite" for c in report.failures())


def test_verify_gains_fails_on_nonpositive_rho():
    model = example1_model()
    gains = synthesize_gains(model, "P4")
    for rho in (0.0, -1.0):
        report = verify_gains(
            model, GainSet(rho=rho, f=gains.f, k=gains.k), kind="P4"
        )
        assert any(c.name == "rho_positive" and not c.passed for c in report.checks)


def test_verify_gains_requires_kind_gains():
    with pytest.raises(ValidationError, match="needs gains"):
        verify_gains(example1_model(), GainSet(rho=1.0), kind="P4")


def test_synthesize_gains_field_coverage():
    wanted = {
        "P1": {"p"},
        "P2": {"p", "f"},
        "P3": {"k"},
        "P4": {"k", "f"},
        "P6": {"k", "f", "p_d", "gamma_x", "lam"},
    }
    models = {
        "P1": rotation_model(),
        "P2": AgentModel(a=ROTATION, b=np.array([[0.0], [1.0]]), c=np.array([[1.0, 0.0]])),
        "P3": AgentModel(
            a=np.array([[0.0, 1.0], [0.0, 0.0]]),
            b=np.array([[0.0], [1.0]]),
            c=np.eye(2),
            coupling="full",
        ),
        "P4": example1_model(),
        "P6": example2_model(),
    }
    for kind, fields in wanted.items():
        gains = synthesize_gains(models[kind], kind)
        for name in fields:
            assert getattr(gains, name) is not None, (kind, name)


def test_gain_set_validation():
    with pytest.raises(ValidationError, match="finite"):
        GainSet(rho=np.inf)
    with pytest.raises(ValidationError, match="finite matrix"):
        GainSet(rho=1.0, k=np.array([[np.nan, 0.0]]))
