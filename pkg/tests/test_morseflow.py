import numpy as np
import pytest

from chordflow.chords import SolverConfig, find_chords
from chordflow.geometry import NormalSection, TrigPoly, build_hopf_link, circle, perturb
from chordflow.morseflow import (FlowSystem, MetricSpec, MorseEngine, build_complex,
                                 jitter_metric, random_metric)


@pytest.fixture(scope="module")
def curve_setup():
    base = circle(3)
    sec = NormalSection({0: TrigPoly([((2,), 0.12, 0.0)])})
    man = perturb(base, sec, max_sup=0.5)
    chords = find_chords(man, SolverConfig(seed=0))
    assert chords.nondegenerate()
    return man, chords


def test_neg_gradient_zero_on_diagonal(curve_setup):
    man, _ = curve_setup
    sys = FlowSystem(man, MetricSpec(), (0, 0))
    w = np.array([[0.7, 0.7]])
    v = sys.velocity(w)
    assert np.linalg.norm(v) < 1e-12


def test_neg_gradient_zero_at_chord(curve_setup):
    man, chords = curve_setup
    sys = FlowSystem(man, MetricSpec(), (0, 0))
    c = chords.chords[0]
    w = np.concatenate(c.coords)[None, :]
    assert np.linalg.norm(sys.velocity(w)) < 1e-8


def test_neg_gradient_flat_torus_closed_form():
    """Unit-speed product chart: V = -(J_a^T(q-q'), J_b^T(q'-q))."""
    from chordflow.geometry import product, standing_circle
    t2 = product(circle(2, axes=(0, 1), name="c1"),
                 circle(2, axes=(0, 1), name="c2"), name="T2R4")
    sys = FlowSystem(t2, MetricSpec(), (0, 0))
    w = np.array([[0.3, 1.2, 2.2, 4.0]])
    qa = t2.point(0, w[:, :2])
    qb = t2.point(0, w[:, 2:])
    _, ja, _ = t2.eval(0, w[:, :2], order=1)
    _, jb, _ = t2.eval(0, w[:, 2:], order=1)
    d = (qa - qb)[0]
    expect = np.concatenate([-ja[0].T @ d, jb[0].T @ d])
    assert np.allclose(sys.velocity(w)[0], expect, atol=1e-12)


def test_flow_fixed_point(curve_setup):
    man, chords = curve_setup
    sys = FlowSystem(man, MetricSpec(), (0, 0))
    c = chords.chords[0]
    w0 = np.concatenate(c.coords)[None, :]
    w = sys.flow(w0, 10.0)
    drift = np.abs(w - sys.wrap(w0.copy()))
    drift = np.minimum(drift, 2 * np.pi - drift)
    assert drift.max() < 1e-8


def test_flow_energy_monotone(curve_setup):
    man, _ = curve_setup
    sys = FlowSystem(man, MetricSpec(bumps=[(np.zeros(6), 1.0, 0.3)]), (0, 0))
    rng = np.random.default_rng(4)
    w0 = rng.uniform(0, 2 * np.pi, size=(12, 2))
    _, (ts, path, E) = sys.flow(w0, 6.0, record=True)
    assert (np.diff(E, axis=0) <= 1e-9).all()
    E_check = np.stack([sys.energy(path[i]) for i in range(path.shape[0])])
    assert np.allclose(E, E_check)


def test_flow_monotonicity_guard_raises(curve_setup):
    """A negative-definite 'metric' makes E increase; the guard must trip."""
    man, _ = curve_setup

    class BadSystem(FlowSystem):
        def velocity(self, w):
            return -super().velocity(w)

    sys = BadSystem(man, MetricSpec(), (0, 0))
    with pytest.raises(RuntimeError):
        sys.flow(np.array([[0.3, 2.0]]), 2.0)


def test_omega_limit_classification(curve_setup):
    man, chords = curve_setup
    rng = np.random.default_rng(7)
    metric = random_metric(man, chords, rng)
    eng = MorseEngine(man, chords, metric)
    sigs = eng.classify((0, 0), rng.uniform(0, 2 * np.pi, size=(40, 2)))
    kinds = {s.kind for s in sigs}
    assert "unresolved" not in kinds
    assert "diagonal" in kinds  # generic starts flow to the diagonal


def test_curve_complex_homology(curve_setup):
    man, chords = curve_setup
    rng = np.random.default_rng(1)
    metric = random_metric(man, chords, rng)
    cx = build_complex(man, chords, metric)
    dims = cx.homology_dims()
    assert {p: d for p, d in dims.items() if d} == {1: 1, 2: 1}


def test_curve_counts_jitter_stable(curve_setup):
    man, chords = curve_setup
    rng = np.random.default_rng(2)
    metric = random_metric(man, chords, rng)
    eng = MorseEngine(man, chords, metric)
    by_idx = chords.by_index()
    src = by_idx[2][0]
    base_counts = [eng.count_trajectories(src, d)[0] for d in by_idx[1]]
    jit = jitter_metric(metric, rng, 1e-3)
    eng2 = MorseEngine(man, chords, jit)
    jit_counts = [eng2.count_trajectories(src, d)[0] for d in by_idx[1]]
    assert base_counts == jit_counts


def test_count_rejects_bad_degrees(curve_setup):
    man, chords = curve_setup
    metric = MetricSpec()
    eng = MorseEngine(man, chords, metric)
    by_idx = chords.by_index()
    with pytest.raises(ValueError):
        eng.count_trajectories(by_idx[2][0], by_idx[2][0])
    with pytest.raises(ValueError):
        eng.count_trajectories(by_idx[1][0], by_idx[2][0])


def test_empty_chord_set_zero_complex():
    from chordflow.chords import ChordSet
    man = circle(3)
    cx = build_complex(man, ChordSet(man, []), MetricSpec())
    assert cx.homology_dims() == {}


def test_shoot_radius_stability(curve_setup):
    man, chords = curve_setup
    rng = np.random.default_rng(3)
    metric = random_metric(man, chords, rng)
    eng = MorseEngine(man, chords, metric)
    by_idx = chords.by_index()
    src, dst = by_idx[2][0], by_idx[1][0]
    c1, _ = eng.count_trajectories(src, dst)
    c2, _ = eng.count_trajectories(src, dst, radius=2 * eng.shoot_radius)
    assert c1 == c2
