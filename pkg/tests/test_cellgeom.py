"""Cell geometry: membership, closed-form ray exits vs oracles, width estimates."""

import math

import numpy as np
import pytest

from qconsist.cellgeom import (
    NotInCellError,
    ball_cell,
    build_cell,
    cell_contains,
    code_discrepancy,
    empirical_worst_case,
    estimate_width,
    ray_exit_relaxed,
    ray_exit_strict,
)
from qconsist.quantizer import QuantizerSpec
from qconsist.randkit import Stream, substream
from qconsist.sensing import SensingEnsemble, SignalModel, gen_ensemble, sample_signal, sense

UNIT = QuantizerSpec(1.0)


def manual_ensemble(phi, xi, delta=1.0, seed=0):
    return SensingEnsemble(phi=np.asarray(phi, float), xi=np.asarray(xi, float), spec=QuantizerSpec(delta), seed=seed)


def test_build_cell_contains_the_sensed_signal():
    ens = gen_ensemble(32, 4, UNIT, 10)
    sig = sample_signal(SignalModel.unit_ball(4), Stream(11))
    cell = build_cell(ens, sense(ens, sig).codes)
    assert cell_contains(cell, sig.x)


def test_one_dimensional_cell_construction():
    ens = manual_ensemble([[1.0]], [0.0])
    cell = build_cell(ens, np.array([0]))
    assert cell.lo[0] == 0.0 and cell.hi[0] == 1.0
    assert cell_contains(cell, np.array([0.5]))
    assert cell_contains(cell, np.array([0.0]))  # half-open: left edge belongs
    assert not cell_contains(cell, np.array([-0.1]))
    assert not cell_contains(cell, np.array([1.0]))  # right edge is the next cell


def test_ray_exit_hand_geometry():
    ens = manual_ensemble([[1.0, 0.0]], [0.0])
    cell = build_cell(ens, np.array([0]))
    x0 = np.array([0.5, 0.0])
    assert ray_exit_strict(cell, x0, np.array([1.0, 0.0])) == pytest.approx(0.5, abs=1e-12)
    assert ray_exit_strict(cell, x0, np.array([0.0, 1.0])) == pytest.approx(math.sqrt(0.75), abs=1e-12)


def test_ray_exit_preconditions():
    ens = manual_ensemble([[1.0, 0.0]], [0.0])
    cell = build_cell(ens, np.array([0]))
    with pytest.raises(NotInCellError):
        ray_exit_strict(cell, np.array([2.0, 0.0]), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        ray_exit_strict(cell, np.array([0.5, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        ray_exit_relaxed(cell, np.array([0.5, 0.0]), np.array([1.0, 0.0]), -1)


def bisect_exit(cell, x0, d, r=0):
    def member(t: float) -> bool:
        return cell_contains(cell, x0 + t * d, r=r)

    hi = 1.0
    while member(hi):
        hi *= 2.0
        assert hi < 64.0
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if member(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_strict_exit_matches_bisection_oracle():
    stream = Stream(77)
    for seed in range(25):
        ens = gen_ensemble(12, 3, QuantizerSpec(0.7), 100 + seed)
        sig = sample_signal(SignalModel.unit_ball(3), Stream(200 + seed))
        cell = build_cell(ens, sense(ens, sig).codes)
        d = stream.rng.standard_normal(3)
        d /= np.linalg.norm(d)
        exact = ray_exit_strict(cell, sig.x, d)
        oracle = bisect_exit(cell, sig.x, d)
        assert abs(exact - oracle) < 1e-9 * max(1.0, exact)


def test_relaxed_exit_zero_equals_strict():
    ens = gen_ensemble(10, 2, UNIT, 5)
    sig = sample_signal(SignalModel.unit_ball(2), Stream(6))
    cell = build_cell(ens, sense(ens, sig).codes)
    d = np.array([0.6, 0.8])
    assert ray_exit_relaxed(cell, sig.x, d, 0) == ray_exit_strict(cell, sig.x, d)


def test_relaxed_exit_saturates_at_ball():
    ens = gen_ensemble(6, 2, UNIT, 5)
    sig = sample_signal(SignalModel.unit_ball(2), Stream(6))
    cell = build_cell(ens, sense(ens, sig).codes)
    d = np.array([1.0, 0.0])
    c = float(sig.x @ d)
    t_ball = -c + math.sqrt(c * c + 1.0 - float(sig.x @ sig.x))
    assert ray_exit_relaxed(cell, sig.x, d, 10_000) == pytest.approx(t_ball, rel=1e-12)


def test_relaxed_exit_matches_fine_grid_oracle():
    step = 1e-5
    for seed in range(8):
        ens = gen_ensemble(5, 2, QuantizerSpec(0.6), 300 + seed)
        sig = sample_signal(SignalModel.unit_ball(2), Stream(400 + seed))
        obs = sense(ens, sig)
        cell = build_cell(ens, obs.codes)
        rng = np.random.default_rng(seed)
        d = rng.standard_normal(2)
        d /= np.linalg.norm(d)
        exact = ray_exit_relaxed(cell, sig.x, d, 2)
        # crawl the ray and count code changes directly
        ts = np.arange(0.0, exact + 50 * step, step)
        points = sig.x[None, :] + ts[:, None] * d[None, :]
        vals = points @ ens.phi.T + ens.xi[None, :]
        codes = np.floor(vals / 0.6).astype(np.int64)
        disc = np.abs(codes - obs.codes[None, :]).sum(axis=1)
        inside_ball = np.linalg.norm(points, axis=1) <= 1.0
        ok = (disc <= 2) & inside_ball
        first_bad = int(np.argmin(ok)) if not ok.all() else len(ts)
        oracle = ts[first_bad - 1]
        assert abs(exact - oracle) <= 2 * step


def test_relaxed_nesting_over_r():
    ens = gen_ensemble(12, 3, UNIT, 50)
    sig = sample_signal(SignalModel.unit_ball(3), Stream(51))
    cell = build_cell(ens, sense(ens, sig).codes)
    stream = Stream(52)
    for _ in range(50):
        d = stream.rng.standard_normal(3)
        d /= np.linalg.norm(d)
        exits = [ray_exit_relaxed(cell, sig.x, d, r) for r in range(4)]
        assert all(a <= b + 1e-15 for a, b in zip(exits, exits[1:]))


def test_width_of_unconstrained_ball():
    cell = ball_cell(3, 1.0)
    est = estimate_width(cell, np.zeros(3), 1, Stream(1))
    assert est.value == pytest.approx(1.0, abs=1e-9)
    est = estimate_width(cell, np.zeros(3), 64, Stream(2))
    assert est.value == pytest.approx(1.0, abs=1e-9)


def test_width_of_unit_interval_cell():
    ens = manual_ensemble([[1.0]], [0.0])
    cell = build_cell(ens, np.array([0]))
    est = estimate_width(cell, np.array([0.5]), 8, Stream(3))
    assert est.value == pytest.approx(0.5, rel=1e-9)


def exact_width_2d(cell, center):
    """Vertex-enumeration oracle: max distance from center over the closed cell."""
    ens = cell.ensemble
    radius = cell.ball_radius
    lines = []
    for j in range(ens.m):
        lines.append((ens.phi[j], cell.lo[j]))
        lines.append((ens.phi[j], cell.hi[j]))

    def feasible(point, tol=1e-9):
        if np.linalg.norm(point) > radius + tol:
            return False
        y = ens.phi @ point
        return bool(np.all(y >= cell.lo - tol) and np.all(y <= cell.hi + tol))

    candidates = []
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            a = np.array([lines[i][0], lines[j][0]])
            b = np.array([lines[i][1], lines[j][1]])
            if abs(np.linalg.det(a)) < 1e-12:
                continue
            point = np.linalg.solve(a, b)
            if feasible(point):
                candidates.append(point)
    for normal, offset in lines:
        nn = float(normal @ normal)
        base = (offset / nn) * normal
        rem = radius**2 - offset**2 / nn
        if rem < 0.0:
            continue
        perp = np.array([-normal[1], normal[0]]) / math.sqrt(nn)
        for sign in (1.0, -1.0):
            point = base + sign * math.sqrt(rem) * perp
            if feasible(point):
                candidates.append(point)
    if np.linalg.norm(center) > 0.0:
        point = -radius * center / np.linalg.norm(center)
        if feasible(point):
            candidates.append(point)
    assert candidates, "oracle found no cell vertices"
    return max(float(np.linalg.norm(p - center)) for p in candidates)


def test_width_against_2d_vertex_oracle():
    for seed in range(10):
        ens = gen_ensemble(4, 2, QuantizerSpec(0.8), 500 + seed)
        sig = sample_signal(SignalModel.unit_ball(2), Stream(600 + seed))
        cell = build_cell(ens, sense(ens, sig).codes)
        oracle = exact_width_2d(cell, sig.x)
        est = estimate_width(cell, sig.x, 4096, Stream(700 + seed))
        assert est.value <= oracle + 1e-9
        assert est.value >= 0.98 * oracle


def test_width_monotone_in_direction_count():
    ens = gen_ensemble(24, 4, UNIT, 9)
    sig = sample_signal(SignalModel.unit_ball(4), Stream(10))
    cell = build_cell(ens, sense(ens, sig).codes)
    small = estimate_width(cell, sig.x, 64, Stream(11))
    large = estimate_width(cell, sig.x, 256, Stream(11))
    assert large.value >= small.value


def test_width_witness_verifies():
    ens = gen_ensemble(40, 5, QuantizerSpec(0.5), 13)
    sig = sample_signal(SignalModel.unit_ball(5), Stream(14))
    cell = build_cell(ens, sense(ens, sig).codes)
    est = estimate_width(cell, sig.x, 128, Stream(15))
    assert cell_contains(cell, est.witness, ball_tol=1e-9)
    assert abs(np.linalg.norm(est.witness - est.center) - est.value) < 1e-9
    relaxed = estimate_width(cell, sig.x, 128, Stream(15), r=3)
    assert code_discrepancy(cell, relaxed.witness) <= 3
    assert relaxed.value >= est.value


def test_width_rejects_outside_center():
    ens = gen_ensemble(8, 2, UNIT, 16)
    sig = sample_signal(SignalModel.unit_ball(2), Stream(17))
    cell = build_cell(ens, sense(ens, sig).codes)
    with pytest.raises(NotInCellError):
        estimate_width(cell, sig.x + 5.0, 16, Stream(18))


def test_support_restricted_cell():
    ens = gen_ensemble(48, 10, UNIT, 19)
    sig = sample_signal(SignalModel.sparse_ball(10, 2), Stream(20))
    obs = sense(ens, sig)
    cell = build_cell(ens, obs.codes, support=sig.support)
    assert cell_contains(cell, sig.x)
    off_support = np.zeros(10)
    off_support[[i for i in range(10) if i not in sig.support][0]] = 1e-6
    assert not cell_contains(cell, sig.x + off_support)
    est = estimate_width(cell, sig.x, 64, Stream(21))
    mask = np.ones(10, dtype=bool)
    mask[sig.support] = False
    assert np.all(est.witness[mask] == 0.0)


def test_empirical_worst_case_single_trial_reduces_to_estimate():
    ens = gen_ensemble(32, 4, UNIT, 22)
    model = SignalModel.unit_ball(4)
    result = empirical_worst_case(ens, model, 1, 32, master_seed=23)
    stream = substream(23, 0)
    sig = sample_signal(model, stream)
    cell = build_cell(ens, sense(ens, sig).codes)
    direct = estimate_width(cell, sig.x, 32, stream)
    assert result.max_width == direct.value
    assert result.widths.shape == (1,)


def test_empirical_worst_case_shrinks_well_inside_ball():
    ens = gen_ensemble(512, 8, UNIT, 24)
    result = empirical_worst_case(ens, SignalModel.unit_ball(8), 50, 64, master_seed=25)
    assert result.max_width == result.widths.max()
    assert result.max_width < 1.0


def test_median_width_shrinks_with_m():
    def median_width(m: int) -> float:
        ens_seed = 2600 + m
        widths = []
        for trial in range(12):
            ens = gen_ensemble(m, 4, UNIT, ens_seed + trial)
            stream = substream(2700 + m, trial)
            sig = sample_signal(SignalModel.unit_ball(4), stream)
            cell = build_cell(ens, sense(ens, sig).codes)
            widths.append(estimate_width(cell, sig.x, 64, stream).value)
        return float(np.median(widths))

    assert median_width(256) < median_width(32)
