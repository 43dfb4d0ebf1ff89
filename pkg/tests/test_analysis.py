"""Optimizer, multi-start, classification, level transfer, connectivity."""

import numpy as np
import pytest

from krauscape.analysis import (
    FlowStallError,
    LevelSetPath,
    MultiStartReport,
    OptimizerConfig,
    Trajectory,
    classify_critical,
    level_transfer,
    levelset_connect,
    multi_start,
    optimize,
    rerun_start,
)
from krauscape.analysis import _chord
from krauscape.landscape import (
    CriticalManifoldId,
    LandscapeParams,
    ManifoldTag,
    critical_point,
    duality_map,
    objective_uv,
)
from krauscape.stiefel import constraint_residuals, random_kraus_point

PARAMS05 = LandscapeParams(w=(0.0, 0.0, 0.5))


def feasibility(p):
    return max(abs(r) for r in constraint_residuals(p.u1, p.u2, p.v1, p.v2))


class TestOptimizerConfig:
    def test_defaults(self):
        cfg = OptimizerConfig()
        assert cfg.direction == "maximize"
        assert cfg.max_iters == 5000
        assert cfg.grad_tol == 1e-8
        assert cfg.initial_step == 1.0
        assert cfg.retraction == "qr"

    def test_rejects_bad_fields(self):
        with pytest.raises(ValueError):
            OptimizerConfig(direction="up")
        with pytest.raises(ValueError):
            OptimizerConfig(retraction="cayley")
        with pytest.raises(ValueError):
            OptimizerConfig(armijo_shrink=1.5)
        with pytest.raises(ValueError):
            OptimizerConfig(max_iters=0)


class TestOptimize:
    def test_critical_start_converges_immediately(self):
        p = critical_point(CriticalManifoldId(ManifoldTag.GLOBAL_MAX), PARAMS05, seed=1)
        traj = optimize(p, PARAMS05, OptimizerConfig(direction="maximize"))
        assert traj.terminated == "converged"
        assert len(traj.iterates) == 1
        assert traj.final_value == pytest.approx(1.0, abs=1e-12)

    def test_maximize_reaches_top(self):
        for seed in range(5):
            traj = optimize(random_kraus_point(seed=seed), PARAMS05)
            assert traj.terminated == "converged"
            assert traj.final_value > 1.0 - 1e-6
            assert feasibility(traj.final_point) < 1e-10

    def test_minimize_reaches_bottom(self):
        cfg = OptimizerConfig(direction="minimize")
        for seed in range(5):
            traj = optimize(random_kraus_point(seed=seed), PARAMS05, cfg)
            assert traj.terminated == "converged"
            assert traj.final_value < 1e-6

    def test_monotone_values(self):
        traj = optimize(random_kraus_point(seed=6), PARAMS05)
        vals = [v for _, v, _ in traj.iterates]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        traj_dn = optimize(
            random_kraus_point(seed=6), PARAMS05, OptimizerConfig(direction="minimize")
        )
        vals_dn = [v for _, v, _ in traj_dn.iterates]
        assert all(b <= a for a, b in zip(vals_dn, vals_dn[1:]))

    def test_polar_retraction(self):
        # Polar steps may pin the value at the top before the gradient
        # norm clears the tolerance; a stalled line search then counts
        # as max_iters, but the value contract still holds.
        cfg = OptimizerConfig(retraction="polar")
        for seed in range(5):
            traj = optimize(random_kraus_point(seed=seed), PARAMS05, cfg)
            assert traj.final_value > 1.0 - 1e-6
            if traj.stalled:
                assert traj.terminated == "max_iters"
            else:
                assert traj.terminated == "converged"

    def test_trajectory_validation(self):
        with pytest.raises(ValueError):
            Trajectory(iterates=(), terminated="done")


class TestMultiStart:
    def test_deterministic(self):
        r1 = multi_start(PARAMS05, n_starts=10, seed=42)
        r2 = multi_start(PARAMS05, n_starts=10, seed=42)
        assert r1.final_values == r2.final_values
        assert r1.best_index == r2.best_index
        assert r1.reached_global == 10
        assert r1.worst_gap < 1e-6

    def test_workers_agree(self):
        r1 = multi_start(PARAMS05, n_starts=12, seed=9, workers=1)
        r2 = multi_start(PARAMS05, n_starts=12, seed=9, workers=2)
        assert r1.final_values == r2.final_values
        assert r1.reached_global == r2.reached_global

    def test_rerun_matches_report(self):
        cfg = OptimizerConfig()
        report = multi_start(PARAMS05, n_starts=8, seed=11, cfg=cfg)
        traj = rerun_start(PARAMS05, 11, report.best_index, cfg)
        assert traj.final_value == report.final_values[report.best_index]

    def test_explicit_start_trapped_at_minimum(self):
        p = critical_point(CriticalManifoldId(ManifoldTag.GLOBAL_MIN), PARAMS05, seed=2)
        report = multi_start(PARAMS05, n_starts=1, seed=0, start=p)
        assert report.reached_global == 0
        assert report.final_values[0] == pytest.approx(0.0, abs=1e-12)
        assert report.worst_gap == pytest.approx(1.0, abs=1e-12)

    def test_explicit_start_needs_single_run(self):
        p = critical_point(CriticalManifoldId(ManifoldTag.GLOBAL_MIN), PARAMS05, seed=2)
        with pytest.raises(ValueError):
            multi_start(PARAMS05, n_starts=2, seed=0, start=p)

    def test_minimize_direction(self):
        cfg = OptimizerConfig(direction="minimize")
        report = multi_start(PARAMS05, n_starts=6, seed=3, cfg=cfg)
        assert report.reached_global == 6
        assert all(v < 1e-6 for v in report.final_values)

    def test_report_validation(self):
        with pytest.raises(ValueError):
            MultiStartReport(
                starts=2,
                seed=0,
                direction="maximize",
                reached_global=3,
                final_values=(1.0, 1.0),
                worst_gap=0.0,
                classified_saddle_hits=0,
                best_index=0,
            )


class TestClassify:
    def test_constructed_points(self):
        expected = {
            ManifoldTag.GLOBAL_MIN: PARAMS05,
            ManifoldTag.GLOBAL_MAX: PARAMS05,
            ManifoldTag.SADDLE_MINUS: PARAMS05,
            ManifoldTag.SADDLE_PLUS: PARAMS05,
            ManifoldTag.MIXED_SADDLE: LandscapeParams(w=(0.0, 0.0, 0.0)),
        }
        for tag, params in expected.items():
            p = critical_point(CriticalManifoldId(tag), params, seed=4)
            got = classify_critical(p, params)
            assert isinstance(got, CriticalManifoldId)
            assert got.tag == tag

    def test_generic_point_non_critical(self):
        assert classify_critical(random_kraus_point(seed=8), PARAMS05) == "non-critical"

    def test_near_degenerate_is_ambiguous(self):
        # As |w| -> 0 the two saddle values collapse onto 1/2 and the
        # classifier must refuse to pick one.
        params = LandscapeParams(w=(0.0, 0.0, 1e-7))
        p = critical_point(
            CriticalManifoldId(ManifoldTag.SADDLE_MINUS), params, seed=3
        )
        assert classify_critical(p, params) == "ambiguous"


class TestLevelTransfer:
    def test_already_on_level_returns_same_object(self):
        p = random_kraus_point(seed=21)
        mu = objective_uv(p, PARAMS05)
        assert level_transfer(p, PARAMS05, mu) is p

    def test_reaches_target(self):
        for seed in range(5):
            p = random_kraus_point(seed=seed)
            q = level_transfer(p, PARAMS05, 0.6)
            assert abs(objective_uv(q, PARAMS05) - 0.6) < 1e-10
            assert feasibility(q) < 1e-10

    def test_round_trip(self):
        p = random_kraus_point(seed=21)
        j0 = objective_uv(p, PARAMS05)
        q = level_transfer(p, PARAMS05, 0.6)
        back = level_transfer(q, PARAMS05, j0)
        assert abs(objective_uv(back, PARAMS05) - j0) < 1e-10
        assert _chord(back.matrix, p.matrix) < 1e-4

    def test_stalls_at_critical_start(self):
        s = critical_point(
            CriticalManifoldId(ManifoldTag.SADDLE_MINUS), PARAMS05, seed=5
        )
        with pytest.raises(FlowStallError) as err:
            level_transfer(s, PARAMS05, 0.6)
        assert err.value.value_reached == pytest.approx(0.25, abs=1e-10)

    def test_rejects_extremal_targets(self):
        p = random_kraus_point(seed=22)
        for bad in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(ValueError):
                level_transfer(p, PARAMS05, bad)


class TestLevelsetConnect:
    def test_coincident_endpoints(self):
        a = level_transfer(random_kraus_point(seed=31), PARAMS05, 0.4)
        path = levelset_connect(a, a, PARAMS05, 0.4)
        assert path.status == "connected"
        assert len(path.waypoints) == 1
        assert path.max_step_length == 0.0

    def test_interior_level(self):
        a = level_transfer(random_kraus_point(seed=31), PARAMS05, 0.4)
        b = level_transfer(random_kraus_point(seed=32), PARAMS05, 0.4)
        path = levelset_connect(a, b, PARAMS05, 0.4)
        assert path.status == "connected"
        assert path.max_value_deviation < 1e-6
        assert path.max_step_length < 0.05
        assert np.array_equal(path.waypoints[0].matrix, a.matrix)
        assert np.array_equal(path.waypoints[-1].matrix, b.matrix)
        for w in path.waypoints:
            assert feasibility(w) < 1e-10

    def test_top_level(self):
        a = critical_point(CriticalManifoldId(ManifoldTag.GLOBAL_MAX), PARAMS05, seed=1)
        b = critical_point(CriticalManifoldId(ManifoldTag.GLOBAL_MAX), PARAMS05, seed=2)
        path = levelset_connect(a, b, PARAMS05, 1.0)
        assert path.status == "connected"
        assert path.max_value_deviation < 1e-6

    def test_bottom_level(self):
        a = critical_point(CriticalManifoldId(ManifoldTag.GLOBAL_MIN), PARAMS05, seed=1)
        b = critical_point(CriticalManifoldId(ManifoldTag.GLOBAL_MIN), PARAMS05, seed=2)
        path = levelset_connect(a, b, PARAMS05, 0.0)
        assert path.status == "connected"

    def test_pure_state_interior(self):
        params = LandscapeParams(w=(0.0, 0.0, 1.0))
        a = level_transfer(random_kraus_point(seed=41), params, 0.5)
        b = level_transfer(random_kraus_point(seed=42), params, 0.5)
        path = levelset_connect(a, b, params, 0.5)
        assert path.status == "connected"
        assert path.max_step_length < 0.05

    def test_saddle_guard(self):
        a = level_transfer(random_kraus_point(seed=31), PARAMS05, 0.2504)
        b = level_transfer(random_kraus_point(seed=32), PARAMS05, 0.2504)
        with pytest.raises(ValueError, match="saddle"):
            levelset_connect(a, b, PARAMS05, 0.2504)

    def test_off_level_endpoint_rejected(self):
        a = level_transfer(random_kraus_point(seed=31), PARAMS05, 0.4)
        b = level_transfer(random_kraus_point(seed=32), PARAMS05, 0.4)
        with pytest.raises(ValueError, match="off the level"):
            levelset_connect(a, b, PARAMS05, 0.55)

    def test_duality_carries_paths(self):
        # Mapping a level-0.4 witness through the value-flip symmetry must
        # give a valid level-0.6 witness with identical step lengths.
        a = level_transfer(random_kraus_point(seed=31), PARAMS05, 0.4)
        b = level_transfer(random_kraus_point(seed=32), PARAMS05, 0.4)
        path = levelset_connect(a, b, PARAMS05, 0.4)
        assert path.status == "connected"
        mapped = [duality_map(w) for w in path.waypoints]
        for q in mapped:
            assert abs(objective_uv(q, PARAMS05) - 0.6) < 1e-6
        for i in range(len(mapped) - 1):
            orig = _chord(path.waypoints[i].matrix, path.waypoints[i + 1].matrix)
            new = _chord(mapped[i].matrix, mapped[i + 1].matrix)
            assert abs(orig - new) < 1e-12

    def test_path_validation(self):
        with pytest.raises(ValueError):
            LevelSetPath(
                mu=0.4,
                waypoints=(),
                max_value_deviation=1e-3,
                max_step_length=0.01,
                status="connected",
            )
        with pytest.raises(ValueError):
            LevelSetPath(
                mu=0.4,
                waypoints=(),
                max_value_deviation=0.0,
                max_step_length=0.2,
                status="connected",
            )
