"""Optimization and level-set exploration of the control landscape.

Riemannian gradient ascent/descent with Armijo backtracking, seeded
multi-start campaigns, classification of converged points against the
known critical sub-manifolds, transfer of points between level sets
along the normalized gradient flow, and a numerical connectivity witness
that traces a path inside a single level set.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .landscape import (
    CriticalManifoldId,
    DiagCoords,
    LandscapeParams,
    ManifoldTag,
    _objective_mat,
    _rgrad_mat,
    from_diag,
    saddle_values,
    to_diag,
)
from .stiefel import KrausPoint, _haar_frame, _polar, _project_mat, _qf

__all__ = [
    "FlowStallError",
    "OptimizerConfig",
    "Trajectory",
    "MultiStartReport",
    "LevelSetPath",
    "optimize",
    "multi_start",
    "rerun_start",
    "classify_critical",
    "level_transfer",
    "levelset_connect",
]

_LINE_SEARCH_MAX_SHRINKS = 60
_CHORD_LIMIT = 0.05
_SADDLE_GUARD = 1e-3
_STALL_GRAD = 1e-6


class FlowStallError(RuntimeError):
    """Gradient flow ran into a vanishing gradient before the target level."""

    def __init__(self, value_reached: float):
        super().__init__(
            f"gradient flow stalled near a critical level at J = {value_reached:.9f}"
        )
        self.value_reached = value_reached


@dataclass(frozen=True)
class OptimizerConfig:
    """Armijo backtracking settings for manifold gradient iteration."""

    direction: str = "maximize"
    max_iters: int = 5000
    grad_tol: float = 1e-8
    initial_step: float = 1.0
    armijo_shrink: float = 0.5
    armijo_slope: float = 1e-4
    retraction: str = "qr"

    def __post_init__(self):
        if self.direction not in ("maximize", "minimize"):
            raise ValueError("direction must be 'maximize' or 'minimize'")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not (self.grad_tol > 0 and self.initial_step > 0):
            raise ValueError("tolerances and steps must be positive")
        if not (0 < self.armijo_shrink < 1 and 0 < self.armijo_slope < 1):
            raise ValueError("Armijo parameters must lie in (0, 1)")
        if self.retraction not in ("qr", "polar"):
            raise ValueError("retraction must be 'qr' or 'polar'")


@dataclass(frozen=True)
class Trajectory:
    """One optimizer run: per-iterate records and the termination reason.

    ``iterates`` holds (point, objective, gradient norm) triples; the
    objective sequence is monotone in the run direction.  ``terminated``
    is "converged" or "max_iters"; a line-search failure sets ``stalled``
    and counts as max_iters.
    """

    iterates: tuple
    terminated: str
    stalled: bool = False

    def __post_init__(self):
        if self.terminated not in ("converged", "max_iters"):
            raise ValueError("terminated must be 'converged' or 'max_iters'")
        object.__setattr__(self, "iterates", tuple(self.iterates))

    @property
    def final_point(self) -> KrausPoint:
        return self.iterates[-1][0]

    @property
    def final_value(self) -> float:
        return self.iterates[-1][1]

    @property
    def final_grad_norm(self) -> float:
        return self.iterates[-1][2]


@dataclass(frozen=True)
class MultiStartReport:
    """Aggregate of a seeded multi-start campaign."""

    starts: int
    seed: int
    direction: str
    reached_global: int
    final_values: tuple
    worst_gap: float
    classified_saddle_hits: int
    best_index: int

    def __post_init__(self):
        if not 0 <= self.reached_global <= self.starts:
            raise ValueError("reached_global must lie in [0, starts]")
        if self.worst_gap < 0:
            raise ValueError("worst_gap must be non-negative")
        object.__setattr__(self, "final_values", tuple(self.final_values))


@dataclass(frozen=True)
class LevelSetPath:
    """Witness path inside one level set.

    ``status`` is "connected" when every waypoint is feasible, matches
    the level within 1e-6, and consecutive chordal steps stay below 0.05;
    otherwise "failed" with the reason in ``detail``.
    """

    mu: float
    waypoints: tuple
    max_value_deviation: float
    max_step_length: float
    status: str
    detail: str = ""

    def __post_init__(self):
        if self.status not in ("connected", "failed"):
            raise ValueError("status must be 'connected' or 'failed'")
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if self.status == "connected":
            if self.max_value_deviation > 1e-6:
                raise ValueError("connected path exceeds the level tolerance")
            if self.max_step_length > _CHORD_LIMIT:
                raise ValueError("connected path exceeds the chordal step limit")


def _retract(w: np.ndarray, step: np.ndarray, kind: str) -> np.ndarray:
    if kind == "qr":
        return _qf(w + step)
    return _polar(w + step)


def optimize(
    start: KrausPoint, params: LandscapeParams, cfg: OptimizerConfig = OptimizerConfig()
) -> Trajectory:
    """Armijo-backtracked gradient iteration from a feasible start.

    Accepts a step only when it improves the objective by the Armijo
    fraction of the predicted gain, so the value sequence is monotone.
    Terminates at ``grad_tol``, at ``max_iters``, or when the line search
    fails 60 times in a row (reported via ``stalled``).
    """
    sgn = 1.0 if cfg.direction == "maximize" else -1.0
    w = start.matrix
    value = float(_objective_mat(w, params))
    grad = _rgrad_mat(w, params)
    gnorm = float(np.linalg.norm(grad))
    iterates = [(start, value, gnorm)]
    terminated = "max_iters"
    stalled = False
    for _ in range(cfg.max_iters):
        if gnorm < cfg.grad_tol:
            terminated = "converged"
            break
        direction = sgn * grad
        t = cfg.initial_step
        accepted = False
        for _shrink in range(_LINE_SEARCH_MAX_SHRINKS + 1):
            w_new = _retract(w, t * direction, cfg.retraction)
            v_new = float(_objective_mat(w_new, params))
            if sgn * (v_new - value) >= cfg.armijo_slope * t * gnorm * gnorm:
                accepted = True
                break
            t *= cfg.armijo_shrink
        if not accepted:
            stalled = True
            break
        w = w_new
        value = v_new
        grad = _rgrad_mat(w, params)
        gnorm = float(np.linalg.norm(grad))
        iterates.append((KrausPoint.from_matrix(w), value, gnorm))
    if not stalled and gnorm < cfg.grad_tol:
        terminated = "converged"
    return Trajectory(iterates=tuple(iterates), terminated=terminated, stalled=stalled)


def _child_rng(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(index,))
    return np.random.default_rng(ss)


def rerun_start(
    params: LandscapeParams, seed: int, index: int, cfg: OptimizerConfig
) -> Trajectory:
    """Re-run one multi-start member deterministically."""
    start = KrausPoint.from_matrix(_haar_frame(8, 2, _child_rng(seed, index)))
    return optimize(start, params, cfg)


def _run_range(params, seed, lo, hi, cfg):
    out = []
    for i in range(lo, hi):
        start = KrausPoint.from_matrix(_haar_frame(8, 2, _child_rng(seed, i)))
        traj = optimize(start, params, cfg)
        out.append((traj.final_value, traj.final_point, traj.final_grad_norm))
    return out


def multi_start(
    params: LandscapeParams,
    n_starts: int,
    seed: int,
    cfg: OptimizerConfig = OptimizerConfig(),
    workers: int = 1,
    start: KrausPoint | None = None,
) -> MultiStartReport:
    """Seeded Haar multi-start campaign with deterministic aggregation.

    Start i uses the child generator spawned from (seed, i), so reports
    are identical for any worker count; workers > 1 distributes runs over
    processes and merges results in start order.  An explicit ``start``
    replaces the Haar draw and requires ``n_starts == 1``; it documents
    the behavior of runs launched exactly on a critical manifold.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    if start is not None and n_starts != 1:
        raise ValueError("an explicit start point requires n_starts == 1")
    target = 1.0 if cfg.direction == "maximize" else 0.0
    if start is not None:
        traj = optimize(start, params, cfg)
        finals = [(traj.final_value, traj.final_point, traj.final_grad_norm)]
    elif workers > 1:
        chunk = max(1, math.ceil(n_starts / (4 * workers)))
        bounds = [
            (lo, min(lo + chunk, n_starts)) for lo in range(0, n_starts, chunk)
        ]
        results = [None] * len(bounds)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [
                pool.submit(_run_range, params, seed, lo, hi, cfg)
                for lo, hi in bounds
            ]
            for slot, fut in enumerate(futs):
                results[slot] = fut.result()
        finals = [item for block in results for item in block]
    else:
        finals = _run_range(params, seed, 0, n_starts, cfg)

    saddle_tags = (
        ManifoldTag.SADDLE_MINUS,
        ManifoldTag.SADDLE_PLUS,
        ManifoldTag.MIXED_SADDLE,
    )
    values = tuple(v for v, _, _ in finals)
    gaps = [abs(target - v) for v in values]
    reached = sum(1 for g in gaps if g <= 1e-6)
    hits = 0
    for value, point, gnorm in finals:
        label = classify_critical(point, params)
        if isinstance(label, CriticalManifoldId) and label.tag in saddle_tags:
            hits += 1
    best = max(values) if cfg.direction == "maximize" else min(values)
    best_index = values.index(best)
    return MultiStartReport(
        starts=n_starts,
        seed=seed,
        direction=cfg.direction,
        reached_global=reached,
        final_values=values,
        worst_gap=max(gaps),
        classified_saddle_hits=hits,
        best_index=best_index,
    )


def classify_critical(p: KrausPoint, params: LandscapeParams):
    """Match a near-critical point to a critical sub-manifold by value.

    Returns the matching :class:`CriticalManifoldId`, or "non-critical"
    when the gradient norm exceeds 1e-6 or no predicted value lies within
    1e-6 of J(p), or "ambiguous" when two predicted values sit within
    2e-6 of each other around the match (possible only as |w| -> 0).
    """
    w = p.matrix
    gnorm = float(np.linalg.norm(_rgrad_mat(w, params)))
    if gnorm >= 1e-6:
        return "non-critical"
    value = float(_objective_mat(w, params))
    candidates: list[tuple[float, ManifoldTag]] = [
        (0.0, ManifoldTag.GLOBAL_MIN),
        (1.0, ManifoldTag.GLOBAL_MAX),
    ]
    case = params.case
    if case == 1:
        candidates.append((0.5, ManifoldTag.MIXED_SADDLE))
    elif case == 2:
        candidates.append((params.lambda_minus, ManifoldTag.SADDLE_MINUS))
        candidates.append((params.lambda_plus, ManifoldTag.SADDLE_PLUS))
    diffs = sorted((abs(value - v), v, tag) for v, tag in candidates)
    best_diff, best_val, best_tag = diffs[0]
    if best_diff > 1e-6:
        return "non-critical"
    near = [tag for v, tag in candidates if abs(v - best_val) <= 2e-6]
    if len(near) > 1:
        return "ambiguous"
    return CriticalManifoldId(best_tag)


def _flow_field(w: np.ndarray, params: LandscapeParams) -> tuple[np.ndarray, float]:
    grad = _rgrad_mat(w, params)
    gnorm2 = float(np.linalg.norm(grad)) ** 2
    return grad, gnorm2


def level_transfer(
    p: KrausPoint, params: LandscapeParams, target_mu: float
) -> KrausPoint:
    """Carry a point to another level along the normalized gradient flow.

    Integrates d/dt x = grad J / |grad J|^2, along which J advances one
    unit per unit t, with fourth-order Runge-Kutta stages (step 1e-3 in J
    units), a retraction after every stage, and a Newton corrector that
    pins J to the expected level after each step.  Raises
    :class:`FlowStallError` when the gradient vanishes en route.
    """
    if not 0.0 < target_mu < 1.0:
        raise ValueError("target level must lie strictly inside (0, 1)")
    w = p.matrix
    value = float(_objective_mat(w, params))
    if abs(target_mu - value) <= 1e-14:
        return p
    expected = value
    h_max = 1e-3
    while abs(target_mu - expected) > 1e-14:
        h = math.copysign(min(h_max, abs(target_mu - expected)), target_mu - expected)

        def field_at(frame: np.ndarray) -> np.ndarray:
            grad, gnorm2 = _flow_field(frame, params)
            if math.sqrt(gnorm2) < _STALL_GRAD:
                raise FlowStallError(float(_objective_mat(frame, params)))
            return grad / gnorm2

        k1 = field_at(w)
        k2 = field_at(_qf(w + 0.5 * h * k1))
        k3 = field_at(_qf(w + 0.5 * h * k2))
        k4 = field_at(_qf(w + h * k3))
        inc = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        w = _qf(w + h * _project_mat(w, inc))
        expected += h
        # Newton corrector along the gradient pins the level exactly.
        for _ in range(8):
            value = float(_objective_mat(w, params))
            err = expected - value
            if abs(err) <= 1e-12:
                break
            grad, gnorm2 = _flow_field(w, params)
            if math.sqrt(gnorm2) < _STALL_GRAD:
                raise FlowStallError(value)
            w = _qf(w + (err / gnorm2) * grad)
        value = float(_objective_mat(w, params))
        if abs(value - expected) > 1e-9:
            raise FlowStallError(value)
    return KrausPoint.from_matrix(w)


def _slerp_columns(a: np.ndarray, b: np.ndarray, tau: float) -> np.ndarray:
    """Column-wise great-circle interpolation of two frames, then polar."""
    cols = []
    for j in range(a.shape[1]):
        x = a[:, j]
        y = b[:, j]
        c = float(np.vdot(x, y).real)
        c = max(-1.0, min(1.0, c))
        theta = math.acos(c)
        if theta < 1e-9:
            col = (1.0 - tau) * x + tau * y
        else:
            s = math.sin(theta)
            col = (math.sin((1.0 - tau) * theta) / s) * x + (
                math.sin(tau * theta) / s
            ) * y
        cols.append(col)
    return np.column_stack(cols)


def _frame_interp(a: np.ndarray, b: np.ndarray, tau: float) -> np.ndarray:
    """On-manifold interpolant between two frames, robust to rank loss."""
    raw = _slerp_columns(a, b, tau)
    try:
        return _polar(raw)
    except RuntimeError:
        jitter = _haar_frame(a.shape[0], a.shape[1], np.random.default_rng(1234567))
        return _polar(raw + 1e-6 * jitter)


def _correct_to_level(
    w: np.ndarray, mu: float, params: LandscapeParams, node_key: int
):
    """Newton-correct a frame onto the level, perturbing away from stalls."""
    for attempt in range(9):
        frame = w
        ok = True
        for _ in range(60):
            value = float(_objective_mat(frame, params))
            if abs(value - mu) <= 1e-10:
                break
            grad, gnorm2 = _flow_field(frame, params)
            if math.sqrt(gnorm2) < _STALL_GRAD:
                ok = False
                break
            step = (mu - value) / gnorm2
            frame = _qf(frame + step * grad)
        else:
            ok = False
        if ok and abs(float(_objective_mat(frame, params)) - mu) <= 1e-10:
            return frame
        # Deterministic tangent kick away from the stall, then retry.
        ss = np.random.SeedSequence(entropy=0x5EED, spawn_key=(node_key, attempt))
        rng = np.random.default_rng(ss)
        noise = rng.standard_normal((8, 2)) + 1j * rng.standard_normal((8, 2))
        kick = _project_mat(w, noise)
        kick = kick / max(np.linalg.norm(kick), 1e-300) * 1e-2
        w = _qf(w + kick)
    return None


def _chord(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b))


def levelset_connect(
    a: KrausPoint, b: KrausPoint, params: LandscapeParams, mu: float
) -> LevelSetPath:
    """Trace a same-level path between two points as a connectivity witness.

    For interior levels: geodesic-style seeding at 64 nodes, per-node
    Newton correction back to the level, and adaptive bisection until
    consecutive chordal steps fall under 0.05.  Levels 0 and 1 are traced
    inside the extremal manifolds directly.  Levels within 1e-3 of a
    saddle value are refused.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError("level must lie in [0, 1]")
    if _chord(a.matrix, b.matrix) < 1e-12:
        dev = abs(float(_objective_mat(a.matrix, params)) - mu)
        if dev > 1e-8:
            raise ValueError(f"endpoint a is off the level by {dev:.3e}")
        return LevelSetPath(
            mu=mu,
            waypoints=(a,),
            max_value_deviation=dev,
            max_step_length=0.0,
            status="connected",
        )
    if mu >= 1.0 - 1e-9 or mu <= 1e-9:
        return _connect_extreme(a, b, params, mu)
    for sv in saddle_values(params):
        if abs(mu - sv) <= _SADDLE_GUARD:
            raise ValueError(
                f"level {mu:g} sits within {_SADDLE_GUARD:g} of the saddle value "
                f"{sv:g}; the tracer is undefined across saddle levels"
            )
    wa, wb = a.matrix, b.matrix
    for name, frame in (("a", wa), ("b", wb)):
        dev = abs(float(_objective_mat(frame, params)) - mu)
        if dev > 1e-8:
            raise ValueError(f"endpoint {name} is off the level by {dev:.3e}")

    n_seed = 64
    frames = []
    for i in range(n_seed):
        tau = i / (n_seed - 1)
        if i == 0:
            frames.append(wa)
            continue
        if i == n_seed - 1:
            frames.append(wb)
            continue
        node = _correct_to_level(_frame_interp(wa, wb, tau), mu, params, i)
        if node is None:
            return LevelSetPath(
                mu=mu,
                waypoints=(a, b),
                max_value_deviation=math.inf,
                max_step_length=math.inf,
                status="failed",
                detail=f"corrector stalled while seeding node {i}",
            )
        frames.append(node)

    key = n_seed
    for _round in range(16):
        gaps = [_chord(frames[i], frames[i + 1]) for i in range(len(frames) - 1)]
        if max(gaps) <= _CHORD_LIMIT * 0.95:
            break
        refined = [frames[0]]
        for i in range(len(frames) - 1):
            if gaps[i] > _CHORD_LIMIT * 0.95:
                mid = _frame_interp(frames[i], frames[i + 1], 0.5)
                node = _correct_to_level(mid, mu, params, key)
                key += 1
                if node is None:
                    return LevelSetPath(
                        mu=mu,
                        waypoints=(a, b),
                        max_value_deviation=math.inf,
                        max_step_length=math.inf,
                        status="failed",
                        detail=f"corrector stalled while bisecting segment {i}",
                    )
                refined.append(node)
            refined.append(frames[i + 1])
        frames = refined
        if len(frames) > 4096:
            return LevelSetPath(
                mu=mu,
                waypoints=(a, b),
                max_value_deviation=math.inf,
                max_step_length=math.inf,
                status="failed",
                detail="node budget exhausted before reaching the step limit",
            )
    gaps = [_chord(frames[i], frames[i + 1]) for i in range(len(frames) - 1)]
    devs = [abs(float(_objective_mat(f, params)) - mu) for f in frames]
    status = "connected"
    detail = ""
    if max(gaps) > _CHORD_LIMIT or max(devs) > 1e-6:
        status = "failed"
        detail = "refinement finished above the step or level tolerance"
        return LevelSetPath(
            mu=mu,
            waypoints=(a, b),
            max_value_deviation=max(devs),
            max_step_length=max(gaps),
            status=status,
            detail=detail,
        )
    waypoints = tuple(KrausPoint.from_matrix(f) for f in frames)
    return LevelSetPath(
        mu=mu,
        waypoints=waypoints,
        max_value_deviation=max(devs),
        max_step_length=max(gaps),
        status=status,
        detail=detail,
    )


def _connect_extreme(
    a: KrausPoint, b: KrausPoint, params: LandscapeParams, mu: float
) -> LevelSetPath:
    """Path inside an extremal level set, built in diagonal coordinates.

    The extremal sets are themselves manifolds (vanishing tilde blocks),
    so interior waypoints are constructed exactly on them and hit the
    level with no correction.
    """
    at_max = mu >= 0.5
    for name, point in (("a", a), ("b", b)):
        dev = abs(float(_objective_mat(point.matrix, params)) - mu)
        if dev > 1e-8:
            raise ValueError(f"endpoint {name} is off the level by {dev:.3e}")
    da, db = to_diag(a, params), to_diag(b, params)
    case3 = params.case == 3

    def diag_node(tau: float) -> DiagCoords:
        if at_max:
            live_a = np.column_stack([da.ut1, da.ut2])
            live_b = np.column_stack([db.ut1, db.ut2])
        else:
            live_a = np.column_stack([da.vt1, da.vt2])
            live_b = np.column_stack([db.vt1, db.vt2])
        if not case3:
            frame = _frame_interp(_polar(live_a), _polar(live_b), tau)
            zero = np.zeros(4, dtype=complex)
            if at_max:
                return DiagCoords(ut1=frame[:, 0], ut2=frame[:, 1], vt1=zero, vt2=zero)
            return DiagCoords(ut1=zero, ut2=zero, vt1=frame[:, 0], vt2=frame[:, 1])
        # Pure state: only the first tilde block vanishes on the extreme set.
        if at_max:
            lead_a, lead_b = da.ut1, db.ut1
            pair_a = np.concatenate([da.ut2, da.vt2])
            pair_b = np.concatenate([db.ut2, db.vt2])
        else:
            lead_a, lead_b = da.vt1, db.vt1
            pair_a = np.concatenate([da.ut2, da.vt2])
            pair_b = np.concatenate([db.ut2, db.vt2])
        lead = _slerp_columns(lead_a[:, None] / np.linalg.norm(lead_a),
                              lead_b[:, None] / np.linalg.norm(lead_b), tau)[:, 0]
        lead = lead / np.linalg.norm(lead)
        pair = _slerp_columns(pair_a[:, None] / np.linalg.norm(pair_a),
                              pair_b[:, None] / np.linalg.norm(pair_b), tau)[:, 0]
        u_part, v_part = pair[:4], pair[4:]
        zero = np.zeros(4, dtype=complex)
        if at_max:
            u_part = u_part - lead * np.vdot(lead, u_part)
        else:
            v_part = v_part - lead * np.vdot(lead, v_part)
        scale = math.sqrt(np.vdot(u_part, u_part).real + np.vdot(v_part, v_part).real)
        if scale < 1e-12:
            raise RuntimeError("degenerate interpolation between antipodal frames")
        if at_max:
            return DiagCoords(
                ut1=lead, ut2=u_part / scale, vt1=zero, vt2=v_part / scale
            )
        return DiagCoords(ut1=zero, ut2=u_part / scale, vt1=lead, vt2=v_part / scale)

    n_seed = 64
    frames = [a.matrix]
    for i in range(1, n_seed - 1):
        tau = i / (n_seed - 1)
        frames.append(from_diag(diag_node(tau), params).matrix)
    frames.append(b.matrix)

    for _round in range(16):
        gaps = [_chord(frames[i], frames[i + 1]) for i in range(len(frames) - 1)]
        if max(gaps) <= _CHORD_LIMIT * 0.95 or len(frames) > 4096:
            break
        # Reseed the whole path at double density; nodes are cheap here.
        n = 2 * (len(frames) - 1) + 1
        frames = [a.matrix]
        for i in range(1, n - 1):
            frames.append(from_diag(diag_node(i / (n - 1)), params).matrix)
        frames.append(b.matrix)

    gaps = [_chord(frames[i], frames[i + 1]) for i in range(len(frames) - 1)]
    devs = [abs(float(_objective_mat(f, params)) - mu) for f in frames]
    if max(gaps) > _CHORD_LIMIT or max(devs) > 1e-6:
        return LevelSetPath(
            mu=mu,
            waypoints=(a, b),
            max_value_deviation=max(devs),
            max_step_length=max(gaps),
            status="failed",
            detail="extreme-level interpolation exceeded tolerances",
        )
    return LevelSetPath(
        mu=mu,
        waypoints=tuple(KrausPoint.from_matrix(f) for f in frames),
        max_value_deviation=max(devs),
        max_step_length=max(gaps),
        status="connected",
        detail="",
    )
