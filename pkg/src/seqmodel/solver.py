"""Posterior-mode search over the realization-plan polytope.

Two pieces live here.  `project` computes the Euclidean projection onto
{y : Fy = f, y >= epsilon} with a primal active-set method: each working
set fixes some coordinates at the floor and the rest solve an
equality-constrained least-squares step via the normal equations on the
small constraint matrix.  `dykstra_project` is a deliberately different
route to the same point (alternating projections with Dykstra's
corrections) kept around as a cross-check, and `projection_kkt_residual`
certifies any claimed projection by recovering multipliers from scratch.

`estimate` runs projected gradient descent with Armijo backtracking on
the negative log posterior.  The floor keeps every iterate strictly
positive, so the objective and its gradient are always defined.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .posterior import DirichletPrior, ObservationLog, PackedTerms
from .sequence_form import SequenceFormGame, uniform_plan

_FEAS_TOL = 1e-9          # how exactly a start must sit on the affine set
_ACTIVE_TOL = 1e-9        # floor-contact classification for KKT recovery
_MAX_WORKING_SETS = 300
_AUTO = object()


def _floor_simplex(v: np.ndarray, epsilon: float) -> np.ndarray:
    """Project one coordinate block onto {w : sum w = 1, w >= epsilon}."""
    k = len(v)
    if k * epsilon > 1.0:
        raise ValueError(
            f"empty polytope: the floor {epsilon} cannot be met by any plan")
    budget = 1.0 - k * epsilon
    if budget <= 0.0:
        return np.full(k, epsilon)
    u = v - epsilon
    srt = np.sort(u)[::-1]
    over = np.cumsum(srt) - budget
    ranks = np.arange(1, k + 1)
    rho = np.flatnonzero(srt * ranks > over)[-1]
    theta = over[rho] / (rho + 1.0)
    return np.maximum(u - theta, 0.0) + epsilon


def _layout_rows(F: np.ndarray, f: np.ndarray) -> list[np.ndarray] | None:
    """Coordinate blocks when every decision point hangs off the root.

    In that shape the equality rows pin the root weight to 1 and give each
    block an independent unit budget, so the projection splits into
    closed-form per-block simplex projections.  Returns None otherwise.
    """
    if F[0, 0] != 1.0 or F[0, 1:].any() or f[0] != 1.0 or f[1:].any():
        return None
    if F.shape[0] < 2 or (F[1:, 0] != -1.0).any():
        return None
    body = F[1:, 1:]
    if ((body != 0.0) & (body != 1.0)).any():
        return None
    if (body.sum(axis=0) != 1.0).any():
        return None
    return [np.flatnonzero(F[r, 1:]) + 1 for r in range(1, F.shape[0])]


def _rows_of(F: np.ndarray) -> list[tuple[int, list[int]]]:
    """Read (parent, actions) off each balance row of the constraint matrix."""
    rows = []
    for r in range(1, F.shape[0]):
        parent = np.flatnonzero(F[r] < 0)
        actions = np.flatnonzero(F[r] > 0)
        if len(parent) != 1 or len(actions) == 0:
            raise ValueError(f"constraint row {r} is not a balance row")
        rows.append((int(parent[0]), [int(a) for a in actions]))
    return rows


def feasible_plan(F: np.ndarray, f: np.ndarray, epsilon: float) -> np.ndarray:
    """A strictly feasible plan, or an infeasibility error.

    Bottom-up pass: the least mass a sequence can carry is epsilon, or
    the largest demand among the decision points it feeds.  The polytope
    is nonempty exactly when the root's demand fits in the unit it has.
    The top-down pass then spreads each decision point's slack evenly.
    """
    F = np.asarray(F, dtype=float)
    f = np.asarray(f, dtype=float)
    d = F.shape[1]
    if not (f[0] == 1.0 and (f[1:] == 0).all()):
        raise ValueError("right-hand side must be the unit vector")
    rows = _rows_of(F)
    demands: dict[int, list[list[int]]] = {}
    for parent, actions in rows:
        demands.setdefault(parent, []).append(actions)

    mass = np.full(d, np.nan)

    def min_mass(s: int) -> float:
        if not np.isnan(mass[s]):
            return mass[s]
        need = epsilon
        for actions in demands.get(s, []):
            need = max(need, sum(min_mass(a) for a in actions))
        mass[s] = need
        return need

    if min_mass(0) > 1.0:
        raise ValueError(
            f"empty polytope: the floor {epsilon} cannot be met by any plan")

    y = np.zeros(d)
    y[0] = 1.0
    placed = np.zeros(d, dtype=bool)
    placed[0] = True
    pending = list(rows)
    while pending:
        rest = []
        for parent, actions in pending:
            if not placed[parent]:
                rest.append((parent, actions))
                continue
            slack = y[parent] - sum(mass[a] for a in actions)
            for a in actions:
                y[a] = mass[a] + slack / len(actions)
                placed[a] = True
        if len(rest) == len(pending):
            raise ValueError("constraint rows do not chain back to the root")
        pending = rest
    return y


def project(F: np.ndarray, f: np.ndarray, epsilon: float, z: np.ndarray,
            start: np.ndarray | None = None, layout=_AUTO) -> np.ndarray:
    """Euclidean projection of z onto {y : Fy = f, y >= epsilon}.

    When every decision point hangs off the root the problem separates
    and each block is projected in closed form.  Otherwise: primal
    active-set iteration from a feasible point.  Every trial working set
    solves min |y - z|^2 with the floored coordinates pinned, through
    the normal equations of the free columns; blocking coordinates join
    the working set, and a floored coordinate leaves it when its
    recovered multiplier turns negative.
    """
    F = np.asarray(F, dtype=float)
    f = np.asarray(f, dtype=float)
    z = np.asarray(z, dtype=float)
    d = F.shape[1]
    if z.shape != (d,):
        raise ValueError(f"point has shape {z.shape}, want ({d},)")

    if start is not None:
        start = np.array(start, dtype=float)
        if (np.abs(F @ start - f).max() > _FEAS_TOL
                or (start < epsilon - 1e-12).any()):
            raise ValueError("start point is not feasible")

    if layout is _AUTO:
        layout = _layout_rows(F, f)
    if layout is not None:
        out = np.empty(d)
        out[0] = 1.0
        for block in layout:
            out[block] = _floor_simplex(z[block], epsilon)
        return out

    if start is None:
        y = feasible_plan(F, f, epsilon)
    else:
        y = np.maximum(start, epsilon)

    active = y <= epsilon + 1e-12
    for _ in range(_MAX_WORKING_SETS):
        free = ~active
        FV = F[:, free]
        rhs_eq = f - F[:, active] @ np.full(int(active.sum()), epsilon)
        resid = rhs_eq - FV @ z[free]
        lam = np.linalg.lstsq(FV @ FV.T, resid, rcond=None)[0]
        target = np.full(d, epsilon)
        target[free] = z[free] + FV.T @ lam

        step = target - y
        if np.abs(step).max() <= 1e-12:
            # stationary for this working set; check the floor multipliers
            mu = y - z - F.T @ lam
            mu_active = np.where(active, mu, np.inf)
            worst = int(np.argmin(mu_active))
            if mu_active[worst] >= -1e-10:
                return y
            active[worst] = False
            continue

        scale = 1.0
        blocker = -1
        shrinking = free & (step < -1e-15)
        for i in np.flatnonzero(shrinking):
            limit = (epsilon - y[i]) / step[i]
            if limit < scale:
                scale = limit
                blocker = i
        y = y + scale * step
        if blocker >= 0:
            active[blocker] = True
            y[blocker] = epsilon

    res = projection_kkt_residual(F, f, epsilon, z, y)
    raise RuntimeError(
        f"projection did not settle in {_MAX_WORKING_SETS} working sets "
        f"(KKT residual {res:.3e})")


def projection_kkt_residual(F: np.ndarray, f: np.ndarray, epsilon: float,
                            z: np.ndarray, y: np.ndarray) -> float:
    """Certify a claimed projection by rebuilding its multipliers.

    Returns the largest violation across equality feasibility, the
    floor, stationarity on coordinates off the floor, sign of the floor
    multipliers, and complementary slackness.
    """
    F = np.asarray(F, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    free = y > epsilon + _ACTIVE_TOL
    lam = np.linalg.lstsq(F[:, free].T, (y - z)[free], rcond=None)[0]
    mu = y - z - F.T @ lam
    parts = [
        np.abs(F @ y - f).max(),
        max(0.0, (epsilon - y).max()),
        np.abs(mu[free]).max(initial=0.0),
        max(0.0, -(mu[~free].min(initial=0.0))),
        np.abs(mu[~free] * (y[~free] - epsilon)).max(initial=0.0),
    ]
    return float(max(parts))


def dykstra_project(F: np.ndarray, f: np.ndarray, epsilon: float,
                    z: np.ndarray, tol: float = 1e-11,
                    max_iter: int = 200_000) -> np.ndarray:
    """Same projection by alternating between the affine set and the
    shifted orthant with Dykstra's correction terms.  Slow and simple;
    exists so the active-set answer can be checked against an
    independent route.

    When a coordinate's optimum sits a hair above its floor (a parent
    whose children are all floored), a correction accumulated while the
    iterate was far away drains back at floor scale per step, which
    looks like a stall: steps at machine precision while the equality
    rows are still off.  Restarting the corrections from the current
    point clears the stale state and the method then converges in a few
    dozen steps, so that is what the stall branch does.
    """
    F = np.asarray(F, dtype=float)
    f = np.asarray(f, dtype=float)
    gram_inv = np.linalg.inv(F @ F.T)

    def onto_affine(v: np.ndarray) -> np.ndarray:
        return v - F.T @ (gram_inv @ (F @ v - f))

    x = np.asarray(z, dtype=float).copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    restarts = 0
    for _ in range(max_iter):
        w = onto_affine(x + p)
        p = x + p - w
        x_new = np.maximum(w + q, epsilon)
        q = w + q - x_new
        if np.abs(x_new - x).max() < tol:
            if np.abs(F @ x_new - f).max() < 1e-9:
                return x_new
            if restarts < 50:        # stalled short of the equality rows
                p[:] = 0.0
                q[:] = 0.0
                restarts += 1
        x = x_new
    raise RuntimeError("alternating projections did not converge")


@dataclass(frozen=True)
class PGDConfig:
    """Step-size and termination knobs for the projected gradient loop."""

    step_init: float = 1.0
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    step_floor: float = 1e-16
    tol: float = 1e-7
    max_iter: int = 1000
    weight_floor: float = 1e-6

    def __post_init__(self):
        if not (0.0 < self.armijo_c < 1.0):
            raise ValueError("armijo constant must lie in (0, 1)")
        if not (0.0 < self.backtrack < 1.0):
            raise ValueError("backtracking factor must lie in (0, 1)")
        if self.weight_floor <= 0 or self.tol <= 0:
            raise ValueError("floor and tolerance must be positive")


@dataclass
class SolverResult:
    """Outcome of one posterior-mode search."""

    estimate: np.ndarray
    objective: float
    iterations: int
    reason: str                      # converged | max-iterations | step-safeguard


def estimate(game: SequenceFormGame, prior: DirichletPrior,
             log: ObservationLog, warm_start: np.ndarray | None = None,
             config: PGDConfig = PGDConfig(),
             trace_path: str | Path | None = None) -> SolverResult:
    """Mode of the posterior over the modeled player's plans.

    Projected gradient descent: step along the negative gradient, project
    back, accept the step once the Armijo test against the projected
    candidate passes, halving the step until it does.  Stops on a small
    iterate change, the iteration cap, or the step safeguard.
    """
    player = prior.player
    F, f = game.constraints(player)
    eps = config.weight_floor
    if (prior.seq_alpha < 1.0).any():
        raise ValueError("every prior parameter must be at least 1 "
                         "(the objective is convex only then)")

    if warm_start is None:
        y = uniform_plan(game, player)
    else:
        y = np.array(warm_start, dtype=float)
        if (np.abs(F @ y - f).max() > 1e-8
                or (y < eps - 1e-10).any()):
            raise ValueError("warm start is not a feasible plan")
        y = np.maximum(y, eps)

    layout = _layout_rows(F, f)
    packed = PackedTerms(log)
    d = len(y)
    alpha_less_one = prior.seq_alpha - 1.0
    pidx = np.flatnonzero(alpha_less_one)
    pcoef = alpha_less_one[pidx]

    # iterates stay at or above the floor, so every log below is defined
    def objective(yv: np.ndarray) -> float:
        v = float(pcoef @ np.log(yv[pidx])) if len(pidx) else 0.0
        if len(packed.counts):
            v += float(packed.counts @ np.log(packed.sums(yv)))
        return -v

    def grad_at(yv: np.ndarray) -> np.ndarray:
        g = np.zeros(d)
        if len(pidx):
            g[pidx] = -pcoef / yv[pidx]
        if len(packed.counts):
            scale = (packed.counts / packed.sums(yv))[packed.spread] * packed.q
            g -= np.bincount(packed.idx, weights=scale, minlength=d)
        return g

    value = objective(y)
    trace: list[tuple[int, float, float]] = []
    reason = "max-iterations"
    used = 0
    for used in range(1, config.max_iter + 1):
        grad = grad_at(y)
        if np.abs(grad).max() < 1e-14:
            reason = "converged"
            used -= 1
            break
        eta = config.step_init
        moved = None
        while eta >= config.step_floor:
            if layout is not None:
                cand = project(F, f, eps, y - eta * grad, layout=layout)
            else:
                cand = project(F, f, eps, y - eta * grad, start=y, layout=None)
            cand_value = objective(cand)
            if cand_value <= value + config.armijo_c * (grad @ (cand - y)):
                moved = (cand, cand_value)
                break
            eta *= config.backtrack
        if moved is None:
            reason = "step-safeguard"
            break
        cand, cand_value = moved
        shift = float(np.linalg.norm(cand - y))
        trace.append((used, cand_value, eta))
        y, value = cand, cand_value
        if shift < config.tol:
            reason = "converged"
            break

    if trace_path is not None:
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "objective", "step"])
            writer.writerows(trace)
    return SolverResult(y, value, used, reason)
