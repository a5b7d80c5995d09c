"""Deterministic 2D multi-object push environment with a scripted expert.

A circular agent pushes colored discs to color-matched goal positions
inside the unit square. Physics is positional projection: after the agent
moves, any object it overlaps is displaced along the contact normal by
exactly the penetration depth. No momentum, no integrator, bit-exact
determinism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import permutations

import numpy as np

from .numerics import SeededRng

PALETTE = ["#d64545", "#3fa34d", "#3566b8", "#e08a2e", "#8a4fb0", "#27a6a1"]
AGENT_COLOR = "#555555"


@dataclass(frozen=True)
class EnvParams:
    object_radius: float = 0.05
    agent_radius: float = 0.05
    action_limit: float = 0.045
    # success threshold slightly smaller than the object's effective radius
    success_threshold: float = 0.04
    placement_margin: float = 0.18
    agent_margin: float = 0.10
    min_separation: float = 0.17

    @property
    def contact_distance(self) -> float:
        return self.object_radius + self.agent_radius


@dataclass(frozen=True)
class PushObject:
    pos: tuple[float, float]
    color: int
    radius: float


@dataclass(frozen=True)
class SceneState:
    agent_pos: tuple[float, float]
    objects: tuple[PushObject, ...]
    agent_radius: float = 0.05


@dataclass(frozen=True)
class GoalSpec:
    positions: tuple[tuple[float, float], ...]
    colors: tuple[int, ...]
    threshold: float


@dataclass
class MetricsReport:
    success: int
    success_fraction: float
    max_obj_dist: float
    avg_obj_dist: float


def max_episode_steps(n_objects: int) -> int:
    return 60 * n_objects


def reset(n_objects: int, color_mode: str, rng: SeededRng,
          params: EnvParams = EnvParams()) -> tuple[SceneState, GoalSpec]:
    """Sample a non-overlapping scene: objects, agent, and goals.

    color_mode is 'fixed-distinct' (colors 0..n-1) or 'random-from-6'
    (independent palette draws, duplicates allowed).
    """
    if not 1 <= n_objects <= 6:
        raise ValueError(f"n_objects must be in [1, 6], got {n_objects}")
    if color_mode == "fixed-distinct":
        colors = list(range(n_objects))
    elif color_mode == "random-from-6":
        colors = [rng.integers(0, len(PALETTE)) for _ in range(n_objects)]
    else:
        raise ValueError(f"unknown color_mode {color_mode!r}")

    lo, hi = params.placement_margin, 1.0 - params.placement_margin
    alo, ahi = params.agent_margin, 1.0 - params.agent_margin
    placed: list[np.ndarray] = []

    def draw(low: float, high: float) -> np.ndarray:
        for _ in range(2000):
            p = np.array([low + rng.uniform() * (high - low),
                          low + rng.uniform() * (high - low)])
            if all(np.linalg.norm(p - q) >= params.min_separation for q in placed):
                placed.append(p)
                return p
        raise RuntimeError("could not place entities without overlap")

    object_pos = [draw(lo, hi) for _ in range(n_objects)]
    agent_pos = draw(alo, ahi)
    goal_pos = [draw(lo, hi) for _ in range(n_objects)]

    state = SceneState(
        agent_pos=tuple(agent_pos),
        objects=tuple(PushObject(tuple(p), c, params.object_radius)
                      for p, c in zip(object_pos, colors)),
        agent_radius=params.agent_radius,
    )
    goal = GoalSpec(positions=tuple(tuple(p) for p in goal_pos),
                    colors=tuple(colors), threshold=params.success_threshold)
    return state, goal


def step(state: SceneState, action: np.ndarray,
         params: EnvParams = EnvParams()) -> SceneState:
    """Move the agent by the clipped action and project overlapped objects.

    Projection order: agent-object first (displace by exactly the
    penetration depth along the contact normal), then a few symmetric
    object-object separation passes so discs never interpenetrate.
    """
    delta = np.clip(np.asarray(action, dtype=np.float64),
                    -params.action_limit, params.action_limit)
    agent = np.clip(np.asarray(state.agent_pos) + delta,
                    params.agent_radius, 1.0 - params.agent_radius)

    positions = []
    for obj in state.objects:
        pos = np.asarray(obj.pos, dtype=np.float64)
        contact = params.agent_radius + obj.radius
        offset = pos - agent
        dist = float(np.linalg.norm(offset))
        if dist < contact:
            normal = offset / dist if dist > 1e-12 else np.array([1.0, 0.0])
            pos = pos + normal * (contact - dist)
            pos = np.clip(pos, obj.radius, 1.0 - obj.radius)
        positions.append(pos)

    radii = [o.radius for o in state.objects]
    for _ in range(4):
        moved = False
        for i in range(len(positions)):
            for j in range(i + 1, len(positions)):
                gap = radii[i] + radii[j]
                offset = positions[j] - positions[i]
                dist = float(np.linalg.norm(offset))
                if dist < gap:
                    normal = offset / dist if dist > 1e-12 else np.array([1.0, 0.0])
                    half = 0.5 * (gap - dist)
                    positions[i] = np.clip(positions[i] - normal * half,
                                           radii[i], 1.0 - radii[i])
                    positions[j] = np.clip(positions[j] + normal * half,
                                           radii[j], 1.0 - radii[j])
                    moved = True
        if not moved:
            break

    objects = tuple(replace(obj, pos=tuple(pos))
                    for obj, pos in zip(state.objects, positions))
    return replace(state, agent_pos=tuple(agent), objects=objects)


def match_objects_to_goals(state: SceneState, goal: GoalSpec) -> list[int]:
    """Color-matched bijection object -> goal index.

    Duplicate colors pair by minimal total euclidean distance within the
    color group (brute force; groups are tiny).
    """
    n = len(state.objects)
    if n != len(goal.positions):
        raise ValueError("object/goal count mismatch")
    assignment = [-1] * n
    by_color_obj: dict[int, list[int]] = {}
    by_color_goal: dict[int, list[int]] = {}
    for i, obj in enumerate(state.objects):
        by_color_obj.setdefault(obj.color, []).append(i)
    for j, c in enumerate(goal.colors):
        by_color_goal.setdefault(c, []).append(j)
    if sorted(by_color_obj) != sorted(by_color_goal):
        raise ValueError("object and goal color sets differ")
    for color, obj_idx in by_color_obj.items():
        goal_idx = by_color_goal[color]
        if len(obj_idx) != len(goal_idx):
            raise ValueError(f"color {color}: {len(obj_idx)} objects vs {len(goal_idx)} goals")
        best, best_cost = None, math.inf
        for perm in permutations(goal_idx):
            cost = sum(
                np.linalg.norm(np.asarray(state.objects[i].pos) - np.asarray(goal.positions[j]))
                for i, j in zip(obj_idx, perm)
            )
            if cost < best_cost:
                best, best_cost = perm, cost
        for i, j in zip(obj_idx, best):
            assignment[i] = j
    return assignment


def object_goal_distances(state: SceneState, goal: GoalSpec) -> np.ndarray:
    assignment = match_objects_to_goals(state, goal)
    return np.array([
        np.linalg.norm(np.asarray(obj.pos) - np.asarray(goal.positions[assignment[i]]))
        for i, obj in enumerate(state.objects)
    ])


def evaluate(state: SceneState, goal: GoalSpec) -> MetricsReport:
    dists = object_goal_distances(state, goal)
    solved = dists <= goal.threshold
    return MetricsReport(
        success=int(solved.all()),
        success_fraction=float(solved.mean()),
        max_obj_dist=float(dists.max()),
        avg_obj_dist=float(dists.mean()),
    )


# -- scripted expert ----------------------------------------------------

_ORBIT_RADIUS = 0.13
_CLEARANCE = 0.115
_ALIGN_TOL = 0.12  # radians


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _scale_to_limit(delta: np.ndarray, limit: float) -> np.ndarray:
    m = np.abs(delta).max()
    if m > limit:
        delta = delta * (limit / m)
    return delta


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    ab2 = float(ab @ ab)
    t = 0.0 if ab2 < 1e-16 else float(np.clip((p - a) @ ab / ab2, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def _segment_blocked(a: np.ndarray, b: np.ndarray, centers: list[np.ndarray],
                     clearance: float) -> int | None:
    """Index of the first circle whose center comes within clearance of [a, b]."""
    ab = b - a
    ab2 = float(ab @ ab)
    best, best_t = None, math.inf
    for k, c in enumerate(centers):
        if ab2 < 1e-16:
            t = 0.0
        else:
            t = float(np.clip((c - a) @ ab / ab2, 0.0, 1.0))
        closest = a + t * ab
        if np.linalg.norm(c - closest) < clearance and t < best_t:
            best, best_t = k, t
    return best


def _arc_is_free(phi: float, diff: float, center: np.ndarray,
                 obstacles: list[np.ndarray], params: EnvParams) -> bool:
    """Whether the arc from phi through phi+diff keeps clear of obstacles.

    The last stretch before the exit is exempt: the terminal push position
    was already validated, and a graze on final approach only nudges a
    neighbor within its success margin.
    """
    lo, hi = params.agent_radius, 1.0 - params.agent_radius
    clearance = params.contact_distance + 0.004
    n = max(2, int(abs(diff) / 0.1) + 1)
    for k in range(1, n + 1):
        ang = phi + diff * k / n
        if abs(diff) * (1.0 - k / n) < 0.35:
            break
        waypoint = np.clip(center + _ORBIT_RADIUS * np.array([math.cos(ang), math.sin(ang)]),
                           lo, hi)
        for c in obstacles:
            if np.linalg.norm(waypoint - c) < clearance:
                return False
    return True


def _orbit_step(agent: np.ndarray, center: np.ndarray, exit_angle: float,
                params: EnvParams, obstacles: list[np.ndarray]) -> np.ndarray:
    """Tangential step around a circle toward the given exit angle.

    Direction is chosen by whole-arc obstacle scan (shorter arc preferred,
    the other taken when the short one is blocked), which keeps the choice
    stable from step to step as the agent advances along the free arc.
    """
    lo, hi = params.agent_radius, 1.0 - params.agent_radius
    rel = agent - center
    phi = math.atan2(rel[1], rel[0])
    diff = _wrap_angle(exit_angle - phi)
    short = diff if diff != 0.0 else 1e-9
    long = short - math.copysign(2.0 * math.pi, short)
    arc = short
    if not _arc_is_free(phi, short, center, obstacles, params) and \
            _arc_is_free(phi, long, center, obstacles, params):
        arc = long
    sign = math.copysign(1.0, arc)
    phi_next = phi + sign * min(0.30, abs(arc))
    waypoint = np.clip(center + _ORBIT_RADIUS * np.array([math.cos(phi_next), math.sin(phi_next)]),
                       lo, hi)
    return _scale_to_limit(waypoint - agent, params.action_limit)


def _feasible_push_dir(obj: np.ndarray, desired: np.ndarray, contact: float,
                       params: EnvParams, obstacles: list[np.ndarray]) -> np.ndarray:
    """Best achievable push direction whose contact point the agent can reach.

    The contact point must lie inside the agent's reachable box (objects
    shoved into the wall margin otherwise deadlock) and clear of other
    discs (the agent cannot wedge between touching objects without shoving
    the neighbor). Falls back to box-only, then to the desired direction.
    """
    lo, hi = params.agent_radius, 1.0 - params.agent_radius
    clearance = params.contact_distance + 0.004

    def in_box(p):
        return lo <= p[0] <= hi and lo <= p[1] <= hi

    def clear(p):
        return all(np.linalg.norm(p - c) >= clearance for c in obstacles)

    point = obj - contact * desired
    if in_box(point) and clear(point):
        return desired
    best_dir, best_dot = None, -2.0
    box_dir, box_dot = None, -2.0
    for k in range(72):
        ang = 2.0 * math.pi * k / 72
        cand = np.array([math.cos(ang), math.sin(ang)])
        p = obj - contact * cand
        if not in_box(p):
            continue
        d = float(cand @ desired)
        if d > box_dot:
            box_dir, box_dot = cand, d
        if clear(p) and d > best_dot:
            best_dir, best_dot = cand, d
    if best_dir is not None:
        return best_dir
    if box_dir is not None:
        return box_dir
    return desired


def _pushing_contact(agent: np.ndarray, obj: PushObject, goal: GoalSpec,
                     goal_idx: int, params: EnvParams) -> bool:
    """Agent is touching the object from behind relative to its goal."""
    pos = np.asarray(obj.pos)
    rel = agent - pos
    dist = float(np.linalg.norm(rel))
    if dist > params.agent_radius + obj.radius + 0.012:
        return False
    to_goal = np.asarray(goal.positions[goal_idx]) - pos
    norm = float(np.linalg.norm(to_goal))
    if norm < 1e-9:
        return False
    return float((-rel / max(dist, 1e-12)) @ (to_goal / norm)) > 0.95


def expert_action(state: SceneState, goal: GoalSpec,
                  params: EnvParams = EnvParams(),
                  visit_order: list[int] | None = None) -> np.ndarray:
    """Deterministic push policy: get behind the target object, push to goal.

    visit_order overrides the default nearest-unsolved selection and is how
    demonstration multimodality is injected (a random order per episode).
    Disturbed or skipped objects fall back to nearest-unsolved once the
    order is exhausted.
    """
    agent = np.asarray(state.agent_pos)
    assignment = match_objects_to_goals(state, goal)
    dists = object_goal_distances(state, goal)
    # target selection uses the same cutoff as evaluate(): an object inside
    # the success threshold is left alone, each push aims at the goal center
    solved = dists <= goal.threshold

    # finish-the-push hysteresis: an object just inside the threshold that
    # the agent is actively pushing keeps priority until well-centered, so
    # later grazes cannot knock it back out
    target = None
    for i, obj_i in enumerate(state.objects):
        if solved[i] and dists[i] > 0.35 * goal.threshold and \
                _pushing_contact(agent, obj_i, goal, assignment[i], params):
            target = i
            break
    if target is None and solved.all():
        return np.zeros(2)

    if target is None and visit_order is not None:
        for i in visit_order:
            if not solved[i]:
                target = i
                break
    if target is None:
        unsolved = [i for i in range(len(state.objects)) if not solved[i]]
        target = min(unsolved,
                     key=lambda i: (np.linalg.norm(np.asarray(state.objects[i].pos) - agent), i))

    obj = np.asarray(state.objects[target].pos)
    goal_pos = np.asarray(goal.positions[assignment[target]])
    centers = [np.asarray(o.pos) for o in state.objects]

    # route the pushed object itself around other discs: a straight push
    # through a neighbor (often one already parked on its goal) would shove
    # it away and trigger an endless repair cycle
    path_goal = goal_pos
    r_t = state.objects[target].radius
    other_idx = [i for i in range(len(centers)) if i != target]
    blocked_obj = _segment_blocked(obj, goal_pos, [centers[i] for i in other_idx],
                                   r_t + params.object_radius + 0.012)
    if blocked_obj is not None:
        b_idx = other_idx[blocked_obj]
        b = centers[b_idx]
        axis = (goal_pos - obj) / max(float(np.linalg.norm(goal_pos - obj)), 1e-12)
        perp = np.array([-axis[1], axis[0]])
        candidates = [np.clip(b + side * (r_t + params.object_radius + 0.035) * perp,
                              r_t + 0.01, 1.0 - r_t - 0.01)
                      for side in (1.0, -1.0)]
        rest = [centers[i] for i in range(len(centers)) if i not in (target, b_idx)]

        def detour_cost(w):
            length = float(np.linalg.norm(w - obj) + np.linalg.norm(goal_pos - w))
            rammed = any(np.linalg.norm(w - c) < 2.0 * params.object_radius + 0.012
                         for c in rest)
            return (rammed, length, float(w[0]))

        path_goal = min(candidates, key=detour_cost)

    remaining = float(np.linalg.norm(path_goal - obj))
    desired_dir = (path_goal - obj) / max(remaining, 1e-12)
    contact = params.agent_radius + state.objects[target].radius
    other_centers = [centers[i] for i in other_idx]
    push_dir = _feasible_push_dir(obj, desired_dir, contact, params, other_centers)
    push_point = obj - contact * push_dir

    rel = agent - obj
    agent_dist = float(np.linalg.norm(rel))
    behind_angle = math.atan2(-push_dir[1], -push_dir[0])
    agent_angle = math.atan2(rel[1], rel[0])
    aligned = abs(_wrap_angle(agent_angle - behind_angle)) < _ALIGN_TOL

    if aligned and agent_dist <= _ORBIT_RADIUS + 0.005:
        # penetrate by the distance the object still has to travel
        advance = min(params.action_limit * 0.9, remaining)
        desired = obj - (contact - advance) * push_dir
        return _scale_to_limit(desired - agent, params.action_limit)

    others = [c for i, c in enumerate(centers) if i != target]
    if agent_dist <= 0.16:
        # straight to the contact point when the short hop is clean;
        # otherwise orbit the target to get behind it
        seg_target_dist = _point_segment_distance(obj, agent, push_point)
        if seg_target_dist >= contact - 0.005 and \
                _segment_blocked(agent, push_point, others, params.contact_distance + 0.004) is None:
            return _scale_to_limit(push_point - agent, params.action_limit)
        return _orbit_step(agent, obj, behind_angle, params, others)

    blocked = _segment_blocked(agent, push_point, centers, _CLEARANCE)
    if blocked is not None:
        block_center = centers[blocked]
        exit_angle = math.atan2(*(push_point - block_center)[::-1])
        obstacles = [c for i, c in enumerate(centers) if i not in (blocked, target)]
        return _orbit_step(agent, block_center, exit_angle, params, obstacles)
    return _scale_to_limit(push_point - agent, params.action_limit)


def run_expert_episode(n_objects: int, color_mode: str, seed: int,
                       params: EnvParams = EnvParams(),
                       randomize_order: bool = False,
                       max_steps: int | None = None):
    """Roll the expert to success; returns (states, actions, goal, report).

    states has len(actions) + 1 entries. Raises RuntimeError if the expert
    fails to solve the scene, which callers treat as a hard error.
    """
    rng = SeededRng(seed)
    state, goal = reset(n_objects, color_mode, rng, params)
    order = list(rng.permutation(n_objects)) if randomize_order else None
    limit = max_steps if max_steps is not None else max_episode_steps(n_objects)

    states = [state]
    actions: list[np.ndarray] = []
    for _ in range(limit):
        if evaluate(state, goal).success:
            break
        a = expert_action(state, goal, params, visit_order=order)
        state = step(state, a, params)
        states.append(state)
        actions.append(a)
    report = evaluate(state, goal)
    if not report.success:
        raise RuntimeError(f"expert failed on seed {seed} with {n_objects} objects")
    return states, actions, goal, report


# -- schematic rendering -------------------------------------------------


def render_scene_svg(state: SceneState | None, goal: GoalSpec | None = None,
                     extra_discs: list[tuple[float, float, float, str]] | None = None,
                     size: int = 360) -> str:
    """SVG schematic: objects as filled discs, goals as rings, agent as a dot."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 1 1">',
        '<rect x="0" y="0" width="1" height="1" fill="#f7f5ef" stroke="#999" stroke-width="0.004"/>',
    ]
    if goal is not None:
        for pos, color in zip(goal.positions, goal.colors):
            parts.append(
                f'<circle cx="{pos[0]:.5f}" cy="{pos[1]:.5f}" r="0.05" fill="none" '
                f'stroke="{PALETTE[color % len(PALETTE)]}" stroke-width="0.012" stroke-dasharray="0.02,0.012"/>'
            )
    if state is not None:
        for obj in state.objects:
            parts.append(
                f'<circle cx="{obj.pos[0]:.5f}" cy="{obj.pos[1]:.5f}" r="{obj.radius:.5f}" '
                f'fill="{PALETTE[obj.color % len(PALETTE)]}" stroke="#333" stroke-width="0.004"/>'
            )
        parts.append(
            f'<circle cx="{state.agent_pos[0]:.5f}" cy="{state.agent_pos[1]:.5f}" '
            f'r="{state.agent_radius:.5f}" fill="{AGENT_COLOR}"/>'
        )
    for x, y, r, color in extra_discs or []:
        parts.append(f'<circle cx="{x:.5f}" cy="{y:.5f}" r="{r:.5f}" fill="{color}" fill-opacity="0.55"/>')
    parts.append("</svg>")
    return "\n".join(parts)
