"""Particle-based scene representation and set utilities.

Every entity (object or agent) in a scene becomes one fixed-width particle
vector. The canonical layout, bit-exact order, is:

    [z_p.x, z_p.y, z_s.x, z_s.y, z_d, z_trans, z_f[0..N_FEATURES)]

z_p is the 2-d position in the view's frame, z_s the entity radius in both
dims, z_d a depth scalar (always 0 here), z_trans a transparency flag (1 for
real entities, 0 for pad slots), and z_f a one-hot feature block: palette
colors occupy slots 0..5, slot 6 is reserved for the agent, slot 7 is zero
padding. Particle sets carry no ordering semantics; encoding shuffles slots
independently per call so no index correspondence survives across timesteps
or views.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import SeededRng

N_COLORS = 6
AGENT_FEATURE_SLOT = 6
N_FEATURES = 8
PARTICLE_DIM = 6 + N_FEATURES
ACTION_DIM = 2

# provenance labels for analysis; not part of the particle vector
LABEL_AGENT = -1
LABEL_PAD = -2


@dataclass(frozen=True)
class ViewTransform:
    """Affine frame: p -> rotation @ p + offset."""

    rotation: tuple[tuple[float, float], tuple[float, float]]
    offset: tuple[float, float]

    def apply(self, points: np.ndarray) -> np.ndarray:
        rot = np.asarray(self.rotation)
        return points @ rot.T + np.asarray(self.offset)


def make_views(n_views: int) -> list[ViewTransform]:
    """Fixed camera frames: identity, then a 90-degree rotation plus offset.

    The rotated frame maps the unit square onto itself before the offset, so
    positions stay near [0, 1] in every view.
    """
    views = [ViewTransform(((1.0, 0.0), (0.0, 1.0)), (0.0, 0.0))]
    if n_views >= 2:
        # (x, y) -> (y + 0.02, 1.01 - x)
        views.append(ViewTransform(((0.0, 1.0), (-1.0, 0.0)), (0.02, 1.01)))
    for k in range(2, n_views):
        # (x, y) -> (1 - y, x) plus a per-view nudge
        views.append(ViewTransform(((0.0, -1.0), (1.0, 0.0)), (1.0 + 0.01 * k, 0.01 * k)))
    return views[:n_views]


def encode_ground_truth(scene, view: ViewTransform, rng: SeededRng,
                        m_slots: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Encode a scene as M particles plus provenance labels.

    Returns (particles (M, PARTICLE_DIM), labels (M,)) where labels hold the
    object index, LABEL_AGENT, or LABEL_PAD. Slot order is freshly shuffled
    by ``rng`` on every call.
    """
    n_entities = len(scene.objects) + 1
    if n_entities > m_slots:
        raise ValueError(f"{n_entities} entities exceed {m_slots} particle slots")

    particles = np.zeros((m_slots, PARTICLE_DIM))
    labels = np.full(m_slots, LABEL_PAD, dtype=np.int8)
    for i, obj in enumerate(scene.objects):
        particles[i, 0:2] = view.apply(np.asarray(obj.pos))
        particles[i, 2:4] = obj.radius
        particles[i, 5] = 1.0
        particles[i, 6 + obj.color] = 1.0
        labels[i] = i
    k = len(scene.objects)
    particles[k, 0:2] = view.apply(np.asarray(scene.agent_pos))
    particles[k, 2:4] = scene.agent_radius
    particles[k, 5] = 1.0
    particles[k, 6 + AGENT_FEATURE_SLOT] = 1.0
    labels[k] = LABEL_AGENT

    perm = rng.permutation(m_slots)
    return particles[perm], labels[perm]


def canonical_sort(particles: np.ndarray) -> np.ndarray:
    """Deterministic ordering of a particle set (lexicographic by vector)."""
    order = np.lexsort(particles.T[::-1])
    return particles[order]


@dataclass
class NormalizationStats:
    """Per-dimension min/max for mapping features onto [-1, 1]."""

    particle_min: np.ndarray
    particle_max: np.ndarray
    action_min: np.ndarray
    action_max: np.ndarray

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {
            "particle_min": self.particle_min,
            "particle_max": self.particle_max,
            "action_min": self.action_min,
            "action_max": self.action_max,
        }

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> "NormalizationStats":
        return cls(particle_min=np.asarray(arrays["particle_min"]),
                   particle_max=np.asarray(arrays["particle_max"]),
                   action_min=np.asarray(arrays["action_min"]),
                   action_max=np.asarray(arrays["action_max"]))


def fit_normalization(particles: np.ndarray, actions: np.ndarray) -> NormalizationStats:
    """Fit per-dimension ranges over a training dataset.

    ``particles`` is any (..., PARTICLE_DIM) stack, ``actions`` any
    (..., ACTION_DIM) stack.
    """
    particles = particles.reshape(-1, particles.shape[-1])
    actions = actions.reshape(-1, actions.shape[-1])
    if particles.size == 0 or actions.size == 0:
        raise ValueError("cannot fit normalization on an empty dataset")
    return NormalizationStats(
        particle_min=particles.min(axis=0),
        particle_max=particles.max(axis=0),
        action_min=actions.min(axis=0),
        action_max=actions.max(axis=0),
    )


def _normalize(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    out = 2.0 * (x - lo) / safe - 1.0
    out = np.where(span > 0, out, 0.0)  # degenerate dims pin to 0
    return np.clip(out, -1.0, 1.0)


def _denormalize(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi - lo
    out = (x + 1.0) * 0.5 * span + lo
    return np.where(span > 0, out, lo)


def normalize_particles(x: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    return _normalize(x, stats.particle_min, stats.particle_max)


def denormalize_particles(x: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    return _denormalize(x, stats.particle_min, stats.particle_max)


def normalize_actions(x: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    return _normalize(x, stats.action_min, stats.action_max)


def denormalize_actions(x: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    return _denormalize(x, stats.action_min, stats.action_max)


def chamfer_l1(set_a: np.ndarray, set_b: np.ndarray) -> float:
    """Symmetric sum of nearest-neighbor l1 distances between two sets.

    Ties in the nearest-neighbor search resolve to the lowest index, which
    cannot change the value.
    """
    set_a = np.asarray(set_a, dtype=np.float64)
    set_b = np.asarray(set_b, dtype=np.float64)
    if set_a.ndim != 2 or set_b.ndim != 2:
        raise ValueError("chamfer_l1 expects 2-d arrays (n_points, dim)")
    if set_a.shape[0] == 0 or set_b.shape[0] == 0:
        raise ValueError("chamfer_l1 on an empty set")
    if set_a.shape[1] != set_b.shape[1]:
        raise ValueError(f"dimension mismatch: {set_a.shape[1]} vs {set_b.shape[1]}")
    dists = np.abs(set_a[:, None, :] - set_b[None, :, :]).sum(axis=-1)
    return float(dists.min(axis=1).sum() + dists.min(axis=0).sum())
