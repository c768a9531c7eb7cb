"""Synthetic patch streams for experiments and tests.

Patches are noisy revisits of a pool of smooth random prototype patterns in
[0, 1]^400. Prototypes enter the pool on a front-loaded schedule and each is
visited the moment it is introduced, so all novelty is concentrated in the
first part of the stream and the tail consists purely of revisits.
"""

import math

import numpy as np

from .dataio import PATCH_SIDE


def _blur(a: np.ndarray) -> np.ndarray:
    p = np.pad(a, 1, mode="edge")
    return (
        p[:-2, :-2] + p[:-2, 1:-1] + p[:-2, 2:]
        + p[1:-1, :-2] + p[1:-1, 1:-1] + p[1:-1, 2:]
        + p[2:, :-2] + p[2:, 1:-1] + p[2:, 2:]
    ) / 9.0


def _smooth_field(rng, side: int, amplitude: float) -> np.ndarray:
    field = rng.normal(size=(side, side))
    for _ in range(3):
        field = _blur(field)
    field -= field.mean()
    peak = np.abs(field).max()
    if peak > 0:
        field /= peak
    return (0.5 + amplitude * field).ravel()


def mixture_patch_stream(
    count: int = 400,
    n_prototypes: int = 100,
    amplitude: float = 0.7,
    noise: float = 0.012,
    intro_frac: float = 0.4,
    side: int = PATCH_SIDE,
    seed: int = 0,
) -> list:
    """Generate ``count`` patch vectors from a growing prototype pool.

    A square-root schedule over the first ``intro_frac`` of the stream
    decides how many prototypes are available at sample k; whenever the
    schedule admits a new prototype it is emitted right away (at most one
    new prototype per sample), otherwise the sample revisits a uniformly
    drawn known prototype. Each emitted patch adds i.i.d. Gaussian pixel
    noise and clips to [0, 1].
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if n_prototypes < 1:
        raise ValueError("n_prototypes must be >= 1")
    if not 0.0 < intro_frac <= 1.0:
        raise ValueError("intro_frac must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    protos = [_smooth_field(rng, side, amplitude) for _ in range(n_prototypes)]
    horizon = max(1.0, intro_frac * count)
    dim = side * side
    patches = []
    introduced = 0
    for k in range(1, count + 1):
        avail = min(n_prototypes, max(1, math.ceil(n_prototypes * math.sqrt(k / horizon))))
        if avail > introduced:
            p = introduced  # first visit happens the moment a prototype enters the pool
            introduced += 1
        else:
            p = int(rng.integers(0, introduced))
        vec = protos[p] + rng.normal(0.0, noise, dim)
        patches.append(np.clip(vec, 0.0, 1.0))
    return patches
