"""Synthetic sketch generators for tests.

Chairs are drawn front-on: a tall vertical back post, a horizontal seat,
and four short vertical legs. The back and the legs are both plain vertical
lines, so appearance alone cannot tell them apart once each stroke is
rescaled to its own bounding box; their position and extent on the page can.
"""
import numpy as np

from strokeseg.sketch import Sketch, Stroke


def _line(p0, p1, rng, step=2.0, wobble=0.5):
    """Polyline along a segment with light perpendicular hand wobble."""
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    length = float(np.linalg.norm(p1 - p0))
    n = max(int(length / step), 1)
    t = np.linspace(0.0, 1.0, n + 1)
    pts = p0 + t[:, None] * (p1 - p0)
    direction = (p1 - p0) / length
    normal = np.array([-direction[1], direction[0]])
    noise = rng.normal(0.0, wobble, size=n + 1)
    noise[0] = noise[-1] = 0.0
    return pts + noise[:, None] * normal


def make_chair(rng):
    """One labeled chair: back, seat, then four legs, in drawing order."""
    cx = rng.uniform(55.0, 75.0)
    top = rng.uniform(5.0, 15.0)
    seat_y = rng.uniform(95.0, 115.0)
    floor = seat_y + rng.uniform(75.0, 95.0)
    half = rng.uniform(42.0, 55.0)
    jit = lambda: rng.uniform(-3.0, 3.0)

    back = _line((cx + jit(), top + jit()), (cx + jit(), seat_y + jit()), rng)
    seat = _line((cx - half + jit(), seat_y + jit()),
                 (cx + half + jit(), seat_y + jit()), rng)
    strokes = [Stroke(points=back, label="back"),
               Stroke(points=seat, label="seat")]
    for fx in (-0.9, -0.35, 0.35, 0.9):
        x = cx + fx * half
        leg = _line((x + jit(), seat_y + jit()), (x + jit(), floor + jit()), rng)
        strokes.append(Stroke(points=leg, label="leg"))
    return Sketch(strokes=strokes, category="chair")


def make_flower(rng):
    """One labeled flower: stem, core ring, two petals, one leaf."""
    cx = rng.uniform(60.0, 80.0)
    core_y = rng.uniform(40.0, 55.0)
    r = rng.uniform(12.0, 16.0)
    base_y = core_y + rng.uniform(90.0, 110.0)

    stem = _line((cx, core_y + r), (cx + rng.uniform(-4, 4), base_y), rng)
    theta = np.linspace(0.0, 2.0 * np.pi, 24)
    ring = np.column_stack([cx + r * np.cos(theta), core_y + r * np.sin(theta)])
    strokes = [Stroke(points=stem, label="stem"),
               Stroke(points=ring, label="core")]
    for side in (-1.0, 1.0):
        arc = np.linspace(0.0, np.pi, 12)
        petal = np.column_stack([
            cx + side * (r + 6.0 + 10.0 * np.sin(arc)),
            core_y + 14.0 * np.cos(arc)])
        strokes.append(Stroke(points=petal, label="petals"))
    leaf = _line((cx, base_y - 40.0), (cx + 25.0, base_y - 55.0), rng)
    strokes.append(Stroke(points=leaf, label="leaves"))
    return Sketch(strokes=strokes, category="flower")


def chairs(n, rng, labeled=True):
    out = [make_chair(rng) for _ in range(n)]
    if not labeled:
        for sk in out:
            for s in sk.strokes:
                s.label = None
    return out


def toy_strokes(n=10):
    """Small-scale single-stroke sketches near the origin for quick VAE fits."""
    sketches = []
    for i in range(n):
        angle = 2.0 * np.pi * i / n
        steps = 3 + (i % 3)
        d = np.array([np.cos(angle), np.sin(angle)]) * (4.0 + (i % 4))
        start = np.array([2.0 + (i % 3), 2.0 + (i % 2)])
        pts = np.cumsum(np.vstack([start, np.tile(d, (steps, 1))]), axis=0)
        sketches.append(Sketch(strokes=[Stroke(points=pts)]))
    return sketches
