"""Independent reference implementations used to cross-check the library."""

from collections import deque

import numpy as np

from bclab.plane import BoxRect
from bclab.region import CompactRegion


def flood_labels(free: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected labels of the True cells of ``free`` by breadth-first search."""
    ny, nx = free.shape
    labels = np.zeros((ny, nx), dtype=np.int64)
    count = 0
    for i0 in range(ny):
        for j0 in range(nx):
            if not free[i0, j0] or labels[i0, j0]:
                continue
            count += 1
            labels[i0, j0] = count
            queue = deque([(i0, j0)])
            while queue:
                i, j = queue.popleft()
                for a, b in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
                    if 0 <= a < ny and 0 <= b < nx and free[a, b] and not labels[a, b]:
                        labels[a, b] = count
                        queue.append((a, b))
    return labels, count


def flood_fill_mask(mask: np.ndarray) -> np.ndarray:
    """mask plus every complement cell not reachable from the border ring."""
    labels, _ = flood_labels(~mask)
    outside = labels[0, 0]
    return mask | (labels != outside)


def random_mask(rng: np.random.Generator, n: int = 40) -> np.ndarray:
    """Blobby mask built from rectangles and ring outlines, border ring clear."""
    m = np.zeros((n, n), dtype=bool)
    yy, xx = np.mgrid[0:n, 0:n]
    for _ in range(rng.integers(1, 6)):
        kind = rng.integers(0, 3)
        cy, cx = rng.integers(3, n - 3, 2)
        if kind == 0:
            h, w = rng.integers(1, 10, 2)
            m[max(1, cy - h):cy + h, max(1, cx - w):cx + w] = True
        elif kind == 1:
            r = rng.uniform(2, 10)
            d = np.hypot(yy - cy, xx - cx)
            m |= np.abs(d - r) < 0.8
        else:
            m |= rng.random((n, n)) < 0.08
    m[0] = m[-1] = False
    m[:, 0] = m[:, -1] = False
    return m


def mask_region(mask: np.ndarray, delta: float = 0.05) -> CompactRegion:
    ny, nx = mask.shape
    return CompactRegion(BoxRect(0.0, nx * delta, 0.0, ny * delta), delta, mask)


def brute_distance(p: complex, K: CompactRegion) -> float:
    if K.contains(p):
        return 0.0
    ny, nx = K.shape
    best = np.inf
    for i in range(ny):
        for j in range(nx):
            if K.mask[i, j]:
                c = complex(K.frame.x_lo + (j + 0.5) * K.delta, K.frame.y_lo + (i + 0.5) * K.delta)
                best = min(best, abs(p - c))
    return best


def dense_winding(g, loop: np.ndarray, samples: int = 1_000_000) -> float:
    """Winding number of g(z) - z along a closed polygon by dense angle summation (unrounded)."""
    seg = np.abs(np.diff(loop))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.linspace(0.0, cum[-1], samples + 1)
    z = np.interp(s, cum, loop.real) + 1j * np.interp(s, cum, loop.imag)
    v = g(z) - z
    return float(np.angle(v[1:] / v[:-1]).sum() / (2 * np.pi))


def circle_loop(center: complex, r: float, n: int = 512) -> np.ndarray:
    t = np.linspace(0.0, 2 * np.pi, n + 1)
    z = center + r * np.exp(1j * t)
    z[-1] = z[0]
    return z
