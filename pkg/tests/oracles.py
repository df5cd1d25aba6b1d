"""Brute-force reference implementations used as test oracles.

Written independently of the package: complex arithmetic for rotations,
exhaustive nearest-neighbour search, and plain loops throughout.
"""

import cmath
import math


def local_motion(p_prev, p_cur, p_next):
    """(dx, dy) of p_cur->p_next in the frame whose x axis is p_prev->p_cur."""
    a = complex(*p_cur) - complex(*p_prev)
    b = complex(*p_next) - complex(*p_cur)
    z = b * cmath.exp(-1j * cmath.phase(a))
    return z.real, z.imag


def pair_chain(xy, lo, hi):
    """Greedy pairing: next frame whose distance from the anchor lands in [lo, hi]."""
    pairs = []
    anchor, j = 0, 1
    while j < len(xy):
        d = abs(complex(*xy[j]) - complex(*xy[anchor]))
        if d < lo:
            j += 1
            continue
        if d <= hi:
            pairs.append((anchor, j))
        anchor = j
        j += 1
    return pairs


def nearest(points, q):
    best, best_i = math.inf, -1
    for i, p in enumerate(points):
        d = math.hypot(p[0] - q[0], p[1] - q[1])
        if d < best:
            best, best_i = d, i
    return best_i, best


def lateral_offset(pose, target):
    """Left-positive lateral offset of target seen from pose (x, y, heading)."""
    x, y, h = pose
    return -math.sin(h) * (target[0] - x) + math.cos(h) * (target[1] - y)


def select_reference(runs, tie_tol=0.01):
    """runs: {id: [(x, y, heading), ...]}; O(N^2) brute-force centermost run."""
    scores = {}
    for a, pa in runs.items():
        total = 0.0
        for b, pb in runs.items():
            if a == b:
                continue
            pts = [(p[0], p[1]) for p in pb]
            offs = [abs(lateral_offset(p, pts[nearest(pts, p)[0]])) for p in pa]
            total += sum(offs) / len(offs)
        scores[a] = total
    best = min(scores.values())
    return min(k for k, v in scores.items() if v <= best * (1 + tie_tol) + 1e-9)


def relabel(run, ref, same, dx, tol=0.1, window=(0.5, 1.5)):
    """[(frame, dx, dy)] for one run against the reference run."""
    lo, hi = dx * (1 - tol), dx * (1 + tol)
    xy = [(p[0], p[1]) for p in run]
    rxy = [(p[0], p[1]) for p in ref]
    pairs = pair_chain(xy, lo, hi)
    out = []
    for k in range(1, len(pairs)):
        if pairs[k - 1][1] != pairs[k][0]:
            continue
        prev, f = pairs[k - 1][0], pairs[k][0]
        foot = f if same else nearest(rxy, xy[f])[0]
        target = None
        for j in range(foot + 1, len(rxy)):
            d = abs(complex(*rxy[j]) - complex(*rxy[foot]))
            if d < lo:
                continue
            target = j if d <= hi else None
            break
        if target is None:
            continue
        mx, my = local_motion(xy[prev], xy[f], rxy[target])
        if not window[0] * dx <= mx <= window[1] * dx:
            continue
        out.append((f, mx, my))
    return out


def read_tum(path):
    poses = []
    for line in open(path):
        f = line.split()
        if not f or f[0].startswith("#"):
            continue
        t, x, y, _z, qx, qy, qz, qw = map(float, f)
        yaw = math.atan2(2 * (qw * qz + qx * qy), 1 - 2 * (qy * qy + qz * qz))
        poses.append((x, y, yaw))
    return poses


def dataset_csv(runs, command_of, dx=0.5, tol=0.1, wheelbase=2.5, max_steer=math.radians(70)):
    """Dataset CSV text for {id: poses}; command_of(x, y) gives the L/S/R tag."""
    ids = sorted(runs)
    ref = ids[0] if len(ids) == 1 else select_reference(runs)
    alpha = wheelbase / dx ** 2
    lines = ["frame,traj_id,dx,dy,steer,command"]
    for i in ids:
        for f, mx, my in relabel(runs[i], runs[ref], i == ref, dx, tol):
            if not dx * (1 - tol) <= mx <= dx * (1 + tol):
                continue
            steer = max(-max_steer, min(max_steer, math.atan(alpha * my)))
            x, y, _ = runs[i][f]
            lines.append(f"{f},{i},{mx:.9g},{my:.9g},{steer:.9g},{command_of(x, y)}")
    return "\n".join(lines) + "\n"


def arc_point(radius, s):
    """Point at arc length s on a left circle of given radius starting at the origin heading +x."""
    th = s / radius
    return radius * math.sin(th), radius * (1 - math.cos(th))


def fit_circle(points):
    """Algebraic (Kasa) least-squares circle fit; returns the radius."""
    import numpy as np
    P = np.asarray(points, dtype=float)
    A = np.column_stack([2 * P[:, 0], 2 * P[:, 1], np.ones(len(P))])
    b = (P ** 2).sum(axis=1)
    cx, cy, c = np.linalg.lstsq(A, b, rcond=None)[0]
    return math.sqrt(c + cx * cx + cy * cy)


def finite_difference(f, x, h=1e-6):
    """Central differences of scalar f over every entry of array x (modified in place, restored)."""
    import numpy as np
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g
