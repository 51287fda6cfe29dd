"""Ray and beam intersection kernels shared by the radar and lidar models."""

from __future__ import annotations

import math

import numpy as np

from .scene import GridHeightfield, Heightfield, ObjectArrays, PlaneHeightfield

_TWO_PI = 2 * np.pi


def wrap_angle(a):
    return (np.asarray(a) + np.pi) % _TWO_PI - np.pi


def footprint_entry(ox, oy, bearing, objs: ObjectArrays) -> np.ndarray:
    """Horizontal distance along ``bearing`` to each object's footprint.

    All inputs broadcast to a common (A, M) shape; inf where the ray misses.
    A ray starting inside a footprint enters at distance 0.
    """
    ux, uy = np.cos(bearing), np.sin(bearing)
    dx, dy = objs.cx - ox, objs.cy - oy
    # Cylinders.
    tc = dx * ux + dy * uy
    perp2 = dx * dx + dy * dy - tc * tc
    half = np.sqrt(np.maximum(objs.radius ** 2 - perp2, 0.0))
    cyl_near, cyl_far = tc - half, tc + half
    cyl_hit = (perp2 <= objs.radius ** 2) & (cyl_far >= 0)
    cyl = np.where(cyl_hit, np.maximum(cyl_near, 0.0), np.inf)
    # Oriented boxes: slab test in the box frame.
    c, s = np.cos(objs.yaw), np.sin(objs.yaw)
    px, py = -(dx * c + dy * s), -(-dx * s + dy * c)
    vx, vy = ux * c + uy * s, -ux * s + uy * c
    with np.errstate(divide="ignore", invalid="ignore"):
        t1x, t2x = (-objs.half_l - px) / vx, (objs.half_l - px) / vx
        t1y, t2y = (-objs.half_w - py) / vy, (objs.half_w - py) / vy
    inx = np.abs(px) <= objs.half_l
    iny = np.abs(py) <= objs.half_w
    lo_x = np.where(vx == 0, np.where(inx, -np.inf, np.inf), np.minimum(t1x, t2x))
    hi_x = np.where(vx == 0, np.where(inx, np.inf, -np.inf), np.maximum(t1x, t2x))
    lo_y = np.where(vy == 0, np.where(iny, -np.inf, np.inf), np.minimum(t1y, t2y))
    hi_y = np.where(vy == 0, np.where(iny, np.inf, -np.inf), np.maximum(t1y, t2y))
    near = np.maximum(lo_x, lo_y)
    far = np.minimum(hi_x, hi_y)
    box_hit = (near <= far) & (far >= 0)
    box = np.where(box_hit, np.maximum(near, 0.0), np.inf)
    return np.where(objs.is_box, box, cyl)


def angular_extent(ox, oy, objs: ObjectArrays):
    """Center bearing, distance and the (low, high) bearing offsets each footprint subtends.

    Shapes broadcast like ``ox[:, None]`` against the objects.  A sensor
    inside a footprint sees it over the full circle.
    """
    dx, dy = objs.cx - ox, objs.cy - oy
    dist = np.hypot(dx, dy)
    center = np.arctan2(dy, dx)
    with np.errstate(invalid="ignore", divide="ignore"):
        cyl_half = np.arcsin(np.clip(objs.radius / np.maximum(dist, 1e-12), 0.0, 1.0))
    lo = -cyl_half
    hi = cyl_half.copy()
    if np.any(objs.is_box):
        c, s = np.cos(objs.yaw), np.sin(objs.yaw)
        box_lo = np.full(np.broadcast(dist, objs.cx).shape, np.inf)
        box_hi = np.full_like(box_lo, -np.inf)
        for sx, sy in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
            cxk = objs.cx + sx * objs.half_l * c - sy * objs.half_w * s
            cyk = objs.cy + sx * objs.half_l * s + sy * objs.half_w * c
            rel = wrap_angle(np.arctan2(cyk - oy, cxk - ox) - center)
            box_lo = np.minimum(box_lo, rel)
            box_hi = np.maximum(box_hi, rel)
        lo = np.where(objs.is_box, box_lo, lo)
        hi = np.where(objs.is_box, box_hi, hi)
    inside = footprint_entry(ox, oy, center, objs) == 0.0
    inside &= _inside_footprint(ox, oy, objs)
    lo = np.where(inside, -np.pi, lo)
    hi = np.where(inside, np.pi, hi)
    return center, dist, lo, hi


def _inside_footprint(ox, oy, objs: ObjectArrays):
    dx, dy = ox - objs.cx, oy - objs.cy
    c, s = np.cos(objs.yaw), np.sin(objs.yaw)
    bx, by = dx * c + dy * s, -dx * s + dy * c
    in_box = (np.abs(bx) <= objs.half_l) & (np.abs(by) <= objs.half_w)
    in_cyl = dx * dx + dy * dy <= objs.radius ** 2
    return np.where(objs.is_box, in_box, in_cyl)


def ray_objects(origins: np.ndarray, dirs: np.ndarray, objs: ObjectArrays):
    """Nearest positive hit distance of 3-D rays against primitives.

    Returns (distance, object index); distance is inf where nothing is hit.
    """
    n = len(origins)
    best = np.full(n, np.inf)
    which = np.full(n, -1, dtype=np.int64)
    ox, oy, oz = origins[:, 0], origins[:, 1], origins[:, 2]
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    # Only rays whose bearing can reach an object's footprint are tested;
    # rays are sorted by bearing so each object picks its window by bisection.
    bearing = np.arctan2(dy, dx)
    order = np.argsort(bearing, kind="stable")
    sorted_bearing = bearing[order]
    centre = origins.mean(axis=0)
    spread = float(np.max(np.hypot(ox - centre[0], oy - centre[1]))) if n else 0.0
    for m in range(len(objs)):
        d = math.hypot(objs.cx[m] - centre[0], objs.cy[m] - centre[1])
        reach = objs.radius[m] + spread
        if d > reach:
            half = math.asin(min(1.0, reach / d)) + 1e-6
            to_obj = math.atan2(objs.cy[m] - centre[1], objs.cx[m] - centre[0])
            sel = order[_bearing_window(sorted_bearing, to_obj - half, to_obj + half)]
        else:
            sel = np.arange(n)
        if len(sel) == 0:
            continue
        if objs.is_box[m]:
            t = _ray_box(ox[sel], oy[sel], oz[sel], dx[sel], dy[sel], dz[sel], objs, m)
        else:
            t = _ray_cylinder(ox[sel], oy[sel], oz[sel], dx[sel], dy[sel], dz[sel], objs, m)
        closer = t < best[sel]
        best[sel[closer]] = t[closer]
        which[sel[closer]] = m
    return best, which


def _bearing_window(sorted_bearing: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Positions in a sorted bearing array within [lo, hi], wrapping at +-pi."""
    spans = []
    for shift in (-_TWO_PI, 0.0, _TWO_PI):
        a, b = lo + shift, hi + shift
        if b < -np.pi or a > np.pi:
            continue
        i = np.searchsorted(sorted_bearing, a, side="left")
        j = np.searchsorted(sorted_bearing, b, side="right")
        if j > i:
            spans.append(np.arange(i, j))
    if not spans:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate(spans))


def _ray_box(ox, oy, oz, dx, dy, dz, objs, m):
    c, s = np.cos(objs.yaw[m]), np.sin(objs.yaw[m])
    px, py = ox - objs.cx[m], oy - objs.cy[m]
    bx, by = px * c + py * s, -px * s + py * c
    vx, vy = dx * c + dy * s, -dx * s + dy * c
    zc = 0.5 * (objs.z_lo[m] + objs.z_hi[m])
    hz = 0.5 * (objs.z_hi[m] - objs.z_lo[m])
    near = np.full(len(ox), -np.inf)
    far = np.full(len(ox), np.inf)
    for p, v, h in ((bx, vx, objs.half_l[m]), (by, vy, objs.half_w[m]), (oz - zc, dz, hz)):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t1, t2 = (-h - p) / v, (h - p) / v
        par = v == 0
        lo = np.where(par, np.where(np.abs(p) <= h, -np.inf, np.inf), np.minimum(t1, t2))
        hi = np.where(par, np.where(np.abs(p) <= h, np.inf, -np.inf), np.maximum(t1, t2))
        near = np.maximum(near, lo)
        far = np.minimum(far, hi)
    hit = (near <= far) & (near > 1e-9)
    return np.where(hit, near, np.inf)


def _ray_cylinder(ox, oy, oz, dx, dy, dz, objs, m):
    px, py = ox - objs.cx[m], oy - objs.cy[m]
    r2 = objs.radius[m] ** 2
    zlo, zhi = objs.z_lo[m], objs.z_hi[m]
    a = dx * dx + dy * dy
    b = 2 * (px * dx + py * dy)
    c = px * px + py * py - r2
    disc = b * b - 4 * a * c
    out = np.full(len(ox), np.inf)
    ok = (a > 0) & (disc >= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_side = (-b - np.sqrt(np.where(ok, disc, 0.0))) / (2 * a)
    z_side = oz + t_side * dz
    side = ok & (t_side > 1e-9) & (z_side >= zlo) & (z_side <= zhi)
    out[side] = t_side[side]
    for zcap in (zhi, zlo):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (zcap - oz) / dz
        x, y = px + t * dx, py + t * dy
        cap = (dz != 0) & (t > 1e-9) & (x * x + y * y <= r2) & (t < out)
        out[cap] = t[cap]
    return out


def intersect_terrain(ground: Heightfield, origins: np.ndarray, dirs: np.ndarray, max_range: float) -> np.ndarray:
    """Distance to the first terrain crossing within ``max_range``; inf otherwise."""
    if isinstance(ground, PlaneHeightfield):
        return _intersect_plane(ground, origins, dirs, max_range)
    return _intersect_march(ground, origins, dirs, max_range)


def _intersect_plane(ground: PlaneHeightfield, origins, dirs, max_range):
    ox, oy, oz = origins.T
    dx, dy, dz = dirs.T
    num = ground.z0 + ground.slope_x * ox + ground.slope_y * oy - oz
    den = dz - ground.slope_x * dx - ground.slope_y * dy
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num / den
        x, y = ox + t * dx, oy + t * dy
    hit = (den != 0) & (t > 0) & (t <= max_range)
    hit &= ground.contains(x, y)
    return np.where(hit, t, np.inf)


def _dilated_max(ground: GridHeightfield, half: int) -> GridHeightfield:
    """Heightfield whose nodes hold the max over a (2 half + 1)^2 node window."""
    cache = ground.__dict__.setdefault("_dilated", {})
    if half not in cache:
        padded = np.pad(ground.heights, half, mode="edge")
        win = np.lib.stride_tricks.sliding_window_view(padded, (2 * half + 1, 2 * half + 1))
        cache[half] = GridHeightfield(ground.origin, ground.resolution, win.max(axis=(2, 3)))
    return cache[half]


def _intersect_march(ground: GridHeightfield, origins, dirs, max_range, chunk: int = 8192):
    """March in fine steps, but only through coarse segments that may touch the surface.

    A coarse segment is skipped when its lowest point clears a max-dilated
    copy of the grid that bounds every height within the segment's footprint.
    """
    n = len(origins)
    out = np.full(n, np.inf)
    step = min(0.5 * ground.resolution, 0.5)
    sub = 8
    seg = sub * step
    bound = _dilated_max(ground, int(math.ceil(0.5 * seg / ground.resolution)) + 2)
    z_hi = ground.max_height
    z_lo = float(ground.heights.min())
    oz, dz = origins[:, 2], dirs[:, 2]
    # Rays can only cross the surface between the lowest and highest node heights.
    with np.errstate(divide="ignore", invalid="ignore"):
        t_top = (z_hi - oz) / dz
        t_bot = (z_lo - oz) / dz
    t0 = np.where(oz > z_hi, np.where(dz < 0, t_top, np.inf), 0.0)
    t1 = np.where(dz < 0, t_bot, np.where(dz > 0, np.maximum(t_top, 0.0), np.inf))
    t0 = np.maximum(np.nan_to_num(t0, nan=np.inf), 0.0)
    t1 = np.minimum(np.nan_to_num(t1, nan=np.inf, posinf=np.inf), max_range)
    candidates = np.nonzero(t0 <= t1)[0]
    if len(candidates) == 0:
        return out
    nseg = np.floor((t1[candidates] - t0[candidates]) / seg).astype(np.int64) + 1
    order = np.argsort(nseg, kind="stable")
    candidates, nseg = candidates[order], nseg[order]
    for start in range(0, len(candidates), chunk):
        idx = candidates[start:start + chunk]
        m = nseg[start:start + chunk]
        o, d = origins[idx], dirs[idx]
        j = np.arange(int(m.max()))
        mids = t0[idx, None] + (j[None, :] + 0.5) * seg
        pts = o[:, None, :] + mids[..., None] * d[:, None, :]
        lowest = pts[..., 2] - np.abs(d[:, 2:3]) * 0.5 * seg
        flagged = (j[None, :] < m[:, None]) & (lowest <= bound.height(pts[..., 0], pts[..., 1]))
        rows, segs = np.nonzero(flagged)
        _march_segments(ground, idx, o, d, rows, segs, t0[idx], t1[idx], step, sub, out)
    return out


def _march_segments(ground, idx, o, d, rows, segs, t0, t1, step, sub, out):
    """Resolve each ray at its first flagged segment containing a crossing."""
    done = np.zeros(len(idx), dtype=bool)
    # Pairs come sorted by ray then segment; handle the r-th flagged segment of
    # every ray per round.
    first = np.r_[0, np.nonzero(np.diff(rows))[0] + 1]
    rank = np.arange(len(rows)) - np.repeat(first, np.diff(np.r_[first, len(rows)]))
    for r in range(int(rank.max()) + 1 if len(rank) else 0):
        sel = (rank == r) & ~done[rows]
        if not np.any(sel):
            break
        ri, si = rows[sel], segs[sel]
        base = t0[ri] + si * sub * step
        ts = np.minimum(base[:, None] + np.arange(sub + 1)[None, :] * step, t1[ri, None])
        pts = o[ri, None, :] + ts[..., None] * d[ri, None, :]
        below = pts[..., 2] <= ground.height(pts[..., 0], pts[..., 1])
        has = below.any(axis=1)
        if not np.any(has):
            continue
        ri, ts, below = ri[has], ts[has], below[has]
        k = np.argmax(below, axis=1)
        hi = ts[np.arange(len(ri)), k]
        lo = np.where(k > 0, ts[np.arange(len(ri)), np.maximum(k - 1, 0)], hi)
        oo, dd = o[ri], d[ri]
        for _ in range(12):
            mid = 0.5 * (lo + hi)
            p = oo + mid[:, None] * dd
            under = p[:, 2] <= ground.height(p[:, 0], p[:, 1])
            hi = np.where(under, mid, hi)
            lo = np.where(under, lo, mid)
        out[idx[ri]] = hi
        done[ri] = True
