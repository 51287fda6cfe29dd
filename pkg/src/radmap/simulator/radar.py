"""Scanning radar model: a diverging cone per azimuth marched through range bins.

Objects return ``rho * f * E`` in the bin where the cone first meets them,
where ``f`` is the fraction of the cone cross-section they occupy and ``E``
is the energy left after all nearer objects.  Passing an object scales the
energy by ``1 - f * (1 - tau)``, so a fully covering opaque object leaves
only noise behind it.

The ground is distributed clutter: each visible bin inside the elevation
beam returns ``gamma * sin(grazing angle) * E``.  Visibility uses a running
horizon of ground elevation angles along the azimuth.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..config import PipelineConfig
from ..dataset_io import Pose, RadarScanRecord
from ..radar_frontend import radar_beam_axes
from .casting import angular_extent, footprint_entry, wrap_angle
from .scene import ObjectArrays, Scene

_CHUNK = 40


def azimuth_offsets(config: PipelineConfig) -> np.ndarray:
    """Per-azimuth time offsets from the scan start, as stored on disk (float32)."""
    a = config.radar.azimuth_count
    return (np.arange(a) * (config.radar.rotation_period / a)).astype(np.float32)


def azimuth_angles(config: PipelineConfig) -> np.ndarray:
    a = config.radar.azimuth_count
    return (np.arange(a) * (2 * np.pi / a)).astype(np.float32)


def _per_azimuth(pose: Pose, n: int):
    pos = np.asarray(pose.position, dtype=np.float64)
    quat = np.asarray(pose.orientation, dtype=np.float64)
    if pos.ndim == 1:
        pos = np.broadcast_to(pos, (n, 3))
        quat = np.broadcast_to(quat, (n, 4))
    if len(pos) != n or len(quat) != n:
        raise ValueError(f"expected one pose or {n} poses, got {len(pos)}")
    return pos, quat


def radar_signal(scene: Scene, pose: Pose, config: PipelineConfig,
                 objects: Optional[ObjectArrays] = None) -> np.ndarray:
    """Noise-free (azimuth, bin) signal before clipping.

    ``pose`` is either one vehicle pose or one per azimuth.
    """
    radar, sim = config.radar, config.sim
    n_az, n_bin = radar.azimuth_count, radar.bin_count
    pos, quat = _per_azimuth(pose, n_az)
    origins, dirs = radar_beam_axes(azimuth_angles(config), radar, pos, quat)
    objs = objects if objects is not None else scene.object_arrays()
    centre = origins.mean(axis=0)
    spread = float(np.max(np.linalg.norm(origins[:, :2] - centre[:2], axis=1)))
    if len(objs):
        # Coarse cull against the farthest reach of the sweep.
        d = np.hypot(objs.cx - centre[0], objs.cy - centre[1])
        objs = objs.subset(d - objs.radius <= radar.max_range + spread)
    # Bearing and angular half-width of every object seen from anywhere in the sweep.
    d = np.hypot(objs.cx - centre[0], objs.cy - centre[1])
    bearing = np.arctan2(objs.cy - centre[1], objs.cx - centre[0])
    reach = objs.radius + spread
    near = d <= reach
    half = np.arcsin(np.clip(reach / np.maximum(d, 1e-12), 0.0, 1.0))
    phi_all = np.arctan2(dirs[:, 1], dirs[:, 0])
    out = np.zeros((n_az, n_bin))
    for a0 in range(0, n_az, _CHUNK):
        sl = slice(a0, min(a0 + _CHUNK, n_az))
        chunk_objs = objs
        if len(objs):
            phi = phi_all[sl]
            mid = np.arctan2(np.sin(phi).sum(), np.cos(phi).sum())
            span = float(np.max(np.abs(wrap_angle(phi - mid))))
            limit = span + half + sim.radar_azimuth_beamwidth + 1e-6
            chunk_objs = objs.subset(near | (np.abs(wrap_angle(bearing - mid)) <= limit))
        out[sl] = _chunk_signal(scene, origins[sl], dirs[sl], chunk_objs, radar, sim)
    return out


def _chunk_signal(scene, origins, dirs, objs, radar, sim):
    n_az, n_bin = len(origins), radar.bin_count
    eps = np.arcsin(np.clip(dirs[:, 2], -1.0, 1.0))
    phi = np.arctan2(dirs[:, 1], dirs[:, 0])
    half_el = 0.5 * sim.radar_elevation_beamwidth
    cos_eps = np.cos(eps)
    slant = (np.arange(n_bin) + 0.5) * radar.bin_size
    r_h = slant[None, :] * cos_eps[:, None]
    ox, oy, oz = origins[:, 0:1], origins[:, 1:2], origins[:, 2:3]
    x = ox + r_h * np.cos(phi)[:, None]
    y = oy + r_h * np.sin(phi)[:, None]
    zg = scene.ground.height(x, y)
    alpha = np.arctan2(zg - oz, r_h)
    alpha = np.where(np.isnan(alpha), -np.inf, alpha)
    horizon = np.maximum.accumulate(alpha, axis=1)
    prior = np.concatenate([np.full((n_az, 1), -np.inf), horizon[:, :-1]], axis=1)
    visible = np.isfinite(alpha) & (alpha >= prior)
    in_beam = np.abs(alpha - eps[:, None]) <= half_el
    signal = np.zeros((n_az, n_bin))
    lit = visible & in_beam
    if scene.ground_backscatter > 0 and np.any(lit):
        step = radar.bin_size * cos_eps[:, None]
        grad = np.gradient(np.where(np.isnan(zg), 0.0, zg), axis=1) / step
        graze = np.arctan(grad) - alpha
        clutter = scene.ground_backscatter * np.sin(np.clip(graze, 0.0, np.pi / 2))
        signal = np.where(lit, clutter, 0.0)

    if len(objs) == 0:
        return signal

    w_az = sim.radar_azimuth_beamwidth
    center, dist, lo, hi = angular_extent(ox, oy, objs)
    rel = wrap_angle(phi[:, None] - center)
    a_lo = np.maximum(lo, rel - 0.5 * w_az)
    a_hi = np.minimum(hi, rel + 0.5 * w_az)
    f_az = np.clip(a_hi - a_lo, 0.0, None) / w_az
    mid = center + 0.5 * (a_lo + a_hi)
    entry = footprint_entry(ox, oy, mid, objs)
    fallback = np.maximum(dist - objs.radius, 0.0)
    entry = np.where(np.isfinite(entry), entry, fallback)
    slant_obj = entry / cos_eps[:, None]
    bins = np.floor(slant_obj / radar.bin_size).astype(np.int64)
    cand = (f_az > 0) & (bins < n_bin)
    if not np.any(cand):
        return signal
    ai, mi = np.nonzero(cand)
    b = bins[ai, mi]
    rh = np.maximum(entry[ai, mi], 1e-9)
    e_lo = np.arctan2(objs.z_lo[mi] - oz[ai, 0], rh)
    e_hi = np.arctan2(objs.z_hi[mi] - oz[ai, 0], rh)
    beam_lo = np.maximum(eps[ai] - half_el, horizon[ai, b])
    beam_hi = eps[ai] + half_el
    f_el = np.clip(np.minimum(e_hi, beam_hi) - np.maximum(e_lo, beam_lo), 0.0, None)
    f_el /= sim.radar_elevation_beamwidth
    f = np.minimum(f_az[ai, mi] * f_el, 1.0)
    keep = f > 0
    ai, mi, b, f = ai[keep], mi[keep], b[keep], f[keep]
    order = np.lexsort((slant_obj[ai, mi], ai))
    ai, mi, b, f = ai[order], mi[order], b[order], f[order]
    factor = 1.0 - f * (1.0 - objs.tau[mi])
    energy = np.empty_like(f)
    prev_a, e = -1, 1.0
    for k in range(len(ai)):
        if ai[k] != prev_a:
            prev_a, e = ai[k], 1.0
        energy[k] = e
        e *= factor[k]
    attenuation = np.ones((n_az, n_bin + 1))
    np.multiply.at(attenuation, (ai, b + 1), factor)
    signal *= np.cumprod(attenuation, axis=1)[:, :n_bin]
    np.add.at(signal, (ai, b), objs.rho[mi] * f * energy)
    return signal


def simulate_radar_scan(scene: Scene, pose: Pose, config: PipelineConfig,
                        rng: np.random.Generator, start_t: float = 0.0,
                        objects: Optional[ObjectArrays] = None) -> RadarScanRecord:
    """One sweep with clipped Gaussian noise added to every bin."""
    signal = radar_signal(scene, pose, config, objects)
    noise = rng.normal(config.sim.noise_mean, config.sim.noise_std, size=signal.shape)
    intensities = np.clip(signal + noise, 0.0, 1.0).astype(np.float32)
    return RadarScanRecord(
        start_t=float(start_t),
        bin_size=config.radar.bin_size,
        azimuth_offsets=azimuth_offsets(config),
        angles=azimuth_angles(config),
        intensities=intensities,
    )
