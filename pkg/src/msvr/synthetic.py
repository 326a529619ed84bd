"""Procedural desk-scene images for tests and demos.

Real benchmark photos cannot ship with the package, so this module draws
stand-ins with similar statistics: a textured desk surface under uneven
light, flat paper sheets with text-like marks, and a few shaded objects.
Flat regions, sharp-ish edges, and mild sensor noise together exercise a
patch codec the way desk photos do. Everything is seeded and vectorized;
no drawing library is involved.
"""

from __future__ import annotations

import numpy as np

from .image import Image

__all__ = ["spectral_noise", "synthetic_image", "desk_corpus"]


def spectral_noise(
    height: int,
    width: int,
    alpha: float,
    rng: np.random.Generator,
    scale: tuple[float, float] = (1.0, 1.0),
) -> np.ndarray:
    """Real field with an isotropic 1/f^alpha amplitude spectrum,
    standardized to zero mean and unit variance.

    ``scale`` stretches the spectrum per axis; ``(1, 4)`` produces
    horizontal streaks, which reads as wood grain.
    """
    if height < 1 or width < 1:
        raise ValueError("noise field needs positive dimensions")
    fy = np.fft.fftfreq(height)[:, None] * scale[1]
    fx = np.fft.fftfreq(width)[None, :] * scale[0]
    radius = np.sqrt(fx * fx + fy * fy)
    radius[0, 0] = 1.0  # DC handled below
    amplitude = radius ** (-alpha / 2.0)
    amplitude[0, 0] = 0.0
    phase = rng.standard_normal((height, width)) + 1j * rng.standard_normal((height, width))
    field = np.fft.ifft2(phase * amplitude).real
    field -= field.mean()
    std = field.std()
    if std > 0:
        field /= std
    return field


def _rect_frame(yy, xx, cy, cx, theta):
    # local coordinates of a frame rotated by theta about (cy, cx)
    c, s = np.cos(theta), np.sin(theta)
    u = (xx - cx) * c + (yy - cy) * s
    w = -(xx - cx) * s + (yy - cy) * c
    return u, w

def _feather(dist, soft=1.5):
    # coverage ramp: 1 inside, 0 outside, linear across ~soft pixels
    return np.clip(0.5 - dist / soft, 0.0, 1.0)


def _paste(canvas, alpha, color):
    canvas *= 1.0 - alpha[:, :, None]
    canvas += alpha[:, :, None] * color
    return canvas


def synthetic_image(
    width: int = 256,
    height: int = 256,
    channels: int = 3,
    seed=0,
) -> Image:
    """Draw one seeded desk scene.

    The composition is randomized per seed: desk tint, light direction,
    sheet count and placement, whether a sheet carries text-like dashes,
    and the shaded round object. ``channels=1`` returns the luma view.
    """
    if channels not in (1, 3):
        raise ValueError(f"channels must be 1 or 3, got {channels}")
    rng = np.random.default_rng(seed)
    h, w = int(height), int(width)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    sc = min(h, w) / 256.0

    # desk surface: warm muted base, directional gradient, anisotropic grain
    base = np.array([
        rng.uniform(0.34, 0.52),
        rng.uniform(0.26, 0.44),
        rng.uniform(0.18, 0.36),
    ])
    grad_theta = rng.uniform(0.0, 2.0 * np.pi)
    ramp = (np.cos(grad_theta) * xx / max(w, 1) + np.sin(grad_theta) * yy / max(h, 1))
    ramp = (ramp - ramp.mean()) * rng.uniform(0.10, 0.22)
    grain_theta = rng.uniform(0.0, np.pi)
    grain = spectral_noise(
        h, w, rng.uniform(1.8, 2.2), rng,
        scale=(1.0 + 3.0 * abs(np.cos(grain_theta)), 1.0 + 3.0 * abs(np.sin(grain_theta))),
    ) * rng.uniform(0.015, 0.03)
    canvas = np.clip(base[None, None, :] + (ramp + grain)[:, :, None], 0.02, 0.98)
    canvas = np.ascontiguousarray(canvas)

    tiny = min(h, w) < 24
    if not tiny:
        # paper sheets, occasionally tinted, some with rows of dashes
        n_sheets = int(rng.integers(2, 5))
        for _ in range(n_sheets):
            cy = rng.uniform(0.18, 0.82) * h
            cx = rng.uniform(0.18, 0.82) * w
            hh = max(4.0, rng.uniform(34.0, 66.0) * sc)
            hw = max(4.0, rng.uniform(26.0, 52.0) * sc)
            theta = rng.uniform(-0.22, 0.22)
            u, v = _rect_frame(yy, xx, cy, cx, theta)
            dist = np.maximum(np.abs(u) - hw, np.abs(v) - hh)

            shadow = _feather(dist - 3.0 * sc, soft=4.0) * 0.18
            canvas *= 1.0 - shadow[:, :, None]

            alpha = _feather(dist)
            shade = 1.0 - rng.uniform(0.02, 0.05) * (v + hh) / (2.0 * hh)
            tone = rng.uniform(0.78, 0.93)
            tint = tone + rng.uniform(-0.03, 0.02, size=3)
            color = np.clip(tint[None, None, :] * shade[:, :, None], 0.0, 1.0)
            canvas = _paste(canvas, alpha, color)

            if rng.random() < 0.75 and hh > 12 and hw > 16:
                # text block: dark dashes on a line grid inside the sheet
                pitch = max(3.0, rng.uniform(5.0, 8.0) * sc)
                dash = max(3.0, rng.uniform(9.0, 18.0) * sc)
                gap = max(2.0, rng.uniform(3.0, 7.0) * sc)
                margin = 0.16
                line_phase = rng.uniform(0.0, pitch)
                row = np.mod(v + hh + line_phase, pitch) < max(1.5, 1.8 * sc)
                col = np.mod(u + hw + rng.uniform(0.0, dash), dash + gap) < dash
                inside = (np.abs(u) < hw * (1 - margin)) & (np.abs(v) < hh * (1 - margin))
                ink = (row & col & inside) * alpha
                ink_color = np.full(3, rng.uniform(0.08, 0.22))
                canvas = _paste(canvas, ink * 0.9, ink_color[None, None, :])

        # one shaded round object (mug lid, lens cap)
        r = max(6.0, rng.uniform(20.0, 38.0) * sc)
        cy = rng.uniform(0.25, 0.75) * h
        cx = rng.uniform(0.25, 0.75) * w
        d = np.hypot(yy - cy, xx - cx) - r
        alpha = _feather(d)
        lt = rng.uniform(0.0, 2.0 * np.pi)
        lambert = np.clip(
            ((cx - xx) * np.cos(lt) + (cy - yy) * np.sin(lt)) / r, -1.0, 1.0
        ) * 0.22
        body = np.clip(rng.uniform(0.2, 0.6, size=3)[None, None, :] * (0.85 + lambert)[:, :, None], 0.0, 1.0)
        canvas = _paste(canvas, alpha, body)

        # a pen: thin dark elongated bar at a free angle
        u, v = _rect_frame(yy, xx, rng.uniform(0.2, 0.8) * h, rng.uniform(0.2, 0.8) * w,
                           rng.uniform(0.0, np.pi))
        dist = np.maximum(np.abs(u) - max(3.0, 55.0 * sc), np.abs(v) - max(1.5, 2.6 * sc))
        alpha = _feather(dist)
        canvas = _paste(canvas, alpha, np.full(3, rng.uniform(0.05, 0.2))[None, None, :])

    # uneven illumination and a touch of sensor noise
    vy = rng.uniform(0.2, 0.8) * h
    vx = rng.uniform(0.2, 0.8) * w
    fall = 1.0 - 0.22 * (((yy - vy) / max(h, 1)) ** 2 + ((xx - vx) / max(w, 1)) ** 2)
    canvas *= fall[:, :, None]
    canvas += rng.normal(0.0, 0.004, size=canvas.shape)
    canvas = np.clip(canvas, 0.0, 1.0)

    if channels == 1:
        luma = canvas @ np.array([0.299, 0.587, 0.114])
        canvas = luma[:, :, None]
    return Image(canvas)


def desk_corpus(
    count: int = 8,
    size: int = 256,
    channels: int = 3,
    seed: int = 2026,
) -> list[Image]:
    """Seeded list of ``count`` square desk scenes."""
    if count < 1:
        raise ValueError("corpus needs at least one image")
    return [
        synthetic_image(size, size, channels=channels, seed=[seed, i])
        for i in range(count)
    ]
