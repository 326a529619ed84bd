"""Distortion metrics on the 8-bit scale and the rate-distortion sweep that
turns a corpus plus a model into a CSV table of operating points.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bitstream import Mode
from .codec import EncodeSettings, Model, decode, encode
from .image import PEAK, Image

PSNR_CAP_DB = 100.0

SSIM_WINDOW = 8
SSIM_C1 = (0.01 * PEAK) ** 2
SSIM_C2 = (0.03 * PEAK) ** 2
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

MAX_SWEEP_WORKERS = 32


def _check_dims(a: Image, b: Image):
    if (a.width, a.height, a.channels) != (b.width, b.height, b.channels):
        raise ValueError(
            f"image dimensions differ: {(a.width, a.height, a.channels)} vs {(b.width, b.height, b.channels)}"
        )


def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio in dB against the 255 peak, capped at 100
    for (near-)identical images."""
    _check_dims(a, b)
    diff = (a.samples - b.samples) * PEAK
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP_DB
    return float(min(PSNR_CAP_DB, 10.0 * np.log10(PEAK * PEAK / mse)))


def _luma(image: Image) -> np.ndarray:
    """One plane on the 0..255 scale: the BT.601 luma for RGB, the sole
    channel for gray."""
    s = image.samples
    if image.channels == 3:
        plane = s @ np.asarray(LUMA_WEIGHTS)
    else:
        plane = s[:, :, 0]
    return plane * PEAK


def _box_means(x: np.ndarray, win: int) -> np.ndarray:
    """Mean of every win x win window (stride 1, valid placement) via an
    integral image."""
    s = np.cumsum(np.cumsum(x, axis=0), axis=1)
    s = np.pad(s, ((1, 0), (1, 0)))
    total = s[win:, win:] - s[:-win, win:] - s[win:, :-win] + s[:-win, :-win]
    return total / (win * win)


def ssim(a: Image, b: Image, window: int = SSIM_WINDOW) -> float:
    """Mean structural similarity over uniform square windows at stride 1.

    Computed on luma for RGB inputs, with the standard stabilizing constants
    on the 8-bit scale.
    """
    _check_dims(a, b)
    if min(a.width, a.height) < window:
        raise ValueError(f"image {a.width}x{a.height} smaller than the {window}-pixel window")
    x = _luma(a)
    y = _luma(b)
    mx = _box_means(x, window)
    my = _box_means(y, window)
    x2 = _box_means(x * x, window)
    y2 = _box_means(y * y, window)
    xy = _box_means(x * y, window)
    var_x = x2 - mx * mx
    var_y = y2 - my * my
    cov = xy - mx * my
    num = (2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mx * mx + my * my + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class RDPoint:
    """One operating point: an image (or "MEAN"), the weight mode, the kept
    count m (0 for single mode, which transmits no per-cell weights), and the
    measured rate and quality."""

    image: str
    mode: Mode
    m: int
    bpp: float
    psnr_db: float
    ssim: float


@dataclass(frozen=True)
class RDTable:
    """Image-major rows, one per (image, setting), with the corpus means
    appended afterward as one MEAN row per setting."""

    rows: tuple[RDPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))


def default_settings(K: int, compress_indices: bool = True) -> tuple[EncodeSettings, ...]:
    """The standard sweep: single-book mode, then masked at every m up to K."""
    single = EncodeSettings(mode=Mode.SINGLE, compress_indices=compress_indices)
    masked = tuple(
        EncodeSettings(mode=Mode.MASKED, m=m, compress_indices=compress_indices) for m in range(1, K + 1)
    )
    return (single,) + masked


def _point_m(settings: EncodeSettings) -> int:
    return settings.m if settings.mode == Mode.MASKED else 0


def _worker_count(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("MSVR_THREADS")
        if env is not None:
            threads = int(env)
    if threads is None:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise ValueError(f"worker count must be >= 1, got {threads}")
    return min(threads, MAX_SWEEP_WORKERS)


def rd_sweep(
    corpus,
    model: Model,
    settings_list=None,
    labels=None,
    filler: bool = True,
    threads: int | None = None,
) -> RDTable:
    """Encode and decode every corpus image under every setting, measuring
    actual stream bits and reconstruction quality.

    Work runs on a thread pool (capped by `threads` or MSVR_THREADS), but row
    order and content are fixed by the input order alone.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("corpus is empty")
    if settings_list is None:
        settings_list = default_settings(model.books.K)
    settings_list = list(settings_list)
    if not settings_list:
        raise ValueError("no settings to sweep")
    if labels is None:
        labels = [f"img{i:03d}" for i in range(len(corpus))]
    labels = [str(lab) for lab in labels]
    if len(labels) != len(corpus):
        raise ValueError(f"{len(labels)} labels for {len(corpus)} images")

    tasks = [
        (label, image, settings)
        for label, image in zip(labels, corpus)
        for settings in settings_list
    ]

    def run_one(task):
        label, image, settings = task
        data, stats = encode(image, model, settings)
        recon = decode(data, model, filler=filler)
        return RDPoint(
            image=label,
            mode=settings.mode,
            m=_point_m(settings),
            bpp=stats.report.bpp,
            psnr_db=psnr(image, recon),
            ssim=ssim(image, recon),
        )

    workers = _worker_count(threads)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(run_one, tasks))

    means = []
    per_setting = len(settings_list)
    for j, settings in enumerate(settings_list):
        group = rows[j::per_setting]
        means.append(
            RDPoint(
                image="MEAN",
                mode=settings.mode,
                m=_point_m(settings),
                bpp=float(np.mean([p.bpp for p in group])),
                psnr_db=float(np.mean([p.psnr_db for p in group])),
                ssim=float(np.mean([p.ssim for p in group])),
            )
        )
    return RDTable(tuple(rows) + tuple(means))


def to_csv(table: RDTable) -> str:
    """Render a sweep as CSV: image,mode,m,bpp,psnr_db,ssim with one header
    line and fixed six-decimal formatting."""
    lines = ["image,mode,m,bpp,psnr_db,ssim"]
    for p in table.rows:
        mode_name = "masked" if p.mode == Mode.MASKED else "single"
        lines.append(f"{p.image},{mode_name},{p.m},{p.bpp:.6f},{p.psnr_db:.6f},{p.ssim:.6f}")
    return "\n".join(lines) + "\n"
