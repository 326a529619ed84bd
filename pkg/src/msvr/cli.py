"""Command-line surface: train codebooks, encode, decode, compare images, and
run rate-distortion sweeps.

Exit codes: 0 success, 1 usage or invalid-argument error, 2 I/O, stream, or
model error. Diagnostics go to stderr; bitstreams, models, images, and CSV
tables are only ever written to files, atomically.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bitstream import Mode
from .codec import (
    DEFAULT_BOOK_SIZE,
    DEFAULT_K,
    DEFAULT_M,
    DEFAULT_PATCH,
    EncodeSettings,
    Model,
    decode,
    encode,
    load_model,
    save_model,
    train_model,
)
from .errors import BitstreamError, IncompatibleModelError
from .image import atomic_write, load_image, save_image
from .metrics import psnr, rd_sweep, ssim, to_csv

CORPUS_SUFFIXES = (".ppm", ".pgm")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msvr", description="Masked codebook image codec.")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train-codebooks", help="fit basis codebooks on an image directory")
    train.add_argument("--corpus", type=Path, required=True, help="directory of .ppm/.pgm training images")
    train.add_argument("--K", type=int, default=DEFAULT_K, help="number of codebooks (power of two)")
    train.add_argument("--n", type=int, default=DEFAULT_BOOK_SIZE, help="codewords per codebook")
    train.add_argument("--f", type=int, default=DEFAULT_PATCH, help="patch size in pixels")
    train.add_argument("--seed", type=int, default=0, help="training seed")
    train.add_argument("--tau", type=float, default=None, help="fixed softmax temperature (default: derived)")
    train.add_argument("--out", type=Path, required=True, help="model file to write")

    enc = sub.add_parser("encode", help="compress an image against a model")
    enc.add_argument("--model", type=Path, required=True)
    enc.add_argument("--in", dest="input", type=Path, required=True, help="input .ppm/.pgm image")
    enc.add_argument("--mode", choices=["masked", "single"], default="masked")
    enc.add_argument("--m", type=int, default=DEFAULT_M, help="kept books per super-pixel (masked mode)")
    enc.add_argument("--no-compress-indices", action="store_true", help="store index planes uncompressed")
    enc.add_argument("--out", type=Path, required=True, help="bitstream file to write")

    dec = sub.add_parser("decode", help="reconstruct an image from a bitstream")
    dec.add_argument("--model", type=Path, required=True)
    dec.add_argument("--in", dest="input", type=Path, required=True, help="input bitstream")
    dec.add_argument("--no-filler", action="store_true", help="skip decoder-side weight refilling")
    dec.add_argument("--out", type=Path, required=True, help="image file to write")

    ev = sub.add_parser("eval", help="PSNR/SSIM between an original and a reconstruction")
    ev.add_argument("--orig", type=Path, required=True)
    ev.add_argument("--recon", type=Path, required=True)

    sweep = sub.add_parser("sweep", help="rate-distortion table over a corpus")
    sweep.add_argument("--model", type=Path, required=True)
    sweep.add_argument("--corpus", type=Path, required=True, help="directory of .ppm/.pgm images")
    sweep.add_argument("--out", type=Path, required=True, help="CSV file to write")
    return parser


def _load_corpus(directory: Path):
    """Images of a corpus directory in sorted filename order."""
    paths = sorted(p for p in directory.iterdir() if p.suffix.lower() in CORPUS_SUFFIXES)
    if not paths:
        raise FileNotFoundError(f"no {'/'.join(CORPUS_SUFFIXES)} images in {directory}")
    return [p.stem for p in paths], [load_image(p) for p in paths]


def _read_model(path: Path) -> Model:
    return load_model(path.read_bytes())


def _cmd_train(args) -> int:
    _, images = _load_corpus(args.corpus)
    model = train_model(images, K=args.K, n=args.n, patch_size=args.f, tau=args.tau, seed=args.seed)
    atomic_write(args.out, save_model(model))
    print(
        f"trained {args.K} codebooks of {args.n} codewords on {len(images)} images -> {args.out}",
        file=sys.stderr,
    )
    return 0


def _cmd_encode(args) -> int:
    model = _read_model(args.model)
    image = load_image(args.input)
    settings = EncodeSettings(
        mode=Mode.SINGLE if args.mode == "single" else Mode.MASKED,
        m=args.m,
        compress_indices=not args.no_compress_indices,
    )
    data, stats = encode(image, model, settings)
    atomic_write(args.out, data)
    r = stats.report
    stored = r.b_c_naive if r.b_c_compressed is None else r.b_c_compressed
    print(
        f"{args.input} -> {args.out}: {len(data)} bytes "
        f"(indices {stored} b, weights {r.b_w} b, {r.bpp:.4f} bpp payload)",
        file=sys.stderr,
    )
    return 0


def _cmd_decode(args) -> int:
    model = _read_model(args.model)
    image = decode(args.input.read_bytes(), model, filler=not args.no_filler)
    save_image(args.out, image)
    print(f"{args.input} -> {args.out}: {image.width}x{image.height}", file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    orig = load_image(args.orig)
    recon = load_image(args.recon)
    print(f"psnr_db={psnr(orig, recon):.6f} ssim={ssim(orig, recon):.6f}")
    return 0


def _cmd_sweep(args) -> int:
    model = _read_model(args.model)
    labels, images = _load_corpus(args.corpus)
    table = rd_sweep(images, model, labels=labels)
    atomic_write(args.out, to_csv(table).encode())
    print(f"swept {len(images)} images -> {args.out}", file=sys.stderr)
    return 0


_COMMANDS = {
    "train-codebooks": _cmd_train,
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
}


def run(argv=None) -> int:
    """Parse and dispatch. Returns the process exit code instead of raising."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on --help (0) and usage errors (2)
        return 0 if exc.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"msvr {args.command}: {exc}", file=sys.stderr)
        return 1
    except (OSError, BitstreamError, IncompatibleModelError) as exc:
        print(f"msvr {args.command}: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
