"""Command-line surface: hologram synthesis, compression, decompression,
evaluation and benchmarking.

Exit codes: 0 success, 1 user error, 2 container integrity error, 3 partial
benchmark failure. Every command writes its fully resolved configuration
next to its outputs for reproducibility.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import threading

import numpy as np
from PIL import Image

from . import __version__, codec, corpus, metrics, nn
from .errors import HolocompError, IntegrityError, UnsupportedVersionError
from .hologram import OpticalConfig, PatchGrid, load_holo, save_holo
from .optics import reconstruct, synthesize_hologram
from .training import TrainingSchedule, train_hologram

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_INTEGRITY = 2
EXIT_PARTIAL_BENCH = 3

ARCH_CHOICES = list(nn.KINDS)
PATCH_CHOICES = list(nn.PATCH_SIZES)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; the CLI contract reserves 2 for
    integrity errors, so downgrade usage problems to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER_ERROR, f"{self.prog}: error: {message}\n")


def _default_workers() -> int:
    env = os.environ.get("HOLOCOMP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _write_run_config(path: str, command: str, args: dict) -> None:
    record = {
        "command": command,
        "holocomp_version": __version__,
        "nn_backend": nn.backend_name(),
        "args": args,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write("\n")


def _schedule_from_args(args) -> TrainingSchedule:
    window = args.early_stop_window
    if window is not None and window <= 0:
        window = None
    return TrainingSchedule(
        base_lr=args.lr,
        step_size=args.step_size,
        gamma=args.gamma,
        max_epochs=args.epochs,
        early_stop_window=window,
        early_stop_rel=args.early_stop_rel,
    )


def _add_schedule_flags(p: argparse.ArgumentParser):
    p.add_argument("--epochs", type=int, default=10000, help="training epochs per patch")
    p.add_argument("--lr", type=float, default=1e-4, help="base Adam learning rate")
    p.add_argument("--step-size", type=int, default=5000, help="epochs between lr decays")
    p.add_argument("--gamma", type=float, default=0.5, help="lr decay factor")
    p.add_argument("--early-stop-window", type=int, default=500,
                   help="early-stop window in epochs; 0 disables early stopping")
    p.add_argument("--early-stop-rel", type=float, default=1e-4,
                   help="minimum relative best-loss improvement per window")
    p.add_argument("--workers", type=int, default=_default_workers(),
                   help="parallel patch stripes (default: HOLOCOMP_THREADS or 1)")
    p.add_argument("--seed", type=int, default=0, help="base random seed")


def _load_image(path: str, size: int) -> np.ndarray:
    with Image.open(path) as img:
        img = img.convert("RGB")
        resized = img.resize((size, size), resample=Image.Resampling.LANCZOS)
    arr = np.asarray(resized, dtype=np.float64) / 255.0
    return np.moveaxis(arr, -1, 0)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.size % 2:
        raise HolocompError(f"--size must be even, got {args.size}")
    if not os.path.isfile(args.image):
        raise HolocompError(f"image not found: {args.image}")
    image = _load_image(args.image, args.size)
    holo = synthesize_hologram(image, OpticalConfig(), scene_distance=args.distance,
                               refine_iters=args.refine_iters)
    save_holo(holo, args.output)
    _write_run_config(args.output + ".run.json", "generate", {
        "image": os.path.abspath(args.image), "output": os.path.abspath(args.output),
        "size": args.size, "distance": args.distance, "refine_iters": args.refine_iters,
        "resize_policy": "LANCZOS to size x size (aspect not preserved)",
    })
    print(f"wrote {args.output} ({args.size}x{args.size}, scene at {args.distance * 1e3:g} mm)")
    return EXIT_OK


def cmd_compress(args) -> int:
    holo = load_holo(args.hologram)
    grid = PatchGrid.for_shape(holo.height, holo.width, args.patch, args.patch)
    arch = nn.preset(args.arch, args.patch)
    schedule = _schedule_from_args(args)

    log_fn = None
    log_handle = None
    if args.log:
        log_handle = open(args.log, "a", encoding="utf-8")
        lock = threading.Lock()

        def log_fn(record):
            line = json.dumps(record)
            with lock:
                log_handle.write(line + "\n")

    try:
        models, report = train_hologram(holo, grid, arch, schedule,
                                        workers=args.workers, seed=args.seed, log_fn=log_fn)
    finally:
        if log_handle is not None:
            log_handle.close()

    info = codec.CodecInfo(arch=arch, grid=grid, config=holo.config,
                           precision=args.precision, seed=args.seed)
    blob = codec.encode(models, info)
    codec.save_hinr(args.output, blob)

    report_path = args.output + ".report.json"
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2)
        f.write("\n")
    _write_run_config(args.output + ".run.json", "compress", {
        "hologram": os.path.abspath(args.hologram), "output": os.path.abspath(args.output),
        "arch": args.arch, "patch": args.patch, "precision": args.precision,
        "epochs": args.epochs, "lr": args.lr, "step_size": args.step_size,
        "gamma": args.gamma, "early_stop_window": args.early_stop_window,
        "early_stop_rel": args.early_stop_rel, "workers": args.workers,
        "seed": args.seed, "log": args.log and os.path.abspath(args.log),
    })
    ratio = codec.compression_ratio(arch, (grid.patch_h, grid.patch_w))
    disk = codec.bytes_on_disk_ratio(len(blob), holo.height, holo.width)
    print(f"wrote {args.output}: {grid.patch_count} patches, "
          f"{nn.parameter_count(arch):,} params/patch, ratio {ratio}% "
          f"(bytes on disk {disk:.1f}%), "
          f"PSNR {report.mean_psnr_db:.2f} ± {report.std_psnr_db:.2f} dB, "
          f"{report.failed_count} failed")
    return EXIT_OK


def cmd_decompress(args) -> int:
    holo = codec.decompress(codec.load_hinr(args.container))
    save_holo(holo, args.output)
    _write_run_config(args.output + ".run.json", "decompress", {
        "container": os.path.abspath(args.container), "output": os.path.abspath(args.output),
    })
    print(f"wrote {args.output} ({holo.height}x{holo.width})")
    return EXIT_OK


def _export_reconstruction(stack, out_dir: str) -> None:
    normalized = stack.normalized()
    for i, distance in enumerate(stack.distances):
        tag = f"recon_{round(distance * 1e6)}um"
        plane = normalized[i]
        as_u8 = np.round(np.clip(plane, 0, 1) * 255).astype(np.uint8)
        Image.fromarray(np.moveaxis(as_u8, 0, -1), mode="RGB").save(
            os.path.join(out_dir, tag + ".png"))
        with open(os.path.join(out_dir, tag + ".f32"), "wb") as f:
            f.write(plane.astype("<f4").tobytes())


def cmd_evaluate(args) -> int:
    original = load_holo(args.hologram)
    blob = codec.load_hinr(args.container)
    decompressed = codec.decompress(blob)
    models, info = codec.decode(blob)

    source_image = None
    if args.reference == metrics.REFERENCE_SOURCE:
        if not args.source_image:
            raise HolocompError("--reference source requires --source-image")
        source_image = _load_image(args.source_image, original.width)

    compression = {
        "params": nn.parameter_count(info.arch),
        "ratio_percent": codec.compression_ratio(info.arch, (info.grid.patch_h, info.grid.patch_w)),
        "container_bytes": len(blob),
        "bytes_ratio_percent": codec.bytes_on_disk_ratio(len(blob), original.height, original.width),
    }
    report = metrics.evaluate_pair(original, decompressed, reference_mode=args.reference,
                                   source_image=source_image, compression=compression)

    os.makedirs(args.output_dir, exist_ok=True)
    with open(os.path.join(args.output_dir, "report.jsonl"), "w", encoding="utf-8") as f:
        f.write(report.to_json_lines())
    with open(os.path.join(args.output_dir, "report.txt"), "w", encoding="utf-8") as f:
        f.write(report.to_text())
    _export_reconstruction(reconstruct(decompressed), args.output_dir)
    _write_run_config(os.path.join(args.output_dir, "run.json"), "evaluate", {
        "hologram": os.path.abspath(args.hologram),
        "container": os.path.abspath(args.container),
        "output_dir": os.path.abspath(args.output_dir),
        "reference": args.reference,
        "source_image": args.source_image and os.path.abspath(args.source_image),
    })
    sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_bench(args) -> int:
    holo_paths = sorted(
        os.path.join(args.corpus, f) for f in os.listdir(args.corpus) if f.endswith(".holo")
    ) if os.path.isdir(args.corpus) else []
    if not holo_paths:
        raise HolocompError(f"no .holo files found in {args.corpus!r}")

    archs = [a.strip() for a in args.archs.split(",") if a.strip()]
    patches = [int(p) for p in args.patches.split(",") if p.strip()]
    for a in archs:
        if a not in ARCH_CHOICES:
            raise HolocompError(f"unknown architecture {a!r} (choices: {ARCH_CHOICES})")
    for p in patches:
        if p not in PATCH_CHOICES:
            raise HolocompError(f"unsupported patch size {p} (choices: {PATCH_CHOICES})")

    os.makedirs(args.output_dir, exist_ok=True)
    schedule = _schedule_from_args(args)
    rows = []
    failures = []
    jsonl_path = os.path.join(args.output_dir, "bench_results.jsonl")
    with open(jsonl_path, "w", encoding="utf-8") as jsonl:
        for arch_kind in archs:
            for patch in patches:
                arch = nn.preset(arch_kind, patch)
                patch_psnrs = []
                recon_psnrs = []
                for path in holo_paths:
                    try:
                        holo = load_holo(path)
                        grid = PatchGrid.for_shape(holo.height, holo.width, patch, patch)
                        models, report = train_hologram(
                            holo, grid, arch, schedule, workers=args.workers, seed=args.seed)
                        info = codec.CodecInfo(arch=arch, grid=grid, config=holo.config,
                                               precision=args.precision, seed=args.seed)
                        blob = codec.encode(models, info)
                        pair = metrics.evaluate_pair(
                            holo, codec.decompress(blob), reference_mode=args.reference)
                        patch_psnrs.extend(
                            r.psnr_db for r in report.patches if not r.failed)
                        recon_psnrs.append(pair.mean_psnr_db)
                        jsonl.write(json.dumps({
                            "arch": arch_kind, "patch": patch, "hologram": os.path.basename(path),
                            "mean_patch_psnr_db": report.mean_psnr_db,
                            "std_patch_psnr_db": report.std_psnr_db,
                            "failed_patches": report.failed_count,
                            "hologram_plane_psnr_db": pair.hologram_psnr_db,
                            "hologram_plane_ssim": pair.hologram_ssim,
                            "recon_mean_psnr_db": pair.mean_psnr_db,
                            "recon_mean_ssim": pair.mean_ssim,
                            "reference": args.reference,
                        }) + "\n")
                    except HolocompError as exc:
                        failures.append({"arch": arch_kind, "patch": patch,
                                         "hologram": path, "error": str(exc)})
                        print(f"bench: {arch_kind}/{patch} failed on {path}: {exc}",
                              file=sys.stderr)
                if patch_psnrs:
                    rows.append({
                        "arch": arch_kind,
                        "patch": patch,
                        "mean_psnr_db": float(np.mean(patch_psnrs)),
                        "std_psnr_db": float(np.std(patch_psnrs)),
                        "params": nn.parameter_count(arch),
                        "ratio_percent": codec.compression_ratio(arch, patch),
                    })

    table = format_bench_table(rows)
    with open(os.path.join(args.output_dir, "bench_table.txt"), "w", encoding="utf-8") as f:
        f.write(table)
    _write_run_config(os.path.join(args.output_dir, "run.json"), "bench", {
        "corpus": os.path.abspath(args.corpus), "output_dir": os.path.abspath(args.output_dir),
        "archs": archs, "patches": patches, "precision": args.precision,
        "epochs": args.epochs, "lr": args.lr, "step_size": args.step_size,
        "gamma": args.gamma, "early_stop_window": args.early_stop_window,
        "early_stop_rel": args.early_stop_rel, "workers": args.workers, "seed": args.seed,
        "reference": args.reference, "failures": failures,
    })
    sys.stdout.write(table)
    if failures:
        print(f"bench: {len(failures)} run(s) failed", file=sys.stderr)
        return EXIT_PARTIAL_BENCH
    return EXIT_OK


def format_bench_table(rows: list[dict]) -> str:
    """Render benchmark rows grouped by architecture:
    Patch size | PSNR ± Std. | Params | Comp. Ratio."""
    lines = []
    for arch_kind in dict.fromkeys(r["arch"] for r in rows):
        lines.append(arch_kind)
        lines.append(f"{'Patch size':<14}{'PSNR ± Std.':<20}{'Params':>8}  {'Comp. Ratio':>11}")
        for r in (r for r in rows if r["arch"] == arch_kind):
            psnr_txt = f"{metrics.format_db(r['mean_psnr_db'])} ± {r['std_psnr_db']:.2f}"
            lines.append(
                f"{'3x%dx%d' % (r['patch'], r['patch']):<14}{psnr_txt:<20}"
                f"{r['params']:>8,}  {r['ratio_percent']:>10}%"
            )
        lines.append("")
    return "\n".join(lines) + ("\n" if lines else "")


def cmd_corpus(args) -> int:
    paths = corpus.build_corpus(args.output_dir, count=args.count, size=args.size,
                                distance=args.distance, refine_iters=args.refine_iters)
    _write_run_config(os.path.join(args.output_dir, "run.json"), "corpus", {
        "output_dir": os.path.abspath(args.output_dir), "count": args.count,
        "size": args.size, "distance": args.distance, "refine_iters": args.refine_iters,
    })
    print(f"wrote {len(paths)} holograms under {args.output_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="holocomp",
                     description="Compress phase-only holograms with per-patch "
                                 "coordinate networks and verify the result optically.")
    parser.add_argument("--version", action="version", version=f"holocomp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[], help="synthesize a .holo from an RGB image")
    p.add_argument("image", help="input image (any format Pillow reads)")
    p.add_argument("-o", "--output", required=True, help="output .holo path")
    p.add_argument("--size", type=int, default=512, help="hologram side length (even)")
    p.add_argument("--distance", type=float, default=2.5e-3,
                   help="scene distance from the hologram plane in meters")
    p.add_argument("--refine-iters", type=int, default=30,
                   help="phase-retrieval refinement rounds (0 = raw back-propagation)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("compress", help="train per-patch networks and write a .hinr")
    p.add_argument("hologram", help="input .holo file")
    p.add_argument("-o", "--output", required=True, help="output .hinr path")
    p.add_argument("--arch", choices=ARCH_CHOICES, default="siren")
    p.add_argument("--patch", type=int, choices=PATCH_CHOICES, default=64)
    p.add_argument("--precision", choices=sorted(codec.PRECISIONS), default="f32")
    p.add_argument("--log", default=None,
                   help="append per-epoch JSON training records to this file")
    _add_schedule_flags(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="expand a .hinr back into a .holo")
    p.add_argument("container", help="input .hinr file")
    p.add_argument("-o", "--output", required=True, help="output .holo path")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("evaluate", help="score a compressed hologram against the original")
    p.add_argument("hologram", help="original .holo file")
    p.add_argument("container", help="compressed .hinr file")
    p.add_argument("-o", "--output-dir", required=True)
    p.add_argument("--reference", choices=[metrics.REFERENCE_SOURCE,
                                           metrics.REFERENCE_UNCOMPRESSED],
                   default=metrics.REFERENCE_UNCOMPRESSED,
                   help="reconstruction reference: the uncompressed hologram's "
                        "reconstruction, or the source image")
    p.add_argument("--source-image", default=None,
                   help="source image path (required with --reference source)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="Table-style benchmark over a corpus directory")
    p.add_argument("corpus", help="directory of .holo files")
    p.add_argument("-o", "--output-dir", required=True)
    p.add_argument("--archs", default=",".join(ARCH_CHOICES),
                   help="comma-separated architectures")
    p.add_argument("--patches", default=",".join(str(p) for p in PATCH_CHOICES),
                   help="comma-separated patch sizes")
    p.add_argument("--precision", choices=sorted(codec.PRECISIONS), default="f32")
    p.add_argument("--reference", choices=[metrics.REFERENCE_SOURCE,
                                           metrics.REFERENCE_UNCOMPRESSED],
                   default=metrics.REFERENCE_UNCOMPRESSED)
    _add_schedule_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("corpus", help="generate the bundled test-image corpus")
    p.add_argument("output_dir")
    p.add_argument("--count", type=int, default=corpus.CORPUS_SIZE)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--distance", type=float, default=2.5e-3)
    p.add_argument("--refine-iters", type=int, default=30)
    p.set_defaults(func=cmd_corpus)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (IntegrityError, UnsupportedVersionError) as exc:
        print(f"holocomp: integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except HolocompError as exc:
        print(f"holocomp: error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR
    except FileNotFoundError as exc:
        print(f"holocomp: error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR


if __name__ == "__main__":
    sys.exit(main())
