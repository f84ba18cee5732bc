"""Command-line front end.

Subcommands: train-dict, derain, map, corr, synth, eval, bench, make-corpus.
Tabular results go to stdout tab-separated; figures are written only when
``--figures DIR`` is given.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import corpus
from .derain import DerainConfig, correlation_matrix, derain
from .dictionary import (DictionaryFormatError, DictionarySet, ksvd_train,
                         load_dictionary, save_dictionary)
from .evaluation import (extract_rain_overlay, psnr, ssim, synthesize_rain)
from .harness import HarnessConfig, run_synthetic, train_dictionaries
from .images import ImageIOError, load_image, load_mask, save_image, save_map
from .patches import SamplingError, sample_training_patches
from .shrinkmap import shrinkage_map

log = logging.getLogger("sdrain")

IMAGE_SUFFIXES = (".png", ".pgm")


@dataclass
class RunConfig:
    m: int = 16
    K: int = 1024
    L: int = 3
    th_s: float = 0.25
    th_c: float = 0.8
    eps: float | None = None        # 8-bit units; None = adaptive
    max_atoms: int | None = None
    mean_removal: bool = True
    dilation_radius: int = 2
    tau_h: float = 0.10
    rho: float = 2.0
    stride: int = 1
    seed: int = 0
    threads: int = 1
    iters: int = 30
    patches: int = 15000
    rain_coverage: float = 0.5
    dn: str | None = None
    dr: str | None = None
    corpus: str | None = None
    masks: str | None = None

    def derain_config(self) -> DerainConfig:
        return DerainConfig(
            L=self.L, eps=None if self.eps is None else self.eps / 255.0,
            th_s=self.th_s, th_c=self.th_c, max_atoms=self.max_atoms,
            mean_removal=self.mean_removal, dilation_radius=self.dilation_radius,
            tau_h=self.tau_h, rho=self.rho, stride=self.stride)


def load_run_config(path) -> dict:
    data = json.loads(Path(path).read_text())
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def resolve_config(args) -> RunConfig:
    """Defaults, then the JSON file, then explicit flags."""
    values = {}
    if getattr(args, "config", None):
        values.update(load_run_config(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    if "threads" not in values and os.environ.get("SD_THREADS"):
        values["threads"] = int(os.environ["SD_THREADS"])
    return RunConfig(**values)


def _dictionaries(cfg: RunConfig) -> DictionarySet:
    if not cfg.dn or not cfg.dr:
        raise ValueError("both --dn and --dr dictionaries are required")
    return DictionarySet(load_dictionary(cfg.dn), load_dictionary(cfg.dr))


def _images_in(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise ImageIOError(f"not a directory: {d}")
    return sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def cmd_train_dict(args) -> int:
    cfg = resolve_config(args)
    if not cfg.corpus:
        raise ValueError("--corpus is required")
    pairs = []
    for path in _images_in(cfg.corpus):
        img = load_image(path)
        mask = None
        if cfg.masks:
            mpath = Path(cfg.masks) / path.name
            if not mpath.exists():
                raise ImageIOError(f"no mask for {path.name} in {cfg.masks}")
            mask = load_mask(mpath, img)
        pairs.append((img, mask))
    if not pairs:
        raise ImageIOError(f"no images in {cfg.corpus}")
    kind = args.kind or ("rain" if cfg.masks else "nonrain")
    coverage = cfg.rain_coverage if cfg.masks else 0.0
    P = sample_training_patches(pairs, cfg.m, cfg.patches, coverage, seed=cfg.seed,
                                remove_mean=cfg.mean_removal)
    D = ksvd_train(P, cfg.K, cfg.L, cfg.iters, seed=cfg.seed, kind=kind, m=cfg.m)
    save_dictionary(D, args.out)
    print(f"{kind}\t{cfg.m}\t{cfg.K}\t{P.n}\t{args.out}")
    if args.figures:
        from .plotting import plot_atoms
        plot_atoms(D.atoms, D.m, Path(args.figures) / f"{Path(args.out).stem}_atoms.png")
    return 0


def cmd_derain(args) -> int:
    cfg = resolve_config(args)
    dicts = _dictionaries(cfg)
    img = load_image(args.input)
    res = derain(img, dicts, cfg.derain_config(), threads=cfg.threads)
    save_image(res.image, args.out)
    if args.map_out:
        save_map(res.shrinkage, args.map_out)
    print(f"{args.out}\teps={res.eps * 255:.4f}\train_fraction="
          f"{float(np.mean(res.shrinkage <= cfg.th_s)):.4f}")
    return 0


def cmd_map(args) -> int:
    cfg = resolve_config(args)
    if not cfg.dr:
        raise ValueError("--dr is required")
    img = load_image(args.input)
    s = shrinkage_map(img, load_dictionary(cfg.dr), cfg.derain_config().map_params())
    save_map(s, args.out)
    return 0


def cmd_corr(args) -> int:
    cfg = resolve_config(args)
    dicts = _dictionaries(cfg)
    C = correlation_matrix(dicts.nonrain, dicts.rain)
    best = C.max(axis=1)
    th = args.th if args.th is not None else cfg.th_c
    counts, edges = np.histogram(best, bins=args.bins, range=(-1.0, 1.0))
    print("bin_lo\tbin_hi\tcount")
    for lo, hi, n in zip(edges[:-1], edges[1:], counts):
        print(f"{lo:.3f}\t{hi:.3f}\t{n}")
    print(f"above_threshold\t{th}\t{int((best >= th).sum())}\tof\t{len(best)}")
    if args.figures:
        from .plotting import plot_correlation
        plot_correlation(C, th, Path(args.figures) / "correlation.png")
    return 0


def cmd_synth(args) -> int:
    clean = load_image(args.clean)
    rain = load_image(args.rain)
    mask = load_mask(args.mask, rain)
    overlay = extract_rain_overlay(rain, mask, args.patch, args.count, seed=args.seed)
    rainy = synthesize_rain(clean, overlay, rotate90=args.rotate90)
    save_image(rainy, args.out)
    print(f"{args.out}\tpsnr={psnr(rainy, clean):.4f}\tssim={ssim(rainy, clean):.4f}")
    return 0


def cmd_eval(args) -> int:
    pairs = [(Path(t).stem, Path(c), Path(t)) for c, t in (args.pair or [])]
    if args.clean_dir or args.test_dir:
        if not (args.clean_dir and args.test_dir):
            raise ValueError("--clean-dir and --test-dir go together")
        for t in _images_in(args.test_dir):
            c = Path(args.clean_dir) / t.name
            if not c.exists():
                raise ImageIOError(f"no clean image for {t.name} in {args.clean_dir}")
            pairs.append((t.stem, c, t))
    if not pairs:
        raise ValueError("no image pairs given")
    rows = []
    for name, c, t in pairs:
        a, b = load_image(c), load_image(t)
        rows.append((name, psnr(b, a), ssim(b, a)))
        print(f"{name}\t{rows[-1][1]:.4f}\t{rows[-1][2]:.6f}")
    if args.figures:
        from .plotting import plot_eval
        plot_eval(rows, Path(args.figures) / "eval.png")
    return 0


def cmd_bench(args) -> int:
    hcfg = HarnessConfig.production() if args.profile == "production" else HarnessConfig()
    cfg = resolve_config(args)
    if cfg.dn and cfg.dr:
        dicts = _dictionaries(cfg)
    else:
        dicts = train_dictionaries(hcfg)
        if args.save_dicts:
            out = Path(args.save_dicts)
            out.mkdir(parents=True, exist_ok=True)
            save_dictionary(dicts.nonrain, out / "nonrain.sdic")
            save_dictionary(dicts.rain, out / "rain.sdic")
    dcfg = cfg.derain_config()
    cases = run_synthetic(dicts, hcfg, dcfg, threads=cfg.threads)
    print("name\tpsnr_rainy\tssim_rainy\tpsnr_derained\tssim_derained\timproved")
    for c in cases:
        s = c.scores
        print(f"{c.label}\t{s['psnr_rainy']:.4f}\t{s['ssim_rainy']:.6f}\t"
              f"{s['psnr_derained']:.4f}\t{s['ssim_derained']:.6f}\t{int(c.improved)}")
    if args.figures:
        from .plotting import plot_case_panel, plot_scores
        fig_dir = Path(args.figures)
        for c in cases:
            plot_case_panel(c, fig_dir / f"{c.label.replace('(', '_').rstrip(')')}.png")
        plot_scores(cases, fig_dir / "scores.png")
    return 0 if all(c.improved for c in cases) else 3


def cmd_make_corpus(args) -> int:
    corpus.write_corpus(args.out, n_rain=args.n_rain, n_clean=args.n_clean,
                        shape=(args.size, args.size))
    print(args.out)
    return 0


ALIASES = {"m": ("-m", "--patch-size"), "K": ("-K", "--atoms"), "L": ("-L", "--sparsity")}


def _add_run_flags(p, *names):
    table = {
        "m": dict(type=int, help="patch side"),
        "K": dict(type=int, help="atoms per dictionary"),
        "L": dict(type=int, help="sparsity for rain-only coding / training"),
        "th_s": dict(type=float, help="rain-region threshold on s_i"),
        "th_c": dict(type=float, help="atom correlation threshold"),
        "eps": dict(type=float, help="fixed bounded error in 8-bit units (default adaptive)"),
        "max_atoms": dict(type=int, help="atom cap for error-bounded coding"),
        "dilation_radius": dict(type=int),
        "stride": dict(type=int, help="patch stride (1 = all overlapping patches)"),
        "seed": dict(type=int),
        "threads": dict(type=int, help="patch-loop workers (env SD_THREADS)"),
        "iters": dict(type=int, help="K-SVD sweeps"),
        "patches": dict(type=int, help="training patches to sample"),
        "rain_coverage": dict(type=float, help="masked fraction for a rain patch"),
        "dn": dict(help="non-rain dictionary file"),
        "dr": dict(help="rain dictionary file"),
    }
    for name in names:
        flags = ALIASES.get(name, ("--" + name.replace("_", "-"),))
        p.add_argument(*flags, dest=name, default=None, **table[name])
    p.add_argument("--config", help="JSON file with RunConfig keys")
    if "stride" in names:
        p.add_argument("--no-mean-removal", dest="mean_removal", action="store_const",
                       const=False, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdrain", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    derain_flags = ("L", "th_s", "th_c", "eps", "max_atoms", "dilation_radius",
                    "stride", "threads", "dn", "dr")

    p = sub.add_parser("train-dict", help="learn a dictionary from an image directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--masks", help="directory of rain masks (same file names)")
    p.add_argument("--kind", choices=("rain", "nonrain"))
    p.add_argument("--out", required=True)
    p.add_argument("--figures")
    _add_run_flags(p, "m", "K", "L", "iters", "patches", "rain_coverage", "seed")
    p.set_defaults(func=cmd_train_dict)

    p = sub.add_parser("derain", help="remove rain from one image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--map-out")
    _add_run_flags(p, *derain_flags)
    p.set_defaults(func=cmd_derain)

    p = sub.add_parser("map", help="export the shrinkage map of an image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_run_flags(p, "L", "dilation_radius", "stride", "dr")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("corr", help="correlation statistics between two dictionaries")
    p.add_argument("--th", type=float)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--figures")
    _add_run_flags(p, "dn", "dr", "th_c")
    p.set_defaults(func=cmd_corr)

    p = sub.add_parser("synth", help="paste rain from a masked rain image onto a clean one")
    p.add_argument("--clean", required=True)
    p.add_argument("--rain", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--patch", type=int, default=16)
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rotate90", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="PSNR/SSIM of test images against clean references")
    p.add_argument("--pair", nargs=2, action="append", metavar=("CLEAN", "TEST"))
    p.add_argument("--clean-dir")
    p.add_argument("--test-dir")
    p.add_argument("--figures")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="synthetic-rain benchmark on the generated corpus")
    p.add_argument("--profile", choices=("ci", "production"), default="ci")
    p.add_argument("--figures")
    p.add_argument("--save-dicts")
    _add_run_flags(p, *derain_flags)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("make-corpus", help="write the generated corpus as PNG files")
    p.add_argument("--out", required=True)
    p.add_argument("--n-rain", type=int, default=6)
    p.add_argument("--n-clean", type=int, default=2)
    p.add_argument("--size", type=int, default=96)
    p.set_defaults(func=cmd_make_corpus)
    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ImageIOError, DictionaryFormatError, SamplingError, ValueError,
            OSError) as exc:
        print(f"sdrain: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())
