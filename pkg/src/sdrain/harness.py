"""Synthetic-rain benchmark on the generated corpus.

Trains a dictionary pair, pastes real-looking rain onto each clean texture
(as is and rotated by 90 degrees), removes it, and scores both the rainy
and the derained image against the clean one.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import corpus
from .derain import DerainConfig, derain
from .dictionary import DictionarySet, ksvd_train
from .evaluation import extract_rain_overlay, psnr, ssim, synthesize_rain
from .images import Image
from .patches import sample_training_patches

log = logging.getLogger(__name__)


@dataclass
class HarnessConfig:
    m: int = 8
    K: int = 128
    n_patches: int = 3000
    iters: int = 30
    L: int = 3
    shape: tuple[int, int] = (96, 96)
    n_rain_images: int = 6
    n_clean_per_texture: int = 2
    overlay_m: int = 16
    overlay_count: int = 16
    source_seed: int = 999
    source_coverage: float = 0.9
    overlay_seed: int = 5
    seed: int = 0
    textures: tuple[str, ...] = corpus.TEXTURES

    @classmethod
    def production(cls) -> "HarnessConfig":
        return cls(m=16, K=1024, n_patches=15000, shape=(256, 256), n_rain_images=24,
                   n_clean_per_texture=6, overlay_m=32)


@dataclass
class Case:
    name: str
    rotated: bool
    clean: Image
    rainy: Image
    derained: Image
    shrinkage: np.ndarray
    eps: float
    scores: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return f"{self.name}(rot90)" if self.rotated else self.name

    @property
    def improved(self) -> bool:
        s = self.scores
        return (s["psnr_derained"] > s["psnr_rainy"]
                and s["ssim_derained"] > s["ssim_rainy"])


def train_dictionaries(cfg: HarnessConfig) -> DictionarySet:
    t0 = time.perf_counter()
    rain = corpus.rain_corpus(cfg.n_rain_images, cfg.shape)
    clean = [(img, None) for img in corpus.clean_corpus(cfg.n_clean_per_texture, cfg.shape)]
    pr = sample_training_patches(rain, cfg.m, cfg.n_patches, 0.5, seed=cfg.seed + 1)
    pn = sample_training_patches(clean, cfg.m, cfg.n_patches, seed=cfg.seed + 2)
    dr = ksvd_train(pr, cfg.K, cfg.L, cfg.iters, seed=cfg.seed + 3, kind="rain", m=cfg.m)
    dn = ksvd_train(pn, cfg.K, cfg.L, cfg.iters, seed=cfg.seed + 4, kind="nonrain", m=cfg.m)
    log.info("trained m=%d K=%d dictionaries in %.1fs", cfg.m, cfg.K,
             time.perf_counter() - t0)
    return DictionarySet(dn, dr)


def run_synthetic(dicts: DictionarySet, cfg: HarnessConfig = HarnessConfig(),
                  derain_cfg: DerainConfig = DerainConfig(), threads: int = 1) -> list[Case]:
    src, mask = corpus.rain_image(cfg.shape, seed=cfg.source_seed,
                                  coverage=cfg.source_coverage)
    overlay = extract_rain_overlay(src, mask, cfg.overlay_m, cfg.overlay_count,
                                   seed=cfg.overlay_seed)
    cases = []
    for name in cfg.textures:
        base = corpus.texture(name, cfg.shape)
        for rotated in (False, True):
            clean = base.with_luma(np.rot90(base.luma).copy()) if rotated else base
            rainy = synthesize_rain(clean, overlay, rotate90=rotated)
            res = derain(rainy, dicts, derain_cfg, threads=threads)
            case = Case(name, rotated, clean, rainy, res.image, res.shrinkage, res.eps)
            case.scores = {
                "psnr_rainy": psnr(rainy, clean),
                "ssim_rainy": ssim(rainy, clean),
                "psnr_derained": psnr(res.image, clean),
                "ssim_derained": ssim(res.image, clean),
            }
            log.info("%s: %s", case.label, case.scores)
            cases.append(case)
    return cases


def config_dict(cfg: HarnessConfig) -> dict:
    return asdict(cfg)
