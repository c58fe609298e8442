"""Adversarial training loop, checkpoints and the training log."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import numerics as nx
from .data import PredictionWindow, VideoSequence, WindowSpec, make_window, stack_windows, window_starts
from .discriminator import DiscriminatorConfig, DiscriminatorParams, discriminate, lsgan_g_loss
from .generator import GeneratorConfig, GeneratorParams, predict_window, reverse_scheduled_mask
from .losses import (
    LossBundle,
    LossWeights,
    decouple_loss,
    discriminator_total_loss,
    generator_total_loss,
    gradient_loss,
    intensity_loss,
)

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
LOG_HEADER = ("iteration", "L_int", "L_gd", "L_adv_g", "L_dec", "L_G", "L_D")


class TrainingDiverged(FloatingPointError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class TrainConfig:
    lr_g: float = 1e-4
    lr_d: float = 1e-5
    batch_size: int = 4
    iterations: int = 1000
    weights: LossWeights = field(default_factory=LossWeights)
    ss_start_prob: float = 0.5
    ss_end_prob: float = 1.0
    ss_ramp_iters: int = 5000
    grad_clip: float = 10.0
    # auxiliary terms (gradient, adversarial, decouple) are off for this many
    # iterations, then ramp linearly to full weight over the same number
    aux_warmup_iters: int = 0
    seed: int = 0
    adversarial: bool = True

    def __post_init__(self):
        if self.lr_g <= 0 or self.lr_d <= 0:
            raise ValueError("learning rates must be positive")
        if self.aux_warmup_iters < 0:
            raise ValueError("aux_warmup_iters must be non-negative")
        if self.iterations <= 0 or self.batch_size <= 0:
            raise ValueError("iteration budget and batch size must be positive")


def _params_digest(params) -> str:
    import hashlib

    h = hashlib.sha256()
    for p in params:
        h.update(p.name.encode())
        h.update(np.ascontiguousarray(p.data).tobytes())
    return h.hexdigest()


class Trainer:
    """Owns the generator, the discriminator and both optimizers."""

    def __init__(self, gen_config: GeneratorConfig, train_config: TrainConfig,
                 disc_config: DiscriminatorConfig | None = None, dtype=nx.DEFAULT_DTYPE):
        self.gen_config = gen_config
        self.config = train_config
        self.disc_config = disc_config or DiscriminatorConfig(
            sequence_length=gen_config.predict, frame_channels=gen_config.frame_channels
        )
        seed = train_config.seed
        self.generator = GeneratorParams(gen_config, np.random.default_rng([seed, 0]), dtype=dtype)
        self.discriminator = DiscriminatorParams(self.disc_config, np.random.default_rng([seed, 1]), dtype=dtype)
        self.opt_g = nx.Adam(self.generator.parameters(), train_config.lr_g)
        self.opt_d = nx.Adam(self.discriminator.parameters(), train_config.lr_d)
        self.sample_rng = np.random.default_rng([seed, 2])
        self.mask_rng = np.random.default_rng([seed, 3])
        self.iteration = 0
        self.history: list[LossBundle] = []

    # ------------------------------------------------------------ batches

    def sample_batch(self, videos: Sequence[VideoSequence]) -> list[PredictionWindow]:
        spec = WindowSpec(self.gen_config.context, self.gen_config.predict)
        counts = np.array([len(window_starts(len(v), spec)) for v in videos])
        if counts.sum() == 0:
            raise ValueError(f"no training video is long enough for a {spec.span}-frame window")
        flat = self.sample_rng.integers(0, counts.sum(), size=self.config.batch_size)
        bounds = np.cumsum(counts)
        out = []
        for n in flat:
            v = int(np.searchsorted(bounds, n, side="right"))
            local = int(n - (bounds[v - 1] if v else 0))
            out.append(make_window(videos[v], spec.context + local, spec))
        return out

    # ------------------------------------------------------------ steps

    def loss_weights(self, iteration: int | None = None) -> LossWeights:
        """Weights in effect at ``iteration`` (default: the current one)."""
        it = self.iteration if iteration is None else iteration
        w = self.config.weights
        if not self.config.adversarial:
            w = dataclasses.replace(w, adversarial=0.0)
        n = self.config.aux_warmup_iters
        if n > 0:
            ramp = min(max((it - n) / n, 0.0), 1.0)
            w = dataclasses.replace(w, gradient=w.gradient * ramp, adversarial=w.adversarial * ramp,
                                    decouple=w.decouple * ramp)
        return w

    def _masks(self, batch):
        c = self.config
        fwd = reverse_scheduled_mask(self.iteration, c.ss_start_prob, c.ss_end_prob, c.ss_ramp_iters,
                                     self.mask_rng, self.gen_config, batch)
        bwd = reverse_scheduled_mask(self.iteration, c.ss_start_prob, c.ss_end_prob, c.ss_ramp_iters,
                                     self.mask_rng, self.gen_config, batch)
        return fwd, bwd

    def generator_step(self, before, target, after):
        """One generator update with the discriminator frozen. Returns (prediction, component floats)."""
        weights = self.loss_weights()
        disc_params = self.discriminator.parameters()
        # frozen through forward and backward: the discriminator collects no gradient here
        for p in disc_params:
            p.requires_grad = False
        try:
            pred = predict_window(self.generator, before, after, self._masks(len(before)))
            l_int = intensity_loss(pred.frames, target)
            l_gd = gradient_loss(pred.frames, target)
            l_dec = decouple_loss(pred.increments)
            l_adv = lsgan_g_loss(discriminate(pred.frames, self.discriminator)) if self.config.adversarial else None
            total_g = generator_total_loss(l_int, l_gd, l_adv, l_dec, weights)
            parts = {
                "L_int": l_int.item(), "L_gd": l_gd.item(),
                "L_adv_g": l_adv.item() if l_adv is not None else 0.0, "L_dec": l_dec.item(),
            }
            if not np.isfinite(total_g.item()):
                raise TrainingDiverged(f"iteration {self.iteration}: non-finite generator loss {parts}")
            self.opt_g.zero_grad()
            nx.backprop(total_g)
        finally:
            for p in disc_params:
                p.requires_grad = True
        nx.clip_grad_norm(self.opt_g.params, self.config.grad_clip)
        self.opt_g.step()
        return pred, parts

    def discriminator_step(self, target, fake) -> float:
        """One discriminator update on real targets and detached predictions."""
        fake = nx.Tensor(np.asarray(fake.data if isinstance(fake, nx.Tensor) else fake))
        d_loss = discriminator_total_loss(discriminate(target, self.discriminator),
                                          discriminate(fake, self.discriminator))
        l_d = d_loss.item()
        if not np.isfinite(l_d):
            raise TrainingDiverged(f"iteration {self.iteration}: non-finite discriminator loss L_D={l_d}")
        self.opt_d.zero_grad()
        nx.backprop(d_loss)
        nx.clip_grad_norm(self.opt_d.params, self.config.grad_clip)
        self.opt_d.step()
        return l_d

    def train_step(self, windows: Sequence[PredictionWindow]) -> LossBundle:
        before, target, after = stack_windows(windows)
        dtype = self.generator.dtype
        before, target, after = (a.astype(dtype, copy=False) for a in (before, target, after))
        weights = self.loss_weights()
        pred, parts = self.generator_step(before, target, after)
        l_d = self.discriminator_step(target, pred.frames) if self.config.adversarial else float("nan")
        bundle = LossBundle(
            intensity=parts["L_int"], gradient=parts["L_gd"], adversarial_g=parts["L_adv_g"],
            decouple=parts["L_dec"], total_g=0.0, total_d=l_d,
        )
        bundle.total_g = generator_total_loss(bundle.intensity, bundle.gradient, bundle.adversarial_g,
                                              bundle.decouple, weights)
        self.iteration += 1
        self.history.append(bundle)
        return bundle

    def fit(self, videos: Sequence[VideoSequence], iterations: int | None = None,
            log_path=None, callback: Callable[[int, LossBundle], None] | None = None,
            log_every: int = 50) -> list[LossBundle]:
        n = iterations if iterations is not None else self.config.iterations - self.iteration
        writer = None
        fh = None
        if log_path is not None:
            log_path = Path(log_path)
            log_path.parent.mkdir(parents=True, exist_ok=True)
            new = not log_path.exists() or self.iteration == 0
            fh = open(log_path, "w" if new else "a", newline="")
            writer = csv.writer(fh)
            if new:
                writer.writerow(LOG_HEADER)
        start = time.time()
        out = []
        try:
            for _ in range(n):
                bundle = self.train_step(self.sample_batch(videos))
                out.append(bundle)
                if writer is not None:
                    writer.writerow([self.iteration, *(repr(float(v)) for v in bundle.as_row())])
                if callback is not None:
                    callback(self.iteration, bundle)
                if log_every and self.iteration % log_every == 0:
                    log.info("iter %d  L_int=%.5f L_gd=%.5f L_dec=%.4f L_G=%.5f L_D=%.4f  (%.1fs)",
                             self.iteration, bundle.intensity, bundle.gradient, bundle.decouple,
                             bundle.total_g, bundle.total_d, time.time() - start)
        finally:
            if fh is not None:
                fh.close()
        return out

    # ------------------------------------------------------------ persistence

    def digests(self) -> dict:
        return {
            "generator": _params_digest(self.generator.parameters()),
            "discriminator": _params_digest(self.discriminator.parameters()),
        }

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = {
            "format_version": CHECKPOINT_VERSION,
            "iteration": self.iteration,
            "dtype": np.dtype(self.generator.dtype).name,
            "generator_config": dataclasses.asdict(self.gen_config),
            "discriminator_config": dataclasses.asdict(self.disc_config),
            "train_config": dataclasses.asdict(self.config),
            "adam_steps": {"g": self.opt_g.state.step, "d": self.opt_d.state.step},
            "rng": {"sample": self.sample_rng.bit_generator.state, "mask": self.mask_rng.bit_generator.state},
        }
        arrays = {"__meta__": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
        for tag, opt in (("g", self.opt_g), ("d", self.opt_d)):
            for p in opt.params:
                arrays[f"param/{p.name}"] = p.data
                arrays[f"adam_{tag}.m/{p.name}"] = opt.state.m[p.name]
                arrays[f"adam_{tag}.v/{p.name}"] = opt.state.v[p.name]
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path) -> "Trainer":
        path = Path(path)
        try:
            with np.load(path, allow_pickle=False) as z:
                arrays = {k: z[k] for k in z.files}
        except (OSError, ValueError) as exc:
            raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc
        if "__meta__" not in arrays:
            raise CheckpointError(f"{path}: missing metadata block")
        try:
            meta = json.loads(arrays.pop("__meta__").tobytes().decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: corrupt metadata ({exc})") from exc
        version = meta.get("format_version")
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: checkpoint format {version}, this build reads {CHECKPOINT_VERSION}")
        tc = dict(meta["train_config"])
        tc["weights"] = LossWeights(**tc["weights"])
        dc = dict(meta["discriminator_config"])
        dc["channels"] = tuple(dc["channels"])
        trainer = cls(GeneratorConfig(**meta["generator_config"]), TrainConfig(**tc), DiscriminatorConfig(**dc),
                      dtype=np.dtype(meta["dtype"]))
        for tag, opt in (("g", trainer.opt_g), ("d", trainer.opt_d)):
            for p in opt.params:
                try:
                    p.data[...] = arrays[f"param/{p.name}"]
                    opt.state.m[p.name][...] = arrays[f"adam_{tag}.m/{p.name}"]
                    opt.state.v[p.name][...] = arrays[f"adam_{tag}.v/{p.name}"]
                except KeyError as exc:
                    raise CheckpointError(f"{path}: missing tensor {exc}") from exc
                except ValueError as exc:
                    raise CheckpointError(f"{path}: tensor {p.name} has the wrong shape ({exc})") from exc
            opt.state.step = int(meta["adam_steps"][tag])
        trainer.iteration = int(meta["iteration"])
        trainer.sample_rng.bit_generator.state = meta["rng"]["sample"]
        trainer.mask_rng.bit_generator.state = meta["rng"]["mask"]
        return trainer


def read_training_log(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]
