"""Videos, prediction windows, pixel re-arrangement and the synthetic benchmark."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import numerics as nx

IMAGE_SUFFIXES = (".png", ".pgm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


@dataclass
class VideoSequence:
    frames: np.ndarray  # [T, C, H, W] in [0, 1]
    source: str = ""
    labels: np.ndarray | None = None  # [T] of {0, 1}

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 4:
            raise ValueError(f"frames must be [T, C, H, W], got shape {self.frames.shape}")
        if self.frames.size and (self.frames.min() < 0.0 or self.frames.max() > 1.0):
            raise ValueError(f"{self.source or 'video'}: pixel values outside [0, 1]")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (len(self.frames),):
                raise ValueError(
                    f"{self.source or 'video'}: {len(self.labels)} labels for {len(self.frames)} frames"
                )
            if not np.isin(self.labels, (0, 1)).all():
                raise ValueError("labels must be 0 or 1")

    def __len__(self):
        return len(self.frames)

    @property
    def frame_shape(self):
        return self.frames.shape[1:]


@dataclass(frozen=True)
class WindowSpec:
    context: int = 8
    predict: int = 5
    stride: int = 1

    def __post_init__(self):
        if self.context < 1 or self.predict < 1 or self.stride < 1:
            raise ValueError(f"invalid window spec {self}")

    @property
    def span(self):
        return 2 * self.context + self.predict


@dataclass
class PredictionWindow:
    before: np.ndarray  # F: [i, C, H, W]
    target: np.ndarray  # P: [p, C, H, W]
    after: np.ndarray  # B: [i, C, H, W]
    start: int  # index of the first target frame in the source video


def window_count(length: int, spec: WindowSpec) -> int:
    n = length - spec.span + 1
    return max(0, (n - 1) // spec.stride + 1) if n > 0 else 0


def window_starts(length: int, spec: WindowSpec) -> range:
    return range(spec.context, length - spec.predict - spec.context + 1, spec.stride)


def make_window(seq: VideoSequence, start: int, spec: WindowSpec) -> PredictionWindow:
    i, p = spec.context, spec.predict
    if start < i or start + p + i > len(seq):
        raise ValueError(f"window at {start} does not fit a video of length {len(seq)}")
    f = seq.frames
    return PredictionWindow(f[start - i : start], f[start : start + p], f[start + p : start + p + i], start)


def iter_windows(seq: VideoSequence, spec: WindowSpec) -> Iterator[PredictionWindow]:
    for t in window_starts(len(seq), spec):
        yield make_window(seq, t, spec)


def stack_windows(windows: Sequence[PredictionWindow]):
    """Batch windows into (before, target, after) arrays of shape [B, n, C, H, W]."""
    return (
        np.stack([w.before for w in windows]),
        np.stack([w.target for w in windows]),
        np.stack([w.after for w in windows]),
    )


# ---------------------------------------------------------------- space-to-depth


def space_to_depth(x, factor: int):
    """[..., C, H, W] -> [..., C*f*f, H/f, W/f]. Works on arrays and Tensors."""
    if factor == 1:
        return x
    *lead, c, h, w = x.shape
    if h % factor or w % factor:
        raise ValueError(f"space_to_depth: {h}x{w} not divisible by {factor}")
    f = factor
    n = len(lead)
    shape = (*lead, c, h // f, f, w // f, f)
    axes = tuple(range(n)) + tuple(n + a for a in (0, 2, 4, 1, 3))
    out_shape = (*lead, c * f * f, h // f, w // f)
    if isinstance(x, nx.Tensor):
        return nx.reshape(nx.transpose(nx.reshape(x, shape), axes), out_shape)
    return np.ascontiguousarray(x.reshape(shape).transpose(axes)).reshape(out_shape)


def depth_to_space(x, factor: int):
    """Exact inverse of :func:`space_to_depth`."""
    if factor == 1:
        return x
    *lead, cf, hs, ws = x.shape
    f = factor
    if cf % (f * f):
        raise ValueError(f"depth_to_space: {cf} channels not divisible by {f * f}")
    c = cf // (f * f)
    n = len(lead)
    shape = (*lead, c, f, f, hs, ws)
    axes = tuple(range(n)) + tuple(n + a for a in (0, 3, 1, 4, 2))
    out_shape = (*lead, c, hs * f, ws * f)
    if isinstance(x, nx.Tensor):
        return nx.reshape(nx.transpose(nx.reshape(x, shape), axes), out_shape)
    return np.ascontiguousarray(x.reshape(shape).transpose(axes)).reshape(out_shape)


# ---------------------------------------------------------------- files


def load_frame_dir(path, target_size: int | tuple[int, int] = 256, grayscale: bool = False) -> VideoSequence:
    """Decode every image in ``path`` (lexicographic order), resize bilinearly, scale to [0, 1]."""
    from PIL import Image

    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"not a directory: {path}")
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise ValueError(f"no image files in {path}")
    if isinstance(target_size, int):
        target_size = (target_size, target_size)
    frames = []
    for f in files:
        try:
            with Image.open(f) as im:
                im = im.convert("L" if grayscale else ("L" if im.mode in ("L", "I", "I;16", "1") else "RGB"))
                im = im.resize((target_size[1], target_size[0]), Image.BILINEAR)
                arr = np.asarray(im, dtype=np.float32) / 255.0
        except OSError as exc:
            raise ValueError(f"cannot read frame {f}: {exc}") from exc
        arr = arr[None] if arr.ndim == 2 else arr.transpose(2, 0, 1)
        if frames and arr.shape != frames[0].shape:
            raise ValueError(f"frame {f.name} has shape {arr.shape}, expected {frames[0].shape}")
        frames.append(arr)
    labels = None
    label_file = path / "labels.txt"
    if label_file.exists():
        labels = read_labels(label_file)
    return VideoSequence(np.stack(frames), source=str(path), labels=labels)


def save_frame_dir(seq: VideoSequence, path) -> None:
    """Write frames as zero-padded PNGs (and labels.txt when labels exist)."""
    from PIL import Image

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(len(seq))))
    for t, frame in enumerate(seq.frames):
        arr = np.clip(np.rint(frame * 255.0), 0, 255).astype(np.uint8)
        img = Image.fromarray(arr[0] if arr.shape[0] == 1 else arr.transpose(1, 2, 0))
        img.save(path / f"{t:0{width}d}.png")
    if seq.labels is not None:
        write_labels(seq.labels, path / "labels.txt")


def read_labels(path) -> np.ndarray:
    values = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line not in ("0", "1"):
                raise ValueError(f"{path}:{n}: label must be 0 or 1, got {line!r}")
            values.append(int(line))
    return np.array(values, dtype=np.int64)


def write_labels(labels, path) -> None:
    with open(path, "w") as fh:
        fh.writelines(f"{int(v)}\n" for v in labels)


def list_video_dirs(root) -> list[Path]:
    root = Path(root)
    return sorted(p for p in root.iterdir() if p.is_dir())


# ---------------------------------------------------------------- synthetic scenes

ANOMALY_KINDS = ("none", "speed", "shape", "teleport")


@dataclass
class SyntheticSceneConfig:
    canvas: int = 32
    length: int = 100
    num_objects: int = 2
    object_size: int = 6
    object_kind: str = "square"  # normal objects: square | circle
    min_speed: float = 0.5
    max_speed: float = 1.0
    intensity: float = 1.0
    anomaly: str = "none"
    anomaly_start: int = 40
    anomaly_end: int = 60
    speed_factor: float = 4.0
    teleport_distance: float = 10.0
    edge_softness: float = 1.5  # width in pixels of the anti-aliased object border; 0 = hard edges
    background: float = 0.3  # amplitude of a static low-frequency texture behind the objects
    seed: int = 0

    def validate(self):
        if self.anomaly not in ANOMALY_KINDS:
            raise ValueError(f"unknown anomaly kind {self.anomaly!r}; expected one of {ANOMALY_KINDS}")
        if self.object_kind not in ("square", "circle"):
            raise ValueError(f"unknown object kind {self.object_kind!r}")
        if self.edge_softness < 0 or not 0.0 <= self.background <= 0.5:
            raise ValueError("edge_softness must be >= 0 and background within [0, 0.5]")
        if self.canvas < self.object_size + 2 or self.length < 1 or self.num_objects < 1:
            raise ValueError("canvas, length and object count must be positive and fit the objects")
        if self.anomaly != "none" and not (0 <= self.anomaly_start < self.anomaly_end <= self.length):
            raise ValueError(
                f"anomaly interval [{self.anomaly_start}, {self.anomaly_end}) outside video of length {self.length}"
            )


def _coverage(dist, soft: float):
    # dist: signed distance to the shape border, negative inside
    if soft <= 0:
        return (dist <= 0).astype(np.float64)
    return np.clip(0.5 - dist / soft, 0.0, 1.0)


def _draw(canvas: np.ndarray, cx: float, cy: float, size: int, kind: str, value: float, soft: float = 0.0):
    n = canvas.shape[0]
    yy, xx = np.mgrid[0:n, 0:n]
    r = size / 2.0
    # pixel centers at +0.5
    dx = np.abs(xx + 0.5 - cx)
    dy = np.abs(yy + 0.5 - cy)
    if kind == "square":
        dist = np.maximum(dx, dy) - r
    elif kind == "circle":
        dist = np.hypot(dx, dy) - r
    elif kind == "cross":
        arm = max(1.0, size / 6.0)
        r2 = r * 1.4
        dist = np.minimum(np.maximum(dx - arm, dy - r2), np.maximum(dy - arm, dx - r2))
    elif kind == "bar":
        dist = np.maximum(dx - r * 2.0, dy - max(1.0, r / 3.0))
    else:
        raise ValueError(kind)
    alpha = _coverage(dist, soft)
    canvas *= 1.0 - alpha
    canvas += alpha * value


def _texture(n: int, amplitude: float, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:n, 0:n] / n
    out = np.zeros((n, n))
    for _ in range(3):
        fy, fx = rng.integers(1, 4, size=2)
        out += np.sin(2 * np.pi * (fy * yy + fx * xx) + rng.uniform(0, 2 * np.pi))
    return amplitude * (out - out.min()) / max(out.max() - out.min(), 1e-12)


def synth_generate(config: SyntheticSceneConfig) -> VideoSequence:
    """Render moving objects bouncing inside the canvas; pure function of ``config``.

    The first object is the one that misbehaves during the anomaly interval
    (speed-up, shape swap to a cross, or a positional jump).
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    n = config.canvas
    r = config.object_size / 2.0
    lo, hi = r, n - r
    pos = rng.uniform(lo, hi, size=(config.num_objects, 2))
    speed = rng.uniform(config.min_speed, config.max_speed, size=config.num_objects)
    angle = rng.uniform(0.0, 2 * np.pi, size=config.num_objects)
    vel = np.stack([speed * np.cos(angle), speed * np.sin(angle)], axis=1)
    backdrop = _texture(n, config.background, rng) if config.background > 0 else np.zeros((n, n))

    frames = np.zeros((config.length, 1, n, n), dtype=np.float32)
    labels = np.zeros(config.length, dtype=np.int64)
    a0, a1 = config.anomaly_start, config.anomaly_end
    if config.anomaly != "none":
        labels[a0:a1] = 1

    for t in range(config.length):
        abnormal = config.anomaly != "none" and a0 <= t < a1
        if abnormal and config.anomaly == "teleport" and t == a0:
            jump = rng.uniform(0.0, 2 * np.pi)
            pos[0] += config.teleport_distance * np.array([np.cos(jump), np.sin(jump)])
            pos[0] = np.clip(pos[0], lo, hi)
        canvas = backdrop.copy()
        for k in range(config.num_objects):
            kind = config.object_kind
            if abnormal and k == 0 and config.anomaly == "shape":
                kind = "cross"
            _draw(canvas, pos[k, 0], pos[k, 1], config.object_size, kind, config.intensity, config.edge_softness)
        frames[t, 0] = canvas
        for k in range(config.num_objects):
            step = vel[k] * (config.speed_factor if (abnormal and k == 0 and config.anomaly == "speed") else 1.0)
            pos[k] += step
            for d in range(2):
                if pos[k, d] < lo:
                    pos[k, d] = 2 * lo - pos[k, d]
                    vel[k, d] = -vel[k, d]
                elif pos[k, d] > hi:
                    pos[k, d] = 2 * hi - pos[k, d]
                    vel[k, d] = -vel[k, d]
                pos[k, d] = min(max(pos[k, d], lo), hi)
    src = f"synth(seed={config.seed},anomaly={config.anomaly})"
    return VideoSequence(np.clip(frames, 0.0, 1.0), source=src, labels=labels)


@dataclass
class SyntheticBenchmark:
    train: list[VideoSequence] = field(default_factory=list)
    test: list[VideoSequence] = field(default_factory=list)


def synth_benchmark(
    seed: int = 0,
    canvas: int = 32,
    n_train: int = 8,
    n_test: int = 4,
    train_length: int = 100,
    test_length: int = 100,
    test_anomalies: Sequence[str] = ("speed", "shape", "speed", "shape"),
    anomaly_span: tuple[int, int] | None = None,
    **scene,
) -> SyntheticBenchmark:
    """Normal-only training videos plus test videos each holding one anomaly interval."""
    ss = np.random.SeedSequence(seed)
    seeds = ss.generate_state(n_train + n_test)
    bench = SyntheticBenchmark()
    for k in range(n_train):
        cfg = SyntheticSceneConfig(canvas=canvas, length=train_length, anomaly="none", seed=int(seeds[k]), **scene)
        bench.train.append(synth_generate(cfg))
    a0, a1 = anomaly_span or (int(test_length * 0.4), int(test_length * 0.65))
    for k in range(n_test):
        kind = test_anomalies[k % len(test_anomalies)]
        cfg = SyntheticSceneConfig(
            canvas=canvas, length=test_length, anomaly=kind, anomaly_start=a0, anomaly_end=a1,
            seed=int(seeds[n_train + k]), **scene,
        )
        bench.test.append(synth_generate(cfg))
    return bench


def save_benchmark(bench: SyntheticBenchmark, out_dir) -> None:
    out_dir = Path(out_dir)
    for split, videos in (("train", bench.train), ("test", bench.test)):
        for k, v in enumerate(videos):
            save_frame_dir(v, out_dir / split / f"{k:02d}")


def load_benchmark(root, target_size=None) -> SyntheticBenchmark:
    """Load ``root/train/*`` and ``root/test/*`` frame directories."""
    root = Path(root)
    bench = SyntheticBenchmark()
    for split in ("train", "test"):
        d = root / split
        if not d.is_dir():
            continue
        for vd in list_video_dirs(d):
            if target_size is None:
                from PIL import Image

                first = sorted(p for p in vd.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)[0]
                with Image.open(first) as im:
                    size = (im.height, im.width)
            else:
                size = target_size
            getattr(bench, split).append(load_frame_dir(vd, size))
    return bench

