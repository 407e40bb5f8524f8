"""Deterministic toy latent-diffusion pipeline with hookable attention.

The denoiser is a stack of attention blocks with seeded random weights. It is
not trained; it only has to be a fixed, continuous function of (latent, text,
timestep) whose attention layers can be intercepted.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from layoutmod.errors import InvalidInputError
from layoutmod.layout import LayoutCondition, ResolvedLayout, resolve_layout
from layoutmod.modulation import (
    ModulationParams,
    area_matrix,
    build_r_cross,
    build_r_self,
    compute_lambda,
    modulate,
)
from layoutmod.tensor import (
    RngStream,
    box_muller,
    fnv1a64,
    matmul,
    row_softmax,
    splitmix64_next,
    splitmix64_take,
    u64_to_signed_unit,
    uniform_signed,
)

BETA_START = 1e-4
BETA_END = 0.02
TRAINING_STEPS = 1000


class DiffusionSchedule:
    """Linear-beta schedule; ``alpha_bar(i)`` is the cumulative product up to timestep ``i``."""

    def __init__(self, training_steps: int = TRAINING_STEPS, ddim_steps: int = 50):
        if ddim_steps < 1 or training_steps < ddim_steps:
            raise InvalidInputError("need 1 <= ddim_steps <= training_steps")
        self.training_steps = training_steps
        self.ddim_steps = ddim_steps
        self.betas = np.linspace(BETA_START, BETA_END, training_steps)
        self.alpha_bars = np.cumprod(1.0 - self.betas)
        # evenly spaced, descending, ending at timestep 0
        self.timesteps = [(i * training_steps) // ddim_steps for i in range(ddim_steps)][::-1]

    def alpha_bar(self, index: int) -> float:
        """``index = -1`` denotes the clean endpoint with alpha_bar = 1."""
        return 1.0 if index < 0 else float(self.alpha_bars[index])

    def normalized(self, index: int) -> float:
        return index / self.training_steps


def ddim_update(z_t: np.ndarray, eps: np.ndarray, alpha_bar_t: float, alpha_bar_prev: float) -> np.ndarray:
    x0 = (z_t - math.sqrt(1.0 - alpha_bar_t) * eps) / math.sqrt(alpha_bar_t)
    return math.sqrt(alpha_bar_prev) * x0 + math.sqrt(1.0 - alpha_bar_prev) * eps


def ddim_step(z_t: np.ndarray, eps: np.ndarray, t: int, t_prev: int, schedule: DiffusionSchedule) -> np.ndarray:
    """Deterministic (eta = 0) DDIM update from timestep ``t`` to ``t_prev`` (``-1`` = clean)."""
    if not t > t_prev:
        raise InvalidInputError(f"ddim_step needs t > t_prev, got {t} -> {t_prev}")
    return ddim_update(z_t, eps, schedule.alpha_bar(t), schedule.alpha_bar(t_prev))


# ---------------------------------------------------------------- text side


def encode_text(tokens: Sequence[str], dim: int = 8) -> np.ndarray:
    """Pseudo text embedding: one row of ``dim`` values in [-1, 1) per token.

    Row ``j`` is drawn from a splitmix64 stream seeded with the token's FNV-1a
    hash xor-ed with the first splitmix64 output for position ``j``.
    """
    if not tokens:
        raise InvalidInputError("encode_text needs at least one token")
    rows = []
    for j, tok in enumerate(tokens):
        pos, _ = splitmix64_next(RngStream(j))
        vals, _ = splitmix64_take(RngStream(fnv1a64(tok) ^ pos), dim)
        rows.append([u64_to_signed_unit(v) for v in vals])
    return np.array(rows, dtype=np.float64)


def splice_segment_features(
    full: np.ndarray, per_segment: Sequence[np.ndarray], k: np.ndarray
) -> np.ndarray:
    """Overwrite each segment's token rows with its separately encoded rows."""
    k = np.asarray(k)
    out = np.array(full, dtype=np.float64, copy=True)
    for n, rows in enumerate(per_segment, start=1):
        idx = np.flatnonzero(k == n)
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] != idx.size or rows.shape[1] != out.shape[1]:
            raise InvalidInputError(
                f"segment {n}: {rows.shape[0] if rows.ndim else 0} encoded rows for a span of {idx.size} tokens"
            )
        out[idx] = rows
    return out


def conditioned_text_features(cond: LayoutCondition, dim: int) -> np.ndarray:
    full = encode_text(cond.caption_tokens, dim)
    per_segment = [encode_text(toks, dim) for toks in cond.segment_tokens]
    return splice_segment_features(full, per_segment, cond.token_map)


# ---------------------------------------------------------------- denoiser


@dataclass(frozen=True)
class Block:
    resolution: int
    self_attention: bool = True
    cross_attention: bool = True


@dataclass(frozen=True)
class ToyModelSpec:
    latent_side: int = 16
    latent_channels: int = 4
    channels: int = 8
    text_dim: int = 8
    blocks: tuple[Block, ...] = (Block(16), Block(8))
    heads: int = 1
    weight_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(b if isinstance(b, Block) else Block(*b) for b in self.blocks))
        if min(self.channels, self.text_dim, self.latent_channels, self.heads) < 1:
            raise InvalidInputError("channels, text_dim, latent_channels and heads must be >= 1")
        if self.channels % self.heads:
            raise InvalidInputError("heads must divide channels")
        if not _is_pow2(self.latent_side):
            raise InvalidInputError("latent_side must be a power of two")
        for b in self.blocks:
            if not _is_pow2(b.resolution) or b.resolution > self.latent_side or b.resolution < 2:
                raise InvalidInputError(f"block resolution {b.resolution} must be a power of two in [2, latent_side]")

    @property
    def resolutions(self) -> list[int]:
        return sorted({b.resolution for b in self.blocks}, reverse=True)

    @property
    def attention_layers(self) -> list[tuple[int, str]]:
        """``(resolution, kind)`` for every attention layer in forward order."""
        out = []
        for b in self.blocks:
            if b.self_attention:
                out.append((b.resolution, "self"))
            if b.cross_attention:
                out.append((b.resolution, "cross"))
        return out

    def to_json(self) -> dict:
        d = asdict(self)
        d["blocks"] = [[b.resolution, b.self_attention, b.cross_attention] for b in self.blocks]
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "ToyModelSpec":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown model fields: {sorted(unknown)}")
        obj = dict(obj)
        if "blocks" in obj:
            obj["blocks"] = tuple(Block(*b) for b in obj["blocks"])
        return cls(**obj)


def _is_pow2(n: int) -> bool:
    return isinstance(n, int) and n >= 1 and n & (n - 1) == 0


class AttentionSite(NamedTuple):
    layer: int
    head: int
    kind: str
    resolution: int


# hook(logits, scale, site) -> replacement attention map, or None to keep softmax(logits / scale)
AttentionHook = Callable[[np.ndarray, float, AttentionSite], Optional[np.ndarray]]


@dataclass
class AttentionRecord:
    step: int
    t: float
    layer: int
    head: int
    kind: str
    resolution: int
    logits: np.ndarray
    scale: float
    raw: np.ndarray
    modulated: np.ndarray

    def to_json(self) -> dict:
        from layoutmod.tensor import matrix_to_json

        return {
            "step": self.step,
            "t": self.t,
            "layer": self.layer,
            "head": self.head,
            "kind": self.kind,
            "resolution": self.resolution,
            "raw": matrix_to_json(self.raw),
            "modulated": matrix_to_json(self.modulated),
        }


def _weights(seed: int, layer: int | str, role: str, fan_in: int, fan_out: int) -> np.ndarray:
    stream = RngStream((seed ^ fnv1a64(f"{layer}/{role}")) & 0xFFFFFFFFFFFFFFFF)
    w, _ = uniform_signed(stream, (fan_in, fan_out))
    return w / math.sqrt(fan_in)


def _normalize(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    return (x - mu) / np.sqrt(var + 1e-5)


def _pool(x: np.ndarray, side: int, res: int) -> np.ndarray:
    if res == side:
        return x
    f = side // res
    c = x.shape[1]
    return x.reshape(res, f, res, f, c).mean(axis=(1, 3)).reshape(res * res, c)


def _upsample(x: np.ndarray, res: int, side: int) -> np.ndarray:
    if res == side:
        return x
    f = side // res
    c = x.shape[1]
    g = x.reshape(res, res, c)
    return np.repeat(np.repeat(g, f, axis=0), f, axis=1).reshape(side * side, c)


class ToyDenoiser:
    """Noise predictor built from seeded attention blocks."""

    def __init__(self, spec: ToyModelSpec):
        self.spec = spec
        s, c, t = spec.weight_seed, spec.channels, spec.text_dim
        self.w_in = _weights(s, "in", "proj", spec.latent_channels, c)
        self.w_time = _weights(s, "time", "proj", c, c)
        self.w_out = _weights(s, "out", "proj", c, spec.latent_channels)
        self.layers = []
        for li, (res, kind) in enumerate(spec.attention_layers):
            ctx = c if kind == "self" else t
            self.layers.append(
                {
                    "q": _weights(s, li, "q", c, c),
                    "k": _weights(s, li, "k", ctx, c),
                    "v": _weights(s, li, "v", ctx, c),
                    "o": _weights(s, li, "o", c, c),
                }
            )

    def _time_embedding(self, timestep: int) -> np.ndarray:
        c = self.spec.channels
        half = c // 2
        freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half, 1))
        ang = timestep * freqs
        emb = np.concatenate([np.sin(ang), np.cos(ang), np.zeros(c - 2 * half)])
        return matmul(emb[None, :], self.w_time)

    def _attention(self, li, kind, res, x, context, hook, on_record):
        w = self.layers[li]
        heads = self.spec.heads
        d = self.spec.channels // heads
        q = matmul(x, w["q"])
        k = matmul(context, w["k"])
        v = matmul(context, w["v"])
        scale = math.sqrt(d)
        outs = []
        for h in range(heads):
            sl = slice(h * d, (h + 1) * d)
            logits = matmul(q[:, sl], k[:, sl].T)
            raw = row_softmax(logits, scale)
            site = AttentionSite(li, h, kind, res)
            attn = hook(logits, scale, site) if hook is not None else None
            if attn is None:
                attn = raw
            if on_record is not None:
                on_record(site, logits, scale, raw, attn)
            outs.append(matmul(attn, v[:, sl]))
        return matmul(np.concatenate(outs, axis=1), w["o"])

    def __call__(self, z: np.ndarray, text: np.ndarray, timestep: int, hook=None, on_record=None) -> np.ndarray:
        spec = self.spec
        side = spec.latent_side
        if z.shape != (side * side, spec.latent_channels):
            raise InvalidInputError(f"latent shape {z.shape} does not match the model")
        if text.ndim != 2 or text.shape[1] != spec.text_dim:
            raise InvalidInputError(f"text features shape {text.shape} does not match text_dim")
        x = matmul(z, self.w_in) + self._time_embedding(timestep)
        li = 0
        for block in spec.blocks:
            xr = _pool(x, side, block.resolution)
            h = xr
            if block.self_attention:
                h = h + self._attention(li, "self", block.resolution, _normalize(h), _normalize(h), hook, on_record)
                li += 1
            if block.cross_attention:
                h = h + self._attention(li, "cross", block.resolution, _normalize(h), text, hook, on_record)
                li += 1
            x = x + _upsample(h - xr, block.resolution, side)
        return matmul(_normalize(x), self.w_out)


def denoise_step(model: ToyDenoiser, z_t, text_features, timestep, hook=None, on_record=None):
    return model(z_t, text_features, timestep, hook, on_record)


# ---------------------------------------------------------------- modulation hook


@dataclass(frozen=True)
class Ablation:
    disable_cross: bool = False
    disable_self: bool = False
    disable_value_range: bool = False
    disable_area: bool = False

    def to_json(self) -> dict:
        return asdict(self)


class ModulationHook:
    """Applies layout modulation to every attention layer at fixed strengths."""

    def __init__(self, layouts: dict[int, ResolvedLayout], k: np.ndarray, params: ModulationParams, ablation: Ablation):
        self.layouts = layouts
        self.k = k
        self.params = params
        self.ablation = ablation
        self.lambda_cross = 0.0
        self.lambda_self = 0.0
        self._maps: dict[tuple[int, str], tuple[np.ndarray, np.ndarray]] = {}

    def condition_maps(self, res: int, kind: str) -> tuple[np.ndarray, np.ndarray]:
        key = (res, kind)
        if key not in self._maps:
            layout = self.layouts[res]
            if kind == "cross":
                r = build_r_cross(self.k, layout)
            else:
                r = build_r_self(layout, self.params.self_background)
            if self.ablation.disable_area:
                s = np.zeros_like(r)
            else:
                s = area_matrix(layout, r.shape[1])
            self._maps[key] = (r, s)
        return self._maps[key]

    def __call__(self, logits: np.ndarray, scale: float, site: AttentionSite) -> np.ndarray:
        lam = self.lambda_cross if site.kind == "cross" else self.lambda_self
        r, s = self.condition_maps(site.resolution, site.kind)
        a, _ = modulate(logits, r, s, lam, scale, value_range=not self.ablation.disable_value_range)
        return a


# ---------------------------------------------------------------- sampling


@dataclass
class SampleRun:
    cond: LayoutCondition
    params: ModulationParams
    spec: ToyModelSpec
    seed: int
    ablation: Ablation
    timesteps: list[int]
    ts: list[float]
    in_window: list[bool]
    latents: list[np.ndarray]  # z_T first, z_0 last
    records: list[AttentionRecord] = field(default_factory=list)
    layouts: dict[int, ResolvedLayout] = field(default_factory=dict)
    hooked: bool = True

    @property
    def token_map(self) -> np.ndarray:
        return self.cond.token_map

    def config_snapshot(self) -> dict:
        return {
            "seed": self.seed,
            "params": self.params.to_json(),
            "model": self.spec.to_json(),
            "ablation": self.ablation.to_json(),
            "hooked": self.hooked,
            "training_steps": TRAINING_STEPS,
            "beta_start": BETA_START,
            "beta_end": BETA_END,
        }

    def window_records(self, kind: str | None = None) -> list[AttentionRecord]:
        return [
            r for r in self.records if self.in_window[r.step] and (kind is None or r.kind == kind)
        ]

    @cached_property
    def trajectory(self) -> np.ndarray:
        return np.stack(self.latents)


def trajectory_checksum(run: SampleRun) -> str:
    """SHA-256 of the latent trajectory rounded to 10 decimals (little-endian float64)."""
    arr = np.round(run.trajectory, 10).astype("<f8")
    return hashlib.sha256(arr.tobytes()).hexdigest()


def initial_noise(seed: int, spec: ToyModelSpec) -> np.ndarray:
    n = spec.latent_side * spec.latent_side * spec.latent_channels
    z, _ = box_muller(RngStream(seed & 0xFFFFFFFFFFFFFFFF), n)
    return z.reshape(spec.latent_side * spec.latent_side, spec.latent_channels)


def sample(
    cond: LayoutCondition,
    params: ModulationParams = ModulationParams(),
    spec: ToyModelSpec = ToyModelSpec(),
    seed: int = 0,
    ablation: Ablation = Ablation(),
    hooked: bool = True,
    record: bool = True,
) -> SampleRun:
    """Run DDIM from seeded noise, modulating attention inside the timestep window.

    ``hooked=False`` runs the plain forward pass with no hook installed.
    """
    schedule = DiffusionSchedule(TRAINING_STEPS, params.steps)
    model = ToyDenoiser(spec)
    text = conditioned_text_features(cond, spec.text_dim)
    layouts = {res: resolve_layout(cond, res) for res in spec.resolutions}
    hook = ModulationHook(layouts, cond.token_map, params, ablation) if hooked else None

    z = initial_noise(seed, spec)
    ts = [schedule.normalized(tau) for tau in schedule.timesteps]
    run = SampleRun(
        cond, params, spec, seed, ablation,
        timesteps=list(schedule.timesteps), ts=ts,
        in_window=[params.in_window(t) for t in ts],
        latents=[z], layouts=layouts, hooked=hooked,
    )

    for i, tau in enumerate(schedule.timesteps):
        t = ts[i]
        active = None
        if hook is not None and run.in_window[i]:
            hook.lambda_cross = 0.0 if ablation.disable_cross else compute_lambda(t, params.w_cross, params.p)
            hook.lambda_self = 0.0 if ablation.disable_self else compute_lambda(t, params.w_self, params.p)
            active = hook

        def on_record(site, logits, scale, raw, attn, _i=i, _t=t):
            run.records.append(
                AttentionRecord(_i, _t, site.layer, site.head, site.kind, site.resolution, logits, scale, raw, attn)
            )

        eps = model(z, text, tau, active, on_record if record else None)
        prev = schedule.timesteps[i + 1] if i + 1 < len(schedule.timesteps) else -1
        z = ddim_step(z, eps, tau, prev, schedule)
        run.latents.append(z)
    return run
