"""Bundled golden vectors and a quick property suite."""

from __future__ import annotations

import json
from importlib.resources import files
from typing import Callable

import numpy as np

from layoutmod.layout import parse_layout, resolve_layout
from layoutmod.modulation import compute_lambda, modulate, value_range_matrices
from layoutmod.sampler import Block, ToyModelSpec, sample, trajectory_checksum
from layoutmod.tensor import RngStream, fnv1a64, row_softmax, splitmix64_next

FLOAT_TOL = 1e-12


def load_goldens() -> dict:
    return json.loads(files("layoutmod.data").joinpath("goldens.json").read_text())


def load_bundled_layout(name: str):
    return parse_layout(files("layoutmod.data").joinpath(name).read_bytes())


GOLDEN_SPEC = ToyModelSpec(latent_side=8, blocks=(Block(8), Block(4)))


def golden_trajectory_checksum() -> str:
    cond = load_bundled_layout("demo_8x8.json")
    return trajectory_checksum(sample(cond, spec=GOLDEN_SPEC, seed=0, record=False))


def _close(a, b) -> bool:
    return bool(np.allclose(np.asarray(a, float), np.asarray(b, float), rtol=0, atol=FLOAT_TOL))


def _checks(g: dict) -> list[tuple[str, Callable[[], bool]]]:
    ex = g["modulation_example"]

    def worked_example():
        a, m = modulate(np.array([ex["logits"]]), np.array([ex["r"]]), np.full((1, 2), ex["s"]), ex["lambda"], ex["scale"])
        return _close(a[0], ex["a_prime"]) and _close(m[0], ex["m"])

    def softmax_rows():
        rng = np.random.default_rng(7)
        for _ in range(50):
            a = row_softmax(rng.normal(size=(5, 9)) * 10, 1.3)
            if not (np.all(a >= 0) and np.allclose(a.sum(axis=1), 1, atol=1e-9, rtol=0)):
                return False
        return True

    def value_range():
        rng = np.random.default_rng(11)
        for _ in range(50):
            q, kk = rng.integers(1, 17, size=2)
            x = rng.normal(size=(q, kk)) * 5
            r = rng.integers(0, 2, size=(q, kk)).astype(float)
            s = np.repeat(rng.uniform(0.01, 1, size=(q, 1)), kk, axis=1)
            m_pos, m_neg = value_range_matrices(x)
            _, m = modulate(x, r, s, float(rng.uniform()), 1.0)
            y = x + m
            if np.any(y > x.max(axis=1, keepdims=True) + FLOAT_TOL) or np.any(y < x.min(axis=1, keepdims=True) - FLOAT_TOL):
                return False
            if np.any(m_pos < 0) or np.any(m_neg < 0):
                return False
        return True

    def partitions():
        for name in ("demo.json", "bird_tree.json", "sloth_beer.json"):
            cond = load_bundled_layout(name)
            for h in (16, 8, 4):
                lay = resolve_layout(cond, h)
                if not (lay.masks.sum(axis=0) + lay.background_mask == 1).all():
                    return False
                if abs(lay.areas.sum() - 1) > 1e-12 or lay.masks.sum(axis=1).min() < 1:
                    return False
        return True

    return [
        ("splitmix64 seed 0", lambda: splitmix64_next(RngStream(0))[0] == int(g["splitmix64_seed0_first"], 16)),
        ("fnv1a64 empty", lambda: fnv1a64(b"") == int(g["fnv1a64"][""], 16)),
        ("fnv1a64 'a'", lambda: fnv1a64(b"a") == int(g["fnv1a64"]["a"], 16)),
        ("lambda schedule", lambda: compute_lambda(1, 1, 5) == 1.0 and compute_lambda(0, 0.3, 5) == 0.0
            and abs(compute_lambda(0.5, 0.3, 5) - 0.009375) <= 1e-15),
        ("worked modulation example", worked_example),
        ("trajectory checksum (8x8, seed 0)", lambda: golden_trajectory_checksum() == g["trajectory_checksum_8x8_seed0"]),
        ("property: softmax rows", softmax_rows),
        ("property: value-range preservation", value_range),
        ("property: layout partitions", partitions),
    ]


def run_selftest() -> tuple[bool, list[str]]:
    lines, ok_all = [], True
    for name, check in _checks(load_goldens()):
        try:
            ok = bool(check())
        except Exception as exc:  # noqa: BLE001 - any crash is a failed check
            ok = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        ok_all &= ok
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}")
    passed = sum(line.startswith("PASS") for line in lines)
    lines.append(f"selftest: {passed}/{len(lines)} checks passed")
    return ok_all, lines
