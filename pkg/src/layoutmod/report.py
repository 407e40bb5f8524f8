"""Run and ablation reports."""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from layoutmod.config import SCHEMA_VERSION, RunConfig
from layoutmod.diagnostics import concentration, score_run
from layoutmod.layout import LayoutCondition
from layoutmod.modulation import ModulationParams, compute_lambda
from layoutmod.sampler import Ablation, SampleRun, sample, trajectory_checksum

ABLATION_VARIANTS = (
    ("full", Ablation()),
    ("w/o (a) cross-attention modulation", Ablation(disable_cross=True)),
    ("w/o (b) self-attention modulation", Ablation(disable_self=True)),
    ("w/o (c) value-range adaptation", Ablation(disable_value_range=True)),
    ("w/o (d) mask-area adaptation", Ablation(disable_area=True)),
)


def step_diagnostics(run: SampleRun) -> list[dict[str, Any]]:
    steps = []
    per_step: dict[int, list[float]] = {}
    for r in run.records:
        if r.kind == "cross":
            c = concentration(r.modulated, run.layouts[r.resolution].owner, run.token_map, run.cond.n_segments)
            if np.isfinite(c).any():
                per_step.setdefault(r.step, []).append(float(np.nanmean(c)))
    p, ab = run.params, run.ablation
    for i, (tau, t) in enumerate(zip(run.timesteps, run.ts)):
        win = run.in_window[i] and run.hooked
        lam_c = compute_lambda(t, p.w_cross, p.p) if win and not ab.disable_cross else 0.0
        lam_s = compute_lambda(t, p.w_self, p.p) if win and not ab.disable_self else 0.0
        z = run.latents[i + 1]
        vals = per_step.get(i)
        steps.append(
            {
                "step": i,
                "timestep": tau,
                "t": t,
                "in_window": run.in_window[i],
                "lambda_cross": lam_c,
                "lambda_self": lam_s,
                "latent_rms": float(math.sqrt(float(np.mean(z * z)))),
                "mean_concentration": float(np.mean(vals)) if vals else None,
            }
        )
    return steps


def sample_report(cond: LayoutCondition, cfg: RunConfig) -> dict[str, Any]:
    run = sample(cond, cfg.params, cfg.model, cfg.seed, cfg.ablation)
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "sample",
        "config": {**cfg.to_json(), "layout": cond.to_json()},
        "token_map": [int(x) for x in run.token_map],
        "steps": step_diagnostics(run),
        "diagnostics": score_run(run).to_json(),
        "trajectory_checksum": trajectory_checksum(run),
    }


def _summary(scores) -> dict[str, Any]:
    conc = [s.mean_concentration for s in scores]
    ious = [s.mean_iou for s in scores]
    return {
        "mean_concentration": float(np.mean(conc)),
        "mean_iou": float(np.mean(ious)),
        "cross_gap": float(np.mean([s.stats["cross"].gap for s in scores])),
        "self_gap": float(np.mean([s.stats["self"].gap for s in scores])),
        "per_seed_concentration": conc,
        "per_seed_iou": ious,
    }


def ablation_report(cond: LayoutCondition, cfg: RunConfig) -> dict[str, Any]:
    """Full method, each single-component ablation, and an unmodulated reference."""
    rows = []
    for name, ablation in ABLATION_VARIANTS:
        scores = [score_run(sample(cond, cfg.params, cfg.model, seed, ablation)) for seed in cfg.seeds]
        rows.append({"variant": name, "ablation": ablation.to_json(), **_summary(scores)})
    off = ModulationParams(**{**cfg.params.to_json(), "w_cross": 0.0, "w_self": 0.0})
    baseline = _summary([score_run(sample(cond, off, cfg.model, seed)) for seed in cfg.seeds])
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "ablate",
        "config": {**cfg.to_json(), "layout": cond.to_json()},
        "seeds": cfg.seeds,
        "rows": rows,
        "unmodulated": baseline,
    }
