"""Named model/loss variants and the train-then-evaluate comparison over them."""

from __future__ import annotations

import copy
import csv
import io
import re
from pathlib import Path
from typing import Sequence

from .dataset import Corpus, SplitSpec
from .errors import ConfigError
from .training import RunConfig, config_hash, evaluate_model, train, write_report

# variant name -> (model overrides, run overrides)
VARIANTS = {
    "dds": ({}, {}),
    "base": ({"separate_decoders": False, "separate_encoders": False, "relation_region": False}, {}),
    "shared_encoder": ({"separate_encoders": False, "relation_region": False}, {}),
    "no_relation_region": ({"relation_region": False}, {}),
    "o_to_r": ({"query_sharing": "o_to_r"}, {}),
    "r_to_o": ({"query_sharing": "r_to_o"}, {}),
    "union": ({}, {"region_mode": "union"}),
    "mixture_0": ({}, {"region_mode": "mixture", "theta": 0.0}),
    "mixture_0.1": ({}, {"region_mode": "mixture", "theta": 0.1}),
    "mixture_0.5": ({}, {"region_mode": "mixture", "theta": 0.5}),
}
_DEPTH = re.compile(r"^depth_(\d+)_(\d+)$")


def supported_variants() -> list[str]:
    return sorted(VARIANTS) + ["depth_<object layers>_<relation layers>"]


def variant_overrides(name: str) -> tuple[dict, dict]:
    if name in VARIANTS:
        return copy.deepcopy(VARIANTS[name])
    m = _DEPTH.match(name)
    if m:
        return {"obj_dec_layers": int(m.group(1)), "rel_dec_layers": int(m.group(2))}, {}
    raise ConfigError(f"unknown variant {name!r}; supported: {', '.join(supported_variants())}")


def apply_variant(base: RunConfig, name: str) -> RunConfig:
    model_over, run_over = variant_overrides(name)
    data = base.to_dict()
    data["model"].update(model_over)
    data.update(run_over)
    return RunConfig.from_dict(data)


def shared_fields_hash(base: RunConfig, name: str) -> str:
    """Hash of the variant's config with its own overrides reset to the base values.

    Equal across rows exactly when the variants differ only in the fields they
    are meant to change.
    """
    model_over, run_over = variant_overrides(name)
    data = apply_variant(base, name).to_dict()
    ref = base.to_dict()
    for k in model_over:
        data["model"][k] = ref["model"][k]
    for k in run_over:
        data[k] = ref[k]
    return config_hash(data)


TABLE_COLUMNS = ("variant", "seed", "config_hash")


def run_ablation(base: RunConfig, variants: Sequence[str], corpus: Corpus, split: SplitSpec,
                 out_dir) -> list[dict]:
    """Train and evaluate each variant with the base seed; returns one row per variant."""
    for name in variants:
        variant_overrides(name)  # fail before any training starts
    out = Path(out_dir)
    rows = []
    for name in variants:
        cfg = apply_variant(base, name)
        run_dir = out / name
        run_dir.mkdir(parents=True, exist_ok=True)
        cfg.save(run_dir / "config.json")
        result = train(cfg, corpus, split, run_dir)
        report = evaluate_model(result.model, corpus, split.test_videos, split, cfg)
        write_report(report, run_dir / "eval")
        row = {"variant": name, "seed": cfg.seed, "config_hash": shared_fields_hash(base, name)}
        for part in ("seen", "unseen", "full"):
            for k in cfg.eval_ks:
                row[f"{part}_R@{k}"] = report.recall[part][k]
            row[f"{part}_mAP"] = getattr(report.map, part)
        rows.append(row)
    return rows


def format_table(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
