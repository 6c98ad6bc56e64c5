"""
Label-Budget Sweep
==================
Repeat split -> train -> evaluate over labeled quotas, both training modes
and several seeds. The result tables feed accuracy-versus-label-budget
curves and per-class comparisons between the two modes.
"""

import logging
from dataclasses import replace
from typing import Dict, Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .data import PatchSet, SplitSpec, split
from .gan import MODES, Evaluation, TrainingConfig, evaluate_model, train

logger = logging.getLogger(__name__)


def _split_spec(quota: Union[int, float], unlabeled_fraction: float, seed: int) -> SplitSpec:
    if isinstance(quota, (int, np.integer)):
        return SplitSpec(labeled_count=int(quota), unlabeled_fraction=unlabeled_fraction, seed=seed)
    return SplitSpec(labeled_ratio=float(quota), unlabeled_fraction=unlabeled_fraction, seed=seed)


def run_label_sweep(
    patches:            PatchSet,
    quotas:             Sequence[Union[int, float]],
    config:             TrainingConfig,
    seeds:              Iterable[int] = (0, 1, 2),
    modes:              Sequence[str] = MODES,
    unlabeled_fraction: float = 0.1,
    keep_evaluations:   Optional[Dict] = None,
) -> pd.DataFrame:
    """
    Parameters
    ----------
    patches            : labeled PatchSet of the whole scene
    quotas             : per-class labeled counts (int) or ratios (float)
    config             : base TrainingConfig; mode and seed are overridden per run
    seeds              : one split + training run per seed
    keep_evaluations   : optional dict filled with {(quota, mode, seed): Evaluation}

    Returns
    -------
    pd.DataFrame  one row per run: quota, mode, seed, n_labeled, n_test, oa, aa, kappa
    """
    rows = []
    for quota in quotas:
        for seed in seeds:
            splits = split(patches, _split_spec(quota, unlabeled_fraction, seed))
            for mode in modes:
                run_cfg = replace(config, mode=mode, seed=seed)
                model, _ = train(run_cfg, splits)
                ev = evaluate_model(model, splits.test)
                if keep_evaluations is not None:
                    keep_evaluations[(quota, mode, seed)] = ev
                rows.append({
                    "quota":     quota,
                    "mode":      mode,
                    "seed":      seed,
                    "n_labeled": len(splits.labeled),
                    "n_test":    len(splits.test),
                    "oa":        ev.oa,
                    "aa":        ev.aa,
                    "kappa":     ev.kappa,
                })
                logger.info(f"[sweep] quota={quota} mode={mode} seed={seed} OA={ev.oa:.4f}")
    return pd.DataFrame(rows)


def summarize_label_sweep(df: pd.DataFrame) -> pd.DataFrame:
    """
    Mean / std over seeds per (quota, mode), plus the semi-supervised OA gain
    over supervised training at each quota.
    """
    summary = (
        df.groupby(["quota", "mode"])
          .agg(oa_mean=("oa", "mean"), oa_std=("oa", "std"),
               aa_mean=("aa", "mean"), kappa_mean=("kappa", "mean"),
               runs=("seed", "count"))
          .reset_index()
    )
    wide = summary.pivot(index="quota", columns="mode", values="oa_mean")
    if {"semisup", "supervised"} <= set(wide.columns):
        gain = (wide["semisup"] - wide["supervised"]).rename("oa_gain")
        summary = summary.merge(gain.reset_index(), on="quota", how="left")
    return summary


def per_class_comparison(results: Dict[str, Evaluation]) -> pd.DataFrame:
    """
    Per-class accuracy side by side, e.g. {"semisup": ev_a, "supervised": ev_b}
    for one quota. Columns: class, support, then one accuracy column per key.
    """
    out = None
    for key, ev in results.items():
        table = ev.per_class[["class", "support", "accuracy"]].rename(columns={"accuracy": key})
        out = table if out is None else out.merge(table.drop(columns="support"), on="class")
    return out if out is not None else pd.DataFrame(columns=["class", "support"])
