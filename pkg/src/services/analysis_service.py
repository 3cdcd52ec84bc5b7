"""Analysis Service: gain and utility distributions with their figures."""

import logging
from collections import defaultdict
from collections.abc import Mapping, Sequence
from pathlib import Path

import matplotlib as mpl
import numpy as np

mpl.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from src.enums.corpus import Difficulty  # noqa: E402
from src.models.pool import ReasoningPoolEntry, ScoredRationale  # noqa: E402
from src.models.report import GainSummary, SweepRow  # noqa: E402
from src.models.rl import UtilityRecord  # noqa: E402

pipeline_logger = logging.getLogger("pipeline")

HISTOGRAM_BINS = 30
FIGURE_SIZE = (6.0, 4.0)


class AnalysisService:
    """Summaries over pool and utility artifacts."""

    @staticmethod
    def summarize(group: str, values: Sequence[float], epsilon: float | None = None) -> GainSummary:
        """Count, centre, quartiles and tail fractions of one group."""
        if not values:
            return GainSummary(group=group, count=0, mean=0.0, median=0.0, q25=0.0, q75=0.0,
                               fraction_below_zero=0.0,
                               fraction_above_epsilon=None if epsilon is None else 0.0)
        array = np.asarray(values, dtype=np.float64)
        q25, median, q75 = np.quantile(array, [0.25, 0.5, 0.75])
        return GainSummary(
            group=group,
            count=len(array),
            mean=float(array.mean()),
            median=float(median),
            q25=float(q25),
            q75=float(q75),
            fraction_below_zero=float((array < 0).mean()),
            fraction_above_epsilon=None if epsilon is None else float((array > epsilon).mean()),
        )

    @staticmethod
    def gain_distribution(
        scored: Sequence[ScoredRationale],
        epsilon: float,
        figure: Path | None = None,
        difficulties: Mapping[str, Difficulty] | None = None,
    ) -> list[GainSummary]:
        """Counterfactual gains grouped by worker, plus an ``all`` row.

        With ``difficulties`` (pair id to stratum), ``<source>/<difficulty>``
        rows follow the per-worker rows.
        """
        by_source: dict[str, list[float]] = defaultdict(list)
        by_stratum: dict[str, list[float]] = defaultdict(list)
        for item in scored:
            by_source[item.candidate.source].append(item.delta)
            if difficulties is not None and item.candidate.pair_id in difficulties:
                stratum = difficulties[item.candidate.pair_id].value
                by_stratum[f"{item.candidate.source}/{stratum}"].append(item.delta)
        summaries = [
            AnalysisService.summarize(source, by_source[source], epsilon)
            for source in sorted(by_source)
        ]
        summaries.extend(
            AnalysisService.summarize(group, by_stratum[group], epsilon)
            for group in sorted(by_stratum)
        )
        summaries.append(
            AnalysisService.summarize("all", [s.delta for s in scored], epsilon)
        )
        if figure is not None:
            fig, ax = plt.subplots(figsize=FIGURE_SIZE)
            for source in sorted(by_source):
                ax.hist(by_source[source], bins=HISTOGRAM_BINS, alpha=0.5, label=source)
            ax.axvline(epsilon, color="black", linestyle="--", linewidth=1.0, label="epsilon")
            ax.set_xlabel("counterfactual gain")
            ax.set_ylabel("candidates")
            ax.legend()
            AnalysisService._save(fig, figure)
        return summaries

    @staticmethod
    def utility_distribution(
        records: Sequence[UtilityRecord], figure: Path | None = None
    ) -> list[GainSummary]:
        """Utility gaps overall and per difficulty; undefined gaps are skipped."""
        defined = [r for r in records if r.delta is not None]
        by_difficulty: dict[str, list[float]] = defaultdict(list)
        for r in defined:
            by_difficulty[r.difficulty.value].append(r.delta)
        summaries = [AnalysisService.summarize("all", [r.delta for r in defined])]
        summaries.extend(
            AnalysisService.summarize(name, by_difficulty[name]) for name in sorted(by_difficulty)
        )
        if figure is not None:
            fig, ax = plt.subplots(figsize=FIGURE_SIZE)
            for name in sorted(by_difficulty):
                ax.hist(by_difficulty[name], bins=HISTOGRAM_BINS, alpha=0.5, label=name)
            ax.axvline(0.0, color="black", linestyle="--", linewidth=1.0)
            ax.set_xlabel("utility gap")
            ax.set_ylabel("pairs")
            ax.legend()
            AnalysisService._save(fig, figure)
        return summaries

    @staticmethod
    def mean_weight_by_source(entries: Sequence[ReasoningPoolEntry]) -> dict[str, float]:
        """Mean side weight each worker earns across the pool's rationales."""
        weights: dict[str, list[float]] = defaultdict(list)
        seen: set[str] = set()
        for entry in entries:
            for scored in (entry.query_rationale, entry.target_rationale):
                if scored is None or scored.candidate.candidate_id in seen:
                    continue
                seen.add(scored.candidate.candidate_id)
                weights[scored.candidate.source].append(scored.weight or 0.0)
        return {source: float(np.mean(weights[source])) for source in sorted(weights)}

    @staticmethod
    def plot_sweep(rows: Sequence[SweepRow], figure: Path) -> Path:
        fig, ax = plt.subplots(figsize=FIGURE_SIZE)
        ax.plot([r.reasoning_ratio for r in rows], [r.hit_at_1 for r in rows], marker="o")
        for row in rows:
            ax.annotate(f"c={row.c:g}", (row.reasoning_ratio, row.hit_at_1),
                        textcoords="offset points", xytext=(4, 4), fontsize=8)
        ax.set_xlabel("reasoning ratio")
        ax.set_ylabel("hit@1")
        ax.set_xlim(-0.05, 1.05)
        ax.grid(True, linewidth=0.5)
        return AnalysisService._save(fig, figure)

    @staticmethod
    def _save(fig: plt.Figure, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.tight_layout()
        fig.savefig(path, dpi=120, metadata={"Software": None})
        plt.close(fig)
        pipeline_logger.info(f"Wrote figure {path}")
        return path
