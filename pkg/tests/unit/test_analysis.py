"""Unit tests for the analysis summaries and figures."""

import pytest

from src.enums.corpus import Difficulty
from src.models.config import CorpusConfig, PoolConfig
from src.models.report import SweepRow
from src.models.rl import UtilityRecord
from src.services.analysis_service import AnalysisService
from src.services.corpus_service import CorpusService
from src.services.pool_service import PoolService


class TestSummaries:
    """Distribution summaries."""

    def test_summarize(self):
        """Quartiles interpolate linearly."""
        summary = AnalysisService.summarize("all", [-1.0, 0.0, 1.0, 2.0], epsilon=0.5)
        assert summary.count == 4
        assert summary.mean == pytest.approx(0.5)
        assert summary.median == pytest.approx(0.5)
        assert summary.q25 == pytest.approx(-0.25)
        assert summary.q75 == pytest.approx(1.25)
        assert summary.fraction_below_zero == 0.25
        assert summary.fraction_above_epsilon == 0.5

    def test_summarize_empty(self):
        """An empty group has zero count."""
        summary = AnalysisService.summarize("none", [])
        assert summary.count == 0
        assert summary.fraction_above_epsilon is None

    def test_gain_distribution(self, small_corpus, pool_config, tmp_path):
        """One row per worker plus an overall row, and a histogram."""
        build = PoolService.build_pool(small_corpus.pairs, small_corpus.codebook, pool_config, 0)
        figure = tmp_path / "gains.png"
        summaries = AnalysisService.gain_distribution(build.scored, pool_config.epsilon, figure)
        assert [s.group for s in summaries] == ["instruct", "proprietary", "all"]
        assert summaries[-1].count == len(build.scored)
        assert sum(s.count for s in summaries[:-1]) == len(build.scored)
        assert figure.stat().st_size > 0

    def test_gain_distribution_by_difficulty(self, small_corpus, pool_config):
        """Stratum rows sit between the worker rows and the overall row."""
        build = PoolService.build_pool(small_corpus.pairs, small_corpus.codebook, pool_config, 0)
        difficulties = {p.pair_id: p.difficulty for p in small_corpus.pairs}
        summaries = AnalysisService.gain_distribution(
            build.scored, pool_config.epsilon, difficulties=difficulties
        )
        groups = [s.group for s in summaries]
        assert groups[:2] == ["instruct", "proprietary"]
        assert groups[-1] == "all"
        assert set(groups[2:-1]) <= {
            f"{source}/{d.value}" for source in ("instruct", "proprietary") for d in Difficulty
        }
        assert sum(s.count for s in summaries[2:-1]) == len(build.scored)

    def test_easy_gains_never_positive(self):
        """Surface overlap already saturates the judge on easy pairs."""
        corpus = CorpusService.generate_corpus(CorpusConfig(), 0)
        build = PoolService.build_pool(corpus.pairs, corpus.codebook, PoolConfig(), 0)
        difficulties = {p.pair_id: p.difficulty for p in corpus.pairs}
        rows = {
            s.group: s
            for s in AnalysisService.gain_distribution(
                build.scored, PoolConfig().epsilon, difficulties=difficulties
            )
        }
        for source in ("instruct", "thinking", "proprietary"):
            assert rows[f"{source}/easy"].q75 <= 0.0
            assert rows[f"{source}/easy"].mean <= 0.0

    def test_proprietary_gains_lead_on_hard_pairs(self):
        """Higher concept recall moves the hard-pair median gain up."""
        corpus = CorpusService.generate_corpus(CorpusConfig(), 0)
        build = PoolService.build_pool(corpus.pairs, corpus.codebook, PoolConfig(), 0)
        difficulties = {p.pair_id: p.difficulty for p in corpus.pairs}
        rows = {
            s.group: s
            for s in AnalysisService.gain_distribution(
                build.scored, PoolConfig().epsilon, difficulties=difficulties
            )
        }
        assert rows["proprietary/hard"].median > rows["instruct/hard"].median
        assert rows["instruct/hard"].median > 0.0

    def test_mean_weight_by_source(self, small_corpus, pool_config):
        """Mean weights are probabilities."""
        build = PoolService.build_pool(small_corpus.pairs, small_corpus.codebook, pool_config, 0)
        weights = AnalysisService.mean_weight_by_source(build.entries)
        assert set(weights) <= {"instruct", "proprietary"}
        assert all(0.0 <= w <= 1.0 for w in weights.values())

    def test_proprietary_earns_more_weight(self):
        """On the default fifty-pair world the strongest worker outweighs the instruct one."""
        corpus = CorpusService.generate_corpus(CorpusConfig(n_pairs=50), 0)
        build = PoolService.build_pool(corpus.pairs, corpus.codebook, PoolConfig(), 0)
        weights = AnalysisService.mean_weight_by_source(build.entries)
        assert weights["proprietary"] > weights["instruct"]

    def test_utility_distribution(self, tmp_path):
        """Undefined gaps are skipped; strata are sorted."""
        records = [
            UtilityRecord(pair_id="a", difficulty=Difficulty.hard, s_direct=0.0, s_reason=0.5,
                          delta=0.5),
            UtilityRecord(pair_id="b", difficulty=Difficulty.easy, s_direct=0.5, s_reason=0.25,
                          delta=-0.25),
            UtilityRecord(pair_id="c", difficulty=Difficulty.easy, s_direct=0.5),
        ]
        summaries = AnalysisService.utility_distribution(records, tmp_path / "utility.png")
        assert [(s.group, s.count) for s in summaries] == [("all", 2), ("easy", 1), ("hard", 1)]
        assert (tmp_path / "utility.png").exists()

    def test_plot_sweep(self, tmp_path):
        """The sweep chart lands where asked."""
        rows = [SweepRow(c=0.0, reasoning_ratio=0.9, hit_at_1=0.5),
                SweepRow(c=0.1, reasoning_ratio=0.2, hit_at_1=0.4)]
        path = AnalysisService.plot_sweep(rows, tmp_path / "plots" / "sweep.png")
        assert path.exists()
