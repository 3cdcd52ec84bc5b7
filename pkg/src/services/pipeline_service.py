"""Pipeline Service: one method per stage, each reading only prior-stage files."""

import asyncio
import logging
from pathlib import Path

import httpx

from src.engine.encoder import init_encoder
from src.enums.artifact import ArtifactKind, Stage
from src.enums.corpus import Split
from src.errors.core import UsageError
from src.models.config import CorpusConfig, PipelineConfig, tiny_encoder_config
from src.models.corpus import ConceptCodebook, PairRecord
from src.models.pool import RationaleCandidate, ReasoningPoolEntry, ScoredRationale
from src.models.report import AnalysisReport, EvalReport, SweepRow
from src.models.rl import RLReport, UtilityRecord
from src.models.training import GradcheckReport, TrainReport
from src.services.analysis_service import AnalysisService
from src.services.base import BaseService
from src.services.corpus_service import CorpusService
from src.services.eval_service import EvalService
from src.services.joint_trainer_service import JointTrainerService
from src.services.judge_service import SyntheticJudge
from src.services.pool_service import PoolService
from src.services.rl_service import RLService
from src.services.third_party.backend_client import BackendClient
from src.storage.repositories.artifact import ArtifactRepository
from src.storage.repositories.checkpoint import CheckpointRepository

pipeline_logger = logging.getLogger("pipeline")

CORPUS_FILE = "corpus.jsonl"
CANDIDATES_FILE = "candidates.jsonl"
SCORED_FILE = "scored.jsonl"
POOL_FILE = "pool.jsonl"
UTILITY_FILE = "utility.jsonl"
JOINT_DIR = "joint"
RL_DIR = "rl"
FINAL_CHECKPOINT = "final"
REPORT_FILE = "report.json"
ROLLOUTS_FILE = "rollouts.jsonl"
SWEEP_CSV = "sweep.csv"
SWEEP_FIGURE = "sweep.png"
ANALYSIS_FILE = "analysis.json"
GAINS_FIGURE = "gains.png"
UTILITY_FIGURE = "utility.png"
SWEEP_COLUMNS = ("c", "reasoning_ratio", "hit_at_1")
POOL_SPLITS = (Split.train, Split.rl)


class PipelineService(BaseService):
    """Runs pipeline stages against one output directory."""

    def __init__(
        self, config: PipelineConfig, transport: httpx.AsyncBaseTransport | None = None
    ) -> None:
        """Bind the output directory; ``transport`` routes remote calls in tests."""
        super().__init__(ArtifactRepository(config.out_dir), config)
        self.joint_checkpoints = CheckpointRepository(Path(config.out_dir) / JOINT_DIR)
        self.rl_checkpoints = CheckpointRepository(Path(config.out_dir) / RL_DIR)
        self.rl_artifacts = ArtifactRepository(Path(config.out_dir) / RL_DIR)
        self.joint_artifacts = ArtifactRepository(Path(config.out_dir) / JOINT_DIR)
        self.transport = transport

    # loading

    def load_pairs(self, *splits: Split) -> list[PairRecord]:
        _, pairs = self.repository.load_records(CORPUS_FILE, PairRecord, ArtifactKind.pairs.value)
        if not splits:
            return pairs
        return [p for p in pairs if p.split in splits]

    def load_codebook(self) -> ConceptCodebook:
        """Rebuilt from the corpus header so later stages agree with the stored pairs."""
        header, _ = self.repository.load_records(CORPUS_FILE, PairRecord, ArtifactKind.pairs.value)
        corpus_config = CorpusConfig.model_validate(header.config["corpus"])
        return CorpusService.build_codebook(corpus_config, header.seed)

    def load_pool(self) -> list[ReasoningPoolEntry]:
        _, entries = self.repository.load_records(
            POOL_FILE, ReasoningPoolEntry, ArtifactKind.pool.value
        )
        return entries

    def load_utility(self) -> list[UtilityRecord]:
        _, records = self.repository.load_records(
            UTILITY_FILE, UtilityRecord, ArtifactKind.utility.value
        )
        return records

    # stages

    def gen_corpus(self) -> list[PairRecord]:
        corpus = CorpusService.generate_corpus(
            self.config.corpus, self.config.seed, self.config.encoder.vocab_size
        )
        header = self.header(ArtifactKind.pairs, Stage.gen_corpus)
        self.repository.save_records(CORPUS_FILE, corpus.pairs, header)
        return corpus.pairs

    def gen_candidates(self) -> list[RationaleCandidate]:
        """Synthetic workers, or the remote backend when a URL is configured."""
        pairs = self.load_pairs(*POOL_SPLITS)
        pool = self.config.pool
        if pool.backend.url:
            candidates = asyncio.run(self._remote_candidates(pairs))
        else:
            workers = PoolService.synthetic_workers(pool, self.load_codebook())
            candidates = PoolService.generate_all_candidates(
                pairs, workers, self.config.seed, pool.candidates_per_worker
            )
        header = self.header(ArtifactKind.candidates, Stage.gen_candidates)
        self.repository.save_records(CANDIDATES_FILE, candidates, header)
        return candidates

    def score_pool(self) -> list[ReasoningPoolEntry]:
        _, candidates = self.repository.load_records(
            CANDIDATES_FILE, RationaleCandidate, ArtifactKind.candidates.value
        )
        pairs = self.load_pairs(*POOL_SPLITS)
        pool = self.config.pool
        if pool.backend.url:
            scored = asyncio.run(self._remote_scores(pairs, candidates))
        else:
            judge = SyntheticJudge(self.load_codebook(), pool.distractor_penalty)
            scored = PoolService.score_candidates(pairs, candidates, judge, pool.score_threads)
        weighted, entries = PoolService.assemble(pairs, scored, pool)
        self.repository.save_records(
            SCORED_FILE, weighted, self.header(ArtifactKind.scored, Stage.score_pool)
        )
        self.repository.save_records(
            POOL_FILE, entries, self.header(ArtifactKind.pool, Stage.score_pool)
        )
        return entries

    def train_joint(self) -> TrainReport:
        """Train on the train split; ``joint/final`` exists even for zero epochs."""
        pairs = self.load_pairs(Split.train)
        entries = self.load_pool()
        state = init_encoder(self.config.encoder, self.config.seed)
        header = self.header(ArtifactKind.checkpoint, Stage.train_joint)
        state, report = JointTrainerService.train_joint(
            state, pairs, entries, self.config.train, self.config.seed,
            self.joint_checkpoints, header,
        )
        if report.final_checkpoint is None:
            report.final_checkpoint = str(
                self.joint_checkpoints.save(FINAL_CHECKPOINT, state, header)
            )
        self.joint_artifacts.save_report(
            REPORT_FILE, report, self.header(ArtifactKind.report, Stage.train_joint)
        )
        return report

    def estimate_utility(self) -> list[UtilityRecord]:
        state, _ = self.joint_checkpoints.load(FINAL_CHECKPOINT)
        records = RLService.estimate_utility(state, self.load_pairs(Split.rl), self.load_pool())
        RLService.summarize_utility(records)
        self.repository.save_records(
            UTILITY_FILE, records, self.header(ArtifactKind.utility, Stage.estimate_utility)
        )
        return records

    def train_rl(self) -> RLReport:
        state, _ = self.joint_checkpoints.load(FINAL_CHECKPOINT)
        utilities = self.load_utility()
        pairs = self.load_pairs(Split.rl)
        rollout_header = self.header(ArtifactKind.rollouts, Stage.train_rl)
        state, report, records = RLService.train_rl(
            state, pairs, utilities, self.config.rl, self.config.seed,
            self.rl_artifacts, rollout_header,
        )
        report.final_checkpoint = str(
            self.rl_checkpoints.save(
                FINAL_CHECKPOINT, state, self.header(ArtifactKind.checkpoint, Stage.train_rl)
            )
        )
        self.rl_artifacts.save_records(ROLLOUTS_FILE, records, rollout_header)
        self.rl_artifacts.save_report(
            REPORT_FILE, report, self.header(ArtifactKind.report, Stage.train_rl)
        )
        return report

    def evaluate(self) -> EvalReport:
        state, _ = self.rl_checkpoints.load(FINAL_CHECKPOINT)
        pairs = self.load_pairs(Split.eval)
        if not pairs:
            raise UsageError("eval split is empty")
        metrics = EvalService.evaluate_all(state, pairs, self.config.eval, self.config.seed)
        report = EvalReport(checkpoint=f"{RL_DIR}/{FINAL_CHECKPOINT}", metrics=metrics)
        self.repository.save_report(REPORT_FILE, report, self.header(ArtifactKind.report, Stage.eval))
        return report

    def sweep(self) -> list[SweepRow]:
        """RL retrained per cost coefficient from the joint checkpoint."""
        state, _ = self.joint_checkpoints.load(FINAL_CHECKPOINT)
        eval_pairs = self.load_pairs(Split.eval)
        if not eval_pairs:
            raise UsageError("eval split is empty")
        rows = EvalService.sweep_cost_coeff(
            state, self.load_pairs(Split.rl), self.load_utility(), eval_pairs,
            self.config.eval.sweep_c_values, self.config.rl, self.config.eval, self.config.seed,
        )
        self.repository.save_csv(
            SWEEP_CSV, SWEEP_COLUMNS, [[r.c, r.reasoning_ratio, r.hit_at_1] for r in rows],
            self.header(ArtifactKind.sweep, Stage.sweep),
        )
        AnalysisService.plot_sweep(rows, self.repository.path(SWEEP_FIGURE))
        return rows

    def analyze(self) -> AnalysisReport:
        """Gain and utility distributions; utility is optional."""
        _, scored = self.repository.load_records(
            SCORED_FILE, ScoredRationale, ArtifactKind.scored.value
        )
        entries = self.load_pool()
        difficulties = {p.pair_id: p.difficulty for p in self.load_pairs(*POOL_SPLITS)}
        report = AnalysisReport(
            gains=AnalysisService.gain_distribution(
                scored, self.config.pool.epsilon, self.repository.path(GAINS_FIGURE),
                difficulties,
            ),
            mean_weight_by_source=AnalysisService.mean_weight_by_source(entries),
            figures=[GAINS_FIGURE],
        )
        if self.repository.exists(UTILITY_FILE):
            report.utility = AnalysisService.utility_distribution(
                self.load_utility(), self.repository.path(UTILITY_FIGURE)
            )
            report.figures.append(UTILITY_FIGURE)
        self.repository.save_report(
            ANALYSIS_FILE, report, self.header(ArtifactKind.report, Stage.analyze)
        )
        return report

    @staticmethod
    def gradcheck(entries_per_tensor: int | None = None, seed: int = 0) -> GradcheckReport:
        """Joint-loss gradient audit on the tiny encoder."""
        state = init_encoder(tiny_encoder_config(), seed)
        batch = JointTrainerService.tiny_batch(state, seed)
        return JointTrainerService.gradcheck(
            state, batch, entries_per_tensor=entries_per_tensor, seed=seed
        )

    def run_all(self, include_sweep: bool = True) -> EvalReport:
        """Every stage in order under one seed."""
        self.gen_corpus()
        self.gen_candidates()
        self.score_pool()
        self.train_joint()
        self.estimate_utility()
        self.train_rl()
        report = self.evaluate()
        if include_sweep:
            self.sweep()
        self.analyze()
        return report

    # remote backend

    async def _remote_candidates(self, pairs: list[PairRecord]) -> list[RationaleCandidate]:
        async with BackendClient(self.config.pool.backend, self.transport) as client:
            return await PoolService.generate_remote_candidates(
                pairs, client, self.config.pool, self.config.seed
            )

    async def _remote_scores(
        self, pairs: list[PairRecord], candidates: list[RationaleCandidate]
    ) -> list[ScoredRationale]:
        async with BackendClient(self.config.pool.backend, self.transport) as client:
            return await PoolService.score_remote_candidates(pairs, candidates, client)

