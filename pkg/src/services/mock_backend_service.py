"""Mock Backend Service: answers chat completions with the synthetic judge and workers."""

import logging
import math

from src.errors.core import UsageError
from src.models.wire import (
    ChatChoice,
    ChatCompletionRequest,
    ChatCompletionResponse,
    ChoiceLogprobs,
    ResponseMessage,
    ScriptedReply,
    TokenLogprob,
    TopLogprob,
)
from src.services.judge_service import SyntheticJudge
from src.services.third_party.backend_client import parse_field
from src.services.worker_service import SyntheticWorker
from src.utils.formatters import Formatters
from src.utils.helpers import Helpers

request_logger = logging.getLogger("request")

YES = "YES"
NO = "NO"


class MockBackendService:
    """Evaluation requests (``max_tokens == 1``) go to the judge, the rest to a worker."""

    def __init__(
        self,
        judge: SyntheticJudge,
        workers: dict[str, SyntheticWorker],
        scripted: ScriptedReply | None = None,
    ) -> None:
        """Workers are keyed by the model name clients ask for."""
        self.judge = judge
        self.workers = workers
        self.scripted = scripted
        self.failures_left = scripted.failures if scripted else 0

    def should_fail(self) -> bool:
        """Consume one scripted failure, if any remain."""
        if self.failures_left > 0:
            self.failures_left -= 1
            return True
        return False

    def complete(self, request: ChatCompletionRequest) -> ChatCompletionResponse:
        content = request.messages[-1].content
        if request.max_tokens == 1:
            return self.evaluate(request.model, content)
        return self.generate(request.model, content, request.seed or 0)

    def evaluate(self, model: str, content: str) -> ChatCompletionResponse:
        if self.scripted is not None:
            yes, no = self.scripted.yes_logprob, self.scripted.no_logprob
        else:
            query = parse_field(content, "Query")
            target = parse_field(content, "Target")
            if query is None or target is None:
                raise UsageError("evaluation prompt needs Query and Target lines")
            logits = self.judge.logits(
                query, target, parse_field(content, "Query rationale"),
                parse_field(content, "Target rationale"),
            )
            # normalize the two logits into log-probabilities
            norm = max(logits.yes, logits.no) + math.log1p(math.exp(-abs(logits.yes - logits.no)))
            yes, no = logits.yes - norm, logits.no - norm
        answer, answer_logprob = (YES, yes) if yes >= no else (NO, no)
        logprobs = None
        if self.scripted is None or not self.scripted.omit_logprobs:
            logprobs = ChoiceLogprobs(content=[
                TokenLogprob(
                    token=answer,
                    logprob=answer_logprob,
                    top_logprobs=[TopLogprob(token=YES, logprob=yes),
                                  TopLogprob(token=NO, logprob=no)],
                )
            ])
        request_logger.debug(f"Mock evaluation for {model}: {answer}")
        return ChatCompletionResponse(
            model=model,
            choices=[ChatChoice(message=ResponseMessage(content=answer), logprobs=logprobs,
                                finish_reason="stop")],
        )

    def generate(self, model: str, content: str, seed: int) -> ChatCompletionResponse:
        """A worker composes a rationale for the concepts the input carries."""
        if self.scripted is not None and self.scripted.content is not None:
            text = self.scripted.content
        else:
            worker = self.workers.get(model)
            if worker is None:
                raise UsageError(f"unknown worker model {model!r}")
            tokens = parse_field(content, "Input") or []
            evidence = self.judge.decode(tokens)
            concepts = sorted(evidence.evidence)
            rng = Helpers.rng(seed, "mock-worker", model)
            text = Formatters.tokens_to_text(worker.compose(concepts, rng))
        return ChatCompletionResponse(
            model=model,
            choices=[ChatChoice(message=ResponseMessage(content=text), finish_reason="stop")],
        )
