"""Client for an OpenAI-compatible chat completions backend.

Evaluation requests ask for a single YES/NO token with top log-probabilities;
generation requests ask for a ``<reason> ... </reason> <sum> ...`` rationale.
Tokens travel as whitespace-separated text (``tok_N`` and the special forms).
"""

import asyncio
import logging
from collections.abc import Sequence
from types import TracebackType

import httpx
from pydantic import ValidationError

from src.decorators.backend import retry_with_backoff
from src.enums.corpus import Role
from src.errors.backend import MalformedRationaleError, ProtocolViolationError
from src.errors.core import UsageError
from src.models.config import BackendConfig
from src.models.wire import ChatCompletionRequest, ChatCompletionResponse, ChatMessage
from src.utils.formatters import Formatters
from src.utils.validators import Validators

request_logger = logging.getLogger("request")

COMPLETIONS_PATH = "/v1/chat/completions"
EVALUATOR_SYSTEM = "You judge multimodal retrieval pairs. Answer with YES or NO only."
RELEVANCE_QUESTION = "Is the target relevant to the query?"
IMPROVEMENT_QUESTION = "Does adding the rationale improve the retrieval effectiveness?"
WORKER_SYSTEM = (
    "Analyze the input step by step. Put the analysis between <reason> and </reason>, "
    "then write <sum> followed by a short summary. The summary must begin with <sum>."
)
NO_RATIONALE = "none"
GENERATION_MAX_TOKENS = 256


def _render(tokens: Sequence[int] | None) -> str:
    return Formatters.tokens_to_text(tokens) if tokens else NO_RATIONALE


def parse_field(content: str, label: str) -> list[int] | None:
    """Tokens on the ``label:`` line of a prompt; None when marked absent."""
    prefix = f"{label}:"
    for line in content.splitlines():
        if line.startswith(prefix):
            text = line[len(prefix):].strip()
            return None if text == NO_RATIONALE else Formatters.text_to_tokens(text)
    return None


class BackendClient:
    """Async client with a bounded number of in-flight requests.

    Use as an async context manager. ``transport`` lets tests route requests
    into an in-process app.
    """

    def __init__(
        self, config: BackendConfig, transport: httpx.AsyncBaseTransport | None = None
    ) -> None:
        """Validate the endpoint and prepare the in-flight limit."""
        if not config.url:
            raise UsageError("backend url is not configured")
        self.config = config
        self._transport = transport
        self._client: httpx.AsyncClient | None = None
        self._semaphore = asyncio.Semaphore(config.max_inflight)

    async def __aenter__(self) -> "BackendClient":
        self._client = httpx.AsyncClient(
            base_url=self.config.url,
            timeout=self.config.timeout_ms / 1000,
            transport=self._transport,
        )
        return self

    async def __aexit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        if self._client is not None:
            await self._client.aclose()
            self._client = None

    @staticmethod
    def evaluation_request(
        model: str,
        query: Sequence[int],
        target: Sequence[int],
        query_rationale: Sequence[int] | None = None,
        target_rationale: Sequence[int] | None = None,
    ) -> ChatCompletionRequest:
        """Baseline relevance prompt, or the improvement prompt when a rationale is attached."""
        question = IMPROVEMENT_QUESTION if query_rationale or target_rationale else RELEVANCE_QUESTION
        content = "\n".join([
            f"Query: {_render(query)}",
            f"Query rationale: {_render(query_rationale)}",
            f"Target: {_render(target)}",
            f"Target rationale: {_render(target_rationale)}",
            question,
        ])
        return ChatCompletionRequest(
            model=model,
            messages=[
                ChatMessage(role="system", content=EVALUATOR_SYSTEM),
                ChatMessage(role="user", content=content),
            ],
            logprobs=True,
            top_logprobs=5,
            max_tokens=1,
            temperature=0.0,
        )

    @staticmethod
    def generation_request(
        model: str, tokens: Sequence[int], role: Role, seed: int
    ) -> ChatCompletionRequest:
        """Single-sided worker prompt."""
        return ChatCompletionRequest(
            model=model,
            messages=[
                ChatMessage(role="system", content=WORKER_SYSTEM),
                ChatMessage(role="user", content=f"Role: {role.value}\nInput: {_render(tokens)}"),
            ],
            logprobs=True,
            top_logprobs=2,
            max_tokens=GENERATION_MAX_TOKENS,
            temperature=1.0,
            seed=seed,
        )

    @retry_with_backoff("chat completion")
    async def complete(self, request: ChatCompletionRequest) -> ChatCompletionResponse:
        if self._client is None:
            raise UsageError("BackendClient must be used as an async context manager")
        async with self._semaphore:
            response = await self._client.post(
                COMPLETIONS_PATH,
                content=request.to_bytes(),
                headers={"content-type": "application/json"},
            )
        response.raise_for_status()
        try:
            return ChatCompletionResponse.model_validate_json(response.content)
        except ValidationError as e:
            raise ProtocolViolationError(f"unparsable response: {e.errors()[0]['msg']}") from e

    @staticmethod
    def parse_confidence(response: ChatCompletionResponse) -> float:
        """log p(YES) - log p(NO) from the first generated token's top log-probabilities."""
        if not response.choices:
            raise ProtocolViolationError("response has no choices")
        logprobs = response.choices[0].logprobs
        if logprobs is None or not logprobs.content:
            raise ProtocolViolationError("response is missing logprobs")
        first = logprobs.content[0]
        seen: dict[str, float] = {}
        for entry in [first, *first.top_logprobs]:
            word = entry.token.strip().upper()
            seen[word] = max(seen.get(word, entry.logprob), entry.logprob)
        if "YES" not in seen or "NO" not in seen:
            raise ProtocolViolationError("YES and NO must both appear in top_logprobs")
        return seen["YES"] - seen["NO"]

    @staticmethod
    def parse_rationale(response: ChatCompletionResponse) -> list[int]:
        """Framed candidate tokens or MalformedRationaleError."""
        if not response.choices or not response.choices[0].message.content:
            raise MalformedRationaleError("empty completion")
        try:
            tokens = Formatters.text_to_tokens(response.choices[0].message.content)
        except ValueError as e:
            raise MalformedRationaleError(str(e)) from e
        if not Validators.is_framed_candidate(tokens):
            raise MalformedRationaleError("missing <reason> ... </reason> <sum> framing")
        return tokens

    async def confidence(
        self,
        query: Sequence[int],
        target: Sequence[int],
        query_rationale: Sequence[int] | None = None,
        target_rationale: Sequence[int] | None = None,
    ) -> float:
        request = self.evaluation_request(
            self.config.model, query, target, query_rationale, target_rationale
        )
        response = await self.complete(request)
        value = self.parse_confidence(response)
        request_logger.debug(f"Evaluator confidence {value:.4f} from {self.config.model}")
        return value

    async def generate(
        self, tokens: Sequence[int], role: Role, model: str | None = None, seed: int = 0
    ) -> list[int]:
        request = self.generation_request(model or self.config.model, tokens, role, seed)
        return self.parse_rationale(await self.complete(request))
