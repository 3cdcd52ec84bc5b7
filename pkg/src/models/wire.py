"""OpenAI-compatible chat completion wire models."""

import json
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from src.models.core import CoreModel


class ChatMessage(CoreModel):
    role: Literal["system", "user", "assistant"]
    content: str


class ChatCompletionRequest(CoreModel):
    """Request body; serialized in field order for byte-stable requests."""

    model: str
    messages: list[ChatMessage] = Field(min_length=1)
    logprobs: bool = True
    top_logprobs: int = Field(default=5, ge=2, le=20)
    max_tokens: int = Field(default=1, ge=1)
    temperature: float = Field(default=0.0, ge=0.0)
    seed: int | None = None

    def to_bytes(self) -> bytes:
        payload = self.model_dump(mode="json", exclude_none=True)
        return json.dumps(payload, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


class WireModel(BaseModel):
    """Response side: tolerate fields real servers add."""

    model_config = ConfigDict(extra="ignore")


class TopLogprob(WireModel):
    token: str
    logprob: float


class TokenLogprob(WireModel):
    token: str
    logprob: float
    top_logprobs: list[TopLogprob] = Field(default_factory=list)


class ChoiceLogprobs(WireModel):
    content: list[TokenLogprob] | None = None


class ResponseMessage(WireModel):
    role: str = "assistant"
    content: str | None = None


class ChatChoice(WireModel):
    index: int = 0
    message: ResponseMessage
    logprobs: ChoiceLogprobs | None = None
    finish_reason: str | None = None


class ChatCompletionResponse(WireModel):
    id: str = "chatcmpl-mock"
    object: str = "chat.completion"
    model: str
    choices: list[ChatChoice] = Field(default_factory=list)


class ScriptedReply(CoreModel):
    """Fixed answers for the mock backend, used to exercise client error paths."""

    yes_logprob: float = -0.1
    no_logprob: float = -2.4
    omit_logprobs: bool = False
    content: str | None = None
    failures: int = Field(default=0, ge=0)
    failure_status: int = 503
