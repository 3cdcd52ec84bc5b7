"""Formatters module."""

from collections.abc import Sequence

from src.enums.tokens import SPECIAL_TOKEN_COUNT, SPECIAL_TOKEN_TEXT, SpecialToken

_TEXT_TO_SPECIAL = {text: int(token) for token, text in SPECIAL_TOKEN_TEXT.items()}


class Formatters:
    """Formatters class"""

    @staticmethod
    def direct_input(content: Sequence[int]) -> list[int]:
        """Instruction-format an instance for the encoder: content then <d_emb>."""
        return [*content, SpecialToken.d_emb.value]

    @staticmethod
    def frame_rationale(rationale: Sequence[int]) -> list[int]:
        """Return the rationale as the encoder consumes it.

        ``[<empty>]`` and sequences already opening with ``<reason>`` pass
        through; a bare body gets wrapped in ``<reason> ... </reason>``.
        """
        tokens = [int(t) for t in rationale]
        if tokens == [SpecialToken.empty] or (tokens and tokens[0] == SpecialToken.reason):
            return tokens
        return [SpecialToken.reason.value, *tokens, SpecialToken.reason_end.value]

    @staticmethod
    def encoder_part(candidate_tokens: Sequence[int]) -> list[int]:
        """Strip the ``<sum>`` summary from a framed worker candidate."""
        tokens = [int(t) for t in candidate_tokens]
        if SpecialToken.reason_end in tokens:
            return tokens[: tokens.index(SpecialToken.reason_end) + 1]
        return tokens

    @staticmethod
    def token_text(token: int) -> str:
        """Render one token id as text."""
        if token < SPECIAL_TOKEN_COUNT:
            return SPECIAL_TOKEN_TEXT[SpecialToken(token)]
        return f"tok_{token}"

    @staticmethod
    def tokens_to_text(tokens: Sequence[int]) -> str:
        """Render token ids as whitespace-separated text."""
        return " ".join(Formatters.token_text(int(t)) for t in tokens)

    @staticmethod
    def text_to_tokens(text: str) -> list[int]:
        """Parse text produced by ``tokens_to_text``.

        Raises ValueError on unknown words.
        """
        tokens = []
        for word in text.split():
            if word in _TEXT_TO_SPECIAL:
                tokens.append(_TEXT_TO_SPECIAL[word])
            elif word.startswith("tok_") and word[4:].isdigit():
                tokens.append(int(word[4:]))
            else:
                raise ValueError(f"unknown token {word!r}")
        return tokens
