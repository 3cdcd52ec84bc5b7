"""Validators module."""

from collections.abc import Sequence

from src.enums.tokens import SPECIAL_TOKEN_COUNT, SpecialToken


class Validators:
    """Validators class."""

    @staticmethod
    def has_special(tokens: Sequence[int]) -> bool:
        """Whether any reserved id appears in the sequence."""
        return any(int(t) < SPECIAL_TOKEN_COUNT for t in tokens)

    @staticmethod
    def is_well_formed_rationale(tokens: Sequence[int]) -> bool:
        """Exactly ``[<empty>]`` or ``<reason> body </reason>`` with a nonempty plain body."""
        tokens = [int(t) for t in tokens]
        if tokens == [SpecialToken.empty]:
            return True
        if len(tokens) < 3:
            return False
        if tokens[0] != SpecialToken.reason or tokens[-1] != SpecialToken.reason_end:
            return False
        return not Validators.has_special(tokens[1:-1])

    @staticmethod
    def is_framed_candidate(tokens: Sequence[int]) -> bool:
        """``<reason> body </reason> <sum> summary`` with each framing token once."""
        tokens = [int(t) for t in tokens]
        framing = (SpecialToken.reason, SpecialToken.reason_end, SpecialToken.sum)
        if any(tokens.count(mark) != 1 for mark in framing):
            return False
        close = tokens.index(SpecialToken.reason_end)
        if tokens[0] != SpecialToken.reason or tokens[close + 1 : close + 2] != [SpecialToken.sum]:
            return False
        body, summary = tokens[1:close], tokens[close + 2 :]
        return bool(body) and bool(summary) and not Validators.has_special(body + summary)
