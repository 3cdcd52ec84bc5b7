"""Reserved token ids."""

from enum import IntEnum


class SpecialToken(IntEnum):
    """Special tokens, ids 0-8 in this order."""

    pad = 0
    d_emb = 1
    r_emb = 2
    reason = 3
    reason_end = 4
    sum = 5
    empty = 6
    yes = 7
    no = 8


SPECIAL_TOKEN_COUNT = len(SpecialToken)

SPECIAL_TOKEN_TEXT = {
    SpecialToken.pad: "<pad>",
    SpecialToken.d_emb: "<d_emb>",
    SpecialToken.r_emb: "<r_emb>",
    SpecialToken.reason: "<reason>",
    SpecialToken.reason_end: "</reason>",
    SpecialToken.sum: "<sum>",
    SpecialToken.empty: "<empty>",
    SpecialToken.yes: "YES",
    SpecialToken.no: "NO",
}
