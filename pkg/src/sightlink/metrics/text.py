"""Shared tokenizer for all metric computations and eval runs."""

from __future__ import annotations

import string

TOKENIZER_VERSION = "lower-whitespace-punctstrip-v1"

_STRIP_CHARS = string.punctuation + "‘’“”–—…«»¿¡"


def tokenize(text: str) -> list[str]:
    """Lowercases, splits on whitespace, strips edge punctuation per token.

    Numerals are kept verbatim; tokens reduced to nothing are dropped. An
    empty input yields an empty list (scoring functions reject it).
    """
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(_STRIP_CHARS)
        if token:
            tokens.append(token)
    return tokens
