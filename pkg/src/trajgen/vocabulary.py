"""Token space for trajectory models.

A vocabulary maps short event codes (ICD-10 level-3 codes plus a handful of
special tokens) to contiguous integer ids. The id ordering is fixed by the
vocabulary file and must never change: every id is also an output slot of the
model, so reordering tokens invalidates any trained weights.

File format: UTF-8 text, one record per line, tab-separated
``code<TAB>kind<TAB>label``. Ids are assigned by line order starting at 0.
Lines beginning with ``#`` and blank lines are ignored.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum
from typing import BinaryIO, Iterable, Iterator, Union


class TokenKind(str, Enum):
    """Role of a token within the vocabulary.

    Only ``TERMINAL`` tokens may end a generated trajectory; ``PADDING``
    tokens are never sampled and never appear in trajectories; ``STATIC``
    tokens (e.g. sex markers) are kept when a long context is truncated.
    """

    EVENT = "event"
    TERMINAL = "terminal"
    PADDING = "padding"
    STATIC = "static"


@dataclass(frozen=True)
class Token:
    id: int
    code: str
    label: str
    kind: TokenKind


class VocabularyError(ValueError):
    """Malformed vocabulary data; the message carries the record number."""


class UnknownCodeError(VocabularyError):
    """A code was looked up that is not in the vocabulary."""

    def __init__(self, code: str):
        super().__init__(f"unknown code {code!r}")
        self.code = code


class Vocabulary:
    """Immutable, bidirectional code<->id mapping.

    Safe for unrestricted concurrent reads once constructed.
    """

    def __init__(self, tokens: Iterable[Token]):
        toks = tuple(tokens)
        if len(toks) < 2:
            raise VocabularyError(
                f"vocabulary needs at least one event and one terminal token, got {len(toks)}"
            )
        index: dict[str, int] = {}
        for pos, tok in enumerate(toks):
            if tok.id != pos:
                raise VocabularyError(
                    f"token {tok.code!r}: id {tok.id} is duplicate or non-contiguous "
                    f"(expected {pos})"
                )
            if not tok.code:
                raise VocabularyError(f"token id {tok.id}: empty code")
            if tok.code != tok.code.upper():
                raise VocabularyError(
                    f"token id {tok.id}: code {tok.code!r} is not upper-cased"
                )
            if tok.code in index:
                raise VocabularyError(f"duplicate code {tok.code!r} (id {tok.id})")
            index[tok.code] = tok.id
        kinds = {t.kind for t in toks}
        if TokenKind.TERMINAL not in kinds:
            raise VocabularyError("vocabulary has no terminal token")
        if TokenKind.EVENT not in kinds:
            raise VocabularyError("vocabulary has no event token")
        self._tokens = toks
        self._index = index
        self._terminal_ids = frozenset(
            t.id for t in toks if t.kind is TokenKind.TERMINAL
        )
        self._padding_ids = frozenset(t.id for t in toks if t.kind is TokenKind.PADDING)
        self._static_ids = frozenset(t.id for t in toks if t.kind is TokenKind.STATIC)

    def __len__(self) -> int:
        return len(self._tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self._tokens)

    @property
    def tokens(self) -> tuple[Token, ...]:
        return self._tokens

    @property
    def terminal_ids(self) -> frozenset[int]:
        return self._terminal_ids

    @property
    def padding_ids(self) -> frozenset[int]:
        return self._padding_ids

    @property
    def static_ids(self) -> frozenset[int]:
        return self._static_ids

    def encode(self, code: str) -> int:
        """Return the id for ``code``; matching is case-insensitive.

        Unknown codes raise :class:`UnknownCodeError` rather than mapping to
        a substitute token: the model was trained on a fixed vocabulary and a
        silent substitution would corrupt its predictions.
        """
        tid = self._index.get(code.upper())
        if tid is None:
            raise UnknownCodeError(code)
        return tid

    def decode(self, token_id: int) -> Token:
        if not 0 <= token_id < len(self._tokens):
            raise VocabularyError(
                f"token id {token_id} out of range [0, {len(self._tokens)})"
            )
        return self._tokens[token_id]


def load_vocabulary(source: Union[bytes, BinaryIO]) -> Vocabulary:
    """Parse a vocabulary file into a :class:`Vocabulary`.

    ``source`` is raw bytes or a binary stream. Parsing is bit-exact: the
    file is decoded as UTF-8 and split on tabs with no locale-dependent
    behavior, so the same byte stream always yields the same vocabulary.
    """
    if isinstance(source, bytes):
        data = source
    else:
        data = source.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise VocabularyError(f"vocabulary file is not valid UTF-8: {exc}") from None

    tokens: list[Token] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise VocabularyError(
                f"line {lineno}: expected 3 tab-separated fields, got {len(parts)}"
            )
        code, kind_name, label = parts[0].strip(), parts[1].strip(), parts[2].strip()
        if not code:
            raise VocabularyError(f"line {lineno}: empty code")
        try:
            kind = TokenKind(kind_name)
        except ValueError:
            raise VocabularyError(
                f"line {lineno}: unknown token kind {kind_name!r}"
            ) from None
        code = code.upper()
        if any(t.code == code for t in tokens):
            raise VocabularyError(f"line {lineno}: duplicate code {code!r}")
        tokens.append(Token(id=len(tokens), code=code, label=label, kind=kind))

    return Vocabulary(tokens)


def dump_vocabulary(vocab: Vocabulary) -> bytes:
    """Serialize back to the canonical file format (inverse of load)."""
    buf = io.StringIO()
    for tok in vocab:
        buf.write(f"{tok.code}\t{tok.kind.value}\t{tok.label}\n")
    return buf.getvalue().encode("utf-8")
