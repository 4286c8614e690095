"""Deterministic beam-search decoding over a pluggable probability source.

The decoder only needs next-token log-probabilities for a prefix, so any
model (or a tabular fixture) can drive it.  Ties are broken toward the
lexicographically smaller token sequence; with beam_size 1 the search
degenerates to greedy decoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from freedet.errors import ContractError, ValidationError

_DIST_TOL = 1e-6


class DecoderModel(Protocol):
    """Opaque autoregressive probability source."""

    vocab_size: int
    eos_token: int

    def next_logprobs(self, prefix: Sequence[int]) -> Sequence[float]:
        """Length-vocab_size log-probability vector for the next token."""
        ...


@dataclass(frozen=True)
class BeamResult:
    """Finished sequences (ending in eos or at max length), best first."""

    sequences: tuple[tuple[tuple[int, ...], float], ...]


class TabularModel:
    """DecoderModel backed by an explicit prefix -> probability-vector table.

    Used for fixtures and the beam-demo subcommand.  A 'default' row, when
    given, serves any prefix missing from the table.
    """

    def __init__(
        self,
        vocab_size: int,
        eos_token: int,
        table: dict[tuple[int, ...], Sequence[float]],
        default: Sequence[float] | None = None,
    ):
        if vocab_size < 1:
            raise ValidationError(f"vocab_size must be >= 1, got {vocab_size}")
        if not 0 <= eos_token < vocab_size:
            raise ValidationError(f"eos_token must lie in [0, {vocab_size})")
        self.vocab_size = vocab_size
        self.eos_token = eos_token
        self._table = {tuple(k): np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self._default = None if default is None else np.asarray(default, dtype=np.float64)

    def next_logprobs(self, prefix: Sequence[int]) -> np.ndarray:
        probs = self._table.get(tuple(prefix), self._default)
        if probs is None:
            raise ValidationError(f"tabular model has no row for prefix {tuple(prefix)}")
        with np.errstate(divide="ignore"):
            return np.log(probs)

    @classmethod
    def from_document(cls, doc: dict) -> "TabularModel":
        """Parse the beam-demo fixture format: prefixes are comma-joined
        token strings ('' for the empty prefix)."""
        try:
            vocab_size = int(doc["vocab_size"])
            eos_token = int(doc["eos_token"])
            raw_table = doc["table"]
        except KeyError as exc:
            raise ValidationError(f"tabular model document missing field {exc}") from exc
        table = {}
        for key, probs in raw_table.items():
            prefix = tuple(int(t) for t in key.split(",")) if key else ()
            table[prefix] = probs
        return cls(vocab_size, eos_token, table, default=doc.get("default"))


def _checked_logprobs(model: DecoderModel, prefix: tuple[int, ...]) -> np.ndarray:
    logprobs = np.asarray(model.next_logprobs(prefix), dtype=np.float64)
    if logprobs.shape != (model.vocab_size,):
        raise ContractError(
            f"model returned {logprobs.shape} log-probabilities, "
            f"expected ({model.vocab_size},)"
        )
    total = float(np.exp(logprobs).sum())
    if abs(total - 1.0) > _DIST_TOL:
        raise ContractError(f"model distribution sums to {total}, expected 1 +- {_DIST_TOL}")
    return logprobs


def decode(
    model: DecoderModel,
    beam_size: int = 3,
    max_len: int = 8,
    length_penalty: float = 0.0,
) -> BeamResult:
    """Beam search: expand all live beams each step, keep the top
    beam_size by cumulative log-probability, retire beams that emit eos.

    No length normalization is applied while searching; length_penalty
    only reranks the final pool (score = logprob / len ** penalty).
    """
    if beam_size < 1:
        raise ValidationError(f"beam_size must be >= 1, got {beam_size}")
    if max_len < 1:
        raise ValidationError(f"max_len must be >= 1, got {max_len}")

    live: list[tuple[float, tuple[int, ...]]] = [(0.0, ())]
    finished: list[tuple[float, tuple[int, ...]]] = []

    for _ in range(max_len):
        candidates = []
        for logprob, seq in live:
            step = _checked_logprobs(model, seq)
            for token in range(model.vocab_size):
                lp = logprob + float(step[token])
                if lp == -math.inf:
                    continue  # zero-probability paths are not generations
                candidates.append((lp, seq + (token,)))
        candidates.sort(key=lambda c: (-c[0], c[1]))
        top = candidates[:beam_size]
        live = []
        for logprob, seq in top:
            if seq[-1] == model.eos_token:
                finished.append((logprob, seq))
            else:
                live.append((logprob, seq))
        finished.sort(key=lambda c: (-c[0], c[1]))
        finished = finished[:beam_size]
        if not live:
            break
        if len(finished) == beam_size and live[0][0] < finished[-1][0]:
            break  # no live beam can still enter the pool
    else:
        finished.extend(live)  # length limit reached without eos

    def rank_key(item: tuple[float, tuple[int, ...]]):
        logprob, seq = item
        score = logprob / (len(seq) ** length_penalty) if length_penalty else logprob
        return (-score, seq)

    finished.sort(key=rank_key)
    finished = finished[:beam_size]
    return BeamResult(sequences=tuple((seq, logprob) for logprob, seq in finished))


def greedy_decode(model: DecoderModel, max_len: int = 8) -> tuple[tuple[int, ...], float]:
    """Step-wise argmax decoding; ties go to the smaller token index."""
    seq: tuple[int, ...] = ()
    total = 0.0
    for _ in range(max_len):
        logprobs = _checked_logprobs(model, seq)
        token = int(np.argmax(logprobs))
        total += float(logprobs[token])
        seq += (token,)
        if token == model.eos_token:
            break
    return seq, total


def enumerate_sequences(model: DecoderModel, max_len: int) -> list[tuple[tuple[int, ...], float]]:
    """Exhaustive enumeration of every terminated path (eos or max length),
    sorted best-first with the decoder's tie rule.  Oracle-sized inputs only.
    """
    leaves: list[tuple[float, tuple[int, ...]]] = []

    def walk(seq: tuple[int, ...], logprob: float) -> None:
        step = _checked_logprobs(model, seq)
        for token in range(model.vocab_size):
            nxt = seq + (token,)
            lp = logprob + float(step[token])
            if lp == -math.inf:
                continue  # mirror decode(): zero-probability paths excluded
            if token == model.eos_token or len(nxt) == max_len:
                leaves.append((lp, nxt))
            else:
                walk(nxt, lp)

    walk((), 0.0)
    leaves.sort(key=lambda c: (-c[0], c[1]))
    return [(seq, lp) for lp, seq in leaves]
