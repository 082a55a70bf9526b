# utils/corpus.py
# Tokenization, vocabulary construction and truncated-BPTT batching.

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from core.errors import ContractViolation, UnknownTokenError

logger = logging.getLogger(__name__)

UNK = "<unk>"
EOS = "<eos>"
MODES = ("word", "char")
SPLITS = ("train", "valid", "test")


@dataclass(frozen=True)
class Vocabulary:
    """Bijection between tokens and ids 0..M-1."""
    id_to_token: tuple[str, ...]
    mode: str
    token_to_id: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractViolation(f"Unknown vocabulary mode {self.mode!r}.")
        mapping = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(mapping) != len(self.id_to_token):
            raise ContractViolation("Vocabulary contains duplicate tokens.")
        if self.mode == "word" and (UNK not in mapping or EOS not in mapping):
            raise ContractViolation("Word vocabularies must contain <unk> and <eos>.")
        object.__setattr__(self, "token_to_id", mapping)

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    @property
    def unk_id(self) -> int | None:
        return self.token_to_id.get(UNK) if self.mode == "word" else None

    @property
    def eos_id(self) -> int | None:
        return self.token_to_id.get(EOS) if self.mode == "word" else None


@dataclass(frozen=True)
class TokenStream:
    ids: np.ndarray
    vocab_size: int

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        if ids.ndim != 1:
            raise ContractViolation("Token stream must be one-dimensional.")
        if ids.size and (ids.min() < 0 or ids.max() >= self.vocab_size):
            raise ContractViolation(f"Token id out of range for vocabulary of size {self.vocab_size}.")
        ids.setflags(write=False)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return int(self.ids.size)


@dataclass(frozen=True)
class BatchPlan:
    """B parallel contiguous streams cut into windows of bptt_len."""
    batch_size: int
    bptt_len: int
    num_windows: int
    data: np.ndarray  # B x floor(T/B)

    def windows(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yields (inputs, targets), each B x bptt_len; targets are inputs shifted by one."""
        L = self.bptt_len
        for w in range(self.num_windows):
            start = w * L
            yield self.data[:, start:start + L], self.data[:, start + 1:start + L + 1]


def _word_lines(text: str, lowercase: bool) -> list[list[str]]:
    if lowercase:
        text = text.lower()
    return [line.split() for line in text.splitlines()]


def build_vocab(text: str, mode: str = "word", max_size: int = 10_000, lowercase: bool = False) -> Vocabulary:
    """
    Builds a vocabulary from raw text.
    Word mode keeps the most frequent max_size-2 tokens plus <unk> and <eos>.
    Char mode keeps every distinct character. Frequency ties break lexicographically.
    """
    if not text:
        raise ContractViolation("Cannot build a vocabulary from empty text.")
    if mode == "char":
        counts = Counter(text)
        tokens = sorted(counts, key=lambda tok: (-counts[tok], tok))
        return Vocabulary(tuple(tokens), "char")
    if mode != "word":
        raise ContractViolation(f"Unknown vocabulary mode {mode!r}.")
    if max_size < 2:
        raise ContractViolation("Word vocabularies need room for <unk> and <eos>.")

    counts = Counter(tok for line in _word_lines(text, lowercase) for tok in line if tok not in (UNK, EOS))
    ranked = sorted(counts, key=lambda tok: (-counts[tok], tok))[: max_size - 2]
    vocab = Vocabulary(tuple(ranked) + (UNK, EOS), "word")
    logger.debug(f"Built word vocabulary of {vocab.size} tokens from {sum(counts.values())} words.")
    return vocab


def encode(text: str, vocab: Vocabulary, lowercase: bool = False) -> TokenStream:
    """Maps text to ids; every word-mode line is terminated by <eos>."""
    if vocab.mode == "char":
        try:
            ids = [vocab.token_to_id[ch] for ch in text]
        except KeyError as e:
            raise UnknownTokenError(e.args[0]) from None
        return TokenStream(np.array(ids, dtype=np.int64), vocab.size)

    lookup = vocab.token_to_id
    unk, eos = vocab.unk_id, vocab.eos_id
    ids = []
    for line in _word_lines(text, lowercase):
        ids.extend(lookup.get(tok, unk) for tok in line)
        ids.append(eos)
    return TokenStream(np.array(ids, dtype=np.int64), vocab.size)


def decode(stream: TokenStream, vocab: Vocabulary) -> str:
    """Inverse of encode for in-vocabulary text."""
    if vocab.mode == "char":
        return "".join(vocab.id_to_token[i] for i in stream.ids)
    lines, current = [], []
    for i in stream.ids:
        tok = vocab.id_to_token[i]
        if tok == EOS:
            lines.append(" ".join(current))
            current = []
        else:
            current.append(tok)
    if current:
        lines.append(" ".join(current))
    return "".join(line + "\n" for line in lines)


def make_batches(stream: TokenStream, batch_size: int, bptt_len: int) -> BatchPlan:
    """Truncates to B*floor(T/B), reshapes to B rows and drops the final partial window."""
    if batch_size < 1 or bptt_len < 1:
        raise ContractViolation("batch_size and bptt_len must be positive.")
    T = len(stream)
    if T < batch_size * (bptt_len + 1):
        raise ContractViolation(f"Stream of {T} tokens is too short for batch {batch_size} x window {bptt_len}.")
    per_stream = T // batch_size
    data = stream.ids[: batch_size * per_stream].reshape(batch_size, per_stream)
    num_windows = (per_stream - 1) // bptt_len
    return BatchPlan(batch_size=batch_size, bptt_len=bptt_len, num_windows=num_windows, data=data)


# --- Files ---

def read_text(path: str | Path) -> str:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Corpus file not found: {path}")
    return path.read_text(encoding="utf-8")


def load_corpus(directory: str | Path, mode: str = "word", max_size: int = 10_000,
                lowercase: bool = False) -> tuple[Vocabulary, dict[str, TokenStream]]:
    """Reads train.txt / valid.txt / test.txt, builds the vocabulary on train and encodes all splits."""
    directory = Path(directory)
    texts = {split: read_text(directory / f"{split}.txt") for split in SPLITS}
    if mode == "char":
        vocab = build_vocab("".join(texts.values()), "char")
    else:
        vocab = build_vocab(texts["train"], mode, max_size, lowercase)
    streams = {split: encode(text, vocab, lowercase) for split, text in texts.items()}
    logger.info(f"Loaded {mode} corpus from {directory}: M={vocab.size}, "
                + ", ".join(f"{k}={len(v)}" for k, v in streams.items()))
    return vocab, streams


def save_vocab(vocab: Vocabulary, path: str | Path) -> None:
    """Header line 'mode=<mode> size=<M>' followed by one token per line in id order."""
    lines = [f"mode={vocab.mode} size={vocab.size}"]
    # newline and other control characters are escaped so that every token fits on one line
    lines += [tok.encode("unicode_escape").decode("ascii") for tok in vocab.id_to_token]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_vocab(path: str | Path) -> Vocabulary:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Vocabulary file not found: {path}")
    header, *body = path.read_text(encoding="utf-8").split("\n")
    try:
        fields = dict(part.split("=", 1) for part in header.split())
        mode, size = fields["mode"], int(fields["size"])
    except (KeyError, ValueError):
        raise ContractViolation(f"Malformed vocabulary header in {path}: {header!r}") from None
    tokens = tuple(line.encode("ascii").decode("unicode_escape") for line in body[:size])
    if len(tokens) != size:
        raise ContractViolation(f"Vocabulary file {path} declares {size} tokens but holds {len(tokens)}.")
    return Vocabulary(tokens, mode)


def encode_split(directory: str | Path, split: str, vocab: Vocabulary, lowercase: bool = False) -> TokenStream:
    """Encodes one split file of a corpus directory with an existing vocabulary."""
    if split not in SPLITS:
        raise ContractViolation(f"Unknown split {split!r}; expected one of {SPLITS}.")
    return encode(read_text(Path(directory) / f"{split}.txt"), vocab, lowercase)
