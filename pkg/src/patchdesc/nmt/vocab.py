from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..core import MARKERS, group_token

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
RESERVED = (PAD, BOS, EOS, UNK) + MARKERS


@dataclass(frozen=True)
class Vocabulary:
    """Token <-> index bijection.

    Layout: reserved tokens, then ``n_groups`` group tokens as one contiguous
    block, then data tokens by descending frequency (ties alphabetical).
    """

    tokens: tuple[str, ...]
    n_groups: int = 0
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.tokens[: len(RESERVED)] != RESERVED:
            raise ValueError("vocabulary does not start with the reserved tokens")
        index = {t: i for i, t in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        object.__setattr__(self, "index", index)

    @classmethod
    def build(cls, sequences: Iterable[Sequence[str]], n_groups: int = 0, min_freq: int = 2) -> "Vocabulary":
        counts = Counter(t for seq in sequences for t in seq)
        groups = tuple(group_token(g) for g in range(n_groups))
        fixed = set(RESERVED) | set(groups)
        data = sorted((t for t, c in counts.items() if c >= min_freq and t not in fixed and not t.startswith("<grp_")),
                      key=lambda t: (-counts[t], t))
        return cls(RESERVED + groups + tuple(data), n_groups)

    def __len__(self):
        return len(self.tokens)

    @property
    def pad(self) -> int:
        return 0

    @property
    def bos(self) -> int:
        return 1

    @property
    def eos(self) -> int:
        return 2

    @property
    def unk(self) -> int:
        return 3

    @property
    def group_offset(self) -> int:
        return len(RESERVED)

    def group_id(self, group: int) -> int:
        return self.group_offset + group

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.index.get(t, self.unk) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]
