"""Sentence encoding and query representation.

A bidirectional GRU turns word vectors into contextual word features. One
word is picked as the entity token (the queried object): the first "who" or
"what" in interrogative sentences, otherwise the first noun according to a
pluggable tagger. The query vector concatenates the entity feature with an
entity-conditioned attention summary of the whole sentence; a fallback mode
uses the final recurrent state instead.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Protocol, Sequence

import torch
from torch import nn

from .featstore import EmbeddingTable

WH_TOKENS = ("what", "who")

QUERY_MODES = ("entity_attention", "last_hidden")


class NounTagger(Protocol):
    def noun_indices(self, tokens: Sequence[str]) -> list[int]:
        """0-based indices of noun tokens, in sentence order."""
        ...


class LexiconTagger:
    """Noun tagging by closed-lexicon lookup; sufficient for the synthetic
    vocabulary and replaceable by a real POS tagger."""

    def __init__(self, nouns: Sequence[str]):
        self._nouns = frozenset(nouns)

    def noun_indices(self, tokens: Sequence[str]) -> list[int]:
        return [i for i, tok in enumerate(tokens) if tok in self._nouns]


def select_entity(tokens: Sequence[str], query_type: str, tagger: NounTagger) -> int:
    """0-based index of the entity token.

    Interrogative sentences pick the first who/what; declarative ones pick
    the first noun. With neither present, falls back to the first token and
    warns.
    """
    if not tokens:
        raise ValueError("cannot select an entity from an empty sentence")
    if query_type == "interrogative":
        for i, tok in enumerate(tokens):
            if tok in WH_TOKENS:
                return i
    nouns = tagger.noun_indices(tokens)
    if nouns:
        return nouns[0]
    warnings.warn("no entity token found; falling back to the first token", stacklevel=2)
    return 0


@dataclass
class SentenceEncoding:
    """Tensors produced for one sentence."""

    word_features: torch.Tensor        # [L, 2*hidden]
    entity_index: int
    entity_feature: torch.Tensor       # [2*hidden]
    context_feature: torch.Tensor      # [2*hidden]
    query: torch.Tensor                # [4*hidden]
    attention: torch.Tensor | None     # [L] in entity_attention mode


class TextEncoder(nn.Module):
    """BiGRU encoder plus entity-aware query construction.

    Word vectors come from a fixed seeded embedding table (a buffer, not a
    parameter); the trainable pieces are the GRU and the two bilinear-attention
    projections.
    """

    def __init__(
        self,
        table: EmbeddingTable,
        hidden_dim: int = 128,
        query_mode: str = "entity_attention",
        tagger: NounTagger | None = None,
    ):
        super().__init__()
        if query_mode not in QUERY_MODES:
            raise ValueError(f"query_mode must be one of {QUERY_MODES}")
        self.query_mode = query_mode
        self.tagger = tagger if tagger is not None else LexiconTagger(table.vocab)
        self._token_ids = table.token_ids
        self.register_buffer("embeddings", torch.from_numpy(table.vectors.copy()))
        self.gru = nn.GRU(table.dim, hidden_dim, batch_first=True, bidirectional=True)
        feat_dim = 2 * hidden_dim
        self.entity_proj = nn.Linear(feat_dim, feat_dim, bias=False)   # applied to the entity feature
        self.context_proj = nn.Linear(feat_dim, feat_dim, bias=False)  # applied to every word feature
        self.feature_dim = feat_dim
        self.query_dim = 2 * feat_dim

    def encode_words(self, tokens: Sequence[str]) -> torch.Tensor:
        """Contextual features [L, 2*hidden] for a non-empty token list."""
        if not tokens:
            raise ValueError("cannot encode an empty sentence")
        ids = torch.from_numpy(self._token_ids(list(tokens)))
        vectors = self.embeddings[ids].to(self.entity_proj.weight.dtype)
        out, _ = self.gru(vectors.unsqueeze(0))
        return out[0]

    def query_from_features(
        self, words: torch.Tensor, entity_index: int
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Entity-conditioned attention summary: weights over words from the
        dot product of the projected entity and word features, then the query
        as [entity; attended context]."""
        if not 0 <= entity_index < words.shape[0]:
            raise ValueError(f"entity index {entity_index} outside [0, {words.shape[0]})")
        s_e = words[entity_index]
        logits = self.context_proj(words) @ self.entity_proj(s_e)     # [L]
        weights = torch.softmax(logits, dim=0)
        s_a = weights @ words
        return torch.cat([s_e, s_a]), weights

    def forward(self, tokens: Sequence[str], query_type: str) -> SentenceEncoding:
        words = self.encode_words(tokens)
        entity = select_entity(tokens, query_type, self.tagger)
        if self.query_mode == "last_hidden":
            hidden = self.gru.hidden_size
            final = torch.cat([words[-1, :hidden], words[0, hidden:]])
            return SentenceEncoding(
                word_features=words,
                entity_index=entity,
                entity_feature=words[entity],
                context_feature=final,
                query=torch.cat([final, final]),
                attention=None,
            )
        query, weights = self.query_from_features(words, entity)
        return SentenceEncoding(
            word_features=words,
            entity_index=entity,
            entity_feature=words[entity],
            context_feature=weights @ words,
            query=query,
            attention=weights,
        )
