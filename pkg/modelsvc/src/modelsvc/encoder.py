"""Word-level contextual encoder.

Words are split into hashed subword pieces, run through a transformer stack,
and pooled back to one vector per word by averaging the word's piece states
from the last layer. Sentences whose pieces overflow the position limit are
truncated; words that lose all their pieces to truncation come back masked
so callers can skip the affected tuples instead of reading garbage vectors.
"""

import torch
from torch import nn

from modelsvc.config import EncoderSpec
from modelsvc.tokenizer import PAD_ID, encode_words


class WordEncoder(nn.Module):
    def __init__(self, spec: EncoderSpec) -> None:
        super().__init__()
        self.spec = spec
        self.embed = nn.Embedding(spec.vocab_size, spec.d_model, padding_idx=PAD_ID)
        self.positions = nn.Embedding(spec.max_positions, spec.d_model)
        layer = nn.TransformerEncoderLayer(
            d_model=spec.d_model,
            nhead=spec.n_heads,
            dim_feedforward=spec.ffn_size,
            dropout=0.0,
            batch_first=True,
        )
        # The nested-tensor fast path is a moving target across torch
        # releases; keep the one code path whose numerics we can pin.
        self.stack = nn.TransformerEncoder(
            layer, num_layers=spec.n_layers, enable_nested_tensor=False
        )

    def forward(self, batch_words: list[list[str]]) -> tuple[torch.Tensor, torch.Tensor]:
        """Encode a batch of sentences given as word lists.

        Returns ``(states, mask)`` where ``states`` is ``[B, W, d]`` with one
        vector per word and ``mask`` is ``[B, W]``, False for word slots that
        are padding or were truncated away.
        """
        limit = self.spec.max_positions
        piece_rows: list[list[int]] = []
        spans: list[list[tuple[int, int]]] = []
        for words in batch_words:
            ids: list[int] = []
            word_spans: list[tuple[int, int]] = []
            for pieces in encode_words(words, self.spec.vocab_size):
                start = len(ids)
                keep = pieces[: max(0, limit - start)]
                ids.extend(keep)
                word_spans.append((start, start + len(keep)))
            piece_rows.append(ids)
            spans.append(word_spans)

        max_pieces = max((len(r) for r in piece_rows), default=0) or 1
        ids_tensor = torch.full((len(batch_words), max_pieces), PAD_ID, dtype=torch.long)
        pad_mask = torch.ones(len(batch_words), max_pieces, dtype=torch.bool)
        for b, row in enumerate(piece_rows):
            ids_tensor[b, : len(row)] = torch.tensor(row, dtype=torch.long)
            pad_mask[b, : len(row)] = False

        pos = torch.arange(max_pieces, dtype=torch.long).unsqueeze(0)
        hidden = self.embed(ids_tensor) + self.positions(pos)
        states = self.stack(hidden, src_key_padding_mask=pad_mask)

        max_words = max((len(w) for w in batch_words), default=0) or 1
        word_states = torch.zeros(
            len(batch_words), max_words, self.spec.d_model,
            dtype=states.dtype, device=states.device,
        )
        word_mask = torch.zeros(len(batch_words), max_words, dtype=torch.bool)
        for b, word_spans in enumerate(spans):
            for w, (start, end) in enumerate(word_spans):
                if end > start:
                    word_states[b, w] = states[b, start:end].mean(dim=0)
                    word_mask[b, w] = True
        return word_states, word_mask
