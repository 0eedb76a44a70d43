"""Classification heads over the word encoder.

The stance head concatenates the source and event word embeddings and maps
them through one linear layer to six logits. Token taggers put a linear
binary layer on every word state; source and event get separate models by
default, with a two-headed joint variant kept only for comparison runs.
"""

import torch
from torch import nn

from modelsvc.config import EncoderSpec
from modelsvc.encoder import WordEncoder

LABELS = ("CT+", "CT-", "PR+", "PS+", "Uu", "NE")


class StanceClassifier(nn.Module):
    def __init__(self, spec: EncoderSpec) -> None:
        super().__init__()
        self.encoder = WordEncoder(spec)
        self.head = nn.Linear(2 * spec.d_model, len(LABELS))

    def forward(
        self,
        batch_words: list[list[str]],
        source_indices: list[int],
        event_indices: list[int],
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Six-way logits per (sentence, source word, event word) triple.

        Also returns a boolean vector marking items whose source or event
        word survived truncation; logits for masked-out items are garbage
        and must not be used.
        """
        states, mask = self.encoder(batch_words)
        rows = torch.arange(len(batch_words))
        src = torch.tensor(source_indices, dtype=torch.long)
        evt = torch.tensor(event_indices, dtype=torch.long)
        ok = mask[rows, src] & mask[rows, evt]
        pairs = torch.cat([states[rows, src], states[rows, evt]], dim=1)
        return self.head(pairs), ok


class TokenTagger(nn.Module):
    """Binary per-word classifier for one task (source or event)."""

    def __init__(self, spec: EncoderSpec) -> None:
        super().__init__()
        self.encoder = WordEncoder(spec)
        self.head = nn.Linear(spec.d_model, 2)

    def forward(self, batch_words: list[list[str]]) -> tuple[torch.Tensor, torch.Tensor]:
        states, mask = self.encoder(batch_words)
        return self.head(states), mask


class JointTagger(nn.Module):
    """Source and event heads on one shared encoder.

    Kept for comparison only; separate per-task models are the supported
    configuration and score better.
    """

    def __init__(self, spec: EncoderSpec) -> None:
        super().__init__()
        self.encoder = WordEncoder(spec)
        self.source_head = nn.Linear(spec.d_model, 2)
        self.event_head = nn.Linear(spec.d_model, 2)

    def forward(
        self, batch_words: list[list[str]]
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        states, mask = self.encoder(batch_words)
        return self.source_head(states), self.event_head(states), mask
