"""Training loops, checkpointing, and the early-stopping policy.

Both trainers run class-weighted cross-entropy with AdamW, evaluate dev loss
once per epoch, and stop when dev loss has failed to improve for more than
``early_stop_patience`` consecutive epochs, keeping the weights of the best
dev epoch. Given equal seeds and data, two runs produce identical loss
curves and identical checkpoints.

A checkpoint is a directory: ``config.json`` holds the model kind, the task
for taggers, the training configuration, and the label inventory;
``weights.pt`` holds the state dict. That layout is the on-disk interface
the server and the exporter load from.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import torch
from torch import nn

from modelsvc.config import StanceModelConfig
from modelsvc.data import StanceExample, TaggingExample
from modelsvc.heads import LABELS, JointTagger, StanceClassifier, TokenTagger


@dataclass
class TrainResult:
    checkpoint: "Checkpoint"
    train_losses: list[float]
    dev_losses: list[float]
    final_train_accuracy: float
    epochs_run: int


@dataclass
class Checkpoint:
    kind: str  # "stance" | "token" | "joint"
    task: Optional[str]  # tagger task, None for stance
    config: StanceModelConfig
    state_dict: dict

    def build_model(self) -> nn.Module:
        spec = self.config.encoder_spec
        if self.kind == "stance":
            model = StanceClassifier(spec)
        elif self.kind == "token":
            model = TokenTagger(spec)
        elif self.kind == "joint":
            model = JointTagger(spec)
        else:
            raise ValueError(f"unknown checkpoint kind {self.kind!r}")
        model.load_state_dict(self.state_dict)
        model.eval()
        return model

    def save(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        meta = {
            "kind": self.kind,
            "task": self.task,
            "labels": list(LABELS),
            "config": self.config.to_dict(),
        }
        (directory / "config.json").write_text(
            json.dumps(meta, indent=2) + "\n", encoding="utf-8"
        )
        torch.save(self.state_dict, directory / "weights.pt")
        return directory

    @classmethod
    def load(cls, directory: str | Path) -> "Checkpoint":
        directory = Path(directory)
        meta = json.loads((directory / "config.json").read_text(encoding="utf-8"))
        if meta.get("labels") != list(LABELS):
            raise ValueError(
                f"checkpoint {directory} was trained with labels {meta.get('labels')}"
            )
        state = torch.load(directory / "weights.pt", weights_only=True)
        return cls(
            kind=meta["kind"],
            task=meta["task"],
            config=StanceModelConfig.from_dict(meta["config"]),
            state_dict=state,
        )


def class_weights(counts: Sequence[int], mode: str) -> torch.Tensor:
    """Inverse-frequency weights; absent classes get weight 1 so the tensor
    stays finite (they contribute no terms to the loss anyway)."""
    k = len(counts)
    if mode == "none":
        return torch.ones(k)
    total = sum(counts)
    return torch.tensor(
        [total / (k * c) if c > 0 else 1.0 for c in counts], dtype=torch.float32
    )


def _batches(n: int, batch_size: int, generator: torch.Generator) -> list[torch.Tensor]:
    order = torch.randperm(n, generator=generator)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def _early_stop_loop(model, batch_loss, n_train, dev_loss_fn, config):
    """Shared epoch loop: returns (train_losses, dev_losses, best_state, epochs)."""
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    generator = torch.Generator().manual_seed(config.seed)
    best_dev = math.inf
    best_state = {k: v.clone() for k, v in model.state_dict().items()}
    bad_epochs = 0
    train_losses: list[float] = []
    dev_losses: list[float] = []
    epochs = 0

    for _ in range(config.max_epochs):
        epochs += 1
        model.train()
        epoch_loss = 0.0
        n_batches = 0
        for batch in _batches(n_train, config.batch_size, generator):
            optimizer.zero_grad()
            loss = batch_loss(batch)
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach())
            n_batches += 1
        train_losses.append(epoch_loss / n_batches)

        model.eval()
        with torch.no_grad():
            dev = float(dev_loss_fn())
        dev_losses.append(dev)
        if dev < best_dev:
            best_dev = dev
            best_state = {k: v.clone() for k, v in model.state_dict().items()}
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs > config.early_stop_patience:
                break

    model.load_state_dict(best_state)
    return train_losses, dev_losses, best_state, epochs


def train_stance(
    train_examples: Sequence[StanceExample],
    dev_examples: Sequence[StanceExample],
    config: StanceModelConfig,
) -> TrainResult:
    if not train_examples:
        raise ValueError("empty train set")
    if not dev_examples:
        raise ValueError("empty dev set")
    torch.manual_seed(config.seed)
    model = StanceClassifier(config.encoder_spec)

    counts = [0] * len(LABELS)
    for ex in train_examples:
        counts[ex.label] += 1
    weights = class_weights(counts, config.class_weighting)
    criterion = nn.CrossEntropyLoss(weight=weights)

    def pair_loss(examples: Sequence[StanceExample]) -> torch.Tensor:
        logits, ok = model(
            [list(ex.words) for ex in examples],
            [ex.source_index for ex in examples],
            [ex.event_index for ex in examples],
        )
        if not bool(ok.all()):
            raise ValueError("a source or event word fell outside the position limit")
        targets = torch.tensor([ex.label for ex in examples], dtype=torch.long)
        return criterion(logits, targets)

    def batch_loss(batch: torch.Tensor) -> torch.Tensor:
        return pair_loss([train_examples[int(i)] for i in batch])

    train_losses, dev_losses, _, epochs = _early_stop_loop(
        model, batch_loss, len(train_examples), lambda: pair_loss(dev_examples), config
    )

    model.eval()
    with torch.no_grad():
        logits, _ = model(
            [list(ex.words) for ex in train_examples],
            [ex.source_index for ex in train_examples],
            [ex.event_index for ex in train_examples],
        )
        predicted = logits.argmax(dim=1)
        accuracy = float(
            (predicted == torch.tensor([ex.label for ex in train_examples])).float().mean()
        )

    checkpoint = Checkpoint("stance", None, config, model.state_dict())
    return TrainResult(checkpoint, train_losses, dev_losses, accuracy, epochs)


def train_token(
    task: str,
    train_examples: Sequence[TaggingExample],
    dev_examples: Sequence[TaggingExample],
    config: StanceModelConfig,
    joint: bool = False,
) -> TrainResult:
    """Binary token tagger for ``task`` ("source" or "event").

    ``joint=True`` trains the two-headed comparison model instead; its
    examples must then label every word with a (source, event) pair.
    """
    if task not in ("source", "event") and not joint:
        raise ValueError(f"unknown tagging task {task!r}")
    if not train_examples:
        raise ValueError("empty train set")
    if not dev_examples:
        raise ValueError("empty dev set")
    torch.manual_seed(config.seed)
    model = JointTagger(config.encoder_spec) if joint else TokenTagger(config.encoder_spec)

    def flat_labels(examples) -> list[int]:
        if joint:
            return [l for ex in examples for pair in ex.labels for l in pair]
        return [lab for ex in examples for lab in ex.labels]

    counts = [0, 0]
    for lab in flat_labels(train_examples):
        counts[lab] += 1
    weights = class_weights(counts, config.class_weighting)
    criterion = nn.CrossEntropyLoss(weight=weights)

    def tagging_loss(examples: Sequence[TaggingExample]) -> torch.Tensor:
        words = [list(ex.words) for ex in examples]
        n_words = sum(len(ex.words) for ex in examples)
        if joint:
            source_logits, event_logits, mask = model(words)
            if int(mask.sum()) != n_words:
                raise ValueError("a word fell outside the position limit")
            logits = torch.cat([source_logits[mask], event_logits[mask]], dim=0)
            targets = []
            for selector in (0, 1):
                for ex in examples:
                    targets.extend(pair[selector] for pair in ex.labels)
        else:
            all_logits, mask = model(words)
            if int(mask.sum()) != n_words:
                raise ValueError("a word fell outside the position limit")
            logits = all_logits[mask]
            targets = flat_labels(examples)
        return criterion(logits, torch.tensor(targets, dtype=torch.long))

    def batch_loss(batch: torch.Tensor) -> torch.Tensor:
        return tagging_loss([train_examples[int(i)] for i in batch])

    train_losses, dev_losses, _, epochs = _early_stop_loop(
        model, batch_loss, len(train_examples), lambda: tagging_loss(dev_examples), config
    )

    model.eval()
    with torch.no_grad():
        if joint:
            accuracy = 0.0  # the comparison model reports no single accuracy
        else:
            logits, mask = model([list(ex.words) for ex in train_examples])
            predicted = logits.argmax(dim=2)[mask]
            targets = torch.tensor(flat_labels(train_examples), dtype=torch.long)
            accuracy = float((predicted == targets).float().mean())

    checkpoint = Checkpoint(
        "joint" if joint else "token", None if joint else task, config, model.state_dict()
    )
    return TrainResult(checkpoint, train_losses, dev_losses, accuracy, epochs)
