"""Batched no-grad inference for the OCR and MAC models.

Batches are independent, so with ``workers > 1`` they run on a thread pool
against the shared, read-only parameters. Each worker enters ``no_grad``
itself; the grad switch is thread-local.
"""

from collections.abc import Callable
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from clozecheck.core.config import RunConfig
from clozecheck.core.types import LabelSeq
from clozecheck.core.types import Sample
from clozecheck.core.vocab import Vocabulary
from clozecheck.data.dataset import Batch
from clozecheck.data.dataset import iter_batches
from clozecheck.models.backbone import OcrModel
from clozecheck.models.fusion import MacModel
from clozecheck.models.fusion import predict_from_scores
from clozecheck.nn.tensor import no_grad


T = TypeVar("T")


def map_batches(
    samples: Sequence[Sample],
    cfg: RunConfig,
    vocab: Vocabulary,
    fn: Callable[[Batch], list[T]],
) -> list[T]:
    """Apply ``fn`` to consecutive batches and concatenate the results in order."""
    batches = list(
        iter_batches(
            samples, cfg.train.batch_size, vocab, cfg.geometry, cfg.model.max_answer_len
        )
    )

    def run(batch: Batch) -> list[T]:
        with no_grad():
            return fn(batch)

    workers = cfg.train.eval_workers
    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, batches))
    else:
        results = [run(b) for b in batches]
    return [item for chunk in results for item in chunk]


def decode_samples(
    model: OcrModel, samples: Sequence[Sample], cfg: RunConfig, vocab: Vocabulary
) -> list[str]:
    """Greedy transcription of every sample image."""
    model.eval()
    return map_batches(samples, cfg, vocab, lambda b: model.decode(b.images, b.valid_blocks))


def predict_samples(
    model: MacModel, samples: Sequence[Sample], cfg: RunConfig, vocab: Vocabulary
) -> list[LabelSeq]:
    """Predicted label sequence of every sample, trimmed to ``|answer| + 1``."""
    model.eval()

    def predict(batch: Batch) -> list[LabelSeq]:
        scores = model(batch.images, batch.valid_blocks, batch.token_ids, batch.valid_tokens)
        return predict_from_scores(scores, batch.valid_tokens).labels

    return map_batches(samples, cfg, vocab, predict)
