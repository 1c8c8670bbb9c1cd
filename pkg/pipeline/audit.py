"""Access auditing for unlabeled samples: counts every read of their gt_parts."""
import logging
import threading
from collections import Counter

from config import SPLIT_TRAIN

logger = logging.getLogger("ops.pipeline")


class AccessAudit:
    def __init__(self):
        self._lock = threading.Lock()
        self.reads = Counter()

    def record(self, sample_id):
        with self._lock:
            self.reads[sample_id] += 1
        logger.warning(f"gt_parts of unlabeled sample {sample_id} was read")

    @property
    def total(self) -> int:
        return sum(self.reads.values())


class AuditedSample:
    """Read-only proxy around an AnnotatedSample; gt_parts reads are recorded."""

    __slots__ = ("_sample", "_audit")

    def __init__(self, sample, audit: AccessAudit):
        self._sample = sample
        self._audit = audit

    @property
    def gt_parts(self):
        self._audit.record(self._sample.sample_id)
        return self._sample.gt_parts

    def __getattr__(self, name):
        return getattr(self._sample, name)

    def __repr__(self):
        return f"AuditedSample(id={self._sample.sample_id}, split={self._sample.split_tag})"


def audited(samples, audit: AccessAudit) -> list:
    """Wrap every non-train_seen sample; labeled samples pass through unchanged."""
    return [s if s.split_tag == SPLIT_TRAIN else AuditedSample(s, audit) for s in samples]
