import os
import logging

from dotenv import load_dotenv

load_dotenv()

# Logging
_handlers = [logging.StreamHandler()]
if os.getenv("OPS_LOG_FILE"):
    _handlers.append(logging.FileHandler(os.getenv("OPS_LOG_FILE"), encoding='utf-8'))

logging.basicConfig(
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    level=getattr(logging, os.getenv("OPS_LOG_LEVEL", "INFO").upper(), logging.INFO),
    handlers=_handlers,
)
logger = logging.getLogger("ops")

# Constants
TOOL_VERSION = "0.3.0"
NUM_WORKERS = max(1, int(os.getenv("OPS_NUM_WORKERS", "1")))
DEVICE = os.getenv("OPS_DEVICE", "cpu")
IMAGE_SIZE = int(os.getenv("OPS_IMAGE_SIZE", "128"))

AGNOSTIC_CLASS_ID = 1
BACKGROUND_CLASS_ID = 0
MIN_PART_AREA = 16          # generator constraint, asserted at load
POSTAWARE_MIN_AREA = 4
PSEUDO_PART_MIN_AREA = 4

SPLIT_TRAIN = "train_seen"
SPLIT_VAL = "val_unseen"
SPLIT_TEST = "test_unseen"
SPLITS = (SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST)
UNSEEN_SPLITS = (SPLIT_VAL, SPLIT_TEST)

OBJECT_MASK_MODES = ("none", "perfect", "imperfect")

# Run directory layout
RUN_CONFIG = "config.json"
RUN_LOG = "log.jsonl"
RUN_METRICS = "metrics.json"
RUN_MANIFEST = "run_manifest.json"
CKPT_BASE = "ckpt_base"


def ckpt_round_name(k: int) -> str:
    return f"ckpt_round_{k}"


def pseudo_round_name(k: int) -> str:
    return f"pseudo_round_{k}.json"
