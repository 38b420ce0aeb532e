"""racdet: adapt a frozen object detector to a new domain at inference time.

Box proposals from any upstream detector are classified by matching their
embeddings against a small, updatable memory bank of labeled examples:
context retrieval narrows the bank to similar scenes, instance retrieval
matches each proposal within those scenes, and a fused score combines the
detector's confidence with the match similarity. The package also ships
the seed-selection clustering used to build the bank, the mAP/mAR
evaluation harness, and synthetic domains to exercise it all.
"""

from .core import (
    BBox,
    ClassifiedDetection,
    ClassLabel,
    GroundTruth,
    ImageRecord,
    InstanceRecord,
    Manifest,
    Proposal,
    as_embedding,
    cosine_similarity,
)
from .errors import FormatError, IntegrityError, RacdetError
from .io import read_manifest, read_records, write_manifest, write_records
from .bank import BankBudget, BankSnapshot, MemoryBank
from .seeds import Clustering, KMeansConfig, kmeans, select_seeds
from .rac import (
    ContextMatch,
    InstanceMatch,
    RacParams,
    classify_dataset,
    classify_proposals,
    context_retrieve,
    fuse_score,
    instance_retrieve,
    vote,
)
from .evaluation import (
    ClassCounts,
    EvalConfig,
    EvalReport,
    average_precision,
    evaluate,
    format_report_table,
    iou,
    match_detections,
)

__version__ = "0.1.0"

__all__ = [
    "as_embedding",
    "cosine_similarity",
    "BBox",
    "ClassLabel",
    "Manifest",
    "ImageRecord",
    "InstanceRecord",
    "Proposal",
    "GroundTruth",
    "ClassifiedDetection",
    "RacdetError",
    "FormatError",
    "IntegrityError",
    "read_manifest",
    "write_manifest",
    "read_records",
    "write_records",
    "BankBudget",
    "BankSnapshot",
    "MemoryBank",
    "KMeansConfig",
    "Clustering",
    "kmeans",
    "select_seeds",
    "RacParams",
    "ContextMatch",
    "InstanceMatch",
    "context_retrieve",
    "instance_retrieve",
    "vote",
    "fuse_score",
    "classify_proposals",
    "classify_dataset",
    "EvalConfig",
    "EvalReport",
    "ClassCounts",
    "iou",
    "match_detections",
    "average_precision",
    "evaluate",
    "format_report_table",
]
