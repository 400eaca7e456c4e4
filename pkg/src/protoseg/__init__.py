"""Training-free semantic segmentation on dense feature/attention dumps.

The package consumes per-layer feature tensors and per-class attention
logit maps produced by an external extractor, fuses them to a common
resolution, and labels pixels either by cosine similarity to
attention-weighted class prototypes (open-vocabulary mode) or by spectral
clustering of the pixel affinity graph (unsupervised mode). A confusion
matrix / mIoU / Hungarian-matching evaluation stack and a synthetic
fixture generator round out the toolkit.
"""

from .tensor_store import (
    read_tensor,
    write_tensor,
    load_manifest,
    load_vocabulary,
    Manifest,
    ManifestEntry,
    ClassVocabulary,
)
from .fusion import (
    resize_bilinear,
    resize_nearest,
    fuse_features,
    fuse_attention,
    LayerFeatureSet,
    FusedFeatureMap,
    AttentionLogitSet,
)
from .assign import (
    representatives_from_attention,
    representatives_from_labels,
    assign_labels,
    segment_image,
    RepresentativeSet,
    SegmentationMap,
)
from .unsup import (
    similarity_graph,
    spectral_cluster,
    unsup_segment,
    SimilarityGraph,
    ClusterMap,
)
from .kmeans import kmeans_cluster
from .evaluate import (
    ConfusionMatrix,
    AssignmentResult,
    accumulate,
    miou,
    hungarian,
    unsupervised_miou,
)
from .synth import generate, PlantedScene

__version__ = "0.1.0"

__all__ = [
    "read_tensor",
    "write_tensor",
    "load_manifest",
    "load_vocabulary",
    "Manifest",
    "ManifestEntry",
    "ClassVocabulary",
    "resize_bilinear",
    "resize_nearest",
    "fuse_features",
    "fuse_attention",
    "LayerFeatureSet",
    "FusedFeatureMap",
    "AttentionLogitSet",
    "representatives_from_attention",
    "representatives_from_labels",
    "assign_labels",
    "segment_image",
    "RepresentativeSet",
    "SegmentationMap",
    "similarity_graph",
    "spectral_cluster",
    "unsup_segment",
    "SimilarityGraph",
    "ClusterMap",
    "kmeans_cluster",
    "ConfusionMatrix",
    "AssignmentResult",
    "accumulate",
    "miou",
    "hungarian",
    "unsupervised_miou",
    "generate",
    "PlantedScene",
]
