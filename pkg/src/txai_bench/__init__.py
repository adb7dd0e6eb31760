"""Benchmark saliency explanation methods against trojaned classifiers.

The pipeline: train a clean and a backdoored classifier from poisoned data,
run saliency methods on stamped inputs, localize the highlighted region with
an edge detector, and score the detection against the trigger's true
bounding box.
"""

__version__ = "0.1.0"

from .localize import BoundingBox, CannyConfig, canny, detect_box, min_bounding_box
from .metrics import (
    EvalRecord,
    ImageResult,
    computation_cost,
    iou,
    recover,
    recovering_difference,
    recovering_rate,
)
from .saliency import (
    InferenceView,
    MethodConfig,
    SaliencyMap,
    METHOD_IDS,
    explain,
)
from .trojan import (
    MaterializedTrigger,
    PoisonConfig,
    PoisonEntry,
    TriggerSpec,
    TrojanBundle,
    classification_accuracy,
    ground_truth_box,
    materialize,
    misclassification_rate,
    poison_dataset,
    stamp,
    trojan_train,
)

__all__ = [
    "__version__",
    "BoundingBox", "CannyConfig", "canny", "detect_box", "min_bounding_box",
    "EvalRecord", "ImageResult", "iou", "recover", "recovering_rate",
    "recovering_difference", "computation_cost",
    "SaliencyMap", "MethodConfig", "InferenceView", "METHOD_IDS", "explain",
    "TriggerSpec", "MaterializedTrigger", "PoisonConfig", "PoisonEntry",
    "TrojanBundle", "materialize", "stamp", "poison_dataset", "trojan_train",
    "misclassification_rate", "classification_accuracy", "ground_truth_box",
]
