"""Flow-based binary classifier with per-feature explanation scores.

The heavy lifting lives in the compiled extension ``dxann._dxann``; this
package re-exports its public surface.
"""

from dxann._dxann import (
    Dataset,
    ECSMap,
    EpochRecord,
    Model,
    Prediction,
    Sample,
    gen_blob_images,
    gen_two_moons,
    load_dataset,
    load_model,
    preprocess,
    render_heatmap,
    render_overlay,
    save_dataset,
    split,
    train,
)

__all__ = [
    "Dataset",
    "ECSMap",
    "EpochRecord",
    "Model",
    "Prediction",
    "Sample",
    "gen_blob_images",
    "gen_two_moons",
    "load_dataset",
    "load_model",
    "preprocess",
    "render_heatmap",
    "render_overlay",
    "save_dataset",
    "split",
    "train",
]

__version__ = "0.1.0"
