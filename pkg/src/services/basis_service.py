"""Export of the basis maps an SSA layer generates for a given input."""
import logging
from pathlib import Path
from typing import List, Union

import numpy as np

from src.db.tensor_store import TensorStore
from src.models.nbnet import TrainState, capture_basis
from src.utils.errors import ConfigurationError
from src.utils.image_io import write_image

logger = logging.getLogger(__name__)


def normalize_map(m: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]; constant maps become zero."""
    lo, hi = float(m.min()), float(m.max())
    if hi == lo:
        return np.zeros_like(m, dtype=np.float64)
    return (m.astype(np.float64) - lo) / (hi - lo)


def export_basis(state: TrainState, noisy, stage: int, out_dir: Union[str, Path]) -> List[Path]:
    """Write the K basis maps of decoder stage `stage` as grayscale PGMs plus `basis.nbt`."""
    if not 0 <= stage < state.config.stages:
        raise ConfigurationError(f"layer must be in [0, {state.config.stages - 1}], got {stage}")
    basis = capture_basis(state, noisy)[f"dec{stage}.ssa"]
    maps = basis.maps()[0]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    paths = [write_image(normalize_map(m)[None], out_dir / f"basis_{k:02d}.pgm") for k, m in enumerate(maps)]
    store = TensorStore(metadata={"kind": "ssa-basis", "stage": stage, "K": basis.K,
                                  "height": basis.height, "width": basis.width})
    store.add("V", np.ascontiguousarray(basis.V.data))
    store.save(out_dir / "basis.nbt")
    paths.append(out_dir / "basis.nbt")
    logger.info("exported %d basis maps of stage %d (%dx%d) to %s", basis.K, stage, basis.height, basis.width, out_dir)
    return paths
