"""Central finite-difference verification of analytic gradients.

The output of the checked graph is reduced to a scalar through a fixed
random projection, so one backward pass yields the full analytic gradient
of every input. Finite differences are then taken coordinate by coordinate
(optionally on a seeded random subset of coordinates for large inputs).
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from src.autograd import ops
from src.autograd.tensor import GradTape, Tensor
from src.utils.errors import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass
class GradcheckReport:
    name: str
    tolerance: float
    errors: Dict[str, float] = field(default_factory=dict)
    checked: Dict[str, int] = field(default_factory=dict)
    skipped: Dict[str, int] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def format(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"[{status}] {self.name}: max relative error {self.max_error:.3e} (tolerance {self.tolerance:g})"]
        for key, err in self.errors.items():
            skipped = self.skipped.get(key, 0)
            note = f", {skipped} skipped at a kink" if skipped else ""
            lines.append(f"    {key:<40s} {err:.3e}  ({self.checked[key]} coords{note})")
        return "\n".join(lines)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, scale: float = 0.0) -> float:
    """max|a - n| over the largest gradient magnitude (at least `scale`, 1e-8)."""
    scale = max(scale, float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), 1e-8)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def gradcheck(
    fn: Callable[..., Tensor],
    inputs: Mapping[str, np.ndarray],
    tolerance: float = 1e-4,
    step: float = 1e-5,
    max_coords: Optional[int] = None,
    seed: int = 0,
    name: str = "graph",
    shrink_attempts: int = 3,
) -> GradcheckReport:
    """Compare analytic gradients of `fn(**inputs)` with central differences.

    `fn` receives Tensors keyword by keyword. All inputs must be float64;
    the step for each input is `step` times its scale (max |x|, at least 1).
    When a perturbed evaluation takes a different branch of a piecewise op
    (LeakyReLU, L1) than the unperturbed one, the step is divided by 10 up to
    `shrink_attempts` times; coordinates that still cross are skipped.
    """
    arrays = {}
    for key, value in inputs.items():
        arr = np.asarray(value)
        if arr.dtype != np.float64:
            raise ConfigurationError(f"gradcheck needs float64 inputs, {key} is {arr.dtype}")
        arrays[key] = arr.copy()

    rng = np.random.default_rng(seed)
    sample = fn(**{k: Tensor(v) for k, v in arrays.items()})
    weights = rng.standard_normal(sample.shape)

    def evaluate(values: Mapping[str, np.ndarray]) -> Tuple[float, np.ndarray]:
        with GradTape() as tape:
            out = fn(**{k: Tensor(v, requires_grad=True) for k, v in values.items()})
        return float(np.sum(out.data * weights)), tape.kink_pattern()

    leaves = {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}
    with GradTape() as tape:
        out = fn(**leaves)
        loss = ops.sum_all(ops.multiply(out, Tensor(weights)))
    base_pattern = tape.kink_pattern()
    analytic = dict(zip(leaves, tape.gradient(loss, list(leaves.values()))))

    report = GradcheckReport(name=name, tolerance=tolerance)
    for key, base in arrays.items():
        h0 = step * max(1.0, float(np.max(np.abs(base))) if base.size else 1.0)
        flat = base.reshape(-1)
        coords: List[int] = list(range(flat.size))
        if max_coords is not None and flat.size > max_coords:
            coords = sorted(rng.choice(flat.size, size=max_coords, replace=False).tolist())
        compared: List[int] = []
        numeric: List[float] = []
        values = dict(arrays)
        for idx in coords:
            original = flat[idx]
            perturbed = flat.copy()
            h = h0
            for _ in range(shrink_attempts + 1):
                perturbed[idx] = original + h
                values[key] = perturbed.reshape(base.shape)
                f_plus, pattern_plus = evaluate(values)
                perturbed[idx] = original - h
                values[key] = perturbed.reshape(base.shape)
                f_minus, pattern_minus = evaluate(values)
                if np.array_equal(pattern_plus, base_pattern) and np.array_equal(pattern_minus, base_pattern):
                    compared.append(idx)
                    numeric.append((f_plus - f_minus) / (2 * h))
                    break
                h /= 10.0
            else:
                report.skipped[key] = report.skipped.get(key, 0) + 1
        a = analytic[key].reshape(-1)
        full_scale = float(np.max(np.abs(a))) if a.size else 0.0
        report.errors[key] = relative_error(a[compared], np.asarray(numeric), full_scale) if compared else 0.0
        report.checked[key] = len(compared)
        report.skipped.setdefault(key, 0)

    if any(report.skipped.values()):
        logger.info("gradcheck %s: skipped %s coordinates sitting on a kink", name, report.skipped)
    logger.debug("gradcheck %s: max relative error %.3e", name, report.max_error)
    return report
