"""Finite-difference gradient suites for the engine, SSA and the full network.

All suites run in float64 with the Gram regulariser set to 0.
"""
import logging
from typing import Callable, Dict, List

import numpy as np

from src.autograd import (
    add,
    batched_gram_solve,
    concat,
    conv2d,
    conv_transpose2d,
    crop2d,
    l1_loss,
    leaky_relu,
    matmul,
    mean,
    multiply,
    permute,
    reshape,
)
from src.autograd.gradcheck import GradcheckReport, gradcheck
from src.config.schema import NetworkConfig, SsaConfig
from src.models.layers import init_params
from src.models.nbnet import build, run_network
from src.models.ssa import basis_specs, ssa_forward
from src.utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

TOLERANCE = 1e-4
SUITES = ("core", "ssa", "nbnet", "all")


def _away_from_zero(rng: np.random.Generator, shape, margin: float = 0.05) -> np.ndarray:
    """Normals pushed at least `margin` away from the kink at 0."""
    x = rng.standard_normal(shape)
    return x + np.sign(x) * margin


def core_suite(seed: int = 0) -> List[GradcheckReport]:
    rng = np.random.default_rng(seed)
    g = rng.standard_normal
    cases: Dict[str, Callable[[], GradcheckReport]] = {
        "conv2d 3x3/1 pad 1": lambda: gradcheck(
            lambda x, w, b: conv2d(x, w, b, stride=1, padding=1),
            {"x": g((2, 2, 6, 6)), "w": g((3, 2, 3, 3)), "b": g(3)}),
        "conv2d 4x4/2 pad 1": lambda: gradcheck(
            lambda x, w, b: conv2d(x, w, b, stride=2, padding=1),
            {"x": g((1, 2, 8, 8)), "w": g((3, 2, 4, 4)), "b": g(3)}),
        "conv_transpose2d 2x2/2": lambda: gradcheck(
            lambda x, w, b: conv_transpose2d(x, w, b, stride=2),
            {"x": g((2, 3, 4, 4)), "w": g((3, 2, 2, 2)), "b": g(2)}),
        "leaky_relu": lambda: gradcheck(
            lambda x: leaky_relu(x, 0.2), {"x": _away_from_zero(rng, (3, 4, 5))}),
        "batched_gram_solve": lambda: gradcheck(
            lambda v, x: batched_gram_solve(v, x, eps=0.0), {"v": g((2, 12, 3)), "x": g((2, 12, 2))}),
        "matmul": lambda: gradcheck(matmul, {"a": g((2, 3, 4)), "b": g((2, 4, 5))}),
        "add/multiply broadcast": lambda: gradcheck(
            lambda a, b: multiply(add(a, b), a), {"a": g((2, 3, 4)), "b": g((1, 3, 1))}),
        "concat/reshape/permute": lambda: gradcheck(
            lambda a, b: permute(reshape(concat([a, b], axis=1), (1, 5, 16)), (0, 2, 1)),
            {"a": g((1, 2, 4, 4)), "b": g((1, 3, 4, 4))}),
        "mean/crop2d": lambda: gradcheck(
            lambda a: mean(crop2d(a, 1, 2, 3, 3), axis=(2, 3)), {"a": g((2, 2, 6, 6))}),
        "l1_loss": lambda: gradcheck(
            lambda p, t: l1_loss(p, t), {"p": _away_from_zero(rng, (2, 3, 4)), "t": np.zeros((2, 3, 4))}),
    }
    reports = []
    for name, make in cases.items():
        report = make()
        report.name = name
        reports.append(report)
    return reports


def ssa_suite(seed: int = 0) -> List[GradcheckReport]:
    reports = []
    for variant in ("projection", "dot_product"):
        config = SsaConfig(K=3, variant=variant, gram_eps=0.0)
        rng = np.random.default_rng(seed)
        params = init_params(basis_specs("", 4, config, scale=1), rng, dtype=np.float64)
        inputs = {"x1": rng.standard_normal((1, 4, 8, 8)), "x2": rng.standard_normal((1, 4, 8, 8)), **params}

        def fn(x1, x2, **p):
            return ssa_forward(x1, x2, p, config, slope=0.2)

        reports.append(gradcheck(fn, inputs, tolerance=TOLERANCE, seed=seed, name=f"ssa_forward ({variant})"))
    return reports


def nbnet_suite(seed: int = 0, max_coords: int = 8) -> List[GradcheckReport]:
    config = NetworkConfig(stages=2, base_channels=8, ssa=SsaConfig(K=4, gram_eps=0.0))
    state = build(config, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 1)
    # Small nonzero biases so no branch sits exactly at a LeakyReLU kink.
    params = {k: (p + 0.01 * rng.standard_normal(p.shape) if k.endswith(".bias") else p) for k, p in state.params.items()}
    inputs = {"x": rng.uniform(0.0, 1.0, (1, 3, 16, 16)), **params}

    def fn(x, **p):
        return run_network(config, p, x)

    return [gradcheck(fn, inputs, tolerance=TOLERANCE, max_coords=max_coords, seed=seed, name="nbnet tiny")]


def run_suite(module: str = "all", seed: int = 0) -> List[GradcheckReport]:
    if module not in SUITES:
        raise ConfigurationError(f"unknown gradcheck module {module!r}; choose from {SUITES}")
    reports: List[GradcheckReport] = []
    if module in ("core", "all"):
        reports += core_suite(seed)
    if module in ("ssa", "all"):
        reports += ssa_suite(seed)
    if module in ("nbnet", "all"):
        reports += nbnet_suite(seed)
    for r in reports:
        logger.info("gradcheck %s: %.3e (%s)", r.name, r.max_error, "pass" if r.passed else "FAIL")
    return reports
