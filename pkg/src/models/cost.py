"""Analytic parameter and multiply-accumulate counts."""
from dataclasses import dataclass

import pandas as pd

from src.config.schema import NetworkConfig
from src.models.nbnet import network_layout

MODULE_ORDER = ["encoder", "bottleneck", "upsample", "skip_blocks", "ssa", "fusion", "decoder_blocks", "output"]


def solve_macs(n: int, k: int, c: int, dot_product: bool = False) -> int:
    """Order terms of one SSA projection: Gram, factorisation, V^T X and V A."""
    if dot_product:
        return 2 * n * k * c
    return k ** 3 + 2 * n * k * k + 2 * n * k * c


@dataclass
class CostReport:
    params: int
    macs: int
    height: int
    width: int
    breakdown: pd.DataFrame

    @property
    def gmacs(self) -> float:
        return self.macs / 1e9

    def format(self) -> str:
        lines = [
            f"parameters: {self.params:,} ({self.params / 1e6:.2f}M)",
            f"MACs at {self.height}x{self.width}: {self.gmacs:.2f}G",
            self.breakdown.to_string(index=False),
        ]
        return "\n".join(lines)


def count_params_and_flops(config: NetworkConfig, height: int = 256, width: int = 256) -> CostReport:
    config.check_input_shape(height, width)
    rows = []
    for spec in network_layout(config):
        rows.append({"module": spec.module, "params": spec.param_count, "macs": spec.macs(height, width)})
    if config.ssa.enabled:
        for s in range(config.stages):
            n = (height >> s) * (width >> s)
            macs = solve_macs(n, config.K, config.channels(s), config.ssa.variant == "dot_product")
            rows.append({"module": "ssa", "params": 0, "macs": macs})

    frame = pd.DataFrame(rows, columns=["module", "params", "macs"])
    breakdown = (
        frame.groupby("module", sort=False)[["params", "macs"]].sum()
        .reindex([m for m in MODULE_ORDER if m in set(frame["module"])])
        .reset_index()
    )
    breakdown["share"] = (breakdown["params"] / max(int(breakdown["params"].sum()), 1)).round(4)
    return CostReport(
        params=int(frame["params"].sum()),
        macs=int(frame["macs"].sum()),
        height=height,
        width=width,
        breakdown=breakdown,
    )
