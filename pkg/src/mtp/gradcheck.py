"""End-to-end gradient verification for the full model.

Builds a small random problem in float64, compares the recorded backward
pass against central finite differences (step 1e-4), and reports the worst
relative error per parameter block. An entry passes when the absolute
difference is within the 1e-7 floor or the relative error is below 1e-4.

Float64 is mandatory here: float32 rounding is larger than the tolerance
being verified. Dropout is forced off because a stochastic forward cannot
be differenced. `corrupt_block` deliberately perturbs one analytic block
so the negative path of the checker itself stays tested.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model.config import MtpConfig
from .model.forward import forward_pass
from .model.params import init_params
from .nn.autodiff import backward
from .nn.gradcheck import finite_difference, max_relative_error
from .training.losses import loss_node

SIZE_GUARD = 10_000


@dataclass
class BlockResult:
    block: str
    max_rel_error: float
    ok: bool


@dataclass
class GradCheckReport:
    blocks: list
    ok: bool
    seed: int
    dims: dict

    def worst(self) -> float:
        return max((b.max_rel_error for b in self.blocks), default=0.0)


def check_model_gradients(config: MtpConfig, m: int = 3, n: int = 5, p: int = 2,
                          d_mol: int = 4, d_pro: int = 5, seed: int = 0,
                          step: float = 1e-4, rtol: float = 1e-4,
                          floor: float = 1e-7,
                          corrupt_block: str | None = None) -> GradCheckReport:
    cfg = dataclasses.replace(config.resolved(), dropout_p=0.0)
    if m * n * cfg.d_model > SIZE_GUARD:
        raise ConfigError(
            f"gradcheck size guard: m*n*d_model = {m * n * cfg.d_model} exceeds "
            f"{SIZE_GUARD}; finite differences at this size would take minutes"
        )
    rng = np.random.default_rng(seed)
    params = init_params(cfg, d_mol, d_pro, dtype=np.float64)
    f_mol = rng.standard_normal((m, d_mol))
    f_target = rng.standard_normal((n, d_pro))
    pocket = np.sort(rng.choice(n, size=min(p, n), replace=False))
    label = 1.0 if cfg.task == "classification" else float(rng.standard_normal())

    def run_loss():
        pred, _ = forward_pass(f_mol, f_target, pocket, params, cfg, mode="eval")
        return loss_node(pred, label, cfg.task)

    pn = params.node_view()
    pred, _ = forward_pass(f_mol, f_target, pocket, pn, cfg, mode="eval")
    analytic = backward(loss_node(pred, label, cfg.task), pn.all_nodes())
    if corrupt_block is not None:
        hit = [name for name in analytic if name.startswith(corrupt_block)]
        if not hit:
            raise ConfigError(f"corrupt_block {corrupt_block!r} matches no parameter")
        for name in hit:
            analytic[name] = analytic[name] + 0.5

    numeric = finite_difference(lambda: float(run_loss().value[0, 0]),
                                params.tensors, step=step)

    blocks = []
    ok = True
    for block, names in params.blocks().items():
        worst = max(
            max_relative_error(analytic[name], numeric[name], floor=floor)
            for name in names
        )
        good = worst < rtol
        ok = ok and good
        blocks.append(BlockResult(block, worst, good))
    return GradCheckReport(blocks, ok, seed,
                           {"m": m, "n": n, "p": int(min(p, n)),
                            "d_mol": d_mol, "d_pro": d_pro,
                            "d_model": cfg.d_model, "n_layers": cfg.n_layers})
