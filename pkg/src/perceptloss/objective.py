"""Weighted generator/discriminator objectives as loss bookkeeping.

The adversarial, speaker, style and cycle terms come from the training
system; this module only weighs and sums them together with one perceptual
loss.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .errors import NonFiniteComponent

PERCEPTUAL_LOSSES = ("stoi", "pmos", "pcc")


@dataclass(frozen=True)
class LambdaWeights:
    spk: float = 0.1
    aspk: float = 0.5
    sty: float = 1.0
    cyc: float = 1.0
    stoi: float = 1.0
    mse: float = 0.1
    mos: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"lambda {f.name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class GeneratorComponents:
    l_adv: float
    l_aspk: float
    l_sty: float
    l_cyc: float
    l_p: float


@dataclass(frozen=True)
class DiscriminatorComponents:
    l_adv: float
    l_spk: float
    l_p: float


@dataclass(frozen=True)
class Term:
    raw: float
    weight: float
    weighted: float


@dataclass(frozen=True)
class LossBreakdown:
    components: dict  # name -> Term, in summation order
    total: float

    def recompute_total(self) -> float:
        total = 0.0
        for term in self.components.values():
            total += term.weighted
        return total


def _breakdown(terms) -> LossBreakdown:
    components = {}
    total = 0.0
    for name, raw, weight in terms:
        if not math.isfinite(raw):
            raise NonFiniteComponent(f"{name} = {raw}")
        t = Term(raw, weight, weight * raw)
        components[name] = t
        total += t.weighted
    return LossBreakdown(components, total)


def generator_objective(c: GeneratorComponents, w: LambdaWeights = LambdaWeights()) -> LossBreakdown:
    """``l_adv + aspk*l_aspk + sty*l_sty + cyc*l_cyc + p*l_p``."""
    return _breakdown([
        ("adv", c.l_adv, 1.0),
        ("aspk", c.l_aspk, w.aspk),
        ("sty", c.l_sty, w.sty),
        ("cyc", c.l_cyc, w.cyc),
        ("p", c.l_p, w.p),
    ])


def discriminator_objective(c: DiscriminatorComponents, w: LambdaWeights = LambdaWeights()) -> LossBreakdown:
    """``-l_adv + spk*l_spk + p*l_p``; the perceptual term is kept as written in the objective."""
    return _breakdown([
        ("adv", c.l_adv, -1.0),
        ("spk", c.l_spk, w.spk),
        ("p", c.l_p, w.p),
    ])


def perceptual_term(kind: str, *, stoi_loss: float | None = None, mos_loss: float | None = None,
                    pcc_loss: float | None = None) -> float:
    """Pick the single perceptual loss that feeds ``l_p``."""
    values = {"stoi": stoi_loss, "pmos": mos_loss, "pcc": pcc_loss}
    if kind not in values:
        raise ValueError(f"perceptual loss must be one of {PERCEPTUAL_LOSSES}, got {kind!r}")
    if values[kind] is None:
        raise ValueError(f"no value supplied for the {kind} loss")
    return values[kind]
