"""Analysis report: a JSON-serializable summary of one pipeline run."""
import json
import platform
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .core import mueller_to_json


def _mat(m):
    return [[float(x) for x in row] for row in np.asarray(m)]


@dataclass
class AnalysisReport:
    mueller: dict
    decomposition: dict
    retardance: dict
    birefringence: dict
    provenance: dict = field(default_factory=dict)

    @classmethod
    def from_analysis(cls, analysis, config=None, seed=None):
        est, dec, ret = analysis.estimate, analysis.decomposition, analysis.retardance
        bire = {}
        for b in (analysis.circular, analysis.linear):
            bire[b.kind] = {
                "delta_n": b.delta_n,
                "sigma": b.sigma,
                "cycles_k": b.cycles_k,
                "delta_wrapped": b.delta_wrapped,
                "delta_unwrapped": b.delta_unwrapped,
                "reflected_branch": b.reflected,
                "handedness": b.handedness,
            }
        return cls(
            mueller={
                "m": mueller_to_json(est.m),
                "element_sigma": mueller_to_json(est.element_sigma),
                "condition_number": est.condition_number,
            },
            decomposition={
                "m_diatten": mueller_to_json(dec.m_diatten),
                "m_retard": mueller_to_json(dec.m_retard),
                "m_depol": mueller_to_json(dec.m_depol),
                "diattenuation": dec.diattenuation,
                "depolarization_factor": dec.depolarization_factor,
                "degenerate": dec.degenerate,
            },
            retardance={
                "delta_total_wrapped": ret.delta_total,
                "delta_cb_wrapped": ret.delta_cb,
                "delta_lb_wrapped": ret.delta_lb,
                "fast_axis": ret.fast_axis,
                "delta_cb_unwrapped": analysis.circular.delta_unwrapped,
                "delta_lb_unwrapped": analysis.linear.delta_unwrapped,
            },
            birefringence=bire,
            provenance={
                "config": dict(config or {}),
                "seed": seed,
                "versions": {
                    "fiberpol": __version__,
                    "numpy": np.__version__,
                    "python": platform.python_version(),
                },
            },
        )

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, obj):
        return cls(**obj)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def text_summary(self):
        lines = [f"condition number {self.mueller['condition_number']:.4g}"]
        for kind, b in self.birefringence.items():
            lines.append(f"{kind:>9}: dn = {b['delta_n']:.6g} +/- {b['sigma']:.2g} RIU "
                         f"(k = {b['cycles_k']}, delta = {b['delta_unwrapped']:.6g} rad)")
        return "\n".join(lines)
