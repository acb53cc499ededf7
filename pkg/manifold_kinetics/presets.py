# pylint: disable=line-too-long, missing-module-docstring

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Dict

from manifold_kinetics.exceptions import UnknownNameError
from manifold_kinetics.operators import GhConfig, KrigingConfig, LpConfig, NystromConfig, RbfConfig, Scheme, SchemeConfig
from manifold_kinetics.reduced import Formulation


@dataclass(frozen=True)
class Preset:
    """ A lifting/restriction combination together with the reduced formulation it is run with. """
    number: int
    lifting: Scheme
    lifting_config: SchemeConfig
    restriction: Scheme
    restriction_config: SchemeConfig
    formulation: Formulation = Formulation.CHAIN_RULE

    def to_dict(self) -> Dict[str, Any]:
        return {"preset": self.number,
                "lifting": {"scheme": self.lifting.value, "config": asdict(self.lifting_config)},
                "restriction": {"scheme": self.restriction.value, "config": asdict(self.restriction_config)},
                "formulation": self.formulation.value}


def _lp_pair(number: int, restriction_level: int) -> Preset:
    return Preset(number, Scheme.LP, LpConfig(sigma0=0.5, max_level=20, nn=80),
                  Scheme.LP, LpConfig(sigma0=0.5, max_level=restriction_level, nn=80))


PRESETS: Dict[int, Preset] = {
    1: Preset(1, Scheme.RBF, RbfConfig(p=3, nn=50), Scheme.RBF, RbfConfig(p=3, nn=50)),
    2: Preset(2, Scheme.RBF, RbfConfig(p=3, nn=50), Scheme.NYSTROM, NystromConfig()),
    3: _lp_pair(3, 7),
    4: Preset(4, Scheme.LP, LpConfig(sigma0=0.5, max_level=20, nn=None), Scheme.NYSTROM, NystromConfig()),
    5: Preset(5, Scheme.GH, GhConfig(nn=15, err=5e-4), Scheme.NYSTROM, NystromConfig()),
    6: Preset(6, Scheme.KRIGING, KrigingConfig(order=2, theta=1e-3, nn=8), Scheme.NYSTROM, NystromConfig()),
    7: Preset(7, Scheme.GH, GhConfig(nn=10, err=1e-3), Scheme.NYSTROM, NystromConfig()),
    8: Preset(8, Scheme.KRIGING, KrigingConfig(order=2, theta=1e-3, nn=8), Scheme.NYSTROM, NystromConfig(), Formulation.PROJECTION),
    9: Preset(9, Scheme.KRIGING, KrigingConfig(order=2, theta=13.0, nn=None), Scheme.NYSTROM, NystromConfig(), Formulation.PROJECTION),
    10: _lp_pair(10, 3),
    11: _lp_pair(11, 9),
    12: _lp_pair(12, 12),
}


def method_preset(number: int) -> Preset:
    """
    One of the twelve reference lifting/restriction combinations.
    :raises:
        UnknownNameError: The number is not within 1..12.
    """
    if number not in PRESETS:
        raise UnknownNameError("preset", number)
    return PRESETS[number]
