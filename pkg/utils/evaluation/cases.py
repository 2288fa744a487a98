"""Experiment case labels and the scenario overrides each one applies.

Every case starts from the optimization scenario and changes only the fields
named for it. Constraints never terminate an evaluation episode; they are
monitored instead.
"""

import logging
import re
from dataclasses import dataclass, field, replace

from utils.errors import ConfigError

logger = logging.getLogger(__name__)

CASE_KINDS = ("Optim", "PV", "MV/SV", "Divert", "Evasion", "AF")
DEFAULT_CASES = ("Optim", "PV=15", "PV=20", "MV/SV=10%", "AF=0.5", "Divert=10%", "Evasion=5%")

_LABEL = re.compile(r"^(?P<kind>PV|MV/SV|Divert|Evasion|AF)\s*=\s*(?P<value>[0-9]*\.?[0-9]+)\s*(?P<pct>%?)$")


@dataclass(frozen=True)
class ExperimentCase:
    label: str
    kind: str
    delta: float = 0.0
    overrides: dict = field(default_factory=dict)

    def apply(self, scenario, ground_impact=False):
        changes = dict(self.overrides)
        changes["constraint_mode"] = "MonitorOnly"
        changes["case_label"] = self.label
        if ground_impact:
            changes["termination_mode"] = "GroundImpact"
        return replace(scenario, **changes)


def _invalid(label):
    return ConfigError(f"unknown case label '{label}'; valid labels: {', '.join(CASE_KINDS)} (e.g. {', '.join(DEFAULT_CASES)})")


def parse_case(label):
    label = label.strip()
    if label == "Optim":
        return ExperimentCase(label=label, kind="Optim")
    match = _LABEL.match(label)
    if match is None:
        raise _invalid(label)
    kind = match["kind"]
    value = float(match["value"])
    # AF takes the bias bound itself; the others take a percentage
    if kind == "AF":
        delta = value / 100.0 if match["pct"] else value
        if not 0.0 < delta <= 1.0:
            raise ConfigError(f"case '{label}': failure bias bound must be in (0, 1]")
        overrides = {"failure_bias_range": (-delta, 0.0)}
    else:
        delta = value / 100.0
        if kind == "PV":
            overrides = {"lift_variation": delta, "drag_variation": delta, "sideforce_variation": delta, "density_variation": delta}
        elif kind == "MV/SV":
            if delta >= 1.0:
                raise ConfigError(f"case '{label}': mass/area bias must stay below 100%")
            overrides = {"mass_area_bias": delta}
        elif kind == "Divert":
            overrides = {"divert_fraction": delta}
        else:
            overrides = {"evasion": True, "divert_fraction": delta}
    logger.debug("parse_case() called with label: %s -> %s", label, overrides)
    return ExperimentCase(label=label, kind=kind, delta=delta, overrides=overrides)
