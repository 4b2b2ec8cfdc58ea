"""Rate budgets and Monte Carlo simulation for a shared-fiber pair link."""

from .analysis import (
    BASIS_LABELS,
    CurveFit,
    MeritReport,
    conditional_detection,
    is_secure,
    merit_report,
    normalized_brightness,
    qber,
    visibility,
    visibility_from_curve,
)
from .channel import FiberSpan, FilterElement, PolarizationDrift, SyncChannel
from .detection import (
    FreeRunningDetector,
    GatedDetector,
    SyncReceiver,
    TimeDiscriminator,
)
from .engine import (
    CountsReport,
    EventGuardError,
    RunSettings,
    Scenario,
    ScenarioError,
    SettingCounts,
    SweepResult,
    VisibilityCurve,
    run_budget,
    run_monte_carlo,
    set_parameter,
    sweep,
    visibility_curve,
)
from .scenario_io import (
    bundled_scenario_names,
    load_scenario,
    resolve_scenario,
    scenario_hash,
)
from .source import CompensatorStack, PairState, TwoCrystalSource

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BASIS_LABELS",
    "CompensatorStack",
    "CountsReport",
    "CurveFit",
    "EventGuardError",
    "FiberSpan",
    "FilterElement",
    "FreeRunningDetector",
    "GatedDetector",
    "MeritReport",
    "PairState",
    "PolarizationDrift",
    "RunSettings",
    "Scenario",
    "ScenarioError",
    "SettingCounts",
    "SweepResult",
    "SyncChannel",
    "SyncReceiver",
    "TimeDiscriminator",
    "TwoCrystalSource",
    "VisibilityCurve",
    "bundled_scenario_names",
    "conditional_detection",
    "is_secure",
    "load_scenario",
    "merit_report",
    "normalized_brightness",
    "qber",
    "resolve_scenario",
    "run_budget",
    "run_monte_carlo",
    "scenario_hash",
    "set_parameter",
    "sweep",
    "visibility",
    "visibility_curve",
    "visibility_from_curve",
]
