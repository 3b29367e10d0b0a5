"""Climate outage characterization and cascade resilience analysis."""

from .miim import DEGRADED, FAILED, OPERATIONAL, CascadeTrace, cascade, parse_rules
from .outages import EventCategory, OutageRecord, filter_study_window, parse_outage_csv
from .scenarios import Scenario, build_scenario_failures, load_scenarios, scope_to_count
from .stats import ols_fit, run_hypotheses, welch_t_test
from .topology import JointNetwork, build_joint_network, dc_power_flow, parse_case

__version__ = "0.1.0"

__all__ = [
    "CascadeTrace",
    "DEGRADED",
    "EventCategory",
    "FAILED",
    "JointNetwork",
    "OPERATIONAL",
    "OutageRecord",
    "Scenario",
    "build_joint_network",
    "build_scenario_failures",
    "cascade",
    "dc_power_flow",
    "filter_study_window",
    "load_scenarios",
    "ols_fit",
    "parse_case",
    "parse_outage_csv",
    "parse_rules",
    "run_hypotheses",
    "scope_to_count",
    "welch_t_test",
    "__version__",
]
