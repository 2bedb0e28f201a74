"""Local login targets with known ground truth."""

from .scenarios import (
    STRONG_PASSWORD,
    Scenario,
    ScenarioError,
    get_scenario,
    is_tautology,
    load_scenario,
    scenario_catalog,
)
from .server import ServedEvent, SimulatorHandle, SpawnError, spawn
