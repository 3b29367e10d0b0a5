"""Paths to the data files shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

CASE_FILE = "ieee118.case"
SUBSTATION_MAPPING = "substation_mapping.csv"
CATEGORY_MAPPING = "category_mapping.csv"
GEO_GROUPING = "geo_grouping.csv"
OVERLAY_CONFIG = "overlay_config.json"
SCENARIOS = "scenarios.csv"


def default_path(name: str) -> Path:
    return Path(str(resources.files("gridcascade").joinpath("data", name)))
