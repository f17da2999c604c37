"""IV estimation of farm-income effects on land-use choice with multiple unordered options."""

from landiv.panel import LandUse, PanelObservation, RegulationLevel

__version__ = "0.1.0"

__all__ = ["LandUse", "PanelObservation", "RegulationLevel", "__version__"]
