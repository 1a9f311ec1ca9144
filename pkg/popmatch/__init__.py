# This file makes the popmatch directory a Python package
from popmatch.errors import BudgetExceededError, FlavorError, InstanceFormatError, PopMatchError
from popmatch.models import Independent, Layers, MarketInstance, MarketModel, Matching, PreferenceList, Robust, Verdict

__version__ = "1.0.0"

__all__ = [
    "BudgetExceededError",
    "FlavorError",
    "Independent",
    "InstanceFormatError",
    "Layers",
    "MarketInstance",
    "MarketModel",
    "Matching",
    "PopMatchError",
    "PreferenceList",
    "Robust",
    "Verdict",
]
