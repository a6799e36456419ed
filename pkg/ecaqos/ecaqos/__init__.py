"""
ecaqos: slot-level simulation of WLAN medium access with EDCA and CSMA/ECA_QoS.
"""

__version__ = "0.1.0"

from .Scenario import Scenario, parse_scenario, parse_scenario_file
from .Engine import run_simulation
from .Metrics import summarize, emit_results
