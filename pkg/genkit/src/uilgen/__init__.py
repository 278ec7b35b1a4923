"""Generator kit: parameterized hardware designs emitted as .uil text.

The generators never import the compiler; they produce program text and
JSON workloads, and the test harness drives the uilc CLI on the results.
"""

from .pifo import PifoConfig, gen_pifo
from .systolic import SystolicConfig, gen_systolic
from .workload import workload_matrices, workload_pifo_balanced

__all__ = [
    "PifoConfig",
    "SystolicConfig",
    "gen_pifo",
    "gen_systolic",
    "workload_matrices",
    "workload_pifo_balanced",
]
