"""Smart-lid automation for insect-rearing bins.

Subpackages and modules:
    kinematics  CoreXY belt/Cartesian transforms and step quantization
    planner     coverage paths (raster/spiral/targeted) and drag sizing
    vision      thermal perception pipeline and mixing metrics
    simulator   substrate/gantry simulator for hardware-free closed loops
    controller  scheduling state machine and CSV sensor logging
    telemetry   HTTP+JSON operator service
    cli         command-line entry points
    kernels     pixel kernels (compiled core with pure-Python fallback)
"""

__version__ = "0.1.0"
