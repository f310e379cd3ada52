from app.models.schemas import Decomposition, EslDevice, Exogenous, ScenarioData, TclParams, TimeSeries, VbTheta
from app.models.solver import LinearProgram, LpSolution, LpStatus, Tolerances

__all__ = [
    "Decomposition", "EslDevice", "Exogenous", "ScenarioData", "TclParams", "TimeSeries", "VbTheta",
    "LinearProgram", "LpSolution", "LpStatus", "Tolerances",
]
