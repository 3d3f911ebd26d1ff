from app.services.experiments.factory import SchemeFactory
from app.services.experiments.runner import build_points, run, run_experiment

__all__ = ["SchemeFactory", "build_points", "run", "run_experiment"]
