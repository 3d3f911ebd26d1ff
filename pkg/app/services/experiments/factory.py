from app.schemas.experiment import ExperimentSpec, SchemeName
from app.services.experiments.base import Scheme
from app.services.experiments.schemes import (
    CommOrientedScheme,
    FixedKScheme,
    MaxEigenmodeScheme,
    ProposedScheme,
    SensingOrientedScheme,
    TimeSwitchingScheme,
)


class SchemeFactory:
    """
    Selects the scheme implementation for a requested scheme name,
    configured from the experiment configuration.
    """

    @staticmethod
    def get_scheme(name: SchemeName, spec: ExperimentSpec) -> Scheme:
        if name not in SchemeFactory.get_all_schemes():
            raise ValueError(f"Unsupported scheme: {name}; choose from {', '.join(SchemeFactory.get_all_schemes())}")
        scheme = SchemeName(name)

        if scheme == SchemeName.SENSING_ORIENTED:
            return SensingOrientedScheme()

        elif scheme == SchemeName.COMM_ORIENTED:
            return CommOrientedScheme(spec.power_grid_dbm)

        elif scheme == SchemeName.MAX_EIGENMODE:
            return MaxEigenmodeScheme()

        elif scheme == SchemeName.PROPOSED:
            return ProposedScheme(spec.symmetry_shortcut)

        elif scheme == SchemeName.TIME_SWITCHING:
            return TimeSwitchingScheme()

        else:
            return FixedKScheme(spec.fixed_k_values, spec.symmetry_shortcut)

    @staticmethod
    def get_all_schemes():
        return [scheme.value for scheme in SchemeName]
