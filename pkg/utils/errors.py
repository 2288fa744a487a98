# Exceptions raised by the simulator, trainer and evaluation harness.
# Everything derives from ValueError so callers that only care about "bad input" can catch that.


class SimulationError(ValueError):
    pass


# Heading is undefined for a zero velocity vector
class ZeroSpeedError(SimulationError):
    pass


# Coincident vehicle/target positions or an impossible initial geometry
class GeometryError(SimulationError):
    pass


# cos(gamma) too small for the spherical velocity formulation
class SingularityError(SimulationError):
    pass


# Non-finite state derivative inside the integrator
class IntegrationError(SimulationError):
    pass


class EpisodeFailure(SimulationError):
    pass


class ConfigError(ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(f"{where}{message}")


class CheckpointError(ValueError):
    pass
