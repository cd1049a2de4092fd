class ShapeError(ValueError):
    """Input tensor does not match the shape the network was configured for."""


class CheckpointError(ValueError):
    """Checkpoint is malformed or incompatible with the requested configuration."""


class TrainingDivergedError(RuntimeError):
    def __init__(self, term: str, iteration: int, value: float):
        super().__init__(f"non-finite {term} loss ({value}) at iteration {iteration}")
        self.term = term
        self.iteration = iteration
        self.value = value
