"""Training configuration shared by the tasks, optimizer and CLI."""

from dataclasses import dataclass, field, fields, replace


@dataclass
class TrainConfig:
    # model
    order: int = 3
    rank: int = 20
    layers: int = 3
    width: int = 256
    fourier_m: int = 10
    b_base: float = 0.5
    activation: str = "sine"
    linear_head: bool = True
    use_bias: bool = True
    head_init_scale: float = 1.0  # shrinks the output layer at init; small values start all components near zero
    # regularization
    p: float = 0.1
    lambda_vsp: float = 1e-4
    lambda_j: float = 0.01
    kappa: float = 1.0
    kappa_units: str = "grid"  # "grid": kappa counts grid cells; "normalized": raw coords
    hutch_samples: int = 1
    hutch_points: int = 256
    epsilon_floor: float = 1e-12
    lambda_s: float = 0.1
    # optimizer
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    iterations: int = 5000
    batch_size: int = 1 << 16
    full_grid_limit: int = 1 << 20
    seed: int = 0
    # sdf task
    eikonal_weight: float = 0.5
    freespace_weight: float = 1.0
    eikonal_batch: int = 512  # points sampled per step for the unit-gradient term (0 = all)
    free_factor: int = 2
    ref_grid: int = 64
    min_upsample_points: int = 1000
    # bookkeeping
    trace_every: int = 50
    trace_path: str = ""

    def replace(self, **kw) -> "TrainConfig":
        return replace(self, **kw)

    def validate(self):
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"p must be in (0, 1], got {self.p}")
        for name in ("rank", "layers", "width", "fourier_m", "iterations",
                     "hutch_samples", "order"):
            if getattr(self, name) < (0 if name == "iterations" else 1):
                raise ValueError(f"{name} must be positive")
        if self.kappa <= 0 or self.lr <= 0:
            raise ValueError("kappa and lr must be positive")
        if min(self.lambda_vsp, self.lambda_j, self.lambda_s) < 0:
            raise ValueError("regularization weights must be nonnegative")
        return self

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]
