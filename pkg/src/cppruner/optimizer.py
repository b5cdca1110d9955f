"""Adam optimization and the generic deterministic training loop."""

from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig  # re-exported for convenience

__all__ = ["AdamState", "adam_step", "train", "TrainingDiverged", "TrainConfig"]


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration, loss, param_norm):
        super().__init__(
            f"non-finite loss {loss!r} at iteration {iteration} (parameter norm {param_norm:.6g})"
        )
        self.iteration = iteration
        self.param_norm = param_norm


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(np.zeros(n), np.zeros(n), 0, lr, beta1, beta2, eps)

    @classmethod
    def from_config(cls, n, config):
        return cls.fresh(n, config.lr, config.beta1, config.beta2, config.eps)


def adam_step(theta: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    """One Adam update; mutates theta and state in place and returns theta."""
    if theta.shape != grad.shape or theta.shape != state.m.shape:
        raise ValueError("parameter / gradient / state layout mismatch")
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grad
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    theta -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return theta


def train(objective, theta0: np.ndarray, config: TrainConfig, callback=None):
    """Run config.iterations Adam steps on a flat parameter vector.

    ``objective(theta, iteration) -> (loss, grad)`` must be deterministic
    given the iteration index.  Returns (theta, trace) where trace is a list
    of (iteration, loss) pairs recorded every config.trace_every steps.
    Aborts with TrainingDiverged on a non-finite loss.
    """
    theta = np.array(theta0, dtype=np.float64)
    state = AdamState.from_config(theta.size, config)
    trace = []
    for it in range(config.iterations):
        loss, grad = objective(theta, it)
        if not np.isfinite(loss):
            raise TrainingDiverged(it, loss, float(np.linalg.norm(theta)))
        if config.trace_every > 0 and it % config.trace_every == 0:
            trace.append((it, float(loss)))
            if callback is not None:
                callback(it, float(loss), theta)
        adam_step(theta, grad, state)
    return theta, trace


def write_trace(path, trace, psnrs=None):
    """Emit the loss trace as CSV lines "iter,loss[,psnr]"."""
    with open(path, "w") as fh:
        for i, (it, loss) in enumerate(trace):
            if psnrs is not None:
                fh.write(f"{it},{loss:.10g},{psnrs[i]:.6g}\n")
            else:
                fh.write(f"{it},{loss:.10g}\n")
